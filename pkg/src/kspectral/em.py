"""Multi-view Gaussian mixture with diagonal covariances, fitted by EM.

Views are conditionally independent given the component and each coordinate
has its own variance, so the model is a diagonal GMM on the concatenated
coordinates whose per-view density is the product over that view's columns.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .errors import InputError

LOG_2PI = np.log(2.0 * np.pi)


@dataclass
class GaussianMixtureModel:
    weights: np.ndarray
    means: np.ndarray
    variances: np.ndarray
    view_slices: list
    loglik: float = -np.inf
    history: list = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)

    @property
    def k(self):
        return len(self.weights)

    @property
    def n_views(self):
        return len(self.view_slices)

    def _view_params(self, view):
        a, b = self.view_slices[view]
        return self.means[:, a:b], self.variances[:, a:b]

    def log_densities(self, view, x):
        mu, var = self._view_params(view)
        x = np.asarray(x, dtype=float).reshape(len(x), -1)
        return _diag_log_pdf(x, mu, var)

    def densities(self, view, x, clip=False):
        return np.exp(self.log_densities(view, x))

    def density(self, view, h, x, clip=False):
        return self.densities(view, x)[:, h]

    def permuted(self, perm):
        perm = np.asarray(perm)
        return GaussianMixtureModel(
            weights=self.weights[perm],
            means=self.means[perm],
            variances=self.variances[perm],
            view_slices=list(self.view_slices),
            loglik=self.loglik,
            history=list(self.history),
            diagnostics=dict(self.diagnostics),
        )

    def to_dict(self):
        return {
            "format": "kspectral.gaussian_mixture",
            "version": 1,
            "weights": self.weights.tolist(),
            "means": self.means.tolist(),
            "variances": self.variances.tolist(),
            "view_slices": [list(s) for s in self.view_slices],
            "loglik": self.loglik,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            weights=np.asarray(d["weights"], dtype=float),
            means=np.asarray(d["means"], dtype=float),
            variances=np.asarray(d["variances"], dtype=float),
            view_slices=[tuple(s) for s in d["view_slices"]],
            loglik=float(d.get("loglik", -np.inf)),
        )


def _diag_log_pdf(X, mu, var):
    """(n, k) matrix of sum_d log N(x_d; mu_hd, var_hd)."""
    prec = 1.0 / var
    quad = (X**2) @ prec.T - 2.0 * X @ (mu * prec).T + np.sum(mu**2 * prec, axis=1)
    return -0.5 * (quad + np.sum(np.log(var), axis=1) + X.shape[1] * LOG_2PI)


def _kmeanspp(X, k, rng):
    n = len(X)
    centers = [X[rng.integers(n)]]
    d2 = np.sum((X - centers[0]) ** 2, axis=1)
    for _ in range(1, k):
        total = d2.sum()
        idx = rng.integers(n) if total <= 0 else rng.choice(n, p=d2 / total)
        centers.append(X[idx])
        d2 = np.minimum(d2, np.sum((X - X[idx]) ** 2, axis=1))
    return np.array(centers)


def _run(X, k, rng, tol, max_iters, var_floor):
    n, D = X.shape
    means = _kmeanspp(X, k, rng)
    variances = np.tile(np.maximum(X.var(axis=0), var_floor), (k, 1))
    weights = np.full(k, 1.0 / k)
    history, reseeds = [], 0
    for _ in range(max_iters):
        logp = _diag_log_pdf(X, means, variances) + np.log(weights)
        norm = logsumexp(logp, axis=1)
        ll = float(norm.sum())
        if history and ll - history[-1] < tol * n:
            history.append(ll)
            break
        history.append(ll)
        resp = np.exp(logp - norm[:, None])
        nk = resp.sum(axis=0)
        empty = np.flatnonzero(nk < 1e-10 * n)
        for h in empty:
            # re-seed from the point farthest from every live mean
            live = np.delete(means, empty, axis=0)
            d2 = np.min(((X[:, None, :] - live[None]) ** 2).sum(-1), axis=1) if len(live) else np.zeros(n)
            resp[:, h] = 0.0
            resp[int(np.argmax(d2)), h] = 1.0
            reseeds += 1
        nk = resp.sum(axis=0)
        weights = nk / nk.sum()
        means = (resp.T @ X) / nk[:, None]
        diff2 = (X[:, None, :] - means[None]) ** 2
        variances = np.einsum("nk,nkd->kd", resp, diff2) / nk[:, None]
        variances = np.maximum(variances, var_floor)
    logp = _diag_log_pdf(X, means, variances) + np.log(weights)
    final = float(logsumexp(logp, axis=1).sum())
    if history[-1] != final:
        history.append(final)
    return weights, means, variances, final, history, reseeds


def em_gmm(views, k, restarts=10, tol=1e-8, max_iters=500, seed=0):
    """Best-of-``restarts`` EM fit from k-means++ seeds.

    ``tol`` is the per-sample log-likelihood gain below which a run stops.
    Variances are clamped at 1e-8 times the data variance of each coordinate.
    """
    if k < 1:
        raise InputError("k must be at least 1")
    blocks = [np.asarray(v, dtype=float).reshape(len(v), -1) for v in views]
    X = np.hstack(blocks)
    if not np.all(np.isfinite(X)):
        raise InputError("data must be finite")
    slices, start = [], 0
    for b in blocks:
        slices.append((start, start + b.shape[1]))
        start += b.shape[1]
    data_var = X.var(axis=0)
    var_floor = 1e-8 * np.where(data_var > 0, data_var, 1.0)

    best, runs = None, []
    for r in range(restarts):
        rng = np.random.default_rng([seed, r])
        w, mu, var, ll, hist, reseeds = _run(X, k, rng, tol, max_iters, var_floor)
        runs.append({"loglik": ll, "history": hist, "reseeds": reseeds})
        if best is None or ll > best[3]:
            best = (w, mu, var, ll, hist)
    w, mu, var, ll, hist = best
    return GaussianMixtureModel(
        weights=w,
        means=mu,
        variances=var,
        view_slices=slices,
        loglik=ll,
        history=hist,
        diagnostics={"runs": runs},
    )
