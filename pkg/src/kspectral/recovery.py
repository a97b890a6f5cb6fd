"""Un-whitening tensor eigenpairs into mixture weights and conditional embeddings."""

from dataclasses import dataclass, field
import json

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import ComponentDegeneracyError, InputError
from .kernels import KernelSpec, as_points, density_normalizer, gram_matrix
from .spectral import (
    factor_view,
    fit_whitening,
    symmetrize_factors,
    whitened_tensor,
)
from .tensor_power import PowerConfig, residual_norm, tensor_eigen

LAMBDA_FLOOR = 1e-12
FLOOR_WEIGHT = 1e-8
DENSITY_FLOOR = 1e-12
FORMAT_VERSION = 1


@dataclass
class MixtureEstimate:
    """pi_hat plus mu_hat_{X|h} = sum_j coeffs[j, h] phi(centers[j])."""

    weights: np.ndarray
    coeffs: np.ndarray
    centers: np.ndarray
    kernel: KernelSpec
    lambdas: np.ndarray = None
    diagnostics: dict = field(default_factory=dict)

    @property
    def k(self):
        return len(self.weights)

    @property
    def dim(self):
        return self.centers.shape[1]

    def permuted(self, perm):
        perm = np.asarray(perm)
        return MixtureEstimate(
            weights=self.weights[perm],
            coeffs=self.coeffs[:, perm],
            centers=self.centers,
            kernel=self.kernel,
            lambdas=None if self.lambdas is None else self.lambdas[perm],
            diagnostics=dict(self.diagnostics),
        )

    def to_dict(self):
        return {
            "kernel": self.kernel.to_dict(),
            "weights": self.weights.tolist(),
            "coeffs": self.coeffs.tolist(),
            "centers": np.asarray(self.centers).tolist(),
            "lambdas": None if self.lambdas is None else self.lambdas.tolist(),
            "diagnostics": self.diagnostics,
        }

    @classmethod
    def from_dict(cls, d):
        kernel = KernelSpec.from_dict(d["kernel"])
        return cls(
            weights=np.asarray(d["weights"], dtype=float),
            coeffs=np.asarray(d["coeffs"], dtype=float).reshape(-1, len(d["weights"])),
            centers=as_points(np.asarray(d["centers"]), kernel.family),
            kernel=kernel,
            lambdas=None if d.get("lambdas") is None else np.asarray(d["lambdas"], dtype=float),
            diagnostics=d.get("diagnostics", {}),
        )


def recover_parameters(basis, pairs):
    """pi_h = lambda_h^{-2} (normalized); mu_h = lambda_h * Phi B S^{1/2} phi_h.

    The lambda_h factor undoes the diag(pi^{1/2}) carried by the orthogonal
    factor M = W^T C_{X|H} C_HH^{1/2}.
    """
    lam = np.asarray(pairs.lambdas, dtype=float)
    if len(lam) != basis.k:
        raise InputError("eigenpair count does not match the whitening basis")
    bad = np.flatnonzero(lam <= LAMBDA_FLOOR)
    if len(bad):
        raise ComponentDegeneracyError(f"components {bad.tolist()} have vanishing eigenvalue")
    pi = lam**-2.0
    pi = pi / pi.sum()
    bad = np.flatnonzero(pi < FLOOR_WEIGHT)
    if len(bad):
        raise ComponentDegeneracyError(f"components {bad.tolist()} have weight below {FLOOR_WEIGHT}")
    unwhiten = np.sqrt(basis.eigvals)[:, None] * pairs.vectors
    coeffs = (basis.coeffs @ unwhiten) * lam
    return MixtureEstimate(
        weights=pi,
        coeffs=coeffs,
        centers=basis.centers,
        kernel=basis.kernel,
        lambdas=lam.copy(),
        diagnostics={"sigma_k": basis.sigma_k},
    )


def eval_conditional_density(est, h, x):
    """<phi(x), mu_hat_{X|h}> for each point of x; unnormalized and unclipped."""
    if not 0 <= h < est.k:
        raise InputError(f"component {h} out of range for k={est.k}")
    g = gram_matrix(est.kernel, x, est.centers)
    return g @ est.coeffs[:, h]


def conditional_density(est, h, x, clip=False):
    """Density estimate: the embedding inner product scaled to unit kernel mass."""
    p = density_normalizer(est.kernel, est.dim) * eval_conditional_density(est, h, x)
    return np.maximum(p, 0.0) if clip else p


@dataclass
class KernelMixtureModel:
    """Per-view estimates sharing one labelling of the hidden components."""

    views: list
    weights: np.ndarray
    mode: str = "symmetric"
    diagnostics: dict = field(default_factory=dict)

    @property
    def k(self):
        return len(self.weights)

    @property
    def n_views(self):
        return len(self.views)

    def density(self, view, h, x, clip=False):
        return conditional_density(self.views[view], h, x, clip=clip)

    def densities(self, view, x, clip=False):
        """(n, k) matrix of conditional densities for one view."""
        est = self.views[view]
        g = gram_matrix(est.kernel, x, est.centers)
        p = density_normalizer(est.kernel, est.dim) * (g @ est.coeffs)
        return np.maximum(p, 0.0) if clip else p

    def permuted(self, perm):
        return KernelMixtureModel(
            views=[e.permuted(perm) for e in self.views],
            weights=self.weights[np.asarray(perm)],
            mode=self.mode,
            diagnostics=dict(self.diagnostics),
        )

    def to_dict(self):
        return {
            "format": "kspectral.kernel_mixture",
            "version": FORMAT_VERSION,
            "mode": self.mode,
            "weights": self.weights.tolist(),
            "views": [e.to_dict() for e in self.views],
            "diagnostics": self.diagnostics,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            views=[MixtureEstimate.from_dict(v) for v in d["views"]],
            weights=np.asarray(d["weights"], dtype=float),
            mode=d.get("mode", "symmetric"),
            diagnostics=d.get("diagnostics", {}),
        )


def log_scores(model, views, floor=DENSITY_FLOOR):
    """log pi_h + sum_v log max(p_v(x_v | h), floor), shape (n, k)."""
    out = np.log(np.asarray(model.weights, dtype=float))[None, :]
    for v, x in enumerate(views):
        if v >= model.n_views:
            break
        out = out + np.log(np.maximum(model.densities(v, x), floor))
    return out


def map_assign(model, views, floor=DENSITY_FLOOR):
    """MAP component per sample; ties go to the lowest index."""
    return np.argmax(log_scores(model, views, floor), axis=1)


def responsibilities(model, views, floor=DENSITY_FLOOR):
    s = log_scores(model, views, floor)
    s -= s.max(axis=1, keepdims=True)
    r = np.exp(s)
    return r / r.sum(axis=1, keepdims=True)


def align_to(reference, other):
    """Permutation of ``other``'s components best matching ``reference``.

    Both are (n, k) responsibility matrices over the same samples; the match
    maximizes total co-assignment.
    """
    _, cols = linear_sum_assignment(-(reference.T @ other))
    return cols


def _fit_tensor(T, basis, power, seed_offset=0):
    cfg = PowerConfig(
        num_inits=power.num_inits,
        num_iters=power.num_iters,
        deflation_threshold=power.deflation_threshold,
        seed=power.seed + seed_offset,
    )
    pairs = tensor_eigen(T, cfg)
    est = recover_parameters(basis, pairs)
    est.diagnostics["tensor_residual"] = residual_norm(T, pairs)
    return est


def fit_symmetric(data, spec, k, power=None, views=(0, 1, 2), chol_tol=None, max_rank=None):
    """Identical-view pipeline: one embedding per component shared by every view."""
    power = power or PowerConfig()
    kw = {} if max_rank is None else {"max_rank": max_rank}
    basis = fit_whitening(spec, data, k, views=views[:2], tol=chol_tol, **kw)
    T = whitened_tensor(basis, data, views=views)
    est = _fit_tensor(T, basis, power)
    return KernelMixtureModel(
        views=[est] * data.n_views,
        weights=est.weights.copy(),
        mode="symmetric",
        diagnostics=dict(est.diagnostics),
    )


def fit_multiview(data, specs, k, power=None, chol_tol=None, max_rank=None, directions="cross"):
    """Distinct-view pipeline: each view recovered by symmetrizing the other two onto it.

    Per-view component labels are then aligned to view 3's through
    co-assignment of single-view posteriors, and pi_hat is the average of the
    aligned per-view weights.
    """
    if data.n_views != 3:
        raise InputError("the multi-view pipeline needs exactly three views")
    power = power or PowerConfig()
    if isinstance(specs, KernelSpec):
        specs = [specs] * 3
    kw = {} if max_rank is None else {"max_rank": max_rank}
    facs = [factor_view(specs[v], data.views[v], tol=chol_tol, **kw) for v in range(3)]
    w = data.sample_weights()
    ests = [None] * 3
    for target, (a, b) in ((2, (0, 1)), (0, (1, 2)), (1, (2, 0))):
        basis, T, diag = symmetrize_factors(facs[a], facs[b], facs[target], k, w, directions=directions)
        est = _fit_tensor(T, basis, power, seed_offset=target)
        est.diagnostics.update(diag)
        ests[target] = est

    single = []
    for v, est in enumerate(ests):
        solo = KernelMixtureModel(views=[est], weights=est.weights)
        single.append(responsibilities(solo, [data.views[v]]))
    for v in (0, 1):
        perm = align_to(single[2], single[v])
        ests[v] = ests[v].permuted(perm)
    weights = np.mean([e.weights for e in ests], axis=0)
    weights = weights / weights.sum()
    diagnostics = {
        "sigma_k": [e.diagnostics.get("sigma_k") for e in ests],
        "tensor_residual": [e.diagnostics.get("tensor_residual") for e in ests],
    }
    return KernelMixtureModel(views=ests, weights=weights, mode="multiview", diagnostics=diagnostics)


def save_model(model, path, checksum=None):
    d = model.to_dict()
    if checksum is not None:
        d["train_checksum"] = checksum
    with open(path, "w") as fh:
        json.dump(d, fh)


def load_model(path):
    with open(path) as fh:
        d = json.load(fh)
    fmt = d.get("format")
    if fmt == "kspectral.kernel_mixture":
        return KernelMixtureModel.from_dict(d)
    if fmt == "kspectral.gaussian_mixture":
        from .em import GaussianMixtureModel

        return GaussianMixtureModel.from_dict(d)
    raise InputError(f"unrecognized model format {fmt!r}")


MODES = ("multiview", "symmetric")


def fit_kernel_model(data, k, bandwidths, power=None, mode="multiview", family="rbf", **kw):
    """Fit with one bandwidth per view (``symmetric`` uses the first for all views)."""
    if mode not in MODES:
        raise InputError(f"mode must be one of {MODES}")
    if np.isscalar(bandwidths):
        bandwidths = [float(bandwidths)] * data.n_views
    if mode == "symmetric":
        return fit_symmetric(data, KernelSpec(family, bandwidths[0]), k, power, **kw)
    return fit_multiview(data, [KernelSpec(family, b) for b in bandwidths], k, power, **kw)
