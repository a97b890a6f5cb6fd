"""Robust tensor power method with random restarts and gated deflation."""

from dataclasses import dataclass, field
import math

import numpy as np

from .errors import DegenerateTensorError, InputError

ZERO_NORM = 1e-300


def default_num_inits(k):
    return max(10, math.ceil(k * k * math.log(k + 1)))


@dataclass(frozen=True)
class PowerConfig:
    num_inits: int = None
    num_iters: int = 100
    deflation_threshold: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.num_inits is not None and self.num_inits < 1:
            raise InputError("num_inits must be >= 1")
        if self.num_iters < 1:
            raise InputError("num_iters must be >= 1")
        if self.deflation_threshold < 0:
            raise InputError("deflation_threshold must be >= 0")

    def inits_for(self, k):
        return self.num_inits if self.num_inits is not None else default_num_inits(k)

    def to_dict(self):
        return {
            "num_inits": self.num_inits,
            "num_iters": self.num_iters,
            "deflation_threshold": self.deflation_threshold,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(**{key: d[key] for key in ("num_inits", "num_iters", "deflation_threshold", "seed") if key in d})


@dataclass
class EigenPairs:
    """Eigenvalues in nonincreasing order; ``vectors[:, i]`` pairs with ``lambdas[i]``."""

    lambdas: np.ndarray
    vectors: np.ndarray
    # per deflation round: restart scores and the chosen restart index
    selection: list = field(default_factory=list, repr=False)


def tensor_apply(T, u):
    """T(I, u, u): contract modes 2 and 3 with u."""
    return np.einsum("abc,b,c->a", T, u, u)


def tensor_form(T, u):
    """T(u, u, u)."""
    return float(np.einsum("abc,a,b,c->", T, u, u, u))


def _deflation(lams, vecs, thetas, xi):
    """Per-trial deflation coefficients lambda_j <theta, phi_j> gated by |.| > xi."""
    if not lams:
        return None, None
    Phi = np.stack(vecs, axis=1)
    dots = thetas @ Phi  # (trials, found)
    gate = np.abs(dots * np.asarray(lams)) > xi
    return Phi, np.where(gate, dots, 0.0)


def _deflated_apply(T, thetas, lams, vecs, xi):
    out = np.einsum("abc,tb,tc->ta", T, thetas, thetas)
    Phi, dots = _deflation(lams, vecs, thetas, xi)
    if Phi is not None:
        out -= (dots**2 * np.asarray(lams)) @ Phi.T
    return out


def _deflated_form(T, thetas, lams, vecs, xi):
    out = np.einsum("abc,ta,tb,tc->t", T, thetas, thetas, thetas)
    Phi, dots = _deflation(lams, vecs, thetas, xi)
    if Phi is not None:
        out -= (dots**3) @ np.asarray(lams)
    return out


def _iterate(T, thetas, alive, n_iter, lams, vecs, xi):
    for _ in range(n_iter):
        upd = _deflated_apply(T, thetas, lams, vecs, xi)
        norms = np.linalg.norm(upd, axis=1)
        dead = norms < ZERO_NORM
        alive = alive & ~dead
        norms[dead] = 1.0
        thetas = np.where(alive[:, None], upd / norms[:, None], thetas)
    return thetas, alive


def _init_vectors(seed, rnd, n_trials, k):
    # one independent stream per (seed, round, trial): schedule-independent
    out = np.empty((n_trials, k))
    for tau in range(n_trials):
        g = np.random.default_rng([seed, rnd, tau]).standard_normal(k)
        out[tau] = g / np.linalg.norm(g)
    return out


def tensor_eigen(T, cfg=None, n_pairs=None):
    """Top eigenpairs of a (cyclic-)symmetric k x k x k tensor.

    Each round draws ``L`` unit vectors uniformly on the sphere, runs ``N``
    power updates against the tensor deflated by pairs already found (a pair
    is subtracted only while |lambda_j <theta, phi_j>| exceeds the threshold),
    keeps the restart with the largest T~(theta, theta, theta), refines it for
    another ``N`` updates, and records lambda = T~(phi, phi, phi).
    """
    cfg = cfg or PowerConfig()
    T = np.asarray(T, dtype=float)
    if T.ndim != 3 or len(set(T.shape)) != 1 or T.shape[0] < 1:
        raise InputError(f"expected a k x k x k tensor, got shape {T.shape}")
    if not np.all(np.isfinite(T)):
        raise InputError("tensor has non-finite entries")
    k = T.shape[0]
    n_pairs = k if n_pairs is None else n_pairs
    L, N, xi = cfg.inits_for(k), cfg.num_iters, cfg.deflation_threshold
    lams, vecs, selection = [], [], []
    for rnd in range(n_pairs):
        thetas = _init_vectors(cfg.seed, rnd, L, k)
        thetas, alive = _iterate(T, thetas, np.ones(L, bool), N, lams, vecs, xi)
        if not alive.any():
            raise DegenerateTensorError(f"all {L} restarts collapsed in round {rnd}")
        scores = _deflated_form(T, thetas, lams, vecs, xi)
        scores = np.where(alive, scores, -np.inf)
        best = int(np.argmax(scores))
        theta, ok = _iterate(T, thetas[best : best + 1], np.ones(1, bool), N, lams, vecs, xi)
        if not ok[0]:
            raise DegenerateTensorError(f"refinement collapsed in round {rnd}")
        lam = float(_deflated_form(T, theta, lams, vecs, xi)[0])
        phi = theta[0]
        if lam < 0:
            phi, lam = -phi, -lam
        lams.append(lam)
        vecs.append(phi)
        selection.append({"scores": scores, "best": best})
    order = np.argsort(-np.asarray(lams), kind="stable")
    return EigenPairs(
        lambdas=np.asarray(lams)[order],
        vectors=np.stack(vecs, axis=1)[:, order],
        selection=[selection[i] for i in order],
    )


def reconstruct(pairs):
    V, lam = pairs.vectors, pairs.lambdas
    return np.einsum("h,ah,bh,ch->abc", lam, V, V, V)


def residual_norm(T, pairs):
    """Frobenius norm of T - sum_j lambda_j phi_j^{⊗3}."""
    return float(np.linalg.norm(np.asarray(T) - reconstruct(pairs)))
