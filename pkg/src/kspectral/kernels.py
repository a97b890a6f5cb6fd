"""Kernel functions, Gram matrices and pivoted low-rank Gram factorization.

Everything downstream touches feature maps only through this module. Points
are rows of a 2-D array; a 1-D array passed as a *sample* is read as a list of
scalar points.
"""

from dataclasses import dataclass, field
import math

import numpy as np
from scipy.spatial.distance import cdist, pdist

from .errors import InputError, NumericalError

RBF = "rbf"
LAPLACE = "laplace"
DELTA = "delta"
FAMILIES = (RBF, LAPLACE, DELTA)

# relative to trace; used for PSD checks and pivot acceptance
PSD_TOL = 1e-10


@dataclass(frozen=True)
class KernelSpec:
    """Kernel family plus scale.

    ``rbf`` is exp(-s |x - y|^2) and ``laplace`` is exp(-s |x - y|) with
    ``s = bandwidth``; ``delta`` compares symbols and ignores the bandwidth.
    """

    family: str = RBF
    bandwidth: float = 1.0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise InputError(f"unknown kernel family {self.family!r}")
        if self.family != DELTA and not (self.bandwidth > 0 and math.isfinite(self.bandwidth)):
            raise InputError(f"bandwidth must be positive, got {self.bandwidth}")

    def to_dict(self):
        return {"family": self.family, "bandwidth": float(self.bandwidth)}

    @classmethod
    def from_dict(cls, d):
        return cls(family=d["family"], bandwidth=float(d.get("bandwidth", 1.0)))


def as_points(X, family=RBF):
    """Coerce a sample to an (n, d) array; a 1-D input becomes n scalar points."""
    X = np.asarray(X)
    if X.ndim == 0:
        X = X.reshape(1, 1)
    elif X.ndim == 1:
        X = X.reshape(-1, 1)
    elif X.ndim != 2:
        raise InputError(f"sample must be 1-D or 2-D, got shape {X.shape}")
    if family != DELTA:
        X = np.asarray(X, dtype=float)
    return X


def eval_kernel(spec, x, y):
    """Kernel value between two single points."""
    if spec.family == DELTA:
        xa, ya = np.atleast_1d(np.asarray(x)), np.atleast_1d(np.asarray(y))
        if xa.shape != ya.shape:
            raise InputError(f"dimension mismatch: {xa.shape} vs {ya.shape}")
        return float(np.all(xa == ya))
    xa = np.atleast_1d(np.asarray(x, dtype=float))
    ya = np.atleast_1d(np.asarray(y, dtype=float))
    if xa.shape != ya.shape or xa.ndim != 1:
        raise InputError(f"dimension mismatch: {xa.shape} vs {ya.shape}")
    diff = xa - ya
    sq = float(diff @ diff)
    if spec.family == RBF:
        return math.exp(-spec.bandwidth * sq)
    return math.exp(-spec.bandwidth * math.sqrt(sq))


def gram_matrix(spec, X, Y=None):
    """Dense kernel matrix with entries k(X_i, Y_j).

    Each entry depends only on its own pair of points, so the result does not
    depend on how the computation is blocked.
    """
    X = as_points(X, spec.family)
    Y = X if Y is None else as_points(Y, spec.family)
    if len(X) == 0 or len(Y) == 0:
        raise InputError("empty sample")
    if X.shape[1] != Y.shape[1]:
        raise InputError(f"dimension mismatch: {X.shape[1]} vs {Y.shape[1]}")
    if spec.family == DELTA:
        return np.all(X[:, None, :] == Y[None, :, :], axis=-1).astype(float)
    if spec.family == RBF:
        return np.exp(-spec.bandwidth * cdist(X, Y, "sqeuclidean"))
    return np.exp(-spec.bandwidth * cdist(X, Y, "euclidean"))


def kernel_diagonal(spec, X):
    # all supported families satisfy k(x, x) = 1
    return np.ones(len(as_points(X, spec.family)))


def density_normalizer(spec, dim):
    """Constant c with c * integral k(x, y) dy = 1, so <phi(x), mu> is a density.

    The delta kernel already yields probability mass, so its constant is 1.
    """
    if spec.family == DELTA:
        return 1.0
    s = spec.bandwidth
    if spec.family == RBF:
        return (s / math.pi) ** (dim / 2.0)
    # integral of exp(-s r) over R^d is 2 pi^{d/2} Gamma(d) / (Gamma(d/2) s^d)
    return s**dim * math.gamma(dim / 2.0) / (2.0 * math.pi ** (dim / 2.0) * math.gamma(dim))


@dataclass
class LowRankFactor:
    """K ~= factor @ factor.T, exact on the pivot rows and columns."""

    factor: np.ndarray
    pivots: np.ndarray
    residual: float
    residual_history: list = field(default_factory=list)

    @property
    def rank(self):
        return self.factor.shape[1]


def pivoted_cholesky(diag, column, tol, max_rank=None):
    """Greedy pivoted Cholesky driven by a column oracle.

    ``column(j)`` returns column j of the (implicit) PSD matrix. Stops once the
    trace of the residual is at most ``tol`` or ``max_rank`` pivots were taken.
    """
    diag = np.asarray(diag, dtype=float)
    n = len(diag)
    limit = n if max_rank is None else min(n, int(max_rank))
    scale = max(float(diag.sum()), np.finfo(float).tiny)
    d = diag.copy()
    cap = min(limit, 64) if limit else 0
    F = np.zeros((n, cap))
    pivots = []
    history = [float(d.sum())]
    r = 0
    while r < limit:
        if d.min() < -PSD_TOL * scale:
            raise NumericalError(
                f"negative residual diagonal {d.min():.3e}; matrix is not PSD"
            )
        if history[-1] <= tol:
            break
        j = int(np.argmax(d))
        pivot = d[j]
        if pivot <= PSD_TOL * scale * 1e-6:
            break
        if r == cap:
            cap = min(limit, 2 * cap)
            F = np.concatenate([F, np.zeros((n, cap - F.shape[1]))], axis=1)
        col = np.asarray(column(j), dtype=float) - F[:, :r] @ F[j, :r]
        col /= math.sqrt(pivot)
        col[pivots] = 0.0
        col[j] = math.sqrt(pivot)
        F[:, r] = col
        d -= col**2
        d[pivots] = 0.0
        d[j] = 0.0
        pivots.append(j)
        r += 1
        history.append(max(float(d.sum()), 0.0))
    return LowRankFactor(
        factor=F[:, :r].copy(),
        pivots=np.asarray(pivots, dtype=int),
        residual=history[-1],
        residual_history=history,
    )


def incomplete_cholesky(spec, X, tol, max_rank=None):
    """Low-rank factor of the Gram matrix of X without materializing it."""
    if not tol > 0:
        raise InputError("tol must be positive")
    X = as_points(X, spec.family)
    if len(X) == 0:
        raise InputError("empty sample")

    def column(j):
        return gram_matrix(spec, X, X[j : j + 1])[:, 0]

    return pivoted_cholesky(kernel_diagonal(spec, X), column, tol, max_rank)


def dense_cholesky(K, tol, max_rank=None):
    """Pivoted Cholesky of an explicit symmetric PSD matrix."""
    K = np.asarray(K, dtype=float)
    return pivoted_cholesky(np.diag(K).copy(), lambda j: K[:, j], tol, max_rank)


def median_heuristic(X, max_points=2000):
    """Bandwidth s = 1 / (2 median^2) from the median pairwise distance.

    Samples larger than ``max_points`` are thinned to an evenly strided subset
    so the pairwise computation stays quadratic in ``max_points``.
    """
    X = as_points(X)
    if len(X) < 2:
        raise InputError("median heuristic needs at least two points")
    if len(X) > max_points:
        X = X[np.linspace(0, len(X) - 1, max_points).astype(int)]
    med = float(np.median(pdist(X)))
    if med <= 0:
        raise InputError("median pairwise distance is zero")
    return 1.0 / (2.0 * med**2)
