"""Kernel SVD, whitening, the whitened third-order tensor and view symmetrization.

All infinite-dimensional quantities are carried in the coordinates of a pivoted
Cholesky factor F of a Gram matrix (K ~= F F^T, exact on the pivot block). The
span of the pivot features is the working subspace: a direction with Gram
coordinates betã in that factor has sample-space coefficients
R_P^{-1} betã supported on the pivot points only, which is what lets a fitted
basis be evaluated on new points with r kernel evaluations instead of 2m.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular

from .errors import ConditioningError, InputError, NumericalError, RankDeficiencyError
from .kernels import DELTA, KernelSpec, as_points, dense_cholesky, gram_matrix, incomplete_cholesky

RANK_TOL = 1e-9
PINV_RCOND = 1e-9
CHOL_TOL = 1e-7
MAX_RANK = 600


@dataclass
class StackedPairGrams:
    """Grams of Phi = (x_a^1..x_a^m, x_b^1..x_b^m) and Psi = the block-swapped order."""

    K: np.ndarray
    L: np.ndarray
    m: int
    points: np.ndarray
    kernel: KernelSpec
    weights: np.ndarray = None

    def stacked_weights(self):
        w = np.full(self.m, 1.0 / self.m) if self.weights is None else self.weights
        return np.concatenate([w, w])


@dataclass
class WhiteningBasis:
    """Top-k eigenpairs of the symmetrized pair operator, in sample coordinates.

    ``coeffs[:, i]`` is beta_i restricted to the pivot points ``centers``;
    beta_i is zero on every other training point. ``pivots`` index the
    training sample the basis was fitted on (length ``n_train``).
    """

    eigvals: np.ndarray
    coeffs: np.ndarray
    centers: np.ndarray
    pivots: np.ndarray
    n_train: int
    kernel: KernelSpec
    all_eigvals: np.ndarray = field(default=None, repr=False)

    @property
    def k(self):
        return len(self.eigvals)

    @property
    def sigma_k(self):
        return float(self.eigvals[-1])

    def full_coeffs(self):
        """beta as an (n_train, k) matrix over the whole training sample."""
        B = np.zeros((self.n_train, self.k))
        B[self.pivots] = self.coeffs
        return B


def _factor_solve(F, pivots, vecs):
    """beta_P = R_P^{-1} vecs, where F[pivots] = R_P^T is lower triangular."""
    LP = F[pivots]
    return solve_triangular(LP, vecs, trans="T", lower=True)


def _check_rank(sigmas, k):
    if k < 1:
        raise InputError("k must be at least 1")
    if len(sigmas) == 0 or sigmas[0] <= 0:
        raise RankDeficiencyError(k, 0)
    achievable = int(np.sum(sigmas > RANK_TOL * sigmas[0]))
    if k > achievable:
        raise RankDeficiencyError(k, achievable)


def _basis_from_operator(C, F, pivots, points, kernel, k):
    """Top-k whitening basis of a symmetric operator given in factor coordinates."""
    C = 0.5 * (C + C.T)
    e, V = np.linalg.eigh(C)
    # rank by sigma^2, i.e. by the eigenproblem of C C^T
    order = np.argsort(-(e**2), kind="stable")
    e, V = e[order], V[:, order]
    sig = np.abs(e)
    _check_rank(sig, k)
    bt = V[:, :k]
    coeffs = _factor_solve(F, pivots, bt)
    return WhiteningBasis(
        eigvals=sig[:k].copy(),
        coeffs=coeffs,
        centers=points[pivots],
        pivots=pivots.copy(),
        n_train=F.shape[0],
        kernel=kernel,
        all_eigvals=e,
    )


def _pair_operator(F, m, w):
    """(1/2) sum_i w_i (f1_i f2_i^T + f2_i f1_i^T) with f1 = F[:m], f2 = F[m:]."""
    F1, F2 = F[:m], F[m:]
    C = (F1 * w[:, None]).T @ F2
    return 0.5 * (C + C.T)


def stack_pair_grams(spec, data, views=(0, 1)):
    a, b = views
    if not (0 <= a < data.n_views and 0 <= b < data.n_views) or a == b:
        raise InputError(f"invalid view pair {views} for {data.n_views} views")
    if data.m < 1:
        raise InputError("need at least one sample")
    Xa = as_points(data.views[a], spec.family)
    Xb = as_points(data.views[b], spec.family)
    phi = np.concatenate([Xa, Xb])
    psi = np.concatenate([Xb, Xa])
    return StackedPairGrams(
        K=gram_matrix(spec, phi),
        L=gram_matrix(spec, psi),
        m=data.m,
        points=phi,
        kernel=spec,
        weights=data.weights,
    )


def kernel_svd(grams, k, tol=None, max_rank=None):
    """KernelSVD on explicit stacked Grams.

    K is factored by pivoted Cholesky (K = R^T R on the retained rank); the
    eigenproblem (1/4m^2) R L R^T betã = sigma^2 betã is solved through the
    symmetric r x r operator whose square it is, and beta = R^+ betã.
    """
    K = np.asarray(grams.K, dtype=float)
    n = K.shape[0]
    if n != 2 * grams.m or grams.L.shape != K.shape:
        raise InputError("stacked Grams must both be 2m x 2m")
    if tol is None:
        tol = CHOL_TOL * max(np.trace(K), 1.0)
    fac = dense_cholesky(K, tol, max_rank)
    C = _pair_operator(fac.factor, grams.m, grams.stacked_weights()[: grams.m])
    return _basis_from_operator(C, fac.factor, fac.pivots, grams.points, grams.kernel, k)


def fit_whitening(spec, data, k, views=(0, 1), tol=None, max_rank=MAX_RANK):
    """KernelSVD straight from samples, without materializing the 2m x 2m Gram."""
    a, b = views
    Xa = as_points(data.views[a], spec.family)
    Xb = as_points(data.views[b], spec.family)
    phi = np.concatenate([Xa, Xb])
    if tol is None:
        tol = CHOL_TOL * len(phi)
    fac = incomplete_cholesky(spec, phi, tol, max_rank)
    C = _pair_operator(fac.factor, data.m, data.sample_weights())
    return _basis_from_operator(C, fac.factor, fac.pivots, phi, spec, k)


def project_features(basis, x):
    """Whitened coordinates xi(x) = S^{-1/2} B^T Phi^T phi(x), one row per point."""
    g = gram_matrix(basis.kernel, x, basis.centers)
    return (g @ basis.coeffs) / np.sqrt(basis.eigvals)


def cyclic_sum(A, B, C, w):
    """(1/3) sum_i w_i (a_i⊗b_i⊗c_i + c_i⊗a_i⊗b_i + b_i⊗c_i⊗a_i); rows are samples."""
    Aw = A * w[:, None]
    T = np.einsum("ia,ib,ic->abc", Aw, B, C)
    return (T + T.transpose(1, 2, 0) + T.transpose(2, 0, 1)) / 3.0


def whitened_tensor(basis, data, views=(0, 1, 2)):
    """Empirical third-order embedding pushed through the whitening map."""
    xi = [project_features(basis, data.views[v]) for v in views]
    return cyclic_sum(xi[0], xi[1], xi[2], data.sample_weights())


def population_whitening(C2, k):
    """Whitening basis of an explicit symmetric PSD pair matrix over symbols 0..n-1.

    The delta-kernel feature map of symbol j is e_j, so the explicit eigen-
    vectors double as coefficients over the symbol set.
    """
    C2 = np.asarray(C2, dtype=float)
    if C2.ndim != 2 or C2.shape[0] != C2.shape[1]:
        raise InputError("pair matrix must be square")
    if not np.allclose(C2, C2.T, atol=1e-12):
        raise InputError("pair matrix must be symmetric")
    e, U = np.linalg.eigh(C2)
    order = np.argsort(-e, kind="stable")
    e, U = e[order], U[:, order]
    if e[-1] < -1e-10 * max(abs(e).sum(), 1.0):
        raise NumericalError("pair matrix is not positive semidefinite")
    _check_rank(np.clip(e, 0.0, None), k)
    n = C2.shape[0]
    return WhiteningBasis(
        eigvals=e[:k].copy(),
        coeffs=U[:, :k].copy(),
        centers=np.arange(n).reshape(-1, 1),
        pivots=np.arange(n),
        n_train=n,
        kernel=KernelSpec(DELTA),
        all_eigvals=e,
    )


def whiten_population(C2, C3, k):
    """C3 x1 W^T x2 W^T x3 W^T with W = U_k S_k^{-1/2} from the pair matrix C2."""
    basis = population_whitening(C2, k)
    W = basis.coeffs / np.sqrt(basis.eigvals)
    return np.einsum("ijl,ia,jb,lc->abc", np.asarray(C3, dtype=float), W, W, W)


def discrete_population_moments(weights, tables):
    """Exact pair/triple moments sum_h pi_h p_h^{⊗2}, sum_h pi_h p_h^{⊗3}.

    ``tables`` is n x k with column h the distribution of the symbol given h.
    """
    P = np.asarray(tables, dtype=float)
    pi = np.asarray(weights, dtype=float)
    C2 = (P * pi) @ P.T
    C3 = np.einsum("h,ah,bh,ch->abc", pi, P, P, P)
    return C2, C3


def explicit_pair_operator(F1, F2, w=None):
    """Symmetrized pair operator from explicit feature rows."""
    m = len(F1)
    w = np.full(m, 1.0 / m) if w is None else np.asarray(w)
    C = (F1 * w[:, None]).T @ F2
    return 0.5 * (C + C.T)


def explicit_triple_operator(F1, F2, F3, w=None):
    m = len(F1)
    w = np.full(m, 1.0 / m) if w is None else np.asarray(w)
    return cyclic_sum(F1, F2, F3, w)


# ---------------------------------------------------------------------------
# Symmetrization: reduce distinct per-view conditionals to the symmetric case
# for one target view.


@dataclass
class ViewFactors:
    """Pivoted Cholesky factor of one view's Gram plus the points behind it."""

    factor: np.ndarray
    pivots: np.ndarray
    points: np.ndarray
    kernel: KernelSpec


def factor_view(spec, X, tol=None, max_rank=MAX_RANK):
    X = as_points(X, spec.family)
    if tol is None:
        tol = CHOL_TOL * len(X)
    fac = incomplete_cholesky(spec, X, tol, max_rank)
    return ViewFactors(fac.factor, fac.pivots, X, spec)


def _own_directions(F, w, k):
    """Gram-side image Phi^T u of the top-k eigenvectors u of a view's own covariance."""
    C = (F * w[:, None]).T @ F
    e, V = np.linalg.eigh(0.5 * (C + C.T))
    order = np.argsort(-e, kind="stable")[:k]
    if len(order) < k:
        raise RankDeficiencyError(k, len(order))
    return F @ V[:, order]


def _guarded_pinv(M, what):
    s = np.linalg.svd(M, compute_uv=False)
    if s[0] <= 0 or s[-1] <= PINV_RCOND * s[0]:
        raise ConditioningError(
            f"{what} is singular (condition {s[0] / max(s[-1], 1e-300):.3e}); "
            "views are insufficiently correlated"
        )
    return np.linalg.pinv(M, rcond=PINV_RCOND)


def symmetrize_factors(f1, f2, f3, k, w, directions="cross"):
    """Whitening basis for view 3 and its whitened tensor from three view factors.

    Views 1 and 2 are projected onto k leading directions (K_nk, L_nk): by
    default the top singular pairs of their cross-covariance, or with
    ``directions="own"`` each view's top covariance eigenvectors. With
    H = W K_nk (L_nk^T W K_nk)^{-1} L_nk^T W the reduced pair operator is
    Upsilon H Upsilon^T, and the triple moment gets views 1 and 2 mapped into
    view 3 before whitening. Returns (basis, tensor, diagnostics).
    """
    F1, F2, F3 = f1.factor, f2.factor, f3.factor
    m = F3.shape[0]
    if F1.shape[0] != m or F2.shape[0] != m:
        raise InputError("view factors disagree on sample count")
    w = np.asarray(w, dtype=float)
    if directions == "cross":
        # leading singular pairs of the view-1/view-2 cross-covariance
        U, _, Vt = np.linalg.svd((F1 * w[:, None]).T @ F2)
        if min(U.shape[1], Vt.shape[0]) < k:
            raise RankDeficiencyError(k, min(U.shape[1], Vt.shape[0]))
        Knk, Lnk = F1 @ U[:, :k], F2 @ Vt[:k].T
    elif directions == "own":
        Knk = _own_directions(F1, w, k)
        Lnk = _own_directions(F2, w, k)
    else:
        raise InputError(f"unknown projection directions {directions!r}")
    M12 = (Knk * w[:, None]).T @ Lnk
    M12_inv = _guarded_pinv(M12, "K_nk^T L_nk")
    M21_inv = M12_inv.T

    WF3 = F3 * w[:, None]
    # P3 = F3^T H F3 in view-3 factor coordinates
    P3 = (WF3.T @ Knk) @ M21_inv @ (Lnk.T @ WF3)
    G = P3.T @ P3
    lam2, V = np.linalg.eigh(0.5 * (G + G.T))
    order = np.argsort(-lam2, kind="stable")
    lam2, V = lam2[order], V[:, order]
    top = lam2[: max(k, 1)]
    if np.any(top < -1e-12 * max(lam2[0], 1e-300)):
        raise NumericalError("negative squared eigenvalue in the reduced pair problem")
    sig = np.sqrt(np.clip(lam2, 0.0, None))
    _check_rank(sig, k)
    bt = V[:, :k]
    sk = sig[:k]
    basis = WhiteningBasis(
        eigvals=sk.copy(),
        coeffs=_factor_solve(F3, f3.pivots, bt),
        centers=f3.points[f3.pivots],
        pivots=f3.pivots.copy(),
        n_train=m,
        kernel=f3.kernel,
        all_eigvals=sig,
    )
    # whitened view-3 features, one row per sample
    Y = (F3 @ bt) / np.sqrt(sk)
    Yw = Y * w[:, None]
    A = Knk @ M12_inv.T @ (Lnk.T @ Yw)
    B = Lnk @ M21_inv.T @ (Knk.T @ Yw)
    T = cyclic_sum(A, B, Y, w)
    diag = {"cond_cross": float(np.linalg.cond(M12)), "sigma_k": float(sk[-1])}
    return basis, T, diag


def symmetrize_views(K, L, G, k, weights=None, points3=None, kernel3=None, tol=None, directions="cross"):
    """Symmetrization on explicit per-view Grams of views 1, 2 and 3.

    Returns the whitening basis for view 3 and the whitened tensor whose
    eigenpairs recover mu_{X3|h}. ``points3``/``kernel3`` attach the view-3
    sample so the recovered embeddings can be evaluated on new points.
    """
    m = K.shape[0]
    if L.shape != (m, m) or G.shape != (m, m):
        raise InputError("per-view Grams must share size m x m")
    w = np.full(m, 1.0 / m) if weights is None else np.asarray(weights, dtype=float)
    facs = []
    for M in (K, L, G):
        t = CHOL_TOL * max(np.trace(M), 1.0) if tol is None else tol
        f = dense_cholesky(M, t)
        facs.append(f)
    pts = np.arange(m).reshape(-1, 1) if points3 is None else as_points(points3)
    kern = kernel3 if kernel3 is not None else KernelSpec(DELTA)
    views = [ViewFactors(f.factor, f.pivots, pts, kern) for f in facs]
    basis, T, _ = symmetrize_factors(*views, k, w, directions=directions)
    return basis, T
