import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import PI_2, TABLE_2, best_match_error, enumerate_model, one_hot, sample_discrete
from kspectral.data import MultiViewDataset
from kspectral.errors import ConditioningError, InputError, RankDeficiencyError
from kspectral.kernels import DELTA, RBF, KernelSpec, gram_matrix
from kspectral.recovery import recover_parameters
from kspectral.spectral import (
    cyclic_sum,
    discrete_population_moments,
    explicit_pair_operator,
    explicit_triple_operator,
    fit_whitening,
    kernel_svd,
    population_whitening,
    project_features,
    stack_pair_grams,
    symmetrize_views,
    whiten_population,
    whitened_tensor,
)
from kspectral.tensor_power import PowerConfig, tensor_eigen

DELTA_K = KernelSpec(DELTA)


def discrete_sample(m, seed, tables=None):
    tables = [TABLE_2] * 3 if tables is None else tables
    return sample_discrete(PI_2, tables, m, seed)


def one_hot_whitening(data, k, n):
    """Dense whitening in the explicit one-hot feature space."""
    F1, F2 = one_hot(data.views[0], n), one_hot(data.views[1], n)
    C = explicit_pair_operator(F1, F2)
    e, U = np.linalg.eigh(C)
    order = np.argsort(-np.abs(e))[:k]
    return np.abs(e[order]), U[:, order]


def basis_in_one_hot(basis, n):
    """The fitted whitening map written in one-hot coordinates, n x k."""
    E = one_hot(basis.centers, n)
    return E.T @ basis.coeffs / np.sqrt(basis.eigvals)


def test_stack_single_pair_delta():
    data = MultiViewDataset(views=[np.array([["a"]]), np.array([["a"]])])
    g = stack_pair_grams(DELTA_K, data)
    assert np.array_equal(g.K, [[1, 1], [1, 1]])
    assert np.array_equal(g.L, [[1, 1], [1, 1]])


def test_stack_matches_scalar_oracle():
    data = MultiViewDataset(views=[np.array([[0], [2]]), np.array([[2], [1]])])
    g = stack_pair_grams(DELTA_K, data)
    phi, psi = [0, 2, 2, 1], [2, 1, 0, 2]
    assert np.array_equal(g.K, [[float(a == b) for b in phi] for a in phi])
    assert np.array_equal(g.L, [[float(a == b) for b in psi] for a in psi])


def test_block_swap_identity(rng):
    data = MultiViewDataset(views=[rng.normal(size=(6, 2)), rng.normal(size=(6, 2))])
    g = stack_pair_grams(KernelSpec(RBF, 0.8), data)
    swap = np.r_[np.arange(6, 12), np.arange(6)]
    assert np.array_equal(g.K[np.ix_(swap, swap)], g.L)


def test_stack_rejects_bad_views(rng):
    data = MultiViewDataset(views=[rng.normal(size=(4, 1)), rng.normal(size=(4, 1))])
    with pytest.raises(InputError):
        stack_pair_grams(KernelSpec(RBF), data, views=(0, 2))
    with pytest.raises(InputError):
        stack_pair_grams(KernelSpec(RBF), data, views=(1, 1))


def test_kernel_svd_matches_explicit_singular_values():
    data = discrete_sample(2000, seed=1, tables=[TABLE_2[:2] / TABLE_2[:2].sum(0)] * 3)
    basis = kernel_svd(stack_pair_grams(DELTA_K, data), k=2)
    F1, F2 = one_hot(data.views[0], 2), one_hot(data.views[1], 2)
    C = 0.5 * (F1.T @ F2 + F2.T @ F1) / data.m
    sv = np.linalg.svd(C, compute_uv=False)
    assert np.allclose(basis.eigvals, sv, atol=1e-10, rtol=0)


def test_kernel_svd_orthonormal_in_feature_space(rng):
    data = MultiViewDataset(views=[rng.normal(size=(60, 1)), rng.normal(size=(60, 1))])
    grams = stack_pair_grams(KernelSpec(RBF, 0.5), data)
    basis = kernel_svd(grams, k=3)
    B = basis.full_coeffs()
    assert np.allclose(B.T @ grams.K @ B, np.eye(3), atol=1e-8)
    assert np.all(np.diff(basis.eigvals) <= 0) and basis.eigvals[-1] > 0


def test_kernel_svd_rank_one():
    data = MultiViewDataset(views=[np.zeros((5, 1), int), np.zeros((5, 1), int)])
    grams = stack_pair_grams(DELTA_K, data)
    basis = kernel_svd(grams, k=1)
    assert basis.eigvals[0] == pytest.approx(1.0, abs=1e-12)
    B = basis.full_coeffs()
    assert (B.T @ grams.K @ B)[0, 0] == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(RankDeficiencyError) as err:
        kernel_svd(grams, k=2)
    assert err.value.achievable == 1


def test_whitening_identity_rbf(rng):
    X1 = rng.normal(size=(300, 1))
    data = MultiViewDataset(views=[X1 + 0.3 * rng.normal(size=(300, 1)), X1 + 0.3 * rng.normal(size=(300, 1))])
    basis = fit_whitening(KernelSpec(RBF, 1.0), data, k=4)
    xi1, xi2 = project_features(basis, data.views[0]), project_features(basis, data.views[1])
    P = 0.5 * (xi1.T @ xi2 + xi2.T @ xi1) / data.m
    assert np.allclose(P, np.eye(4), atol=1e-6)


def test_single_sample_projection_closed_form():
    data = MultiViewDataset(views=[np.array([[0.0]]), np.array([[0.5]])])
    spec = KernelSpec(RBF, 1.0)
    basis = kernel_svd(stack_pair_grams(spec, data), k=1)
    c = np.exp(-0.25)
    # top eigenpair of (1/2)(ab^T + ba^T) for unit a, b with <a, b> = c
    assert basis.eigvals[0] == pytest.approx((1.0 + c) / 2.0, abs=1e-12)
    xi1 = project_features(basis, data.views[0])[0, 0]
    xi2 = project_features(basis, data.views[1])[0, 0]
    assert abs(xi1) == pytest.approx(1.0, abs=1e-12)
    assert xi1 * xi2 == pytest.approx(1.0, abs=1e-12)


def test_projection_matches_one_hot_oracle():
    data = discrete_sample(3000, seed=2)
    basis = fit_whitening(DELTA_K, data, k=2)
    sig, U = one_hot_whitening(data, 2, 3)
    assert np.allclose(basis.eigvals, sig, atol=1e-10)
    W = basis_in_one_hot(basis, 3)
    signs = np.sign(np.sum(W * U, axis=0))
    oracle = (one_hot(data.views[0], 3) @ U / np.sqrt(sig)) * signs
    assert np.allclose(project_features(basis, data.views[0]), oracle, atol=1e-8)


def test_whitened_tensor_matches_one_hot_oracle():
    data = discrete_sample(10_000, seed=3)
    basis = fit_whitening(DELTA_K, data, k=2)
    T = whitened_tensor(basis, data)
    sig, U = one_hot_whitening(data, 2, 3)
    W = U / np.sqrt(sig)
    W *= np.sign(np.sum(basis_in_one_hot(basis, 3) * W, axis=0))
    F = [one_hot(v, 3) for v in data.views]
    C3 = explicit_triple_operator(*F)
    oracle = np.einsum("ijl,ia,jb,lc->abc", C3, W, W, W)
    assert np.allclose(T, oracle, atol=1e-8)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**31), m=st.integers(1, 40), k=st.integers(1, 4))
def test_cyclic_sum_is_cyclic(seed, m, k):
    rng = np.random.default_rng(seed)
    A, B, C = rng.normal(size=(3, m, k))
    T = cyclic_sum(A, B, C, rng.dirichlet(np.ones(m)))
    assert np.allclose(T, T.transpose(1, 2, 0), atol=1e-10)
    assert np.allclose(T, T.transpose(2, 0, 1), atol=1e-10)


def test_cyclic_sum_brute_force(rng):
    A, B, C = rng.normal(size=(3, 5, 2))
    w = np.full(5, 0.2)
    T = cyclic_sum(A, B, C, w)
    oracle = np.zeros((2, 2, 2))
    for i in range(5):
        for a in range(2):
            for b in range(2):
                for c in range(2):
                    oracle[a, b, c] += w[i] * (A[i, a] * B[i, b] * C[i, c] + C[i, a] * A[i, b] * B[i, c]
                                               + B[i, a] * C[i, b] * A[i, c]) / 3
    assert np.allclose(T, oracle, atol=1e-14)


def test_identity_whitening_keeps_diagonal_tensor():
    C3 = np.zeros((3, 3, 3))
    for i, d in enumerate([3.0, 2.0, 1.0]):
        C3[i, i, i] = d
    T = whiten_population(np.eye(3), C3, 3)
    assert np.allclose(np.abs(T), np.abs(C3), atol=1e-14)
    assert np.allclose(np.abs(np.einsum("iii->i", T)), [3, 2, 1])


@pytest.mark.parametrize("pi", [(1 / 3, 2 / 3), (0.5, 0.5)])
def test_population_eigenvalues_orthogonal_mus(pi):
    pi = np.array(pi)
    mus = np.eye(3)[:, :2]
    C2, C3 = discrete_population_moments(pi, mus)
    T = whiten_population(C2, C3, 2)
    pairs = tensor_eigen(T, PowerConfig(seed=0))
    assert np.allclose(np.sort(pairs.lambdas), np.sort(pi**-0.5), atol=1e-10)


def test_population_tensor_is_orthogonal_decomposition():
    C2, C3 = discrete_population_moments(PI_2, TABLE_2)
    basis = population_whitening(C2, 2)
    W = basis.coeffs / np.sqrt(basis.eigvals)
    T = whiten_population(C2, C3, 2)
    V = W.T @ TABLE_2 * np.sqrt(PI_2)
    assert np.allclose(V.T @ V, np.eye(2), atol=1e-10)
    oracle = np.einsum("h,ah,bh,ch->abc", PI_2**-0.5, V, V, V)
    assert np.linalg.norm(T - oracle) <= 1e-8


def test_population_whitening_rank_check():
    C2, _ = discrete_population_moments(PI_2, TABLE_2)
    with pytest.raises(RankDeficiencyError):
        population_whitening(C2, 3)


def test_pair_concentration_ratio():
    tables = [TABLE_2] * 3
    C = (TABLE_2 * PI_2) @ TABLE_2.T
    med = {}
    for m in (1000, 4000):
        errs = []
        for seed in range(10):
            d = sample_discrete(PI_2, tables, m, seed)
            errs.append(np.linalg.norm(explicit_pair_operator(one_hot(d.views[0], 3), one_hot(d.views[1], 3)) - C))
        med[m] = np.median(errs)
    assert 0.35 <= med[4000] / med[1000] <= 0.7


# ---------------------------------------------------------------------------
# symmetrization

T1 = np.array([[0.6, 0.1], [0.3, 0.2], [0.1, 0.7]])
T2 = np.array([[0.2, 0.5], [0.8, 0.5]])
T3 = np.array([[0.05, 0.5], [0.15, 0.3], [0.8, 0.2]])


def onehot_grams(data, sizes):
    return [one_hot(v, n) @ one_hot(v, n).T for v, n in zip(data.views, sizes)]


def test_symmetrize_recovers_distinct_view_table():
    data = enumerate_model(PI_2, [T1, T2, T3])
    K, L, G = onehot_grams(data, (3, 2, 3))
    basis, T = symmetrize_views(K, L, G, 2, weights=data.weights, points3=data.views[2])
    est = recover_parameters(basis, tensor_eigen(T, PowerConfig(seed=0)))
    tables = np.stack([np.array([est.coeffs[est.centers[:, 0] == s].sum(0) for s in range(3)])])[0]
    assert best_match_error(T3, tables) <= 1e-6
    assert np.allclose(np.sort(est.weights), np.sort(PI_2), atol=1e-6)


def test_symmetrize_single_component_gives_marginal():
    one = np.ones(1)
    tabs = [T1 @ PI_2[:, None], T2 @ PI_2[:, None], T3 @ PI_2[:, None]]
    data = enumerate_model(one, tabs)
    K, L, G = onehot_grams(data, (3, 2, 3))
    basis, T = symmetrize_views(K, L, G, 1, weights=data.weights, points3=data.views[2])
    est = recover_parameters(basis, tensor_eigen(T, PowerConfig(seed=0)))
    marginal = T3 @ PI_2
    got = np.array([est.coeffs[est.centers[:, 0] == s].sum() for s in range(3)])
    assert np.allclose(got, marginal, atol=1e-8)
    assert est.weights[0] == pytest.approx(1.0)


def test_symmetrize_own_directions_on_population():
    data = enumerate_model(PI_2, [T1, T2, T3])
    K, L, G = onehot_grams(data, (3, 2, 3))
    basis, T = symmetrize_views(K, L, G, 2, weights=data.weights, points3=data.views[2], directions="own")
    est = recover_parameters(basis, tensor_eigen(T, PowerConfig(seed=0)))
    tables = np.array([est.coeffs[est.centers[:, 0] == s].sum(0) for s in range(3)])
    assert best_match_error(T3, tables) <= 1e-6


def test_symmetrize_independent_views_is_ill_conditioned():
    # views 1 and 2 carry no shared component information
    flat = np.array([[0.5, 0.5], [0.5, 0.5]])
    data = enumerate_model(PI_2, [flat, flat, T3])
    K, L, G = onehot_grams(data, (2, 2, 3))
    with pytest.raises((ConditioningError, RankDeficiencyError)):
        symmetrize_views(K, L, G, 2, weights=data.weights)
