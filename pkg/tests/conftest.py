import itertools

import numpy as np
import pytest

from kspectral.data import MultiViewDataset


# 2-state, 3-symbol model shared by the discrete oracles
PI_2 = np.array([1.0 / 3.0, 2.0 / 3.0])
TABLE_2 = np.array([[0.7, 0.1], [0.2, 0.3], [0.1, 0.6]])


def best_match_error(truth, est):
    """Smallest max-abs column error over column permutations of ``est``."""
    k = truth.shape[1]
    return min(np.max(np.abs(truth - est[:, list(p)])) for p in itertools.permutations(range(k)))


def enumerate_model(weights, tables):
    """Weighted enumeration of a discrete multi-view model.

    ``tables[v]`` is n_v x k; every (h, x1, x2, x3) combination becomes one
    sample whose weight is its exact probability, summed over h.
    """
    k = len(weights)
    sizes = [t.shape[0] for t in tables]
    rows, w = [], []
    for combo in itertools.product(*[range(n) for n in sizes]):
        p = sum(weights[h] * np.prod([tables[v][combo[v], h] for v in range(len(tables))]) for h in range(k))
        if p > 0:
            rows.append(combo)
            w.append(p)
    rows = np.array(rows)
    w = np.array(w)
    return MultiViewDataset(views=[rows[:, v : v + 1] for v in range(len(tables))], weights=w / w.sum())


def sample_discrete(weights, tables, m, seed):
    rng = np.random.default_rng(seed)
    h = rng.choice(len(weights), size=m, p=weights)
    views = []
    for t in tables:
        # inverse-CDF draw of each symbol from its component's column
        cdf = np.cumsum(t, axis=0)[:, h]
        u = rng.random(m)
        x = np.minimum((u[None, :] > cdf).sum(axis=0), t.shape[0] - 1)
        views.append(x.reshape(-1, 1))
    return MultiViewDataset(views=views, labels=h)


def one_hot(x, n):
    x = np.asarray(x).ravel().astype(int)
    out = np.zeros((len(x), n))
    out[np.arange(len(x)), x] = 1.0
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_orthogonal(k, rng):
    Q, R = np.linalg.qr(rng.standard_normal((k, k)))
    return Q * np.sign(np.diag(R))


def orthogonal_tensor(lams, V):
    return np.einsum("h,ah,bh,ch->abc", np.asarray(lams, float), V, V, V)


def symmetric_noise(k, eps, rng):
    """Fully symmetric Gaussian tensor scaled to Frobenius norm eps (>= its operator norm)."""
    E = rng.standard_normal((k, k, k))
    E = sum(E.transpose(p) for p in itertools.permutations(range(3))) / 6.0
    return E * (eps / np.linalg.norm(E))


def match_pairs(V_true, V_est):
    """eta[j] = true index matched to estimated column j, by max |<v, v_hat>|."""
    from scipy.optimize import linear_sum_assignment

    rows, cols = linear_sum_assignment(-np.abs(V_true.T @ V_est))
    eta = np.empty(V_est.shape[1], int)
    eta[cols] = rows
    return eta


ACCEPTANCE_LINES = []


@pytest.fixture
def report(capsys):
    """Print one PASS/FAIL line for an acceptance criterion and keep it for the summary."""

    def emit(number, ok, detail):
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {detail}"
        ACCEPTANCE_LINES.append(line)
        with capsys.disabled():
            print("\n" + line)
        return ok

    return emit


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
