"""Density-recovery error and clustering quality."""

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import InputError

N_GRID = 200


def uniform_grid(x, n=N_GRID):
    """Uniform points over [min - 2 std, max + 2 std] of a 1-D sample."""
    x = np.asarray(x, dtype=float).ravel()
    lo, hi = x.min() - 2 * x.std(), x.max() + 2 * x.std()
    return np.linspace(lo, hi, n)


def mse_metric(truth, est, weights, grid):
    """Weighted l2 density error, minimized over component relabelings.

    ``truth(h, grid)`` and ``est(h, grid)`` return density values on the grid;
    the result is min over permutations eta of
    sum_h pi_h * sqrt(sum_j (p(x_j | h) - p_hat(x_j | eta(h)))^2).
    Returns (value, eta) with ``eta[h]`` the estimate matched to true h.
    """
    pi = np.asarray(weights, dtype=float)
    k = len(pi)
    P = np.array([np.asarray(truth(h, grid), dtype=float) for h in range(k)])
    Q = np.array([np.asarray(est(g, grid), dtype=float) for g in range(k)])
    if P.shape != Q.shape:
        raise InputError("truth and estimate disagree on grid or component count")
    dist = np.sqrt(((P[:, None, :] - Q[None, :, :]) ** 2).sum(-1))
    cost = pi[:, None] * dist
    rows, cols = linear_sum_assignment(cost)
    return float(cost[rows, cols].sum()), cols


def model_mse(spec, model, data, n_grid=N_GRID, clip=False):
    """Per-view MSE of a fitted model against a synthetic spec, plus their mean."""
    per_view = []
    for v in range(spec.n_views):
        grid = uniform_grid(data.views[v], n_grid)

        def truth(h, g, v=v):
            return spec.components[h][v].pdf(g)

        def est(h, g, v=v):
            return model.density(v, h, g.reshape(-1, 1), clip=clip)

        val, _ = mse_metric(truth, est, spec.mixing, grid)
        per_view.append(val)
    return float(np.mean(per_view)), per_view


def fscore(true_labels, pred_labels, k):
    """Micro-averaged F1 after Hungarian matching of predicted clusters to classes.

    Every sample carries exactly one predicted and one true label, so micro
    precision and recall both equal the matched fraction.
    """
    t = np.asarray(true_labels)
    p = np.asarray(pred_labels)
    if t.shape != p.shape:
        raise InputError("label arrays differ in length")
    if len(t) == 0:
        raise InputError("no labels")
    for arr in (t, p):
        if arr.min() < 0 or arr.max() >= k or np.any(arr != np.round(arr)):
            raise InputError(f"labels must be integers in [0, {k})")
    t, p = t.astype(int), p.astype(int)
    table = np.zeros((k, k), dtype=int)
    np.add.at(table, (t, p), 1)
    rows, cols = linear_sum_assignment(-table)
    tp = table[rows, cols].sum()
    precision = recall = tp / len(t)
    if tp == 0:
        return 0.0
    return float(2 * precision * recall / (precision + recall))
