"""Factorial experiments over estimators, sample sizes and seeds."""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
import csv
import json
import logging
import math
import os
import time

import numpy as np

from . import cv
from .data import ingest_csv
from .em import em_gmm
from .errors import InputError
from .metrics import N_GRID, fscore, model_mse
from .recovery import fit_kernel_model, map_assign
from .synth import SyntheticSpec, get_preset, sample_dataset
from .tensor_power import PowerConfig

log = logging.getLogger(__name__)

ESTIMATORS = ("kernel_spectral", "em_gmm")
SIG_DIGITS = 6


def round_sig(x, digits=SIG_DIGITS):
    """Round floats (recursively through lists and dicts) to significant digits."""
    if isinstance(x, dict):
        return {k: round_sig(v, digits) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [round_sig(v, digits) for v in x]
    if isinstance(x, (np.integer, bool)):
        return x if isinstance(x, bool) else int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if not math.isfinite(x):
            return None
        return float(f"{x:.{digits}g}")
    if isinstance(x, np.ndarray):
        return round_sig(x.tolist(), digits)
    return x


def fmt(x):
    return f"{x:.{SIG_DIGITS}g}"


@dataclass
class ExperimentConfig:
    """Everything needed to reproduce a benchmark run.

    ``data`` is one of ``{"preset": name}``, ``{"spec": {...}}`` (a synthetic
    spec) or ``{"csv": path, "view_split": [[...], ...]}``. For CSV data each
    sample size draws a seeded subsample of the rows (``None`` keeps them all).
    """

    data: dict
    k: int = None
    estimators: list = field(default_factory=lambda: list(ESTIMATORS))
    sample_sizes: list = field(default_factory=lambda: [1000])
    seeds: list = field(default_factory=lambda: list(range(10)))
    cv_folds: int = 5
    multipliers: list = field(default_factory=lambda: list(cv.DEFAULT_MULTIPLIERS))
    bandwidth_grid: list = None
    kernel: str = "rbf"
    mode: str = "auto"
    power: PowerConfig = field(default_factory=PowerConfig)
    em_restarts: int = None
    n_grid: int = N_GRID
    clip: bool = False
    output: str = "results"

    def __post_init__(self):
        if isinstance(self.power, dict):
            self.power = PowerConfig.from_dict(self.power)
        if not isinstance(self.data, dict) or not {"preset", "spec", "csv"} & set(self.data):
            raise InputError("data must give one of 'preset', 'spec' or 'csv'")
        if self.cv_folds < 2:
            raise InputError("cv_folds must be at least 2")
        if any(m is not None and int(m) < 1 for m in self.sample_sizes):
            raise InputError("sample sizes must be positive")
        unknown = set(self.estimators) - set(ESTIMATORS)
        if unknown:
            raise InputError(f"unknown estimators {sorted(unknown)}")
        if self.mode not in ("auto", "symmetric", "multiview"):
            raise InputError("mode must be auto, symmetric or multiview")
        if self.k is None and "csv" in self.data:
            raise InputError("k is required for CSV data")

    @property
    def synthetic(self):
        return "csv" not in self.data

    def spec(self):
        if "preset" in self.data:
            return get_preset(self.data["preset"])
        if "spec" in self.data:
            return SyntheticSpec.from_dict(self.data["spec"])
        return None

    def n_components(self):
        return self.k if self.k is not None else self.spec().k

    def resolved_mode(self, spec=None):
        if self.mode != "auto":
            return self.mode
        return "symmetric" if spec is not None and spec.symmetric_views else "multiview"

    def restarts(self):
        if self.em_restarts is not None:
            return self.em_restarts
        return 10 if self.synthetic else 20

    def to_dict(self):
        d = asdict(self)
        d["power"] = self.power.to_dict()
        return d

    @classmethod
    def from_dict(cls, d):
        known = set(cls.__dataclass_fields__)
        extra = set(d) - known
        if extra:
            raise InputError(f"unknown config keys {sorted(extra)}")
        return cls(**d)


def load_config(path):
    with open(path) as fh:
        return ExperimentConfig.from_dict(json.load(fh))


@dataclass
class ResultRecord:
    estimator: str
    k: int
    m: int
    seed: int
    status: str = "ok"
    error: str = None
    bandwidths: list = None
    mse: float = None
    mse_per_view: list = None
    fscore: float = None
    loglik: float = None
    weights: list = None
    wall_time_ms: float = None
    diagnostics: dict = field(default_factory=dict)

    METRIC_FIELDS = ("estimator", "k", "m", "seed", "status", "error", "bandwidths",
                     "mse", "mse_per_view", "fscore", "loglik", "weights")

    def to_dict(self):
        return round_sig({f: getattr(self, f) for f in self.__dataclass_fields__})

    @classmethod
    def from_dict(cls, d):
        return cls(**{f: d[f] for f in cls.__dataclass_fields__ if f in d})

    def metrics(self):
        return {f: self.to_dict()[f] for f in self.METRIC_FIELDS}


def cells(cfg):
    return [(est, m, seed) for est in cfg.estimators for m in cfg.sample_sizes for seed in cfg.seeds]


def _load_data(cfg, m, seed, spec, base):
    if spec is not None:
        m = spec.m if m is None else int(m)
        # keyed by (seed, m) only so every estimator sees the same sample
        return sample_dataset(spec, m=m, seed=[int(seed), m])
    if m is None or int(m) >= base.m:
        return base
    idx = np.sort(np.random.default_rng([int(seed), int(m)]).choice(base.m, size=int(m), replace=False))
    return base.subset(idx)


def fit_estimator(cfg, name, data, k, seed, spec=None):
    """Fit one estimator; returns (model, bandwidths or None)."""
    if name == "em_gmm":
        return em_gmm(data.views, k, restarts=cfg.restarts(), seed=seed), None
    mode = cfg.resolved_mode(spec)
    power = PowerConfig(cfg.power.num_inits, cfg.power.num_iters, cfg.power.deflation_threshold,
                        cfg.power.seed + seed)
    if cfg.bandwidth_grid is not None:
        grids = [np.asarray(g, dtype=float) for g in cfg.bandwidth_grid]
        if len(grids) == 1:
            grids = grids * data.n_views
    else:
        grids = cv.default_grids(data, cfg.multipliers, mode=mode)
    if len(grids[0]) == 1:
        bws = [float(g[0]) for g in grids]
    else:
        res = cv.cross_validate_bandwidth(data, k, grids, folds=cfg.cv_folds, power=power,
                                          mode=mode, family=cfg.kernel, seed=seed)
        bws = res.bandwidths
    model = fit_kernel_model(data, k, bws, power, mode=mode, family=cfg.kernel)
    return model, bws


def _diagnostics(model):
    d = getattr(model, "diagnostics", {}) or {}
    keep = {k: d[k] for k in ("sigma_k", "tensor_residual") if k in d}
    if hasattr(model, "loglik"):
        keep["em_loglik"] = model.loglik
    return keep


def run_cell(cfg, cell, spec=None, base=None):
    name, m, seed = cell
    k = cfg.n_components()
    rec = ResultRecord(estimator=name, k=k, m=None if m is None else int(m), seed=int(seed))
    t0 = time.perf_counter()
    try:
        data = _load_data(cfg, m, seed, spec, base)
        rec.m = data.m
        model, bws = fit_estimator(cfg, name, data, k, seed, spec)
        rec.bandwidths = bws
        rec.weights = np.asarray(model.weights).tolist()
        rec.diagnostics = _diagnostics(model)
        # mean per-view log mixture density on the training sample
        rec.loglik = float(np.mean(cv.heldout_scores(model, data.views)))
        if spec is not None:
            rec.mse, rec.mse_per_view = model_mse(spec, model, data, cfg.n_grid, cfg.clip)
        if data.labels is not None:
            rec.fscore = fscore(data.labels, map_assign(model, data.views), k)
    except Exception as exc:  # a failed cell is recorded, the run goes on
        log.warning("cell %s failed: %s", cell, exc)
        rec.status = "error"
        rec.error = f"{type(exc).__name__}: {exc}"
    rec.wall_time_ms = 1000.0 * (time.perf_counter() - t0)
    return rec


def run_experiment(cfg, out_dir=None, threads=1):
    """Run every (estimator, m, seed) cell; records land in cell order.

    With ``out_dir`` the records are appended to ``records.jsonl`` as they
    complete (in order) and ``summary.csv`` is written at the end.
    """
    spec = cfg.spec()
    base = None
    if not cfg.synthetic:
        base = ingest_csv(cfg.data["csv"], cfg.data.get("view_split"))
    todo = cells(cfg)
    fh = None
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        fh = open(os.path.join(out_dir, "records.jsonl"), "w")
    records = []
    try:
        with ThreadPoolExecutor(max_workers=max(1, int(threads))) as pool:
            for rec in pool.map(lambda c: run_cell(cfg, c, spec, base), todo):
                records.append(rec)
                if fh is not None:
                    fh.write(json.dumps(rec.to_dict(), sort_keys=True) + "\n")
                    fh.flush()
    finally:
        if fh is not None:
            fh.close()
    if out_dir is not None:
        write_summary(records, os.path.join(out_dir, "summary.csv"))
        with open(os.path.join(out_dir, "config.json"), "w") as f:
            json.dump(cfg.to_dict(), f, indent=2)
    return records


def read_records(path):
    with open(path) as fh:
        return [ResultRecord.from_dict(json.loads(line)) for line in fh if line.strip()]


def _group(records):
    groups = {}
    for r in records:
        groups.setdefault((r.estimator, r.m), []).append(r)
    return groups


def write_summary(records, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["estimator", "m", "n_ok", "n_error", "median_mse", "mean_mse", "mean_fscore"])
        for (est, m), rs in sorted(_group(records).items(), key=lambda kv: (kv[0][0], kv[0][1] or 0)):
            ok = [r for r in rs if r.status == "ok"]
            mse = [r.mse for r in ok if r.mse is not None]
            fs = [r.fscore for r in ok if r.fscore is not None]
            w.writerow([est, m, len(ok), len(rs) - len(ok),
                        fmt(np.median(mse)) if mse else "",
                        fmt(np.mean(mse)) if mse else "",
                        fmt(np.mean(fs)) if fs else ""])


def plot_table(records):
    """Rows of (m, mean MSE per estimator, mean f-score per estimator)."""
    groups = _group(r for r in records if r.status == "ok")
    ests = sorted({e for e, _ in groups})
    sizes = sorted({m for _, m in groups})
    header = ["m"] + [f"{e}_mse" for e in ests] + [f"{e}_fscore" for e in ests]
    rows = []
    for m in sizes:
        row = [m]
        for key in ("mse", "fscore"):
            for e in ests:
                vals = [getattr(r, key) for r in groups.get((e, m), []) if getattr(r, key) is not None]
                row.append(fmt(np.mean(vals)) if vals else "")
        rows.append(row)
    return header, rows


def write_plot_data(records, path):
    header, rows = plot_table(records)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)
