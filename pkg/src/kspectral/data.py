"""Multi-view samples and their CSV representation."""

from dataclasses import dataclass
import csv
import hashlib

import numpy as np

from .errors import InputError, ParseError


@dataclass
class MultiViewDataset:
    """m i.i.d. draws of (x1, x2, x3); ``views[v]`` is an (m, d_v) array.

    ``weights`` (summing to one) replaces the uniform 1/m when a population
    model is enumerated as a weighted sample. ``labels`` are 0-based hidden
    component indices when known.
    """

    views: list
    labels: np.ndarray = None
    weights: np.ndarray = None

    def __post_init__(self):
        views = []
        for v in self.views:
            a = np.asarray(v)
            if a.ndim == 1:
                a = a.reshape(-1, 1)
            views.append(a)
        self.views = views
        if not views:
            raise InputError("dataset needs at least one view")
        m = len(views[0])
        if any(len(v) != m for v in views):
            raise InputError("views have different sample counts")
        if self.labels is not None:
            self.labels = np.asarray(self.labels, dtype=int)
            if len(self.labels) != m:
                raise InputError("label count does not match sample count")
        if self.weights is not None:
            w = np.asarray(self.weights, dtype=float)
            if len(w) != m or np.any(w < 0) or not np.isclose(w.sum(), 1.0):
                raise InputError("weights must be nonnegative, length m, sum to 1")
            self.weights = w

    @property
    def m(self):
        return len(self.views[0])

    @property
    def n_views(self):
        return len(self.views)

    def sample_weights(self):
        if self.weights is None:
            return np.full(self.m, 1.0 / self.m)
        return self.weights

    def subset(self, idx):
        idx = np.asarray(idx)
        w = None
        if self.weights is not None:
            w = self.weights[idx]
            w = w / w.sum()
        return MultiViewDataset(
            views=[v[idx] for v in self.views],
            labels=None if self.labels is None else self.labels[idx],
            weights=w,
        )

    def checksum(self):
        h = hashlib.sha256()
        for v in self.views:
            h.update(np.ascontiguousarray(v, dtype=float).tobytes())
        return h.hexdigest()


def column_names(dataset):
    names = []
    for v, arr in enumerate(dataset.views, start=1):
        names += [f"view{v}_{j + 1}" for j in range(arr.shape[1])]
    return names


def write_dataset(dataset, path):
    names = column_names(dataset)
    has_labels = dataset.labels is not None
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(names + (["label"] if has_labels else []))
        data = np.hstack([np.asarray(v, dtype=float) for v in dataset.views])
        for i, row in enumerate(data):
            cells = [repr(float(x)) for x in row]
            if has_labels:
                cells.append(str(int(dataset.labels[i])))
            w.writerow(cells)


def _default_split(header):
    groups = {}
    for j, name in enumerate(header):
        if name.startswith("view") and "_" in name:
            groups.setdefault(name.split("_", 1)[0], []).append(j)
    if not groups:
        raise InputError("no viewN_* columns; pass an explicit view split")
    return [groups[key] for key in sorted(groups, key=lambda s: int(s[4:]))]


def ingest_csv(path, view_split=None):
    """Read a CSV into a dataset.

    ``view_split`` lists 0-based column indices per view (excluding a
    ``label`` column, which is kept for clustering evaluation). Without it,
    columns named ``view<v>_<j>`` are grouped by ``v``.
    """
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise InputError(f"{path}: empty file")
    header = [c.strip() for c in rows[0]]
    body = [(i + 2, r) for i, r in enumerate(rows[1:]) if any(c.strip() for c in r)]
    if not body:
        raise InputError(f"{path}: no data rows")
    label_col = header.index("label") if "label" in header else None
    feature_cols = [j for j in range(len(header)) if j != label_col]

    values = np.empty((len(body), len(header)))
    for r, (line, row) in enumerate(body):
        if len(row) != len(header):
            raise ParseError(f"expected {len(header)} cells, got {len(row)}", line)
        for j, cell in enumerate(row):
            try:
                values[r, j] = float(cell)
            except ValueError:
                raise ParseError(f"non-numeric cell {cell!r} in column {header[j]!r}", line) from None

    if view_split is None:
        view_split = [[feature_cols.index(j) for j in g] for g in _default_split(header)]
    flat = [j for g in view_split for j in g]
    if len(flat) != len(set(flat)):
        raise InputError("view column groups overlap")
    if any(j < 0 or j >= len(feature_cols) for j in flat):
        raise InputError("view column index out of range")
    features = values[:, feature_cols]
    labels = None
    if label_col is not None:
        labels = values[:, label_col]
        if np.any(labels != np.round(labels)):
            raise InputError("label column must hold integers")
    return MultiViewDataset(
        views=[features[:, g] for g in view_split],
        labels=None if labels is None else labels.astype(int),
    )
