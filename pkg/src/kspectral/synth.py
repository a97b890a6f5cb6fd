"""Synthetic multi-view mixtures with Gaussian and shifted-Gamma conditionals."""

from dataclasses import dataclass, field
import json
import math
from importlib import resources

import numpy as np
from scipy import stats

from .data import MultiViewDataset
from .errors import InputError


@dataclass(frozen=True)
class Gaussian:
    mean: float
    var: float

    def __post_init__(self):
        if not self.var > 0:
            raise InputError("Gaussian variance must be positive")

    def pdf(self, x):
        return stats.norm.pdf(x, loc=self.mean, scale=math.sqrt(self.var))

    def sample(self, rng, n):
        return rng.normal(self.mean, math.sqrt(self.var), size=n)

    @property
    def moments(self):
        return self.mean, self.var

    def to_dict(self):
        return {"law": "gaussian", "mean": self.mean, "var": self.var}


@dataclass(frozen=True)
class ShiftedGamma:
    """Gamma(shape, scale) translated to start at ``shift``; shape <= 1 makes it skewed."""

    shape: float
    scale: float
    shift: float = 0.0

    def __post_init__(self):
        if not 0 < self.shape <= 1:
            raise InputError("shifted-Gamma shape must lie in (0, 1]")
        if not self.scale > 0:
            raise InputError("shifted-Gamma scale must be positive")

    def pdf(self, x):
        # exponent in (x - shift) so the density integrates to one
        return stats.gamma.pdf(x, a=self.shape, loc=self.shift, scale=self.scale)

    def sample(self, rng, n):
        return self.shift + rng.gamma(self.shape, self.scale, size=n)

    @property
    def moments(self):
        return self.shift + self.shape * self.scale, self.shape * self.scale**2

    def to_dict(self):
        return {"law": "shifted_gamma", "shape": self.shape, "scale": self.scale, "shift": self.shift}


def law_from_dict(d):
    if d["law"] == "gaussian":
        return Gaussian(float(d["mean"]), float(d["var"]))
    if d["law"] == "shifted_gamma":
        return ShiftedGamma(float(d["shape"]), float(d["scale"]), float(d.get("shift", 0.0)))
    raise InputError(f"unknown law {d['law']!r}")


@dataclass
class SyntheticSpec:
    """k components, each a list of per-view univariate laws."""

    components: list
    mixing: np.ndarray
    m: int = 1000
    seed: int = 0
    symmetric_views: bool = False
    name: str = ""

    def __post_init__(self):
        self.mixing = np.asarray(self.mixing, dtype=float)
        if len(self.components) != len(self.mixing):
            raise InputError("one mixing weight per component required")
        if np.any(self.mixing < 0) or not np.isclose(self.mixing.sum(), 1.0):
            raise InputError("mixing weights must be nonnegative and sum to 1")
        n_views = {len(c) for c in self.components}
        if len(n_views) != 1:
            raise InputError("every component needs the same number of views")
        if self.symmetric_views and any(len(set(c)) != 1 for c in self.components):
            raise InputError("symmetric_views requires identical laws across views")

    @property
    def k(self):
        return len(self.components)

    @property
    def n_views(self):
        return len(self.components[0])

    def to_dict(self):
        return {
            "name": self.name,
            "k": self.k,
            "m": self.m,
            "seed": self.seed,
            "symmetric_views": self.symmetric_views,
            "mixing": self.mixing.tolist(),
            "components": [[law.to_dict() for law in comp] for comp in self.components],
        }

    @classmethod
    def from_dict(cls, d):
        comps = [[law_from_dict(x) for x in comp] for comp in d["components"]]
        mixing = d.get("mixing")
        if mixing is None:
            mixing = default_mixing(len(comps))
        return cls(
            components=comps,
            mixing=mixing,
            m=int(d.get("m", 1000)),
            seed=int(d.get("seed", 0)),
            symmetric_views=bool(d.get("symmetric_views", False)),
            name=d.get("name", ""),
        )


def default_mixing(k):
    """Unbalanced weights 2h / (k (k + 1)) for h = 1..k."""
    if k < 1:
        raise InputError("k must be at least 1")
    h = np.arange(1, k + 1, dtype=float)
    return 2.0 * h / (k * (k + 1))


def fisher_ratio(mu1, mu2, var1, var2):
    if not var1 + var2 > 0:
        raise InputError("variances must not both vanish")
    return (mu1 - mu2) ** 2 / (var1 + var2)


def sample_dataset(spec, m=None, seed=None):
    """Draw labels from the mixing weights, then every view independently given the label."""
    m = spec.m if m is None else m
    seed = spec.seed if seed is None else seed
    rng = np.random.default_rng(seed)
    labels = rng.choice(spec.k, size=m, p=spec.mixing)
    views = []
    for v in range(spec.n_views):
        x = np.empty(m)
        for h in range(spec.k):
            idx = np.flatnonzero(labels == h)
            x[idx] = spec.components[h][v].sample(rng, len(idx))
        views.append(x.reshape(-1, 1))
    return MultiViewDataset(views=views, labels=labels)


def true_density(spec, h, v, x):
    return spec.components[h][v].pdf(np.asarray(x, dtype=float))


# ---------------------------------------------------------------------------
# presets


def load_presets():
    with resources.files("kspectral").joinpath("presets.json").open() as fh:
        return json.load(fh)


def preset_names():
    return sorted(load_presets()["presets"])


def get_preset(name, m=None, seed=None):
    table = load_presets()["presets"]
    if name not in table:
        raise InputError(f"unknown preset {name!r}; choose from {sorted(table)}")
    spec = SyntheticSpec.from_dict(dict(table[name], name=name))
    if m is not None:
        spec.m = m
    if seed is not None:
        spec.seed = seed
    return spec


def min_adjacent_fisher(spec, view):
    """Smallest Fisher ratio between components adjacent in mean order."""
    mom = sorted(c[view].moments for c in spec.components)
    if len(mom) < 2:
        return math.inf
    return min(fisher_ratio(a[0], b[0], a[1], b[1]) for a, b in zip(mom, mom[1:]))


def build_preset(family, k, symmetric=False):
    """Deterministic parameter choice behind the shipped preset file.

    Components are spaced so adjacent pairs keep a Fisher ratio of at least 3
    in every view; variances (or Gamma scales) differ per component and the
    per-view layouts differ unless ``symmetric``.
    """
    spacing = 4.0
    variances = [1.0, 0.5, 0.8, 0.6, 0.9, 0.4, 0.7, 0.55]
    shapes = [0.8, 1.0, 0.7, 0.9]
    comps = []
    for h in range(k):
        per_view = []
        for v in range(3):
            vv = 0 if symmetric else v
            order = h if vv != 1 else k - 1 - h
            center = spacing * order + 1.5 * vv
            var = variances[(h + 2 * vv) % len(variances)]
            use_gamma = family == "gamma" and (h + vv) % 2 == 1
            if use_gamma:
                shape = shapes[(h + vv) % len(shapes)]
                scale = math.sqrt(var / shape)
                # place the mean at the component center
                law = ShiftedGamma(shape, round(scale, 4), round(center - shape * scale, 4))
            else:
                law = Gaussian(center, var)
            per_view.append(law)
        comps.append(per_view)
    spec = SyntheticSpec(components=comps, mixing=default_mixing(k), symmetric_views=symmetric)
    for v in range(3):
        assert min_adjacent_fisher(spec, v) >= 3.0
    return spec
