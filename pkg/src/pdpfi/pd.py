"""Partial dependence for a fixed model and for a learner over refits."""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field

import numpy as np

from .data import Dataset, IndexView
from .errors import ConstantFeature, TooFewRows, ValidationError
from .inference import IntervalEstimate, interval, mean_interval_arrays
from .refit import fit_plan, split_views
from .resampling import correction_constant

SIMULATION_GRID = (0.1, 0.3, 0.5, 0.7, 0.9)
DEFAULT_G = 20


@dataclass(frozen=True, eq=False)
class PDGrid:
    feature: int
    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64).reshape(-1)
        if pts.size < 1:
            raise ValidationError("grid needs at least one point")
        if not np.all(np.isfinite(pts)):
            raise ValidationError("grid points must be finite")
        if np.any(np.diff(pts) <= 0):
            raise ValidationError("grid points must be strictly increasing")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "feature", int(self.feature))

    def __len__(self):
        return self.points.size


def make_grid(data: Dataset, feature, G: int = DEFAULT_G, kind: str = "equidistant") -> PDGrid:
    """Grid over the observed range of ``feature``.

    ``equidistant`` spans [min, max] (a single point sits at the midpoint);
    ``quantile`` takes empirical quantiles at levels ``(g - 0.5) / G`` and
    drops duplicates.
    """
    j = data.feature_index(feature)
    if int(G) < 1:
        raise ValidationError(f"G must be >= 1, got {G}")
    x = data.features[:, j]
    lo, hi = float(x.min()), float(x.max())
    if G > 1 and lo == hi:
        raise ConstantFeature(f"feature {data.feature_names[j]!r} is constant")
    if kind == "equidistant":
        pts = np.array([(lo + hi) / 2.0]) if G == 1 else np.linspace(lo, hi, G)
    elif kind == "quantile":
        pts = np.unique(np.quantile(x, (np.arange(1, G + 1) - 0.5) / G))
    else:
        raise ValidationError(f"unknown grid kind {kind!r}")
    return PDGrid(j, pts)


@dataclass(frozen=True, eq=False)
class PDCurve:
    """Point-wise PD estimates with variances and t bands.

    ``samples`` holds what each interval averages: per-row predictions are
    not kept for model curves (``None``); learner curves keep the ``m x G``
    per-split PD values.
    """

    grid: PDGrid
    estimates: tuple
    kind: str
    meta: dict = field(default_factory=dict)
    samples: np.ndarray | None = field(default=None, repr=False)

    @property
    def mean(self):
        return np.array([e.mean for e in self.estimates])

    @property
    def variance(self):
        return np.array([e.variance for e in self.estimates])

    @property
    def lower(self):
        return np.array([e.lower for e in self.estimates])

    @property
    def upper(self):
        return np.array([e.upper for e in self.estimates])

    def rows(self, feature_name=None):
        name = self.grid.feature if feature_name is None else feature_name
        for x, e in zip(self.grid.points, self.estimates):
            yield {"feature": name, "grid_x": float(x), "mean": e.mean, "variance": e.variance,
                   "lower": e.lower, "upper": e.upper, "df": e.df}

    def to_csv(self, feature_name=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        cols = ["feature", "grid_x", "mean", "variance", "lower", "upper", "df"]
        w.writerow(cols)
        for r in self.rows(feature_name):
            w.writerow([fmt(r[c]) for c in cols])
        return buf.getvalue()

    def to_dict(self, feature_name=None):
        return {"kind": self.kind, "feature": self.grid.feature, "feature_name": feature_name,
                "points": list(self.rows(feature_name)), "meta": self.meta}

    def to_json(self, feature_name=None) -> str:
        return json.dumps(self.to_dict(feature_name), indent=2, sort_keys=True)


def fmt(v):
    """Shortest round-trip text for numbers; everything else via ``str``."""
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def pd_matrix(model, X, feature: int, points) -> np.ndarray:
    """Predictions ``f(x_g, x_C^(i))`` as a ``(G, n_rows)`` matrix."""
    X = np.asarray(X, dtype=np.float64)
    points = np.asarray(points, dtype=np.float64)
    G, k = points.size, X.shape[0]
    Xr = np.tile(X, (G, 1))
    Xr[:, feature] = np.repeat(points, k)
    return np.asarray(model.predict(Xr), dtype=np.float64).reshape(G, k)


def _test_matrix(test):
    return test.X if isinstance(test, IndexView) else np.asarray(test, dtype=np.float64)


def model_pd(model, test, grid: PDGrid, alpha: float = 0.05) -> PDCurve:
    """Monte Carlo PD of a fixed model with its integration variance.

    At each grid point the estimate is the mean prediction over the test
    rows, the variance is ``s**2 / n2`` over those predictions, and the band
    uses ``n2 - 1`` degrees of freedom.
    """
    X = _test_matrix(test)
    n2 = X.shape[0]
    if n2 < 2:
        raise TooFewRows(f"model PD needs at least 2 test rows, got {n2}")
    preds = pd_matrix(model, X, grid.feature, grid.points)
    mean, var, _ = mean_interval_arrays(preds.T, 0.0, alpha)
    est = tuple(interval(mu, v, n2 - 1, alpha) for mu, v in zip(mean, var))
    return PDCurve(grid, est, "model", {"n2": n2, "c": 0.0, "alpha": alpha})


def learner_pd(learner, data, plan, grid: PDGrid, alpha: float = 0.05, seed: int = 0,
               *, models=None, threads=1) -> PDCurve:
    """PD averaged over ``m`` refits, with corrected variance and t band (``m-1`` df).

    Each split's model is evaluated on its own test rows; the ``m`` per-split
    PD values at every grid point go through :func:`corrected_mean_ci` with
    ``c = correction_constant(plan)``. Pass ``models`` to reuse fits.
    """
    views = split_views(data, plan)
    if models is None:
        models = fit_plan(learner, data, plan, seed, threads)
    per_split = np.empty((plan.m, len(grid)))
    extrap = np.zeros(len(grid), dtype=bool)
    for d, (model, (tr, te)) in enumerate(zip(models, views)):
        if len(te) < 1:
            raise TooFewRows(f"split {d} has no test rows")
        per_split[d] = pd_matrix(model, te.X, grid.feature, grid.points).mean(axis=1)
        xs = tr.X[:, grid.feature]
        extrap |= (grid.points < xs.min()) | (grid.points > xs.max())
    c = correction_constant(plan)
    mean, var, half = mean_interval_arrays(per_split, c, alpha)
    est = tuple(IntervalEstimate(float(mu), float(v), plan.m - 1, float(mu - h), float(mu + h), float(alpha))
                for mu, v, h in zip(mean, var, half))
    meta = {"m": plan.m, "c": c, "alpha": alpha, "seed": seed, "mode": plan.mode, "plan_seed": plan.seed,
            "learner": getattr(learner, "name", str(learner)),
            "extrapolation": extrap.tolist()}
    return PDCurve(grid, est, "learner", meta, per_split)
