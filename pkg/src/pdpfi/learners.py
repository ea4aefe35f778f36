"""Regression learners (OLS, CART, random forest) and per-instance losses.

A *model* is anything with ``predict(X) -> ndarray`` and a ``descriptor``
string. A *learner* has ``fit(train_view, seed) -> model``; fits are
deterministic in ``(data, seed)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import _cart
from .data import IndexView
from .errors import DegenerateDesign, EmptyTrainingSet, LengthMismatch, ValidationError

RIDGE_PENALTY = 1e-8


# ---------------------------------------------------------------- models


@dataclass(frozen=True, eq=False)
class ConstantModel:
    constant: float
    descriptor: str = "constant"

    def predict(self, X):
        X = np.asarray(X, dtype=np.float64)
        return np.full(X.shape[0], float(self.constant))


@dataclass(frozen=True, eq=False)
class FunctionModel:
    """Wrap a plain vectorised callable ``fn(X) -> predictions`` as a model."""

    fn: Callable[[np.ndarray], np.ndarray]
    descriptor: str = "function"

    def predict(self, X):
        X = np.asarray(X, dtype=np.float64)
        return np.asarray(self.fn(X), dtype=np.float64).reshape(X.shape[0])


@dataclass(frozen=True, eq=False)
class LinearModel:
    intercept: float
    coef: np.ndarray
    ridge: bool = False

    @property
    def descriptor(self):
        terms = ",".join(repr(float(c)) for c in self.coef)
        tag = "lm[ridge]" if self.ridge else "lm"
        return f"{tag}(intercept={float(self.intercept)!r}, coef=[{terms}])"

    def predict(self, X):
        X = np.asarray(X, dtype=np.float64)
        return X @ self.coef + self.intercept


@dataclass(frozen=True, eq=False)
class TreeModel:
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    descriptor: str = "tree"

    @property
    def n_nodes(self):
        return len(self.feature)

    @property
    def n_leaves(self):
        return int(np.sum(self.feature < 0))

    def predict(self, X):
        X = np.ascontiguousarray(X, dtype=np.float64)
        roots = np.array([0, len(self.feature)], dtype=np.int64)
        return _cart.predict_trees_kernel(X, self.feature, self.threshold, self.left,
                                          self.right, self.value, roots)[0]


@dataclass(frozen=True, eq=False)
class ForestModel:
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    roots: np.ndarray
    descriptor: str = "rf"

    @property
    def n_trees(self):
        return len(self.roots) - 1

    @property
    def trees(self):
        """The member trees as standalone :class:`TreeModel` objects."""
        out = []
        for t in range(self.n_trees):
            a, b = self.roots[t], self.roots[t + 1]
            out.append(TreeModel(self.feature[a:b].copy(), self.threshold[a:b].copy(),
                                 np.where(self.left[a:b] >= 0, self.left[a:b] - a, -1),
                                 np.where(self.right[a:b] >= 0, self.right[a:b] - a, -1),
                                 self.value[a:b].copy(), f"{self.descriptor}/tree{t}"))
        return out

    def tree_predictions(self, X):
        X = np.ascontiguousarray(X, dtype=np.float64)
        return _cart.predict_trees_kernel(X, self.feature, self.threshold, self.left,
                                          self.right, self.value, self.roots)

    def predict(self, X):
        return self.tree_predictions(X).mean(axis=0)


# ---------------------------------------------------------------- params


@dataclass(frozen=True)
class TreeParams:
    max_depth: int = 30
    min_leaf: int = 5

    def __post_init__(self):
        if int(self.max_depth) < 1 or int(self.min_leaf) < 1:
            raise ValidationError("max_depth and min_leaf must be >= 1")


@dataclass(frozen=True)
class ForestParams:
    """Random forest settings. ``features_per_split=None`` means ``ceil(p/3)``."""

    n_trees: int = 100
    tree: TreeParams = field(default_factory=TreeParams)
    features_per_split: int | None = None
    bootstrap_rows: bool = True

    def __post_init__(self):
        if int(self.n_trees) < 1:
            raise ValidationError("n_trees must be >= 1")
        if self.features_per_split is not None and int(self.features_per_split) < 1:
            raise ValidationError("features_per_split must be >= 1")

    def mtry(self, p):
        k = math.ceil(p / 3) if self.features_per_split is None else int(self.features_per_split)
        if not 1 <= k <= p:
            raise ValidationError(f"features_per_split={k} outside [1, {p}]")
        return k


# ---------------------------------------------------------------- fitting


def _train_arrays(train):
    if isinstance(train, IndexView):
        X, y = train.X, train.y
    else:
        X, y = train
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    if X.shape[0] == 0:
        raise EmptyTrainingSet("training set has no rows")
    return X, y


def fit_linear(train) -> LinearModel:
    """Ordinary least squares with intercept, solved through a QR factorisation.

    A rank-deficient design falls back to ridge regression with penalty
    ``RIDGE_PENALTY`` (flagged in the descriptor). A constant target gives an
    intercept-only fit.
    """
    X, y = _train_arrays(train)
    with np.errstate(all="ignore"):
        model = _ols(X, y)
    if not (np.all(np.isfinite(model.coef)) and np.isfinite(model.intercept)):
        raise DegenerateDesign("least squares produced non-finite coefficients")
    return model


def _ols(X, y):
    n, p = X.shape
    # center columns: intercept decouples and the QR is better conditioned
    xm = X.mean(axis=0)
    ym = y.mean()
    Xc = X - xm
    yc = y - ym
    if not np.any(yc):
        return LinearModel(float(ym), np.zeros(p))
    # constant columns are absorbed by the intercept: exact zero coefficient
    live = np.flatnonzero(np.any(Xc != 0, axis=0))
    coef = np.zeros(p)
    if live.size == 0:
        return LinearModel(float(ym), coef)
    Xl = Xc[:, live]
    k = live.size
    ridge = True
    if n > k:
        Q, R = np.linalg.qr(Xl)
        d = np.abs(np.diag(R))
        if d.min() > 1e-10 * max(d.max(), 1e-300):
            coef[live] = np.linalg.solve(R, Q.T @ yc)
            ridge = False
    if ridge:
        aug = np.vstack([Xl, np.sqrt(RIDGE_PENALTY) * np.eye(k)])
        rhs = np.concatenate([yc, np.zeros(k)])
        coef[live] = np.linalg.lstsq(aug, rhs, rcond=None)[0]
    return LinearModel(float(ym - xm @ coef), coef, ridge)


def fit_tree(train, params: TreeParams = TreeParams()) -> TreeModel:
    """Deterministic CART tree using all features at every split."""
    X, y = _train_arrays(train)
    f, t, l, r, v, _ = _cart.fit_forest_kernel(X, y, 1, int(params.max_depth), int(params.min_leaf),
                                               X.shape[1], False, 0)
    return TreeModel(f, t, l, r, v, f"tree(max_depth={params.max_depth}, min_leaf={params.min_leaf})")


def fit_forest(train, params: ForestParams = ForestParams(), seed: int = 0) -> ForestModel:
    """Random forest: bagged CART trees with per-split feature subsampling."""
    X, y = _train_arrays(train)
    mtry = params.mtry(X.shape[1])
    seed = int(seed) & 0x7FFFFFFFFFFFFFFF
    f, t, l, r, v, roots = _cart.fit_forest_kernel(
        X, y, int(params.n_trees), int(params.tree.max_depth), int(params.tree.min_leaf),
        mtry, bool(params.bootstrap_rows), seed)
    desc = (f"rf(n_trees={params.n_trees}, max_depth={params.tree.max_depth}, "
            f"min_leaf={params.tree.min_leaf}, mtry={mtry}, bootstrap={params.bootstrap_rows}, seed={seed})")
    return ForestModel(f, t, l, r, v, roots, desc)


# ---------------------------------------------------------------- learners


@dataclass(frozen=True)
class LinearLearner:
    name: str = "lm"

    @property
    def hyperparameters(self):
        return {}

    def fit(self, train, seed=0):
        return fit_linear(train)


@dataclass(frozen=True)
class TreeLearner:
    params: TreeParams = field(default_factory=TreeParams)
    name: str = "tree"

    @property
    def hyperparameters(self):
        return {"max_depth": self.params.max_depth, "min_leaf": self.params.min_leaf}

    def fit(self, train, seed=0):
        return fit_tree(train, self.params)


@dataclass(frozen=True)
class ForestLearner:
    params: ForestParams = field(default_factory=ForestParams)
    name: str = "rf"

    @property
    def hyperparameters(self):
        p = self.params
        return {"n_trees": p.n_trees, "max_depth": p.tree.max_depth, "min_leaf": p.tree.min_leaf,
                "features_per_split": p.features_per_split, "bootstrap_rows": p.bootstrap_rows}

    def fit(self, train, seed=0):
        return fit_forest(train, self.params, seed)


@dataclass(frozen=True)
class MeanLearner:
    """Intercept-only learner: predicts the training mean."""

    name: str = "mean"

    @property
    def hyperparameters(self):
        return {}

    def fit(self, train, seed=0):
        _, y = _train_arrays(train)
        return ConstantModel(float(y.mean()), "mean")


@dataclass(frozen=True)
class FunctionLearner:
    """Adapter turning ``fit_fn(X, y, seed) -> model`` into a learner."""

    fit_fn: Callable
    name: str = "custom"

    @property
    def hyperparameters(self):
        return {}

    def fit(self, train, seed=0):
        X, y = _train_arrays(train)
        return self.fit_fn(X, y, seed)


LEARNERS = ("lm", "tree", "rf", "mean")


def make_learner(name: str, **params):
    """Build a learner by name from flat keyword parameters.

    >>> make_learner("rf", n_trees=50).params.n_trees
    50
    """
    params = {k: v for k, v in params.items() if v is not None}
    if name == "lm":
        _no_params(name, params)
        return LinearLearner()
    if name == "mean":
        _no_params(name, params)
        return MeanLearner()
    tree_keys = {"max_depth", "min_leaf"}
    tree = TreeParams(**{k: int(params.pop(k)) for k in tree_keys & params.keys()})
    if name == "tree":
        _no_params(name, params)
        return TreeLearner(tree)
    if name == "rf":
        kw = {}
        if "n_trees" in params:
            kw["n_trees"] = int(params.pop("n_trees"))
        if "features_per_split" in params:
            kw["features_per_split"] = int(params.pop("features_per_split"))
        if "bootstrap_rows" in params:
            kw["bootstrap_rows"] = bool(params.pop("bootstrap_rows"))
        _no_params(name, params)
        return ForestLearner(ForestParams(tree=tree, **kw))
    raise ValidationError(f"unknown learner {name!r}; choose from {LEARNERS}")


def _no_params(name, params):
    if params:
        raise ValidationError(f"learner {name!r} does not accept {sorted(params)}")


# ---------------------------------------------------------------- losses


def loss_l2(y, yhat):
    """Per-instance squared error ``(y - yhat)**2``."""
    y = np.asarray(y, dtype=np.float64)
    yhat = np.asarray(yhat, dtype=np.float64)
    if y.shape != yhat.shape:
        raise LengthMismatch(f"y has shape {y.shape}, predictions {yhat.shape}")
    return (y - yhat) ** 2
