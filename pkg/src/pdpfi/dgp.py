"""Synthetic data generating processes and their ground-truth PD/PFI.

Built-in processes draw every feature i.i.d. from U[0, 1] and add
N(0, noise_sigma**2) noise to the regression function:

* ``linear``:    f(x) = x1 - x2
* ``nonlinear``: f(x) = x1 - sqrt(1 - x2) + x3 * x4 + (x4 / 10)**2
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import _rng
from .data import Dataset
from .errors import IndexOutOfBounds, ValidationError


@dataclass(frozen=True, eq=False)
class DGPSpec:
    name: str
    f: Callable[[np.ndarray], np.ndarray]
    p: int
    noise_sigma: float = 1.0
    # closed forms, when known: pd_exact(feature, points) and pfi_exact(feature)
    pd_exact: Callable | None = None
    pfi_exact: Callable | None = None

    def __post_init__(self):
        if int(self.p) < 1:
            raise ValidationError("DGP needs p >= 1")
        if self.noise_sigma < 0:
            raise ValidationError("noise_sigma must be >= 0")

    def feature_names(self):
        return tuple(f"x{j + 1}" for j in range(self.p))

    def check_feature(self, feature):
        if not 0 <= int(feature) < self.p:
            raise IndexOutOfBounds(f"feature {feature} outside 0..{self.p - 1}")
        return int(feature)


def _linear_f(X):
    return X[:, 0] - X[:, 1]


def _linear_pd(feature, x):
    return x - 0.5 if feature == 0 else 0.5 - x


def _nonlinear_f(X):
    return X[:, 0] - np.sqrt(1.0 - X[:, 1]) + X[:, 2] * X[:, 3] + (X[:, 3] / 10.0) ** 2


# uniform moments: E[sqrt(1-U)] = 2/3, E[X3 X4] = 1/4, E[(X4/10)^2] = 1/300
def _nonlinear_pd(feature, x):
    if feature == 0:
        return x - 2 / 3 + 1 / 4 + 1 / 300
    if feature == 1:
        return 0.5 - np.sqrt(1.0 - x) + 1 / 4 + 1 / 300
    if feature == 2:
        return 0.5 - 2 / 3 + 0.5 * x + 1 / 300
    return 0.5 - 2 / 3 + 0.5 * x + x ** 2 / 100


def _nonlinear_pfi(feature):
    # 2 Var(X1); 2 Var(sqrt(1-U)); 2 Var(X3) E[X4^2];
    # E[X3^2] 2Var(U) + 2 E[X3] E[(a-b)(a^2-b^2)]/100 + 2 Var(U^2)/1e4
    return (1 / 6, 1 / 9, 1 / 18, (1 / 3) * (1 / 6) + 2 * 0.5 * (1 / 6) / 100 + 2 * (1 / 5 - 1 / 9) / 1e4)[feature]


def linear_dgp(noise_sigma: float = 1.0) -> DGPSpec:
    return DGPSpec("linear", _linear_f, 2, noise_sigma, _linear_pd, lambda j: 1 / 6)


def nonlinear_dgp(noise_sigma: float = 1.0) -> DGPSpec:
    return DGPSpec("nonlinear", _nonlinear_f, 4, noise_sigma, _nonlinear_pd, _nonlinear_pfi)


def custom_dgp(f, p: int, noise_sigma: float = 1.0, name: str = "custom") -> DGPSpec:
    """Process with a user regression function over ``p`` U[0, 1] features."""
    return DGPSpec(name, f, int(p), float(noise_sigma))


BUILTIN = {"linear": linear_dgp, "nonlinear": nonlinear_dgp, "non-linear": nonlinear_dgp}


def get_dgp(name: str, noise_sigma: float = 1.0) -> DGPSpec:
    try:
        return BUILTIN[name](noise_sigma)
    except KeyError:
        raise ValidationError(f"unknown DGP {name!r}; choose from linear, nonlinear") from None


def sample_dgp(spec: DGPSpec, n: int, seed: int = 0) -> Dataset:
    """Draw ``n`` i.i.d. rows ``(x, f(x) + eps)`` from the stream ``seed``."""
    if int(n) < 1:
        raise ValidationError(f"n must be >= 1, got {n}")
    rng = _rng.stream(seed, _rng.DATA)
    X = rng.random((int(n), spec.p))
    y = np.asarray(spec.f(X), dtype=np.float64)
    if spec.noise_sigma > 0:
        y = y + rng.normal(0.0, spec.noise_sigma, size=int(n))
    return Dataset(X, spec.feature_names(), y, "y")


@dataclass(frozen=True)
class OracleValue:
    """Ground-truth value(s) with Monte Carlo standard error (0 if exact)."""

    value: np.ndarray | float
    stderr: np.ndarray | float
    method: str


def _use_exact(method, available):
    if method == "auto":
        return available
    if method == "exact":
        if not available:
            raise ValidationError("no closed form available for this DGP")
        return True
    if method == "mc":
        return False
    raise ValidationError(f"method must be 'auto', 'exact' or 'mc', got {method!r}")


def dgp_pd(spec: DGPSpec, feature: int, grid, mc_n: int = 100_000, seed: int = 0, method: str = "auto") -> OracleValue:
    """PD of the true regression function, ``E_{X_C}[f(x, X_C)]`` at each grid point.

    Closed form for the built-ins; otherwise (or with ``method="mc"``)
    Monte Carlo over ``mc_n`` draws of the other features.
    """
    j = spec.check_feature(feature)
    pts = np.asarray(grid, dtype=np.float64).reshape(-1)
    if _use_exact(method, spec.pd_exact is not None):
        return OracleValue(np.asarray(spec.pd_exact(j, pts), dtype=np.float64), np.zeros(pts.size), "exact")
    rng = _rng.stream(seed, _rng.MC, 1, j)
    X = rng.random((int(mc_n), spec.p))
    vals = np.empty(pts.size)
    se = np.empty(pts.size)
    for g, x in enumerate(pts):
        X[:, j] = x
        fx = np.asarray(spec.f(X), dtype=np.float64)
        vals[g] = fx.mean()
        se[g] = fx.std(ddof=1) / math.sqrt(mc_n)
    return OracleValue(vals, se, "mc")


def dgp_pfi(spec: DGPSpec, feature: int, mc_n: int = 100_000, seed: int = 0, method: str = "auto") -> OracleValue:
    """L2 PFI of the true function, ``E[(f(X) - f(X~_S, X_C))**2]``.

    ``X~_S`` is an independent copy of the feature, so the noise term cancels.
    """
    j = spec.check_feature(feature)
    if _use_exact(method, spec.pfi_exact is not None):
        return OracleValue(float(spec.pfi_exact(j)), 0.0, "exact")
    rng = _rng.stream(seed, _rng.MC, 2, j)
    X = rng.random((int(mc_n), spec.p))
    Xt = X.copy()
    Xt[:, j] = rng.random(int(mc_n))
    d = (np.asarray(spec.f(X), dtype=np.float64) - np.asarray(spec.f(Xt), dtype=np.float64)) ** 2
    return OracleValue(float(d.mean()), float(d.std(ddof=1) / math.sqrt(mc_n)), "mc")
