"""Train/test resampling plans and the variance correction constant."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import _rng
from .errors import InvalidSize, ValidationError

MODES = ("bootstrap", "subsample", "fresh")
DEFAULT_FRACTION = 0.632
DEFAULT_M = 15


@dataclass(frozen=True, eq=False)
class ResamplePlan:
    """``m`` disjoint (train, test) index pairs over ``n`` rows.

    ``redraws`` records, per split, how many bootstrap draws were discarded
    because they left no out-of-bag rows.
    """

    splits: tuple
    mode: str
    n: int
    seed: int
    fraction: float | None = None
    redraws: tuple = field(default=())

    @property
    def m(self):
        return len(self.splits)

    def to_dict(self):
        return {
            "mode": self.mode,
            "n": self.n,
            "m": self.m,
            "seed": self.seed,
            "fraction": self.fraction,
            "redraws": list(self.redraws),
            "splits": [{"train": tr.tolist(), "test": te.tolist()} for tr, te in self.splits],
        }

    def to_json(self):
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d):
        splits = tuple((np.asarray(s["train"], dtype=np.int64), np.asarray(s["test"], dtype=np.int64))
                       for s in d["splits"])
        plan = cls(splits, d["mode"], int(d["n"]), int(d["seed"]), d.get("fraction"),
                   tuple(d.get("redraws", ())))
        _check(plan)
        return plan

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


def _check(plan):
    if plan.mode not in MODES:
        raise ValidationError(f"unknown resampling mode {plan.mode!r}")
    for d, (tr, te) in enumerate(plan.splits):
        if np.intersect1d(tr, te).size:
            raise ValidationError(f"split {d}: train and test overlap")
        if len(tr) == 0 or len(te) == 0:
            raise ValidationError(f"split {d}: empty train or test set")
        if min(tr.min(), te.min()) < 0 or max(tr.max(), te.max()) >= plan.n:
            raise ValidationError(f"split {d}: index outside 0..{plan.n - 1}")


def _sizes(n, m):
    if int(n) < 2:
        raise InvalidSize(f"need n >= 2 rows, got {n}")
    if int(m) < 2:
        raise InvalidSize(f"need m >= 2 splits, got {m}")


def bootstrap_plan(n: int, m: int = DEFAULT_M, seed: int = 0) -> ResamplePlan:
    """``m`` bootstrap draws of size ``n``; each test set is the out-of-bag rows.

    Split ``d`` depends only on ``(seed, d)``. A draw with no out-of-bag
    row is replaced by the draw from the next derived stream.
    """
    _sizes(n, m)
    splits, redraws = [], []
    for d in range(m):
        attempt = 0
        while True:
            rng = _rng.stream(seed, _rng.PLAN, d, attempt)
            train = np.sort(rng.integers(0, n, size=n))
            test = np.setdiff1d(np.arange(n), train)
            if test.size:
                break
            attempt += 1
        splits.append((train, test))
        redraws.append(attempt)
    return ResamplePlan(tuple(splits), "bootstrap", int(n), int(seed), None, tuple(redraws))


def subsample_plan(n: int, m: int = DEFAULT_M, fraction: float = DEFAULT_FRACTION, seed: int = 0) -> ResamplePlan:
    """``m`` draws of ``floor(fraction * n)`` distinct rows; test is the complement."""
    _sizes(n, m)
    if not 0.0 < fraction < 1.0:
        raise InvalidSize(f"fraction must lie in (0, 1), got {fraction}")
    k = math.floor(fraction * n)
    if not 1 <= k <= n - 1:
        raise InvalidSize(f"floor({fraction} * {n}) = {k} leaves an empty train or test set")
    splits = []
    for d in range(m):
        rng = _rng.stream(seed, _rng.PLAN, d)
        perm = rng.permutation(n)
        splits.append((np.sort(perm[:k]), np.sort(perm[k:])))
    return ResamplePlan(tuple(splits), "subsample", int(n), int(seed), float(fraction), (0,) * m)


def fresh_plan(n: int, m: int = DEFAULT_M, fraction: float = DEFAULT_FRACTION, seed: int = 0) -> ResamplePlan:
    """Plan for refits on independently generated datasets of size ``n``.

    Each split indexes its *own* dataset: the first ``round(fraction * n)``
    rows train, the rest test. Only meaningful in simulation.
    """
    _sizes(n, m)
    k = n_train_fresh(n, fraction)
    train, test = np.arange(k), np.arange(k, n)
    return ResamplePlan(tuple((train, test) for _ in range(m)), "fresh", int(n), int(seed),
                        float(fraction), (0,) * m)


def n_train_fresh(n, fraction=DEFAULT_FRACTION):
    k = int(round(fraction * n))
    if not 1 <= k <= n - 1:
        raise InvalidSize(f"round({fraction} * {n}) = {k} leaves an empty train or test set")
    return k


def make_plan(mode: str, n: int, m: int = DEFAULT_M, seed: int = 0, fraction: float = DEFAULT_FRACTION):
    if mode == "bootstrap":
        return bootstrap_plan(n, m, seed)
    if mode == "subsample":
        return subsample_plan(n, m, fraction, seed)
    if mode == "fresh":
        return fresh_plan(n, m, fraction, seed)
    raise ValidationError(f"unknown resampling mode {mode!r}; choose from {MODES}")


def correction_constant(plan: ResamplePlan) -> float:
    """Variance inflation ``c = n_test / n_train``, averaged over splits.

    Fresh plans return 0. For the bootstrap the training size counts
    distinct rows only.
    """
    if plan.mode == "fresh":
        return 0.0
    ratios = [len(te) / np.unique(tr).size for tr, te in plan.splits]
    return float(np.mean(ratios))
