"""Fitting one model per resampling split."""
from __future__ import annotations

import numpy as np

from . import _rng
from .data import Dataset, view
from .errors import FitError, PdPfiError, TooFewSplits, ValidationError
from .parallel import pmap


def split_views(data, plan):
    """``[(train_view, test_view), ...]`` for every split of ``plan``.

    For a ``fresh`` plan ``data`` must be a sequence of ``m`` datasets, one
    per split; otherwise a single :class:`Dataset`.
    """
    if plan.m < 2:
        raise TooFewSplits(f"need at least 2 splits, got {plan.m}")
    if isinstance(data, Dataset):
        if plan.mode == "fresh":
            raise ValidationError("a fresh plan needs one dataset per split")
        datasets = [data] * plan.m
    else:
        datasets = list(data)
        if len(datasets) != plan.m:
            raise ValidationError(f"{len(datasets)} datasets for {plan.m} splits")
    out = []
    for ds, (tr, te) in zip(datasets, plan.splits):
        if ds.n != plan.n:
            raise ValidationError(f"plan is for n={plan.n} rows, dataset has {ds.n}")
        out.append((view(ds, tr), view(ds, te)))
    return out


def fit_seed(seed, split):
    return _rng.derive(seed, _rng.FIT, split)


def fit_plan(learner, data, plan, seed=0, threads=1):
    """Fit ``learner`` on every training view; split ``d`` uses seed ``(seed, d)``."""
    views = split_views(data, plan)

    def one(d):
        try:
            return learner.fit(views[d][0], fit_seed(seed, d))
        except PdPfiError as e:
            raise FitError(d, e) from e
        except (ArithmeticError, ValueError, FloatingPointError, np.linalg.LinAlgError) as e:
            raise FitError(d, e) from e

    return pmap(one, plan.m, threads)
