"""Permutation feature importance for a fixed model and for a learner over refits."""
from __future__ import annotations

import csv
import io
import itertools
import json
from dataclasses import dataclass, field

import numpy as np

from . import _rng
from .data import IndexView
from .errors import MixedKinds, PlanMismatch, TooFewRows, TooFewSplits, ValidationError
from .inference import IntervalEstimate, corrected_mean_ci, interval, mean_interval_arrays
from .learners import loss_l2
from .pd import fmt
from .refit import fit_plan, split_views
from .resampling import correction_constant

KINDS = ("marginal", "conditional_binned", "permutations")
MAX_ENUMERATED_ROWS = 8


@dataclass(frozen=True)
class ReplacementSampler:
    """How replacement values for the feature of interest are drawn.

    ``marginal`` permutes the column ``l`` times; ``conditional_binned``
    permutes within equal-frequency bins of a conditioning score;
    ``permutations`` enumerates every permutation of the test column (tiny
    test sets only) and ignores ``l``.
    """

    kind: str = "marginal"
    l: int | None = None
    bins: int = 5
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValidationError(f"unknown sampler kind {self.kind!r}; choose from {KINDS}")
        if self.l is None:
            object.__setattr__(self, "l", 1 if self.kind == "conditional_binned" else 5)
        if int(self.l) < 1:
            raise ValidationError(f"l must be >= 1, got {self.l}")
        if self.kind == "conditional_binned" and int(self.bins) < 2:
            raise ValidationError(f"conditional sampling needs bins >= 2, got {self.bins}")

    def describe(self):
        if self.kind == "marginal":
            return f"marginal(l={self.l})"
        if self.kind == "conditional_binned":
            return f"conditional_binned(l={self.l},bins={self.bins})"
        return "permutations"

    def to_dict(self):
        return {"kind": self.kind, "l": self.l, "bins": self.bins, "seed": self.seed}


def _xy(test):
    if isinstance(test, IndexView):
        return test.X, test.y
    X, y = test
    return np.asarray(X, dtype=np.float64), np.asarray(y, dtype=np.float64)


def _conditioning_score(X, feature, model):
    others = [j for j in range(X.shape[1]) if j != feature]
    if not others:
        raise ValidationError("conditional sampling needs at least one other feature")
    if len(others) == 1:
        return X[:, others[0]]
    if model is None:
        raise ValidationError("conditional sampling with several other features needs the model")
    Xm = X.copy()
    Xm[:, feature] = np.median(X[:, feature])
    return np.asarray(model.predict(Xm), dtype=np.float64)


def sample_replacements(test, feature: int, sampler: ReplacementSampler, model=None, stream=(0,)):
    """Replacement columns for ``feature``, shape ``(l, n2)``.

    Repetition ``k`` draws from the stream ``(sampler.seed, *stream, k)``.
    Every column is a rearrangement of the observed test column.
    """
    X, _ = _xy(test)
    n2 = X.shape[0]
    col = X[:, feature]
    if sampler.kind == "permutations":
        if not 1 <= n2 <= MAX_ENUMERATED_ROWS:
            raise TooFewRows(f"enumerating permutations needs 1..{MAX_ENUMERATED_ROWS} rows, got {n2}")
        return np.array([col[list(p)] for p in itertools.permutations(range(n2))])
    if sampler.kind == "marginal":
        if n2 < 2:
            raise TooFewRows(f"marginal sampling needs at least 2 rows, got {n2}")
        return np.array([col[_rng.stream(sampler.seed, _rng.SAMPLER, *stream, k).permutation(n2)]
                         for k in range(sampler.l)])
    if n2 < 2 * sampler.bins:
        raise TooFewRows(f"{sampler.bins} bins need at least {2 * sampler.bins} rows, got {n2}")
    score = _conditioning_score(X, feature, model)
    groups = np.array_split(np.argsort(score, kind="stable"), sampler.bins)
    out = np.empty((sampler.l, n2))
    for k in range(sampler.l):
        rng = _rng.stream(sampler.seed, _rng.SAMPLER, *stream, k)
        rep = col.copy()
        for g in groups:
            rep[g] = col[g[rng.permutation(g.size)]]
        out[k] = rep
    return out


@dataclass(frozen=True, eq=False)
class PFIEstimate:
    feature: int
    estimate: IntervalEstimate
    kind: str
    sampler: str
    meta: dict = field(default_factory=dict)
    samples: np.ndarray | None = field(default=None, repr=False)

    @property
    def mean(self):
        return self.estimate.mean

    def row(self, feature_name=None):
        e = self.estimate
        return {"feature": self.feature if feature_name is None else feature_name, "mean": e.mean,
                "variance": e.variance, "lower": e.lower, "upper": e.upper, "df": e.df,
                "kind": self.kind, "sampler": self.sampler}

    def to_dict(self, feature_name=None):
        return {**self.row(feature_name), "alpha": self.estimate.alpha, "meta": self.meta}


def instance_importances(model, test, feature: int, replacements, loss=loss_l2):
    """Per-row loss increase ``mean_k loss(y_i, f(x~_ik, x_C,i)) - loss(y_i, f(x_i))``."""
    X, y = _xy(test)
    reps = np.atleast_2d(np.asarray(replacements, dtype=np.float64))
    l, n2 = reps.shape
    if n2 != X.shape[0]:
        raise ValidationError(f"replacement columns have {n2} rows, test set {X.shape[0]}")
    base = loss(y, np.asarray(model.predict(X), dtype=np.float64))
    Xr = np.tile(X, (l, 1))
    Xr[:, feature] = reps.reshape(-1)
    perm = loss(np.tile(y, l), np.asarray(model.predict(Xr), dtype=np.float64)).reshape(l, n2)
    return (perm - base).mean(axis=0)


def model_pfi(model, test, feature: int, sampler: ReplacementSampler = ReplacementSampler(),
              alpha: float = 0.05, loss=loss_l2, *, replacements=None, stream=(0,)) -> PFIEstimate:
    """PFI of a fixed model with its Monte Carlo variance and t interval (``n2-1`` df).

    ``replacements`` overrides the sampler with explicit ``(l, n2)`` columns.
    """
    X, y = _xy(test)
    n2 = X.shape[0]
    if n2 < 2:
        raise TooFewRows(f"model PFI needs at least 2 test rows, got {n2}")
    if replacements is None:
        replacements = sample_replacements((X, y), feature, sampler, model, stream)
    L = instance_importances(model, (X, y), feature, replacements, loss)
    mean, var, _ = mean_interval_arrays(L, 0.0, alpha)
    est = interval(float(mean), float(var), n2 - 1, alpha)
    return PFIEstimate(int(feature), est, "model", sampler.describe(),
                       {"n2": n2, "c": 0.0, "sampler_seed": sampler.seed, "stream": list(stream)}, L)


def learner_pfi(learner, data, plan, feature: int, sampler: ReplacementSampler = ReplacementSampler(),
                alpha: float = 0.05, seed: int = 0, loss=loss_l2, *, models=None, threads=1) -> PFIEstimate:
    """PFI averaged over ``m`` refits with corrected variance and t interval (``m-1`` df).

    Split ``d`` evaluates its model on its own test rows with sampler stream
    ``(d, feature)``.
    """
    views = split_views(data, plan)
    if models is None:
        models = fit_plan(learner, data, plan, seed, threads)
    vals = np.empty(plan.m)
    for d, (model, (_, te)) in enumerate(zip(models, views)):
        reps = sample_replacements(te, feature, sampler, model, (d, feature))
        vals[d] = instance_importances(model, te, feature, reps, loss).mean()
    c = correction_constant(plan)
    est = corrected_mean_ci(vals, c, alpha)
    meta = {"m": plan.m, "c": c, "seed": seed, "sampler_seed": sampler.seed, "mode": plan.mode,
            "plan_seed": plan.seed, "learner": getattr(learner, "name", str(learner))}
    return PFIEstimate(int(feature), est, "learner", sampler.describe(), meta, vals)


def split_losses(learner, data, plan, seed: int = 0, loss=loss_l2, *, models=None, threads=1):
    """Per-instance test losses of each split's model (list of ``m`` vectors)."""
    views = split_views(data, plan)
    if models is None:
        models = fit_plan(learner, data, plan, seed, threads)
    return [loss(te.y, np.asarray(mod.predict(te.X), dtype=np.float64)) for mod, (_, te) in zip(models, views)]


def compare_learners(per_split_losses_A, per_split_losses_B, c: float, alpha: float = 0.05) -> IntervalEstimate:
    """Corrected t interval for the mean loss difference ``A - B`` over splits.

    Both loss lists must come from the same plan, so split ``d`` has the
    same number of test rows for ``A`` and ``B``.
    """
    A = [np.asarray(a, dtype=np.float64) for a in per_split_losses_A]
    B = [np.asarray(b, dtype=np.float64) for b in per_split_losses_B]
    if len(A) != len(B):
        raise PlanMismatch(f"{len(A)} splits for A but {len(B)} for B")
    if len(A) < 2:
        raise TooFewSplits(f"need at least 2 splits, got {len(A)}")
    for d, (a, b) in enumerate(zip(A, B)):
        if a.shape != b.shape:
            raise PlanMismatch(f"split {d}: {a.size} test losses for A but {b.size} for B")
    diffs = [a.mean() - b.mean() for a, b in zip(A, B)]
    return corrected_mean_ci(diffs, c, alpha)


@dataclass(frozen=True)
class RankedPFI:
    rank: int
    estimate: PFIEstimate
    overlaps_next: bool | None


def pfi_ranking(estimates) -> list:
    """Sort by mean importance (descending, ties by feature index) and flag
    whether each interval overlaps the next one down."""
    estimates = list(estimates)
    if not estimates:
        return []
    kinds = {(e.kind, e.estimate.alpha) for e in estimates}
    if len(kinds) > 1:
        raise MixedKinds(f"cannot rank estimates of different kinds/alphas: {sorted(kinds)}")
    order = sorted(estimates, key=lambda e: (-e.mean, e.feature))
    out = []
    for i, e in enumerate(order):
        if i + 1 < len(order):
            nxt = order[i + 1].estimate
            ov = bool(e.estimate.lower <= nxt.upper and nxt.lower <= e.estimate.upper)
        else:
            ov = None
        out.append(RankedPFI(i + 1, e, ov))
    return out


PFI_COLUMNS = ["rank", "feature", "mean", "variance", "lower", "upper", "df", "kind", "sampler", "overlaps_next"]


def pfi_table_csv(ranked, feature_names=None) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(PFI_COLUMNS)
    for r in ranked:
        name = None if feature_names is None else feature_names[r.estimate.feature]
        row = {"rank": r.rank, **r.estimate.row(name),
               "overlaps_next": "" if r.overlaps_next is None else str(r.overlaps_next).lower()}
        w.writerow([fmt(row[c]) for c in PFI_COLUMNS])
    return buf.getvalue()


def pfi_table_json(ranked, feature_names=None) -> str:
    rows = []
    for r in ranked:
        name = None if feature_names is None else feature_names[r.estimate.feature]
        rows.append({"rank": r.rank, "overlaps_next": r.overlaps_next, **r.estimate.to_dict(name)})
    return json.dumps(rows, indent=2, sort_keys=True)

