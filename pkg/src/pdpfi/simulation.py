"""Coverage simulations for learner-PD bands and learner-PFI intervals.

Every repetition draws its data and seeds from ``(config.seed, repetition)``
and every reference run from ``(config.seed, reference, run)``, so results
are identical for any worker count and across cells that differ only in the
correction flag or resampling mode.
"""
from __future__ import annotations

import csv
import io
import json
import logging
import math
from dataclasses import dataclass, field
from typing import Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from . import __version__, _rng
from .data import view
from .dgp import get_dgp, sample_dgp
from .errors import NumericalError, PdPfiError, ValidationError
from .inference import mean_interval_arrays
from .learners import make_learner
from .parallel import pmap
from .pd import SIMULATION_GRID, fmt, pd_matrix
from .pfi import ReplacementSampler, instance_importances, sample_replacements
from .refit import fit_seed
from .resampling import DEFAULT_FRACTION, correction_constant, make_plan, n_train_fresh

log = logging.getLogger(__name__)

MAX_FAILURE_RATE = 0.01


class LearnerSpec(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    name: Literal["lm", "tree", "rf", "mean"]
    params: dict = Field(default_factory=dict)

    def build(self):
        return make_learner(self.name, **self.params)

    def key(self):
        return (self.name, tuple(sorted(self.params.items())))


class CoverageConfig(BaseModel):
    """One simulation cell (JSON-loadable)."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    dgp: Literal["linear", "nonlinear"] = "linear"
    learner: LearnerSpec = LearnerSpec(name="lm")
    n: int = Field(100, ge=4)
    m: int = Field(15, ge=2, le=1000)
    resampling: Literal["bootstrap", "subsample", "fresh"] = "bootstrap"
    corrected: bool = True
    alpha: float = Field(0.05, gt=0, lt=1)
    repetitions: int = Field(1000, ge=1)
    reference_runs: int = Field(2000, ge=100)
    grid: tuple[float, ...] = SIMULATION_GRID
    seed: int = Field(0, ge=0)
    pfi_l: int = Field(5, ge=1)
    noise_sigma: float = Field(1.0, ge=0)
    fraction: float = Field(DEFAULT_FRACTION, gt=0, lt=1)

    @field_validator("grid")
    @classmethod
    def _grid_increasing(cls, v):
        if not v or any(b <= a for a, b in zip(v, v[1:])):
            raise ValueError("grid must be non-empty and strictly increasing")
        return v

    @model_validator(mode="after")
    def _sizes(self):
        n_train_fresh(self.n, self.fraction)
        return self

    def spec(self):
        return get_dgp(self.dgp, self.noise_sigma)

    def reference_key(self):
        return (self.dgp, self.noise_sigma, self.learner.key(), self.n, self.fraction, self.grid,
                self.reference_runs, self.seed, self.pfi_l)

    def run_key(self):
        return (self.dgp, self.noise_sigma, self.learner.key(), self.n, self.fraction, self.grid,
                self.repetitions, self.seed, self.pfi_l, self.m, self.resampling)


def load_config(path):
    """Read one config object, or a JSON list of them."""
    with open(path, encoding="utf-8") as fh:
        raw = json.load(fh)
    try:
        if isinstance(raw, list):
            return [CoverageConfig.model_validate(r) for r in raw]
        return [CoverageConfig.model_validate(raw)]
    except Exception as e:  # pydantic.ValidationError
        raise ValidationError(f"invalid config {path}: {e}") from None


def config_schema():
    return CoverageConfig.model_json_schema()


# ---------------------------------------------------------------- one split


def split_estimates(model, X_test, y_test, grid, sampler):
    """Model-PD at ``grid`` for every feature and model-PFI for every feature.

    Returns ``(pd, pfi)`` with shapes ``(p, G)`` and ``(p,)``. Feature ``j``
    uses sampler stream ``(0, j)`` under ``sampler.seed``.
    """
    p = X_test.shape[1]
    pd = np.empty((p, len(grid)))
    pfi = np.empty(p)
    for j in range(p):
        pd[j] = pd_matrix(model, X_test, j, grid).mean(axis=1)
        reps = sample_replacements((X_test, y_test), j, sampler, model, (0, j))
        pfi[j] = instance_importances(model, (X_test, y_test), j, reps).mean()
    return pd, pfi


def _sampler(config, seed):
    return ReplacementSampler("marginal", config.pfi_l, seed=seed)


def _fresh_run(config, spec, learner, run_seed):
    n1 = n_train_fresh(config.n, config.fraction)
    ds = sample_dgp(spec, config.n, run_seed)
    model = learner.fit(view(ds, np.arange(n1)), fit_seed(run_seed, 0))
    return split_estimates(model, ds.features[n1:], ds.target[n1:], config.grid, _sampler(config, run_seed))


# ---------------------------------------------------------------- reference


@dataclass
class Reference:
    """Expected model-PD (``p x G``) and model-PFI (``p``) over fresh refits."""

    pd: np.ndarray
    pd_se: np.ndarray
    pfi: np.ndarray
    pfi_se: np.ndarray
    runs: int
    pd_runs: np.ndarray | None = field(default=None, repr=False)
    pfi_runs: np.ndarray | None = field(default=None, repr=False)

    def to_dict(self):
        return {"pd": self.pd.tolist(), "pd_se": self.pd_se.tolist(), "pfi": self.pfi.tolist(),
                "pfi_se": self.pfi_se.tolist(), "runs": self.runs}


def reference_expectations(config: CoverageConfig, threads=1, keep_runs=False) -> Reference:
    """Average model-PD/PFI over ``reference_runs`` independent fresh-data fits.

    Each run trains on ``round(0.632 n)`` fresh rows and evaluates on the
    remaining rows of the same draw.
    """
    spec, learner = config.spec(), config.learner.build()

    def one(r):
        return _fresh_run(config, spec, learner, _rng.derive(config.seed, _rng.REFERENCE, r))

    res = pmap(one, config.reference_runs, threads)
    pd = np.stack([a for a, _ in res])
    pfi = np.stack([b for _, b in res])
    R = config.reference_runs
    return Reference(pd.mean(axis=0), pd.std(axis=0, ddof=1) / math.sqrt(R),
                     pfi.mean(axis=0), pfi.std(axis=0, ddof=1) / math.sqrt(R), R,
                     pd if keep_runs else None, pfi if keep_runs else None)


# ---------------------------------------------------------------- repetitions


@dataclass
class RunResult:
    """Per-repetition, per-split model-PD/PFI values of one simulated cell."""

    pd: np.ndarray          # (reps, m, p, G)
    pfi: np.ndarray         # (reps, m, p)
    c: np.ndarray           # (reps,) correction constant of each repetition's plan
    ok: np.ndarray          # (reps,) bool
    redrawn: int
    errors: list


def _repetition(config, spec, learner, r):
    rep_seed = _rng.derive(config.seed, _rng.REPETITION, r)
    m, n = config.m, config.n
    if config.resampling == "fresh":
        out = [_fresh_run(config, spec, learner, _rng.derive(rep_seed, _rng.DATA, d)) for d in range(m)]
        c = 0.0
    else:
        ds = sample_dgp(spec, n, rep_seed)
        plan = make_plan(config.resampling, n, m, rep_seed, config.fraction)
        out = []
        for d, (tr, te) in enumerate(plan.splits):
            model = learner.fit(view(ds, tr), fit_seed(rep_seed, d))
            out.append(split_estimates(model, ds.features[te], ds.target[te], config.grid,
                                       _sampler(config, _rng.derive(rep_seed, _rng.SAMPLER, d))))
        c = correction_constant(plan)
    return np.stack([a for a, _ in out]), np.stack([b for _, b in out]), c


def simulate(config: CoverageConfig, threads=1) -> RunResult:
    """Run all repetitions of a cell; failed repetitions are retried once with
    a derived seed, then recorded and excluded."""
    spec, learner = config.spec(), config.learner.build()

    def one(r):
        for attempt in range(2):
            cfg = config if attempt == 0 else config.model_copy(
                update={"seed": _rng.derive(config.seed, _rng.REPETITION, r, 1)})
            try:
                return (*_repetition(cfg, spec, learner, r), attempt, None)
            except (NumericalError, ValidationError, ArithmeticError, np.linalg.LinAlgError) as e:
                err = f"repetition {r} attempt {attempt}: {e}"
        return None, None, None, 2, err

    res = pmap(one, config.repetitions, threads)
    p, G, m = config.spec().p, len(config.grid), config.m
    R = config.repetitions
    pd = np.full((R, m, p, G), np.nan)
    pfi = np.full((R, m, p), np.nan)
    c = np.zeros(R)
    ok = np.zeros(R, dtype=bool)
    errors, redrawn = [], 0
    for r, (a, b, cc, attempt, err) in enumerate(res):
        if a is None:
            errors.append(err)
            continue
        pd[r], pfi[r], c[r], ok[r] = a, b, cc, True
        redrawn += attempt
    return RunResult(pd, pfi, c, ok, redrawn, errors)


# ---------------------------------------------------------------- summaries


@dataclass
class CellSummary:
    config: CoverageConfig
    pd_coverage: float
    pd_width: float
    pd_coverage_se: float
    pfi_coverage: float
    pfi_width: float
    pfi_coverage_se: float
    pd_coverage_detail: np.ndarray   # (p, G)
    pfi_coverage_detail: np.ndarray  # (p,)
    failures: int
    redrawn: int
    valid: bool

    def rows(self):
        cfg = self.config
        base = {"dgp": cfg.dgp, "model": cfg.learner.name, "n": cfg.n, "mode": cfg.resampling,
                "corrected": cfg.corrected}
        return [{**base, "target": "pd", "coverage": self.pd_coverage, "mean_width": self.pd_width},
                {**base, "target": "pfi", "coverage": self.pfi_coverage, "mean_width": self.pfi_width}]

    def to_dict(self):
        return {"config": self.config.model_dump(mode="json"),
                "pd": {"coverage": self.pd_coverage, "coverage_se": self.pd_coverage_se,
                       "mean_width": self.pd_width, "detail": self.pd_coverage_detail.tolist()},
                "pfi": {"coverage": self.pfi_coverage, "coverage_se": self.pfi_coverage_se,
                        "mean_width": self.pfi_width, "detail": self.pfi_coverage_detail.tolist()},
                "failures": self.failures, "redrawn": self.redrawn, "valid": self.valid}


def summarize(config: CoverageConfig, run: RunResult, ref: Reference) -> CellSummary:
    """Coverage of the reference by the learner intervals, averaged over
    features (and grid points for PD) per repetition, then over repetitions."""
    ok = run.ok
    if not ok.any():
        raise NumericalError("every repetition failed")
    pd, pfi = run.pd[ok], run.pfi[ok]
    cs = run.c[ok] if (config.corrected and config.resampling != "fresh") else np.zeros(ok.sum())
    R = pd.shape[0]
    pd_cov = np.empty((R,) + pd.shape[2:], dtype=bool)
    pd_w = np.empty((R,) + pd.shape[2:])
    pfi_cov = np.empty((R, pfi.shape[2]), dtype=bool)
    pfi_w = np.empty((R, pfi.shape[2]))
    for r in range(R):
        mu, _, half = mean_interval_arrays(pd[r], cs[r], config.alpha)
        pd_cov[r] = np.abs(mu - ref.pd) <= half
        pd_w[r] = 2 * half
        mu, _, half = mean_interval_arrays(pfi[r], cs[r], config.alpha)
        pfi_cov[r] = np.abs(mu - ref.pfi) <= half
        pfi_w[r] = 2 * half
    per_rep_pd = pd_cov.reshape(R, -1).mean(axis=1)
    per_rep_pfi = pfi_cov.mean(axis=1)
    se = (lambda a: float(a.std(ddof=1) / math.sqrt(R)) if R > 1 else float("nan"))
    failures = int((~ok).sum())
    return CellSummary(config, float(per_rep_pd.mean()), float(pd_w.mean()), se(per_rep_pd),
                       float(per_rep_pfi.mean()), float(pfi_w.mean()), se(per_rep_pfi),
                       pd_cov.mean(axis=0), pfi_cov.mean(axis=0), failures, run.redrawn,
                       failures <= MAX_FAILURE_RATE * config.repetitions)


REPORT_COLUMNS = ["dgp", "model", "n", "mode", "corrected", "target", "coverage", "mean_width"]


@dataclass
class CoverageReport:
    cells: list
    references: dict
    errors: list = field(default_factory=list)

    def rows(self):
        return [row for cell in self.cells for row in cell.rows()]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(REPORT_COLUMNS)
        for row in self.rows():
            w.writerow([str(row[c]).lower() if isinstance(row[c], bool) else fmt(row[c]) for c in REPORT_COLUMNS])
        return buf.getvalue()

    def to_dict(self):
        return {"version": __version__, "cells": [c.to_dict() for c in self.cells],
                "references": [{"key": list(map(str, k)), **v.to_dict()} for k, v in self.references.items()],
                "errors": self.errors}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def cell(self, **match):
        """The unique cell whose config matches every given field."""
        hits = [c for c in self.cells if all(_field(c.config, k) == v for k, v in match.items())]
        if len(hits) != 1:
            raise KeyError(f"{len(hits)} cells match {match}")
        return hits[0]


def _field(cfg, k):
    return cfg.learner.name if k == "learner" else getattr(cfg, k)


def run_cells(configs, threads=1) -> CoverageReport:
    """Simulate several cells, sharing references and runs where configs allow.

    Cells that differ only in ``corrected`` reuse one simulation; cells with
    the same DGP, learner, n and seeds reuse one reference.
    """
    refs, runs, cells, errors = {}, {}, [], []
    for cfg in configs:
        rk, uk = cfg.reference_key(), cfg.run_key()
        if rk not in refs:
            log.info("reference %s %s n=%d (%d runs)", cfg.dgp, cfg.learner.name, cfg.n, cfg.reference_runs)
            refs[rk] = reference_expectations(cfg, threads)
        if uk not in runs:
            log.info("simulate %s %s n=%d %s", cfg.dgp, cfg.learner.name, cfg.n, cfg.resampling)
            runs[uk] = simulate(cfg, threads)
            errors.extend(runs[uk].errors)
        cells.append(summarize(cfg, runs[uk], refs[rk]))
    return CoverageReport(cells, refs, errors)


def coverage_experiment(config: CoverageConfig, threads=1) -> CellSummary:
    """Coverage and mean width of one cell."""
    return run_cells([config], threads).cells[0]


def refit_sweep(config: CoverageConfig, m_values, threads=1) -> list:
    """Coverage and width as functions of the number of refits ``m``."""
    ref = reference_expectations(config, threads)
    out = []
    for m in m_values:
        if int(m) < 2:
            raise ValidationError(f"every m must be >= 2, got {m}")
        cfg = config.model_copy(update={"m": int(m)})
        s = summarize(cfg, simulate(cfg, threads), ref)
        out.append({"m": int(m), "pd_coverage": s.pd_coverage, "pd_width": s.pd_width,
                    "pfi_coverage": s.pfi_coverage, "pfi_width": s.pfi_width})
    return out


# ---------------------------------------------------------------- presets

TABLE_DGPS = ("linear", "nonlinear")
TABLE_LEARNERS = ("lm", "rf", "tree")
TABLE_NS = (100, 1000)


def tables12(**overrides):
    """The 2 DGP x 3 learner x 2 n x {bootstrap, subsample} x {raw, corrected} grid."""
    out = []
    for dgp in TABLE_DGPS:
        for lrn in TABLE_LEARNERS:
            for n in TABLE_NS:
                for mode in ("bootstrap", "subsample"):
                    for corr in (False, True):
                        out.append(_preset(overrides, dgp=dgp, learner=lrn, n=n, resampling=mode, corrected=corr))
    return out


def _preset(overrides, learner, **fields):
    ov = dict(overrides)
    params = dict(ov.pop("learner_params", {}).get(learner, {}))
    return CoverageConfig(**{**fields, **ov, "learner": LearnerSpec(name=learner, params=params)})


def preset(name: str, **overrides):
    """Named scenario lists. ``ideal-<learner>-<dgp>`` and
    ``<boot|subs>-<learner>-<dgp>`` give one raw and one corrected cell at n=100."""
    if name == "tables12":
        return tables12(**overrides)
    parts = name.split("-")
    if len(parts) == 3 and parts[1] in TABLE_LEARNERS + ("mean",) and parts[2] in TABLE_DGPS:
        mode = {"ideal": "fresh", "boot": "bootstrap", "subs": "subsample"}.get(parts[0])
        if mode is not None:
            if mode == "fresh":
                return [_preset(overrides, dgp=parts[2], learner=parts[1], resampling=mode, corrected=False)]
            return [_preset(overrides, dgp=parts[2], learner=parts[1], resampling=mode, corrected=c)
                    for c in (False, True)]
    raise ValidationError(f"unknown preset {name!r}")


PRESETS = ("tables12", "ideal-<lm|rf|tree>-<linear|nonlinear>", "boot-<learner>-<dgp>", "subs-<learner>-<dgp>")
