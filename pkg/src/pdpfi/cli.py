"""Command-line interface: ``pdpfi analyze | simulate | compare``.

Exit codes: 0 success, 2 input/validation error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import re
import sys
from pathlib import Path

from . import __version__
from .data import load_csv
from .errors import FitError, NumericalError, ValidationError
from .learners import make_learner
from .pd import DEFAULT_G, fmt, learner_pd, make_grid
from .pfi import ReplacementSampler, compare_learners, learner_pfi, pfi_ranking, pfi_table_csv, pfi_table_json, split_losses
from .refit import fit_plan
from .resampling import DEFAULT_M, correction_constant, make_plan

log = logging.getLogger("pdpfi")

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC = 0, 2, 3
SEED_ENV = "PDPFI_SEED"


def parse_learner(text):
    """``"rf"`` or ``"rf:n_trees=50,min_leaf=3"`` -> (name, params)."""
    name, _, rest = text.partition(":")
    params = {}
    for item in filter(None, rest.split(",")):
        key, eq, value = item.partition("=")
        if not eq:
            raise ValidationError(f"bad learner parameter {item!r} (expected key=value)")
        v = value.strip()
        if v.lower() in ("true", "false"):
            params[key.strip()] = v.lower() == "true"
        else:
            try:
                params[key.strip()] = int(v)
            except ValueError:
                raise ValidationError(f"learner parameter {key!r} needs an integer, got {v!r}") from None
    make_learner(name.strip(), **params)  # validates
    return name.strip(), params


def _seed(args):
    env = os.environ.get(SEED_ENV)
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise ValidationError(f"{SEED_ENV}={env!r} is not an integer") from None
    return args.seed


def _dump(obj):
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _safe(name):
    return re.sub(r"[^A-Za-z0-9_.-]+", "_", name)


def _check_alpha_m(alpha, m):
    if not 0 < alpha < 1:
        raise ValidationError(f"--alpha must lie in (0, 1), got {alpha}")
    if not 2 <= m <= 1000:
        raise ValidationError(f"--m must lie in 2..1000, got {m}")


# ---------------------------------------------------------------- analyze


def cmd_analyze(args):
    seed = _seed(args)
    _check_alpha_m(args.alpha, args.m)
    lname, lparams = parse_learner(args.learner)
    learner = make_learner(lname, **lparams)
    data = load_csv(args.data, args.target)
    feats = data.feature_names if not args.features else [f.strip() for f in args.features.split(",")]
    idx = [data.feature_index(f) for f in feats]
    sampler = ReplacementSampler(args.sampler, args.l, args.bins, seed)
    grids = {j: make_grid(data, j, args.grid_size, args.grid_kind) for j in idx}
    if args.resampling == "fresh":
        raise ValidationError("fresh resampling needs simulated data; use bootstrap or subsample")
    plan = make_plan(args.resampling, data.n, args.m, seed)

    models = fit_plan(learner, data, plan, seed, args.threads)
    curves = {j: learner_pd(learner, data, plan, grids[j], args.alpha, seed, models=models) for j in idx}
    pfis = [learner_pfi(learner, data, plan, j, sampler, args.alpha, seed, models=models) for j in idx]
    ranked = pfi_ranking(pfis)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    names = data.feature_names
    for j, curve in curves.items():
        if args.format == "csv":
            (out / f"pd_{_safe(names[j])}.csv").write_text(curve.to_csv(names[j]))
        else:
            (out / f"pd_{_safe(names[j])}.json").write_text(curve.to_json(names[j]) + "\n")
    if args.format == "csv":
        (out / "pfi.csv").write_text(pfi_table_csv(ranked, names))
    else:
        (out / "pfi.json").write_text(pfi_table_json(ranked, names) + "\n")
    meta = {
        "command": "analyze",
        "version": __version__,
        "data": str(args.data),
        "target": args.target,
        "learner": {"name": lname, "params": lparams, "hyperparameters": learner.hyperparameters},
        "resampling": args.resampling,
        "m": args.m,
        "alpha": args.alpha,
        "seed": seed,
        "features": [names[j] for j in idx],
        "grid": {"kind": args.grid_kind, "size": args.grid_size},
        "sampler": sampler.to_dict(),
        "c": correction_constant(plan),
        "format": args.format,
        "plan": plan.to_dict(),
    }
    (out / "run_meta.json").write_text(_dump(meta))
    for r in ranked:
        e = r.estimate.estimate
        print(f"{r.rank:>3} {names[r.estimate.feature]:<24} {e.mean: .6g} [{e.lower: .6g}, {e.upper: .6g}]")
    return EXIT_OK


# ---------------------------------------------------------------- simulate


def cmd_simulate(args):
    from .simulation import config_schema, load_config, preset, run_cells, refit_sweep

    if args.print_schema:
        sys.stdout.write(_dump(config_schema()))
        return EXIT_OK
    if bool(args.config) == bool(args.preset):
        raise ValidationError("give exactly one of --config or --preset")
    overrides = {}
    for key in ("repetitions", "reference_runs", "m", "alpha"):
        if getattr(args, key) is not None:
            overrides[key] = getattr(args, key)
    env_seed = os.environ.get(SEED_ENV)
    if env_seed is not None or args.seed is not None:
        overrides["seed"] = _seed(args) if env_seed is not None else args.seed
    if args.n_trees is not None:
        overrides["learner_params"] = {"rf": {"n_trees": args.n_trees}}
    try:
        if args.config:
            configs = load_config(args.config)
            upd = {k: v for k, v in overrides.items() if k != "learner_params"}
            if args.n_trees is not None:
                configs = [c.model_copy(update={"learner": c.learner.model_copy(
                    update={"params": {**c.learner.params, "n_trees": args.n_trees}})}) if c.learner.name == "rf" else c
                    for c in configs]
            configs = [type(c).model_validate({**c.model_dump(), **upd}) for c in configs]
        else:
            configs = preset(args.preset, **overrides)
    except ValidationError:
        raise
    except Exception as e:  # pydantic validation
        raise ValidationError(str(e)) from None

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.sweep:
        try:
            ms = [int(v) for v in args.sweep.split(",")]
        except ValueError:
            raise ValidationError(f"--sweep needs comma-separated integers, got {args.sweep!r}") from None
        rows = []
        for cfg in configs:
            for r in refit_sweep(cfg, ms, args.threads):
                rows.append({"dgp": cfg.dgp, "model": cfg.learner.name, "n": cfg.n, "mode": cfg.resampling,
                             "corrected": cfg.corrected, **r})
        cols = ["dgp", "model", "n", "mode", "corrected", "m", "pd_coverage", "pd_width", "pfi_coverage", "pfi_width"]
        lines = [",".join(cols)] + [",".join(str(r[c]).lower() if isinstance(r[c], bool) else fmt(r[c]) for c in cols)
                                    for r in rows]
        (out / "sweep.csv").write_text("\n".join(lines) + "\n")
        print(f"wrote {out / 'sweep.csv'}")
        return EXIT_OK

    report = run_cells(configs, args.threads)
    (out / "coverage.csv").write_text(report.to_csv())
    (out / "coverage_meta.json").write_text(report.to_json() + "\n")
    for row in report.rows():
        print(f"{row['dgp']:<10} {row['model']:<5} n={row['n']:<5} {row['mode']:<9} "
              f"corrected={str(row['corrected']).lower():<5} {row['target']:<3} "
              f"coverage={row['coverage']:.3f} width={row['mean_width']:.4f}")
    invalid = [c for c in report.cells if not c.valid]
    if invalid:
        log.warning("%d cell(s) exceeded the failure budget and are flagged invalid", len(invalid))
    return EXIT_OK


# ---------------------------------------------------------------- compare


def cmd_compare(args):
    seed = _seed(args)
    _check_alpha_m(args.alpha, args.m)
    specs = [parse_learner(args.learner_a), parse_learner(args.learner_b)]
    data = load_csv(args.data, args.target)
    if args.resampling == "fresh":
        raise ValidationError("fresh resampling needs simulated data; use bootstrap or subsample")
    plan = make_plan(args.resampling, data.n, args.m, seed)
    losses = [split_losses(make_learner(name, **params), data, plan, seed, threads=args.threads)
              for name, params in specs]
    c = correction_constant(plan)
    diff = compare_learners(losses[0], losses[1], c, args.alpha)
    mse = [float(sum(v.mean() for v in ls) / len(ls)) for ls in losses]
    result = {
        "learner_a": {"spec": args.learner_a, "mean_mse": mse[0]},
        "learner_b": {"spec": args.learner_b, "mean_mse": mse[1]},
        "difference": {"definition": "mse_a - mse_b", **diff.to_dict()},
        "c": c, "m": plan.m, "resampling": plan.mode, "seed": seed, "version": __version__,
    }
    print(f"{args.learner_a}: mean MSE {mse[0]:.6g}")
    print(f"{args.learner_b}: mean MSE {mse[1]:.6g}")
    print(f"difference (a - b): {diff.mean:.6g}, {100 * (1 - args.alpha):g}% CI [{diff.lower:.6g}, {diff.upper:.6g}]")
    if args.json_out:
        Path(args.json_out).write_text(_dump(result))
    return EXIT_OK


# ---------------------------------------------------------------- parser


def build_parser():
    p = argparse.ArgumentParser(prog="pdpfi", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"pdpfi {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, seed_default=0):
        sp.add_argument("--seed", type=int, default=seed_default, help=f"overridden by ${SEED_ENV}")
        sp.add_argument("--threads", type=int, default=0, help="worker processes (0 = all cores)")

    a = sub.add_parser("analyze", help="learner-PD and learner-PFI with confidence intervals for a CSV dataset")
    a.add_argument("--data", required=True)
    a.add_argument("--target", required=True)
    a.add_argument("--learner", default="rf", help="lm | tree | rf | mean, optionally name:key=value,...")
    a.add_argument("--resampling", choices=("bootstrap", "subsample"), default="bootstrap")
    a.add_argument("--m", type=int, default=DEFAULT_M)
    a.add_argument("--alpha", type=float, default=0.05)
    a.add_argument("--features", default="", help="comma-separated feature names (default: all)")
    a.add_argument("--grid-kind", choices=("equidistant", "quantile"), default="equidistant")
    a.add_argument("--grid-size", type=int, default=DEFAULT_G)
    a.add_argument("--sampler", choices=("marginal", "conditional_binned"), default="marginal")
    a.add_argument("--l", type=int, default=None, help="replacement repetitions per row")
    a.add_argument("--bins", type=int, default=5)
    a.add_argument("--out", required=True)
    a.add_argument("--format", choices=("csv", "json"), default="csv")
    common(a)
    a.set_defaults(func=cmd_analyze)

    s = sub.add_parser("simulate", help="coverage experiments against simulated ground truth")
    s.add_argument("--config", help="CoverageConfig JSON (object or list)")
    s.add_argument("--preset", help="tables12, ideal-<learner>-<dgp>, boot-<learner>-<dgp>, subs-<learner>-<dgp>")
    s.add_argument("--out", default="simulation_out")
    s.add_argument("--repetitions", type=int)
    s.add_argument("--reference-runs", dest="reference_runs", type=int)
    s.add_argument("--m", type=int)
    s.add_argument("--alpha", type=float)
    s.add_argument("--n-trees", dest="n_trees", type=int, help="override the forest size of rf cells")
    s.add_argument("--sweep", help="comma-separated refit counts; writes sweep.csv instead of coverage.csv")
    s.add_argument("--print-schema", action="store_true", help="print the config JSON schema and exit")
    common(s, seed_default=None)
    s.set_defaults(func=cmd_simulate)

    c = sub.add_parser("compare", help="corrected interval for the MSE difference of two learners")
    c.add_argument("--data", required=True)
    c.add_argument("--target", required=True)
    c.add_argument("--learner-a", required=True)
    c.add_argument("--learner-b", required=True)
    c.add_argument("--resampling", choices=("bootstrap", "subsample"), default="bootstrap")
    c.add_argument("--m", type=int, default=DEFAULT_M)
    c.add_argument("--alpha", type=float, default=0.05)
    c.add_argument("--json-out")
    common(c)
    c.set_defaults(func=cmd_compare)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except FitError as e:
        print(f"error: numerical failure on split {e.split}: {e.cause}", file=sys.stderr)
        return EXIT_NUMERIC
    except NumericalError as e:
        print(f"error: numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ValidationError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
