"""Command-line entry point.

Subcommands: ``simulate`` (Monte-Carlo estimator benchmark), ``decompose``
(fit the low-rank-plus-sparse split on a matrix or data file), ``backtest``
(rolling minimum-variance portfolio evaluation), and ``check`` (oracle
suites on random instances).

Every command writes into a run directory containing a manifest
(command, full parameter echo, seed, version, input digests) so runs can
be reproduced bit for bit. Exit codes: 0 success, 2 invalid input,
3 numeric failure, 4 check-suite failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import __version__, check, metrics, models, tuning
from .estimators import KINDS, EstimatorSpec, estimate
from .exceptions import NumericError
from .linalg import hard_threshold, load_matrix_csv, sample_covariance
from .portfolio import load_returns_csv, rolling_backtest, save_backtest_per_year_csv
from .solver import SolverConfig, save_result, solve

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_NUMERIC = 3
EXIT_CHECK_FAILED = 4


def _sha256(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_manifest(out_dir: str, command: str, args: argparse.Namespace,
                    input_paths: list[str]) -> None:
    config = {k: v for k, v in sorted(vars(args).items()) if k != "func"}
    manifest = {
        "command": command,
        "config": config,
        "seed": config.get("seed"),
        "tool_version": __version__,
        "input_digests": {p: _sha256(p) for p in input_paths if os.path.isfile(p)},
    }
    with open(os.path.join(out_dir, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _rep_seed(seed: int, rep: int) -> int:
    """Portable per-replication seed derived from (seed, rep)."""
    return int(np.random.SeedSequence((int(seed), int(rep))).generate_state(1, np.uint64)[0])


# ---------------------------------------------------------------------------
# simulate

def _simulate_replication(task: tuple) -> dict:
    family, p, n, rep, seed, estimators, grid_size, tau_scale = task
    rep_seed = _rep_seed(seed, rep)
    model = models.GENERATORS[family](p, rep_seed)
    data = models.sample_gaussian(model, n, rep_seed)
    sigma_n = sample_covariance(data)
    grid = tuning.default_grid(sigma_n, size=grid_size)
    tau = tau_scale * math.sqrt(math.log(p) / n)

    out = {}
    for kind in estimators:
        if kind == "sample":
            params = {}
        elif kind == "shrink_to_identity":
            candidates = [
                EstimatorSpec(kind, {"w": w})
                for w in np.linspace(0.1, 1.0, grid_size)
            ]
            params, _ = tuning.kfold_cv(
                data, grid, 5, kind, rep_seed, candidates=candidates
            )
        elif kind == "lorec_thresholded_input":
            params, _ = tuning.kfold_cv(data, grid, 5, kind, rep_seed, tau=tau)
        else:
            params, _ = tuning.kfold_cv(data, grid, 5, kind, rep_seed)
        fitted, decomp = estimate(EstimatorSpec(kind, params), data)
        report = metrics.score(fitted, decomp, model)
        out[kind] = (params, report)
    return out


def cmd_simulate(args: argparse.Namespace) -> int:
    estimators = [e.strip() for e in args.estimators.split(",") if e.strip()]
    for kind in estimators:
        if kind not in KINDS:
            raise ValueError(f"unknown estimator {kind!r}; expected one of {KINDS}")
    if args.reps < 1:
        raise ValueError(f"reps must be >= 1, got {args.reps}")
    os.makedirs(args.out, exist_ok=True)

    tasks = [
        (args.family, args.p, args.n, rep, args.seed, tuple(estimators),
         args.grid_size, args.tau_scale)
        for rep in range(args.reps)
    ]
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_simulate_replication, tasks))
    else:
        results = [_simulate_replication(t) for t in tasks]

    agg_rows = []
    for kind in estimators:
        reports = [res[kind][1] for res in results]
        extra = [
            {"rep": rep, **{k: v for k, v in res[kind][0].items()}}
            for rep, res in enumerate(results)
        ]
        metrics.save_reports_csv(
            os.path.join(args.out, f"reports_{kind}.csv"), reports, extra
        )
        summary = metrics.aggregate(reports)
        for stat in sorted(summary):
            fs = summary[stat]
            agg_rows.append([kind, args.p, stat, repr(fs.mean), repr(fs.se), fs.count])

    with open(os.path.join(args.out, "aggregate.csv"), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["estimator", "p", "statistic", "mean", "se", "count"])
        writer.writerows(agg_rows)

    _write_manifest(args.out, "simulate", args, [])
    return EXIT_OK


# ---------------------------------------------------------------------------
# decompose

def cmd_decompose(args: argparse.Namespace) -> int:
    os.makedirs(args.out, exist_ok=True)
    if args.data:
        data = np.loadtxt(args.input, delimiter=",", ndmin=2)
        sigma = sample_covariance(data)
    else:
        data = None
        sigma = load_matrix_csv(args.input)

    if args.cv:
        if data is None:
            raise ValueError("--cv needs an observation file (pass --data)")
        grid = tuning.default_grid(sigma, size=args.grid_size)
        if args.threshold_input is not None:
            params, _ = tuning.kfold_cv(
                data, grid, 5, "lorec_thresholded_input", args.seed,
                tau=args.threshold_input,
                epsilon=args.epsilon, max_iter=args.max_iter,
            )
        else:
            params, _ = tuning.kfold_cv(
                data, grid, 5, "lorec", args.seed,
                epsilon=args.epsilon, max_iter=args.max_iter,
            )
        lam, rho = params["lambda"], params["rho"]
    else:
        if args.lam is None or args.rho is None:
            raise ValueError("pass both --lambda and --rho, or use --cv")
        lam, rho = args.lam, args.rho

    target = sigma
    if args.threshold_input is not None:
        target = hard_threshold(sigma, args.threshold_input)

    config = SolverConfig(
        lam=lam,
        rho=rho,
        step_l=args.step_l,
        epsilon=args.epsilon,
        max_iter=args.max_iter,
        penalize_diagonal=not args.no_diag_penalty,
    )
    result = solve(target, config)
    save_result(args.out, result, config)
    _write_manifest(args.out, "decompose", args, [args.input])
    print(
        f"rank={result.estimate.rank} support={len(result.estimate.support)} "
        f"iterations={result.iterations} converged={result.converged}"
    )
    return EXIT_OK


# ---------------------------------------------------------------------------
# backtest

def cmd_backtest(args: argparse.Namespace) -> int:
    os.makedirs(args.out, exist_ok=True)
    panel = load_returns_csv(args.returns, annualize=args.annualize)
    # Tunable parameters are placeholders: the backtest re-tunes them per
    # test year from its candidate grid. Only the kind (and tau for the
    # thresholded-input variant) carries through.
    params = {}
    if args.estimator == "lorec_thresholded_input":
        if args.tau is None:
            raise ValueError("--estimator lorec_thresholded_input needs --tau")
        params["tau"] = args.tau
    if args.estimator in ("lorec", "lorec_thresholded_input"):
        params.setdefault("lambda", 1.0)
        params.setdefault("rho", 1.0)
    elif args.estimator == "hard_threshold":
        params["tau"] = args.tau if args.tau is not None else 0.0
    elif args.estimator == "shrink_to_identity":
        params["w"] = 0.5
    spec = EstimatorSpec(args.estimator, params)
    record = rolling_backtest(
        panel,
        spec,
        q=args.q,
        window_months=args.window_months,
        tuning_lookback_years=args.lookback_years,
        grid_size=args.grid_size,
    )
    with open(os.path.join(args.out, "backtest.json"), "w") as fh:
        json.dump(record.to_json_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    save_backtest_per_year_csv(os.path.join(args.out, "per_year.csv"), record)
    _write_manifest(args.out, "backtest", args, [args.returns])
    print(
        f"years={record.years[0]}-{record.years[-1]} "
        f"variance={record.realized_variance:.6g} "
        f"(se {record.realized_variance_se:.3g})"
    )
    return EXIT_OK


# ---------------------------------------------------------------------------
# check

def cmd_check(args: argparse.Namespace) -> int:
    names = sorted(check.SUITES) if args.suite == "all" else [args.suite]
    failures = check.run_suites(names, seed=args.seed)
    failed = False
    for name in names:
        msgs = failures[name]
        status = "PASS" if not msgs else "FAIL"
        print(f"{name}: {status}")
        for msg in msgs:
            print(f"  {msg}")
        failed = failed or bool(msgs)
    return EXIT_CHECK_FAILED if failed else EXIT_OK


# ---------------------------------------------------------------------------

def _default_jobs() -> int:
    try:
        return max(1, int(os.environ.get("LOREC_JOBS", "1")))
    except ValueError:
        return 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lorec",
        description="Low-rank plus sparse covariance decomposition toolkit",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="Monte-Carlo estimator benchmark")
    p_sim.add_argument("--family", required=True, choices=sorted(models.GENERATORS))
    p_sim.add_argument("--p", type=int, required=True)
    p_sim.add_argument("--n", type=int, default=100)
    p_sim.add_argument("--reps", type=int, default=100)
    p_sim.add_argument(
        "--estimators",
        default="lorec,sample,hard_threshold,shrink_to_identity",
        help="comma-separated estimator kinds",
    )
    p_sim.add_argument("--seed", type=int, default=0)
    p_sim.add_argument("--grid-size", type=int, default=10)
    p_sim.add_argument("--tau-scale", type=float, default=1.0,
                       help="input-threshold scale for lorec_thresholded_input")
    p_sim.add_argument("--jobs", type=int, default=_default_jobs())
    p_sim.add_argument("--out", required=True)
    p_sim.set_defaults(func=cmd_simulate)

    p_dec = sub.add_parser("decompose", help="fit the decomposition")
    p_dec.add_argument("input", help="matrix CSV, or observation CSV with --data")
    p_dec.add_argument("--data", action="store_true",
                       help="treat input rows as observations")
    p_dec.add_argument("--lambda", dest="lam", type=float, default=None)
    p_dec.add_argument("--rho", type=float, default=None)
    p_dec.add_argument("--cv", action="store_true",
                       help="pick penalties by 5-fold cross-validation")
    p_dec.add_argument("--threshold-input", type=float, default=None, metavar="TAU")
    p_dec.add_argument("--no-diag-penalty", action="store_true")
    p_dec.add_argument("--epsilon", type=float, default=1e-4)
    p_dec.add_argument("--max-iter", type=int, default=5000)
    p_dec.add_argument("--step-l", type=float, default=2.0)
    p_dec.add_argument("--grid-size", type=int, default=10)
    p_dec.add_argument("--seed", type=int, default=0)
    p_dec.add_argument("--out", required=True)
    p_dec.set_defaults(func=cmd_decompose)

    p_bt = sub.add_parser("backtest", help="rolling minimum-variance backtest")
    p_bt.add_argument("returns", help="returns CSV (header: date,TICKER,...)")
    p_bt.add_argument("--estimator", default="lorec", choices=sorted(KINDS))
    p_bt.add_argument("--q", type=float, default=None)
    p_bt.add_argument("--tau", type=float, default=None)
    p_bt.add_argument("--window-months", type=int, default=120)
    p_bt.add_argument("--lookback-years", type=int, default=5)
    p_bt.add_argument("--annualize", action="store_true")
    p_bt.add_argument("--grid-size", type=int, default=5)
    p_bt.add_argument("--seed", type=int, default=0)
    p_bt.add_argument("--out", required=True)
    p_bt.set_defaults(func=cmd_backtest)

    p_chk = sub.add_parser("check", help="run oracle suites on random instances")
    p_chk.add_argument("--suite", default="all",
                       choices=["all"] + sorted(check.SUITES))
    p_chk.add_argument("--seed", type=int, default=0)
    p_chk.set_defaults(func=cmd_check)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
