"""Command line interface: generate data, run solves, run the benchmark, report.

Flags may also be supplied through a JSON config file (--config); explicit
flags take precedence over the file, which takes precedence over built-in
defaults.  Every subcommand writes a manifest with the fully resolved
parameters, so a run is reproducible from its manifest alone.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .altmin import AltMinConfig, noconv_solve
from .benchmark import (
    ALL_METHODS,
    SUMMARY_CSV_COLUMNS,
    TABLE1_ROWS,
    TRIAL_CSV_COLUMNS,
    ExperimentSpec,
    TrialRecord,
    generate_synthetic,
    render_table,
    run_config,
    summarize,
    summary_csv,
    trials_csv,
)
from .convex import SolverConfig, grow_and_solve
from .linalg import read_matrix, write_matrix
from .norms import NormSpec, decomposition_norm
from .rounding import round_estimation
from .shrinkage import entrywise_soft_threshold, row_group_threshold, svt

_GEN_DEFAULTS = {"n": 100, "p": 10, "m": 10, "s": 2, "sigma": 0.6, "seed": 0,
                 "trial": 0, "out_dir": "."}
_SOLVE_DEFAULTS = {"threshold": None, "lam": None, "nu": 0.5, "m": None,
                   "eps": None, "grad_tol": 1e-7, "max_iter": 2000,
                   "m_init": None, "m_max": None, "eig_tol": 1e-6, "seed": 0,
                   "restarts": 5, "max_sweeps": 200, "out_dir": "."}
_BENCH_DEFAULTS = {"table1_row": None, "n": 100, "p": None, "m": None, "s": None,
                   "sigma": 0.6, "replications": 10, "seed": 0,
                   "methods": ",".join(ALL_METHODS), "out_dir": ".",
                   "workers": 1, "lambda_grid": None, "nu_grid": None,
                   "m_grid": None}

_SHRINKAGE = {
    "svt": (svt, NormSpec("l2", "l2")),
    "row-threshold": (row_group_threshold, NormSpec("l1", "l2")),
    "entry-threshold": (entrywise_soft_threshold, NormSpec("l1", "l1")),
}


def _add_config_flag(sub):
    sub.add_argument("--config", type=str, default=None,
                     help="JSON file with flag defaults (flags win)")


def _resolve(args, defaults: dict) -> dict:
    """Merge CLI values, config-file values and built-in defaults."""
    from_file = {}
    if getattr(args, "config", None):
        with open(args.config) as fh:
            from_file = json.load(fh)
        unknown = set(from_file) - set(defaults)
        if unknown:
            raise SystemExit(f"error: unknown config keys: {sorted(unknown)}")
    resolved = {}
    for key, default in defaults.items():
        cli_value = getattr(args, key, None)
        if cli_value is not None:
            resolved[key] = cli_value
        elif key in from_file:
            resolved[key] = from_file[key]
        else:
            resolved[key] = default
    return resolved


def _write_manifest(out_dir: Path, command: str, params: dict):
    manifest = {"command": command, "version": __version__, "parameters": params}
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2,
                                                      sort_keys=True) + "\n")


def _float_list(text):
    return tuple(float(v) for v in str(text).split(","))


def _int_list(text):
    return tuple(int(v) for v in str(text).split(","))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="decompnorm",
        description="Sparse matrix factorization via decomposition norms.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    subs = parser.add_subparsers(dest="command", required=True)

    gen = subs.add_parser("gen", help="generate a synthetic denoising instance")
    for flag, typ in (("--n", int), ("--p", int), ("--m", int), ("--s", int),
                      ("--sigma", float), ("--seed", int), ("--trial", int)):
        gen.add_argument(flag, type=typ, default=None)
    gen.add_argument("--out-dir", type=str, default=None)
    _add_config_flag(gen)

    solve = subs.add_parser("solve", help="run a single solver on a matrix file")
    solve.add_argument("--method", required=True,
                       choices=sorted(_SHRINKAGE) + ["convex", "convex-rounded",
                                                     "altmin"])
    solve.add_argument("--input", required=True, type=str)
    solve.add_argument("--out-dir", type=str, default=None)
    solve.add_argument("--threshold", type=float, default=None)
    solve.add_argument("--lambda", dest="lam", type=float, default=None)
    solve.add_argument("--nu", type=float, default=None)
    solve.add_argument("--m", type=int, default=None)
    solve.add_argument("--eps", type=float, default=None)
    solve.add_argument("--grad-tol", type=float, default=None)
    solve.add_argument("--max-iter", type=int, default=None)
    solve.add_argument("--m-init", type=int, default=None)
    solve.add_argument("--m-max", type=int, default=None)
    solve.add_argument("--eig-tol", type=float, default=None)
    solve.add_argument("--seed", type=int, default=None)
    solve.add_argument("--restarts", type=int, default=None)
    solve.add_argument("--max-sweeps", type=int, default=None)
    _add_config_flag(solve)

    bench = subs.add_parser("bench", help="run benchmark configurations")
    bench.add_argument("--table1-row", type=int, default=None,
                       help=f"standard row 1..{len(TABLE1_ROWS)} selecting (P, M, S)")
    for flag, typ in (("--n", int), ("--p", int), ("--m", int), ("--s", int),
                      ("--sigma", float), ("--replications", int),
                      ("--seed", int), ("--workers", int)):
        bench.add_argument(flag, type=typ, default=None)
    bench.add_argument("--methods", type=str, default=None)
    bench.add_argument("--out-dir", type=str, default=None)
    bench.add_argument("--lambda-grid", type=str, default=None)
    bench.add_argument("--nu-grid", type=str, default=None)
    bench.add_argument("--m-grid", type=str, default=None)
    _add_config_flag(bench)

    rep = subs.add_parser("report", help="summarize a trial CSV")
    rep.add_argument("--trials", required=True, type=str)
    rep.add_argument("--out", type=str, default=None)
    return parser


def _cmd_gen(args) -> int:
    params = _resolve(args, _GEN_DEFAULTS)
    spec = ExperimentSpec(n=params["n"], p=params["p"], m_true=params["m"],
                          s=params["s"], sigma=params["sigma"],
                          replications=1, seed=params["seed"])
    out_dir = Path(params["out_dir"])
    out_dir.mkdir(parents=True, exist_ok=True)
    y0, y, u_true, v_true = generate_synthetic(spec, params["trial"])
    for name, mat in (("Y", y), ("Y0", y0), ("U_true", u_true),
                      ("V_true", v_true)):
        write_matrix(out_dir / f"{name}.txt", mat)
    _write_manifest(out_dir, "gen", params)
    print(f"wrote Y.txt Y0.txt U_true.txt V_true.txt manifest.json to {out_dir}")
    return 0


def _solver_config(params, n: int) -> SolverConfig:
    return SolverConfig(
        eps=params["eps"],
        grad_tol=params["grad_tol"],
        max_iter=params["max_iter"],
        m_init=params["m_init"] if params["m_init"] is not None else min(n, 8),
        m_max=params["m_max"],
        eig_tol=params["eig_tol"],
        seed=params["seed"],
    )


def _cmd_solve(args) -> int:
    params = _resolve(args, _SOLVE_DEFAULTS)
    params["method"] = args.method
    params["input"] = args.input
    out_dir = Path(params["out_dir"])
    out_dir.mkdir(parents=True, exist_ok=True)
    y = read_matrix(args.input)
    n, p = y.shape
    start = time.perf_counter()
    summary = {"method": args.method, "version": __version__}
    try:
        if args.method in _SHRINKAGE:
            if params["threshold"] is None:
                raise SystemExit(f"error: --threshold is required for {args.method}")
            op, spec = _SHRINKAGE[args.method]
            x = op(y, params["threshold"])
            write_matrix(out_dir / "X.txt", x)
            lam = params["threshold"] / (n * p)
            summary["objective"] = (
                float(np.sum((y - x) ** 2)) / (2 * n * p)
                + lam * decomposition_norm(x, spec)
            )
            summary["certified_global"] = True
            svals = np.linalg.svd(x, compute_uv=False)
            summary["rank_estimate"] = int(np.sum(svals > 1e-10 * max(svals[0], 1)))
        elif args.method in ("convex", "convex-rounded"):
            if params["lam"] is None:
                raise SystemExit("error: --lambda is required for convex methods")
            config = _solver_config(params, n)
            sol = grow_and_solve(y, params["lam"], params["nu"], config)
            summary["certified_global"] = sol.certified_global
            summary["rank_estimate"] = sol.rank_estimate
            if args.method == "convex":
                summary["objective"] = sol.objective
                x, u, v = sol.x, sol.u, sol.v
            else:
                rounded = round_estimation(y, params["lam"], params["nu"], sol.u)
                summary["pre_rounding_objective"] = sol.objective
                summary["post_rounding_objective"] = rounded.objective
                summary["objective"] = rounded.objective
                x, u, v = rounded.x, rounded.u, rounded.v
            write_matrix(out_dir / "X.txt", x)
            write_matrix(out_dir / "U.txt", u)
            write_matrix(out_dir / "V.txt", v)
        else:
            if params["lam"] is None or params["m"] is None:
                raise SystemExit("error: --lambda and --m are required for altmin")
            config = AltMinConfig(max_sweeps=params["max_sweeps"],
                                  restarts=params["restarts"],
                                  seed=params["seed"])
            sol = noconv_solve(y, params["lam"], params["m"], config)
            summary["objective"] = sol.objective
            summary["certified_global"] = False
            summary["rank_estimate"] = params["m"]
            write_matrix(out_dir / "X.txt", sol.x)
            write_matrix(out_dir / "U.txt", sol.u)
            write_matrix(out_dir / "V.txt", sol.v)
    except (ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    summary["wall_time_s"] = time.perf_counter() - start
    summary["parameters"] = params
    (out_dir / "summary.json").write_text(
        json.dumps(summary, indent=2, sort_keys=True) + "\n")
    _write_manifest(out_dir, "solve", params)
    print(json.dumps(summary, indent=2, sort_keys=True))
    return 0


def _cmd_bench(args) -> int:
    params = _resolve(args, _BENCH_DEFAULTS)
    if params["table1_row"] is not None:
        row = int(params["table1_row"])
        if not 1 <= row <= len(TABLE1_ROWS):
            raise SystemExit(f"error: --table1-row must be in 1..{len(TABLE1_ROWS)}")
        p, m, s = TABLE1_ROWS[row - 1]
        params["p"], params["m"], params["s"] = p, m, s
    if params["p"] is None or params["m"] is None or params["s"] is None:
        raise SystemExit("error: give --table1-row or all of --p, --m, --s")
    try:
        spec = ExperimentSpec(
            n=params["n"], p=params["p"], m_true=params["m"], s=params["s"],
            sigma=params["sigma"], replications=params["replications"],
            seed=params["seed"],
            lambda_grid=_float_list(params["lambda_grid"]) if params["lambda_grid"] else None,
            nu_grid=_float_list(params["nu_grid"]) if params["nu_grid"] else (0.0, 0.25, 0.5, 0.75, 1.0),
            m_grid=_int_list(params["m_grid"]) if params["m_grid"] else None,
        )
    except ValueError as exc:
        raise SystemExit(f"error: {exc}")
    methods = tuple(params["methods"].split(","))
    out_dir = Path(params["out_dir"])
    out_dir.mkdir(parents=True, exist_ok=True)
    records, failures = run_config(spec, methods=methods,
                                   workers=params["workers"],
                                   on_error="collect")
    (out_dir / "trials.csv").write_text(trials_csv(records))
    if records:
        rows = summarize(records)
        (out_dir / "summary.csv").write_text(summary_csv(rows))
        print(render_table(rows))
    _write_manifest(out_dir, "bench", params)
    if failures:
        for trial, message in failures:
            print(f"trial {trial} failed: {message}", file=sys.stderr)
        return 1
    return 0


def _cmd_report(args) -> int:
    records = []
    with open(args.trials) as fh:
        reader = csv.DictReader(fh)
        missing = set(TRIAL_CSV_COLUMNS) - set(reader.fieldnames or ())
        if missing:
            raise SystemExit(f"error: trial CSV missing columns {sorted(missing)}")
        for row in reader:
            records.append(TrialRecord(
                config_id=row["config_id"], n=int(row["n"]), p=int(row["p"]),
                m_true=int(row["m_true"]), s=int(row["s"]),
                method=row["method"],
                lam=float(row["lambda"]) if row["lambda"] else None,
                nu=float(row["nu"]) if row["nu"] else None,
                m=int(row["m"]) if row["m"] else None,
                trial=int(row["trial"]), error=float(row["error"]),
                improvement_pct=float(row["improvement_pct"]),
            ))
    if not records:
        raise SystemExit("error: no records in trial CSV")
    rows = summarize(records)
    print(render_table(rows))
    if args.out:
        Path(args.out).write_text(summary_csv(rows))
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "gen":
        return _cmd_gen(args)
    if args.command == "solve":
        return _cmd_solve(args)
    if args.command == "bench":
        return _cmd_bench(args)
    return _cmd_report(args)


if __name__ == "__main__":
    sys.exit(main())
