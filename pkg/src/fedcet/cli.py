"""Command-line interface.

Subcommands:

    run           execute the configured experiment, write per-(algorithm,
                  seed) CSV files, figures, and a replayable manifest
    compare       run + an aligned per-round comparison table per seed
    lr-search     print the learning-rate scan report for given constants
    oracle-check  cross-check the protocol against the matrix-form
                  dynamics and report worst-case deviations

Exit codes: 0 success, 2 configuration error, 3 divergence, 4 a
verification or replay check failed.
"""

from __future__ import annotations

import argparse
import sys
import tempfile
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .config import (
    ExperimentConfig,
    ResolvedRun,
    build_problem,
    file_sha256,
    load_config,
    read_manifest,
    resolve_hyperparams,
    write_manifest,
)
from .data import problem_digest, vector_digest
from .dynamics import FixedPoint
from .errors import ConfigurationError, DivergenceError
from .harness import STATUS_DIVERGED, run_algorithm
from .lr_search import search_with_fraction, initial_bound
from .reporting import csv_path, render_figures, write_records_csv
from .verification import round_map_deviation, scalar_vs_matrix_deviation

ORACLE_CHECK_TOL = 1e-10

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DIVERGED = 3
EXIT_CHECK_FAILED = 4


def _load_cfg(args) -> ExperimentConfig:
    cfg = ExperimentConfig()
    if getattr(args, "config", None):
        cfg = load_config(args.config, base=cfg)
    overrides = {}
    if getattr(args, "seed", None) is not None:
        overrides["seeds"] = (args.seed,)
    if getattr(args, "out", None):
        overrides["out_dir"] = args.out
    if getattr(args, "algo", None):
        overrides["algorithms"] = tuple(p.strip() for p in args.algo.split(",") if p.strip())
    if getattr(args, "max_rounds", None) is not None:
        overrides["max_rounds"] = args.max_rounds
    if getattr(args, "tol", None) is not None:
        overrides["tol"] = args.tol
    if overrides:
        from dataclasses import replace

        cfg = replace(cfg, **overrides)
    return cfg


def execute_runs(cfg: ExperimentConfig, out_dir: Path, figures: bool = True,
                 compare_table: bool = False):
    """Run every (algorithm, seed) pair and write all outputs.

    Returns (resolved, per_seed digests, statuses).
    """
    out_dir.mkdir(parents=True, exist_ok=True)
    first_problem = build_problem(cfg, cfg.seeds[0])
    L, mu = first_problem.constants()
    resolved = resolve_hyperparams(cfg, L, mu)
    stop = cfg.stop_rule()

    per_seed: dict[int, dict[str, str]] = {}
    statuses: list[str] = []
    x_init = np.full((cfg.num_clients, cfg.dim), cfg.x_init_value)

    for seed in cfg.seeds:
        problem = first_problem if seed == cfg.seeds[0] else build_problem(cfg, seed)
        fp = FixedPoint.for_problem(problem)
        digests = {
            "problem_digest": problem_digest(problem),
            "xstar_digest": vector_digest(fp.xstar),
        }
        results = {}
        for name in cfg.algorithms:
            result = run_algorithm(
                name, problem, resolved.hp, stop, fp=fp,
                x_init=x_init, downlink=cfg.downlink,
            )
            results[name] = result
            statuses.append(result.status)
            path = csv_path(out_dir, name, seed)
            write_records_csv(path, result.records, seed)
            digests[f"csv_sha256_{name}"] = file_sha256(path)
        if compare_table:
            _write_compare_table(out_dir / f"compare_seed{seed}.csv", results)
        if figures:
            render_figures(out_dir, results, seed)
        per_seed[seed] = digests

    write_manifest(out_dir / "manifest.txt", cfg, resolved, per_seed)
    return resolved, per_seed, statuses


def _write_compare_table(path, results) -> None:
    """Aligned per-round table: error and total scalars per algorithm."""
    names = list(results)
    header = ["round"]
    for name in names:
        header += [f"error_{name}", f"scalars_{name}"]
    max_k = max(len(r.records) for r in results.values())
    lines = [",".join(header)]
    for k in range(max_k):
        row = [str(k)]
        for name in names:
            recs = results[name].records
            if k < len(recs):
                r = recs[k]
                row += [format(r.error, ".17g"), str(r.scalars_up_cum + r.scalars_down_cum)]
            else:
                row += ["", ""]
        lines.append(",".join(row))
    Path(path).write_text("\n".join(lines) + "\n")


def _print_run_summary(cfg, resolved: ResolvedRun) -> None:
    print(f"tool_version = {__version__}")
    print(f"algorithms = {','.join(cfg.algorithms)}")
    print(f"seeds = {','.join(str(s) for s in cfg.seeds)}")
    print(f"resolved_alpha = {resolved.hp.alpha:.17g}")
    print(f"resolved_c = {resolved.hp.c:.17g}")
    print(f"rho_pred = {resolved.report.rho:.17g}")


def cmd_run(args) -> int:
    if args.verify_manifest:
        return _verify_manifest(Path(args.verify_manifest))
    cfg = _load_cfg(args)
    out_dir = Path(cfg.out_dir)
    resolved, _, statuses = execute_runs(
        cfg, out_dir, figures=not args.no_figures,
        compare_table=(args.command == "compare"),
    )
    _print_run_summary(cfg, resolved)
    print(f"output_dir = {out_dir}")
    if STATUS_DIVERGED in statuses:
        print("status = diverged", file=sys.stderr)
        return EXIT_DIVERGED
    return EXIT_OK


def _verify_manifest(path: Path) -> int:
    """Replay the run a manifest describes and compare every digest."""
    cfg, extras = read_manifest(path)
    mismatches = []
    with tempfile.TemporaryDirectory(prefix="fedcet-verify-") as tmp:
        _, per_seed, _ = execute_runs(cfg, Path(tmp), figures=False)
        for seed, digests in per_seed.items():
            for key, value in digests.items():
                recorded = extras.get(f"{key}.seed{seed}")
                if recorded is None:
                    mismatches.append(f"{key}.seed{seed}: missing from manifest")
                elif recorded != value:
                    mismatches.append(
                        f"{key}.seed{seed}: manifest {recorded} != replay {value}"
                    )
    if mismatches:
        for m in mismatches:
            print(f"MISMATCH {m}", file=sys.stderr)
        return EXIT_CHECK_FAILED
    print(f"manifest verified: {path}")
    return EXIT_OK


def cmd_lr_search(args) -> int:
    bound = initial_bound(args.mu, args.L, args.tau)
    alpha, report = search_with_fraction(args.mu, args.L, args.tau, args.h_frac,
                                         alpha0=args.alpha0)
    print(f"alpha0_bound = {bound:.17g}")
    print(f"alpha = {alpha:.17g}")
    print(f"rho1 = {report.rho1:.17g}")
    print(f"rho2 = {report.rho2:.17g}")
    print(f"rho = {report.rho:.17g}")
    print(f"c_max = {report.c_max:.17g}")
    return EXIT_OK


def cmd_oracle_check(args) -> int:
    cfg = _load_cfg(args)
    seed = cfg.seeds[0]
    problem = build_problem(cfg, seed)
    L, mu = problem.constants()
    resolved = resolve_hyperparams(cfg, L, mu)
    x_init = np.full((cfg.num_clients, cfg.dim), cfg.x_init_value)

    dev_step = scalar_vs_matrix_deviation(problem, resolved.hp, x_init, args.iterations)
    dev_round = round_map_deviation(problem, resolved.hp, x_init, args.rounds)
    ok = dev_step <= ORACLE_CHECK_TOL and dev_round <= ORACLE_CHECK_TOL

    print(f"iterations = {args.iterations}")
    print(f"rounds = {args.rounds}")
    print(f"max_step_deviation = {dev_step:.17g}")
    print(f"max_round_map_deviation = {dev_round:.17g}")
    print(f"tolerance = {ORACLE_CHECK_TOL:.17g}")
    print(f"result = {'pass' if ok else 'FAIL'}")
    return EXIT_OK if ok else EXIT_CHECK_FAILED


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fedcet",
        description="Communication-efficient federated optimization harness",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", help="flat key = value config file")
        p.add_argument("--seed", type=int, help="run a single seed instead of the configured list")
        p.add_argument("--out", help="output directory")
        p.add_argument("--algo", help="comma-separated algorithm list")
        p.add_argument("--max-rounds", type=int, dest="max_rounds")
        p.add_argument("--tol", type=float)

    p_run = sub.add_parser("run", help="execute the configured experiment")
    add_common(p_run)
    p_run.add_argument("--verify-manifest", help="replay a manifest and verify byte-identical output")
    p_run.add_argument("--no-figures", action="store_true", help="skip figure rendering")
    p_run.set_defaults(func=cmd_run)

    p_cmp = sub.add_parser("compare", help="run and write aligned comparison tables")
    add_common(p_cmp)
    p_cmp.add_argument("--verify-manifest", help=argparse.SUPPRESS)
    p_cmp.add_argument("--no-figures", action="store_true")
    p_cmp.set_defaults(func=cmd_run)

    p_lr = sub.add_parser("lr-search", help="learning-rate scan report")
    p_lr.add_argument("--mu", type=float, required=True)
    p_lr.add_argument("--L", type=float, required=True)
    p_lr.add_argument("--tau", type=int, required=True)
    p_lr.add_argument("--h-frac", type=float, default=0.001, dest="h_frac")
    p_lr.add_argument("--alpha0", type=float, default=None)
    p_lr.set_defaults(func=cmd_lr_search)

    p_oc = sub.add_parser("oracle-check", help="protocol vs matrix-form cross-check")
    add_common(p_oc)
    p_oc.add_argument("--iterations", type=int, default=200)
    p_oc.add_argument("--rounds", type=int, default=50)
    p_oc.set_defaults(func=cmd_oracle_check)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigurationError, FileNotFoundError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DivergenceError as exc:
        print(f"divergence: {exc}", file=sys.stderr)
        return EXIT_DIVERGED


if __name__ == "__main__":
    sys.exit(main())
