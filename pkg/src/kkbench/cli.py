"""Command line front end for the benchmark harness.

Exit codes: 0 on success, 2 on a configuration error, 3 when every
realization diverged.
"""

from __future__ import annotations

import argparse
import sys

from .bench import ScenarioConfig, run_mc, sweep, write_run_csv, write_summary_csv


def _int_list(text: str) -> list[int]:
    return [int(part) for part in text.split(",") if part]


def _str_list(text: str) -> list[str]:
    return [part.strip() for part in text.split(",") if part.strip()]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="kkbench", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="Monte Carlo run of one scenario/filter cell")
    run.add_argument("--scenario", required=True)
    run.add_argument("--filter", required=True)
    run.add_argument("--particles", type=int, required=True)
    run.add_argument("--realizations", type=int, required=True)
    run.add_argument("--seed", type=int, required=True)
    run.add_argument("--lambda", dest="lam", type=float, default=1e-3)
    run.add_argument("--kappa", type=float, default=1e-3)
    run.add_argument("--horizon", type=int, default=None)
    run.add_argument("--workers", type=int, default=1)
    run.add_argument("--out", required=True)

    sw = sub.add_parser("sweep", help="summaries over a filter x particle grid")
    sw.add_argument("--scenario", required=True)
    sw.add_argument("--filters", type=_str_list, required=True)
    sw.add_argument("--particles", type=_int_list, required=True)
    sw.add_argument("--realizations", type=int, required=True)
    sw.add_argument("--seed", type=int, required=True)
    sw.add_argument("--lambda", dest="lam", type=float, default=1e-3)
    sw.add_argument("--kappa", type=float, default=1e-3)
    sw.add_argument("--horizon", type=int, default=None)
    sw.add_argument("--workers", type=int, default=1)
    sw.add_argument("--out", required=True)
    return parser


def _cmd_run(args: argparse.Namespace) -> int:
    cfg = ScenarioConfig(
        scenario=args.scenario,
        filter=args.filter,
        M=args.particles,
        realizations=args.realizations,
        seed=args.seed,
        lam=args.lam,
        kappa=args.kappa,
        horizon=args.horizon,
    )
    records, summary = run_mc(cfg, workers=args.workers)
    write_run_csv(args.out, cfg, records)
    print(
        f"{cfg.scenario} {cfg.filter} M={cfg.M}: "
        f"metric mean {summary.metric_mean:.6g} std {summary.metric_std:.6g} "
        f"diverged {summary.diverged_count}/{cfg.realizations} "
        f"runtime {summary.runtime_mean_s:.4g} s"
    )
    if summary.diverged_count == cfg.realizations:
        return 3
    return 0


def _cmd_sweep(args: argparse.Namespace) -> int:
    base = ScenarioConfig(
        scenario=args.scenario,
        filter=args.filters[0],
        M=max(2, max(args.particles)),
        realizations=args.realizations,
        seed=args.seed,
        lam=args.lam,
        kappa=args.kappa,
        horizon=args.horizon,
    )
    for name in args.filters:
        for m in args.particles:
            ScenarioConfig(
                scenario=args.scenario,
                filter=name,
                M=m,
                realizations=args.realizations,
                seed=args.seed,
                lam=args.lam,
                kappa=args.kappa,
                horizon=args.horizon,
            )
    rows = sweep(base, args.particles, args.filters, workers=args.workers)
    write_summary_csv(args.out, rows)
    for cfg, summary in rows:
        print(
            f"{cfg.scenario} {cfg.filter} M={cfg.M}: "
            f"metric mean {summary.metric_mean:.6g} "
            f"diverged {summary.diverged_count}/{cfg.realizations}"
        )
    total = sum(summary.diverged_count for _, summary in rows)
    if total == len(rows) * args.realizations:
        return 3
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        return _cmd_sweep(args)
    except ValueError as exc:
        print(f"kkbench: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
