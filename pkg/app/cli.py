# app/cli.py
from __future__ import annotations

import argparse
import asyncio
import sys
from pathlib import Path
from typing import List, Optional, Sequence

import structlog
from pydantic import ValidationError

from . import config, services
from .config import ExperimentConfig, load_config, with_overrides
from .errors import ConfigError
from .logging_setup import configure
from .physical import NS_PER_MS
from .services import PointResult

log = structlog.get_logger("cli")

EXIT_OK, EXIT_RUNTIME, EXIT_INVALID = 0, 1, 2


def _common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, help="experiment config (JSON); omitted fields take defaults")
    parser.add_argument("--out", help="output directory (overrides out_dir)")
    parser.add_argument("--seed", type=int, help="master seed (overrides simulation.seed)")
    parser.add_argument("--trials", type=int, help="trials per strategy (overrides simulation.trials)")
    parser.add_argument("--emit-events", action="store_true", help="also write events.jsonl")
    parser.add_argument("--workers", type=int, default=config.WORKERS, help="worker processes")
    parser.add_argument("--log-level", default=config.LOG_LEVEL)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qdc-sched",
        description="Partition circuits across QPUs of a Clos data center and simulate EPR scheduling.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("generate", "print the configured benchmark circuit as QASM"),
        ("partition", "compare partitioners and export the annotated program"),
        ("simulate", "run every configured strategy and write delay, demand and BSM outputs"),
        ("profile", "simulate with unlimited resources and report per-switch BSM peaks"),
        ("sweep", "run the cartesian product of the config's sweep lists"),
    ):
        _common(sub.add_parser(name, help=help_text))
    return parser


def _load(args: argparse.Namespace) -> ExperimentConfig:
    cfg = load_config(args.config)
    cfg = with_overrides(cfg, seed=args.seed, trials=args.trials, out_dir=args.out, emit_events=args.emit_events)
    if args.command == "profile":
        cfg = cfg.model_copy(update={"simulation": cfg.simulation.model_copy(update={"unlimited_resources": True})})
    return cfg


def _summary(points: Sequence[PointResult]) -> List[str]:
    lines = [f"{'label':<32} {'strategy':<18} {'trials':>6} {'mean_ms':>12} {'std_ms':>10}"]
    for p in points:
        for strategy, report in p.reports.items():
            lines.append(
                f"{p.label:<32} {strategy.value:<18} {report.trials:>6} "
                f"{report.mean_ns / NS_PER_MS:>12.3f} {report.std_ns / NS_PER_MS:>10.3f}"
            )
        if p.paired is not None:
            lines.append(f"{p.label:<32} {'ratio':<18} {'':>6} {p.paired.ratio:>12.4f}")
    return lines


async def _dispatch(args: argparse.Namespace, cfg: ExperimentConfig) -> List[str]:
    if args.command == "generate":
        return [services.generate_qasm(cfg).rstrip("\n")]
    if args.command == "partition":
        rows, written = services.run_partition(cfg)
        lines = [f"{'partitioner':<10} {'nonlocal':>9} {'packed':>7} {'teleports':>9} {'total':>6}"]
        lines += [
            f"{m.value:<10} {c.nonlocal_gates:>9} {c.packed_epr:>7} {c.teleports:>9} {c.total:>6}" for m, c in rows
        ]
        return lines + [f"wrote {p}" for p in written]
    if args.command == "sweep":
        points, written = await services.run_sweep(cfg, args.workers)
    else:
        point, written = await services.run_config(cfg, args.workers)
        points = [point]
    lines = _summary(points)
    if args.command == "profile":
        peaks = points[0].primary.peak_bsm
        lines.append(f"peak BSMs per switch: max {max(peaks.values(), default=0)}")
    return lines + [f"wrote {p}" for p in written]


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        configure(args.log_level)
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INVALID

    try:
        cfg = _load(args)
        log.info("cli.start", command=args.command, out_dir=cfg.out_dir, seed=cfg.simulation.seed)
        lines = asyncio.run(_dispatch(args, cfg))
    except (ValidationError, ConfigError) as e:
        log.error("cli.failed", command=args.command, error=str(e), kind="invalid")
        print(f"invalid configuration: {e}", file=sys.stderr)
        return EXIT_INVALID
    except Exception as e:
        log.error("cli.failed", command=args.command, error=str(e), kind=type(e).__name__)
        print(f"error: {e}", file=sys.stderr)
        return EXIT_RUNTIME

    print("\n".join(lines))
    log.info("cli.done", command=args.command)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
