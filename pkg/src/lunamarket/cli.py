"""Command-line entry point.

Exit codes: 0 success, 1 verification failure, 2 configuration error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path
from typing import Sequence

from lunamarket.errors import ConfigError, LunaMarketError
from lunamarket.harness import compare_baseline, run_scenario, write_outputs
from lunamarket.ledger import verify_jsonl
from lunamarket.scenario import ScenarioConfig, bundled_names, bundled_scenario, load_scenario
from lunamarket.selenography import SelenographicCoord, build_tiling

SEED_ENV = "LUNAMARKET_SEED"


def _resolve(path: str) -> Path:
    p = Path(path)
    if not p.exists() and path in bundled_names():
        return bundled_scenario(path)
    return p


def _load(args: argparse.Namespace) -> ScenarioConfig:
    cfg = load_scenario(_resolve(args.scenario))
    seed = args.seed
    if seed is None and os.environ.get(SEED_ENV):
        try:
            seed = int(os.environ[SEED_ENV])
        except ValueError:
            raise ConfigError(f"{SEED_ENV} must be an integer") from None
    if seed is not None:
        cfg = cfg.with_overrides(seed=seed)
    return cfg


def _summary(result) -> str:
    m = result.metrics
    return (f"{result.mode}: events={len(result.log)} coverage={len(m.coverage_curve)}/{m.total_cells} "
            f"timeToFullCoverageMs={m.time_to_full_coverage_ms} totalDistanceM={m.total_distance_m:.3f} "
            f"digest={result.log.digest()}")


def cmd_run(args: argparse.Namespace) -> int:
    cfg = _load(args)
    mode = args.mode or cfg.mode
    out = Path(args.out)
    if mode == "both":
        report = compare_baseline(cfg)
        for result in (report.coordinated, report.baseline):
            write_outputs(result, out / result.mode)
            print(_summary(result))
        (out / "comparison.json").write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n")
        ok = report.coordinated.chain_ok
    else:
        result = run_scenario(cfg, mode)
        write_outputs(result, out)
        print(_summary(result))
        ok = result.chain_ok
    return 0 if ok else 1


def cmd_compare(args: argparse.Namespace) -> int:
    args.mode = "both"
    return cmd_run(args)


def cmd_verify(args: argparse.Namespace) -> int:
    try:
        with open(args.log, encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise ConfigError(f"cannot read {args.log}: {exc.strerror}") from None
    if verify_jsonl(lines):
        print(f"OK: {sum(1 for ln in lines if ln.strip())} blocks verified")
        return 0
    print("FAIL: chain does not verify")
    return 1


def cmd_grid(args: argparse.Namespace) -> int:
    tiling = build_tiling(args.frequency, args.radius)
    if args.grid_cmd == "info":
        info = {
            "frequency": tiling.frequency,
            "cells": len(tiling),
            "pentagons": len(tiling.pentagons),
            "hexagons": len(tiling.hexagons),
            "vertices": tiling.n_vertices,
            "edges": tiling.n_edges,
            "eulerCharacteristic": tiling.euler_characteristic,
        }
        print(json.dumps(info, sort_keys=True))
    else:
        cell = tiling.locate(SelenographicCoord(args.lat, args.lon))
        center = tiling.center(cell)
        print(json.dumps({"cell": str(cell), "centerLat": center.lat, "centerLon": center.lon}, sort_keys=True))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lunamarket", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a scenario and write events, metrics, ledger and coverage")
    run.add_argument("--scenario", required=True, help="scenario file or bundled name")
    run.add_argument("--seed", type=int, default=None, help=f"overrides ${SEED_ENV} and the file")
    run.add_argument("--out", required=True)
    run.add_argument("--mode", choices=["coordinated", "baseline", "both"], default=None)
    run.set_defaults(func=cmd_run)

    cmp_ = sub.add_parser("compare", help="run coordinated and baseline modes and compare them")
    cmp_.add_argument("--scenario", required=True)
    cmp_.add_argument("--seed", type=int, default=None)
    cmp_.add_argument("--out", required=True)
    cmp_.set_defaults(func=cmd_compare)

    ver = sub.add_parser("verify", help="verify a ledger.jsonl export")
    ver.add_argument("--log", required=True)
    ver.set_defaults(func=cmd_verify)

    grid = sub.add_parser("grid", help="inspect the hexagonal tiling")
    gsub = grid.add_subparsers(dest="grid_cmd", required=True)
    info = gsub.add_parser("info")
    info.add_argument("--frequency", type=int, required=True)
    info.add_argument("--radius", type=float, default=1_737_400.0)
    loc = gsub.add_parser("locate")
    loc.add_argument("--frequency", type=int, required=True)
    loc.add_argument("--lat", type=float, required=True)
    loc.add_argument("--lon", type=float, required=True)
    loc.add_argument("--radius", type=float, default=1_737_400.0)
    grid.set_defaults(func=cmd_grid)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (LunaMarketError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
