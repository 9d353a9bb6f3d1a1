"""Command line entry point: ``valuenav run|record|replay|metrics|validate-scene``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path
from typing import Sequence

from .episode import EpisodeConfig
from .errors import NavError, SchemaError
from .metrics import compute_metrics
from .pathplan import StopReason
from .simulator import load_scene
from .suite import BACKEND_MODES, load_suite, read_results, run_suite, write_results

EXIT_OK, EXIT_EPISODE_ERROR, EXIT_USAGE = 0, 1, 2


def _add_run_options(p: argparse.ArgumentParser, backend: bool = True) -> None:
    p.add_argument("suite", type=Path)
    if backend:
        p.add_argument("--backend", choices=BACKEND_MODES, default="scripted")
    p.add_argument("--out", type=Path, help="results file (default: <suite>.results.jsonl in the current directory)")
    p.add_argument("--dump-maps", type=Path, metavar="DIR")
    p.add_argument("--seed", type=int, help="override every episode's seed")
    p.add_argument("--n-directions", type=int, choices=(4, 6, 12), default=6)
    p.add_argument("--max-steps", type=int, default=500)
    p.add_argument("--parallel", type=int, default=1)
    p.add_argument("--transcripts", type=Path, metavar="DIR")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="valuenav", description="Instruction navigation over fused value maps.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    _add_run_options(sub.add_parser("run", help="run a scenario suite"))
    rec = sub.add_parser("record", help="run a suite and save per-episode transcripts")
    _add_run_options(rec)
    _add_run_options(sub.add_parser("replay", help="re-run a suite from saved transcripts"), backend=False)
    met = sub.add_parser("metrics", help="aggregate a results file")
    met.add_argument("results", type=Path)
    met.add_argument("--json", action="store_true")
    val = sub.add_parser("validate-scene", help="check a scene file against the schema")
    val.add_argument("scene", type=Path)
    return parser


def _run(args: argparse.Namespace, mode: str, record: bool) -> int:
    if args.max_steps < 1 or args.parallel < 1:
        print("error: --max-steps and --parallel must be positive", file=sys.stderr)
        return EXIT_USAGE
    if (record or mode == "replay") and args.transcripts is None:
        print("error: --transcripts DIR is required", file=sys.stderr)
        return EXIT_USAGE
    suite = load_suite(args.suite)
    if args.seed is not None:
        suite = replace(suite, episodes=tuple(replace(e, seed=args.seed) for e in suite.episodes))
    config = EpisodeConfig(n_directions=args.n_directions, max_steps=args.max_steps)
    results = run_suite(suite, mode, config, args.parallel, args.dump_maps, args.transcripts, record)
    out = args.out or Path(f"{args.suite.name.split('.')[0]}.results.jsonl")
    write_results(out, results)
    metrics = compute_metrics(results)
    print(metrics.format())
    print(f"results: {out}")
    failed = [r.episode_id for r in results if r.stop_reason == StopReason.PLANNER_ERROR.value]
    if failed:
        print(f"planner errors in: {', '.join(failed)}", file=sys.stderr)
        return EXIT_EPISODE_ERROR
    return EXIT_OK


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    try:
        if args.command == "run":
            return _run(args, args.backend, record=False)
        if args.command == "record":
            return _run(args, args.backend, record=True)
        if args.command == "replay":
            return _run(args, "replay", record=False)
        if args.command == "metrics":
            table = compute_metrics(read_results(args.results))
            print(json.dumps(table.as_dict()) if args.json else table.format())
            return EXIT_OK
        if args.command == "validate-scene":
            scene = load_scene(args.scene)
            print(f"{args.scene}: ok ({scene.width}x{scene.height} cells, labels: {', '.join(scene.label_table.values())})")
            return EXIT_OK
    except SchemaError as exc:
        for v in exc.violations:
            print(f"error: {v}", file=sys.stderr)
        return EXIT_EPISODE_ERROR
    except (NavError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_EPISODE_ERROR
    return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
