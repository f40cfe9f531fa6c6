"""lumirec command line: the event-log-to-recommendations pipeline.

Stages run in order (each consumes its predecessor's artifacts):

    synth -> ingest -> routine -> features -> cluster -> train
          -> eval-pooled -> eval-clustered [-> coldstart] -> report

Exit codes: 0 success, 1 validation error (bad arguments, missing
artifacts, malformed inputs), 2 internal error.
"""

from __future__ import annotations

import argparse
import json
import sys
import traceback
from pathlib import Path

from .config import load_config
from .errors import LumirecError
from .pipeline import STAGE_RUNNERS, STAGES, Workspace


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def build_parser() -> _Parser:
    # Common flags are accepted both before and after the stage name; the
    # SUPPRESS default keeps a bare subcommand from clobbering top-level
    # values.
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-w", "--workspace", default=argparse.SUPPRESS,
                        help="workspace directory for artifacts (default: ./workspace)")
    common.add_argument("--config", default=argparse.SUPPRESS,
                        help="config JSON path (default: <workspace>/config.json if present)")
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS,
                        help="override the global seed")
    common.add_argument("--threads", type=int, default=argparse.SUPPRESS,
                        help="cap internal parallelism")

    parser = _Parser(prog="lumirec", parents=[common],
                     description="Smart-lighting routine and scene recommendation pipeline")
    sub = parser.add_subparsers(dest="stage", metavar="stage")

    def add_stage(name, help_text):
        return sub.add_parser(name, help=help_text, parents=[common])

    synth = add_stage("synth", "generate a synthetic event log")
    synth.add_argument("--personas", default=None,
                       help="persona spec JSON (default: built-in three-persona population)")
    synth.add_argument("--from", dest="date_from", default=None, metavar="DATE",
                       help="study window start (YYYY-MM-DD)")
    synth.add_argument("--to", dest="date_to", default=None, metavar="DATE",
                       help="study window end (YYYY-MM-DD)")
    synth.add_argument("--out", default=None,
                       help="output directory (default: <workspace>/synth)")
    synth.add_argument("--households", type=int, default=None)

    add_stage("ingest", "parse events and reconstruct room state")
    add_stage("routine", "frequency profiles and routine recommendations")
    add_stage("features", "classification feature rows")
    add_stage("cluster", "usage clustering with elbow k selection")
    add_stage("train", "grid search and model fitting")
    add_stage("eval-pooled", "benchmark all families on a row split")
    add_stage("eval-clustered", "per-cluster training and weighted aggregate")

    cold = add_stage("coldstart", "household-disjoint cold-start experiments")
    cold.add_argument("--scenarios", default=None,
                      help="comma-separated test fractions (default from config)")
    cold.add_argument("--iterations", type=int, default=None)
    cold.add_argument("--clustered", dest="clustered", action="store_true", default=None)
    cold.add_argument("--no-clustered", dest="clustered", action="store_false")

    add_stage("report", "figure-ready CSVs; verifies config hashes")
    return parser


def _workspace(args) -> Workspace:
    root = Path(getattr(args, "workspace", "workspace"))
    config_arg = getattr(args, "config", None)
    config_path = Path(config_arg) if config_arg else None
    if config_path is None:
        candidate = root / "config.json"
        config_path = candidate if candidate.exists() else None
    overrides: dict = {}
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    if getattr(args, "threads", None) is not None:
        overrides["threads"] = args.threads
    if args.stage == "synth":
        synth_over = {}
        if args.personas:
            synth_over["personas"] = args.personas
        if args.households is not None:
            synth_over["households"] = args.households
        if synth_over:
            overrides["synth"] = synth_over
        study = {}
        if args.date_from:
            study["start"] = args.date_from
        if args.date_to:
            study["end"] = args.date_to
        if study:
            overrides["study"] = study
    config = load_config(config_path, overrides)
    return Workspace(root, config)


def run_stage(args) -> dict:
    ws = _workspace(args)
    if args.stage == "coldstart":
        scenarios = None
        if args.scenarios:
            scenarios = [float(s) for s in args.scenarios.split(",")]
        return STAGE_RUNNERS["coldstart"](ws, scenarios=scenarios,
                                          iterations=args.iterations,
                                          clustered=args.clustered)
    if args.stage == "synth" and args.out:
        ws.synth_dir = Path(args.out)
    return STAGE_RUNNERS[args.stage](ws)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    if not args.stage:
        parser.print_help()
        return 1
    try:
        outcome = run_stage(args)
    except (LumirecError, FileNotFoundError, json.JSONDecodeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception:
        traceback.print_exc()
        return 2
    summary = ", ".join(f"{k}={v}" for k, v in outcome.items()
                        if not isinstance(v, (dict, list))) or "done"
    print(f"[{args.stage}] {summary}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
