"""Command-line front end.

Commands: ingest, extract-tests, enhance, evaluate, aggregate, rank,
report. Flags mirror RunConfig fields; a ``key = value`` config file can
supply defaults; credentials come from the environment only. Every error
exits nonzero with a one-line diagnostic plus a machine-readable record on
stderr.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys

from . import pipeline, prompts
from .config import ConfigError, RunConfig, load_config_file
from .errors import PatchCriticError
from .evaluation import EvaluationError

logger = logging.getLogger(__name__)


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="key = value config file")
    parser.add_argument("--dataset", help="task instances, one JSON record per line")
    parser.add_argument("--candidates", help="candidate-patch sidecar file")
    parser.add_argument("--labels", help="ground-truth sidecar file")
    parser.add_argument("--trees", help="pre-commit source tree sidecar file")
    parser.add_argument("--embeddings", help="recorded-embedding fixture file")
    parser.add_argument("--output", dest="output_dir", help="output directory")
    parser.add_argument("--cache-dir", dest="cache_dir", help="record/replay cache root")
    parser.add_argument("--model", dest="model_id", help="critic model identifier")
    parser.add_argument(
        "--embed-model", dest="embed_model_id", help="embedding model identifier"
    )
    parser.add_argument(
        "--patch-context",
        dest="patch_context",
        choices=["default", "function"],
        help="candidate patch preparation (3-line context vs function-level)",
    )
    parser.add_argument("--confidence-max", dest="confidence_max", type=float)
    parser.add_argument("--complexity-min", dest="complexity_min", type=float)
    parser.add_argument(
        "--complexity-unit", dest="complexity_unit", choices=["chars", "lines"]
    )
    parser.add_argument("--concurrency", type=int, help="parallel provider calls")
    parser.add_argument("--seed", type=int, help="root seed for derived randomness")
    parser.add_argument(
        "--offline",
        action="store_true",
        default=None,
        help="treat any cache miss as a hard error (never call providers)",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="patch-critic",
        description="Execution-free evaluation of repository-level code patches.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    for name, help_text in (
        ("ingest", "validate the dataset and sidecars, write a summary"),
        ("extract-tests", "extract unseen tests from the gold test patches"),
        ("enhance", "widen candidate patches to function-level context"),
        ("aggregate", "apply the threshold policy and the all-pass rule"),
        ("rank", "rank workflows per instance by predicted pass rate"),
        ("report", "assemble metric tables and distribution data"),
        ("evaluate", "run one critic variant over all candidate patches"),
    ):
        p = sub.add_parser(name, help=help_text)
        _add_common(p)
        if name in ("evaluate", "aggregate", "rank", "report"):
            p.add_argument(
                "--variant",
                required=True,
                choices=list(prompts.ALL_VARIANTS),
                help="critic variant",
            )
        if name == "rank":
            p.add_argument(
                "--edit-distance-baseline",
                action="store_true",
                help="also rank by embedding cosine against the gold change patch",
            )
    return parser


def make_config(args: argparse.Namespace) -> RunConfig:
    values: dict[str, object] = {}
    if args.config:
        values.update(load_config_file(args.config))
    field_names = {f.name for f in dataclasses.fields(RunConfig)}
    for key, value in vars(args).items():
        if key in field_names and value is not None:
            values[key] = value
    return RunConfig(**values)


def _emit_error(command: str, exc: Exception) -> None:
    print(f"error: {exc}", file=sys.stderr)
    record = {
        "command": command,
        "error_type": type(exc).__name__,
        "message": str(exc),
    }
    print(json.dumps(record, sort_keys=True), file=sys.stderr)


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = make_config(args)
        if args.command == "ingest":
            out = pipeline.run_ingest(cfg)
        elif args.command == "extract-tests":
            out = pipeline.run_extract_tests(cfg)
        elif args.command == "enhance":
            out = pipeline.run_enhance(cfg)
        elif args.command == "evaluate":
            out = pipeline.run_evaluate(cfg, args.variant)
        elif args.command == "aggregate":
            out = pipeline.run_aggregate(cfg, args.variant)
        elif args.command == "rank":
            out = pipeline.run_rank(
                cfg, args.variant, edit_distance_baseline=args.edit_distance_baseline
            )
        elif args.command == "report":
            out = pipeline.run_report(cfg, args.variant)
        else:  # pragma: no cover - argparse enforces the choices
            raise ConfigError(f"unknown command {args.command!r}")
    except (ConfigError, EvaluationError) as exc:
        _emit_error(args.command, exc)
        return 2
    except PatchCriticError as exc:
        _emit_error(args.command, exc)
        return 1
    print(out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
