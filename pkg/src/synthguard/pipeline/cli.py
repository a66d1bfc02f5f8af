"""Command-line entry point.

Exit codes: 0 success, 2 configuration error, 3 stage failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from synthguard.errors import ConfigError, IoError, StageError
from synthguard.pipeline.config import MODEL_NAMES, dump_ini, parse_ini, preset_config, with_seed
from synthguard.pipeline.run import STAGES, Pipeline

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_STAGE = 3

COMMANDS = {
    "ingest": "read or synthesize the cohort and split it",
    "train": "train the generators",
    "generate": "sample synthetic datasets",
    "evaluate": "run the quality-of-generation suite",
    "attack": "run the membership-inference suite",
    "report": "write JSON/CSV reports and plots",
    "pipeline": "run every stage in order",
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="INI config file")
    common.add_argument("--seed", type=int, help="global seed")
    common.add_argument("--out", metavar="DIR", help="output directory")
    common.add_argument("--demo", action="store_true", help="short preset: 500 epochs, 2000 generated rows")
    common.add_argument("--only", metavar="MODEL[,MODEL]", help=f"restrict training/generation to {','.join(MODEL_NAMES)}")
    common.add_argument("--print-config", action="store_true", help="print the effective config and exit")
    common.add_argument("-v", "--verbose", action="store_true", help="also log to stderr")

    parser = argparse.ArgumentParser(prog="synthguard", description="Synthetic data generation and privacy audit.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in COMMANDS.items():
        p = sub.add_parser(name, parents=[common], help=help_text)
        if name == "pipeline":
            p.add_argument("--stage", choices=STAGES, default="report", help="stop after this stage")
    return parser


def resolve_config(args: argparse.Namespace):
    cfg = preset_config(demo=args.demo)
    if args.config:
        try:
            text = Path(args.config).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from None
        cfg = parse_ini(text, cfg)
    if args.seed is not None:
        cfg = with_seed(cfg, args.seed)
    if args.out:
        cfg = cfg.replace(out=args.out)
    return cfg


def _setup_logging(out: Path, verbose: bool) -> logging.Handler:
    out.mkdir(parents=True, exist_ok=True)
    handler = logging.FileHandler(out / "run.log", encoding="utf-8")
    handler.setFormatter(logging.Formatter("%(asctime)s %(levelname)s %(message)s"))
    root = logging.getLogger("synthguard")
    root.setLevel(logging.INFO)
    root.addHandler(handler)
    if verbose:
        root.addHandler(logging.StreamHandler(sys.stderr))
    return handler


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
        only = tuple(m.strip() for m in args.only.split(",") if m.strip()) if args.only else None
        if args.print_config:
            sys.stdout.write(dump_ini(cfg))
            return EXIT_OK
        pipeline = Pipeline(cfg, only)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    stage = args.stage if args.command == "pipeline" else args.command
    if only and STAGES.index(stage) > STAGES.index("generate"):
        print("config error: --only can be combined with ingest, train and generate only", file=sys.stderr)
        return EXIT_CONFIG
    try:
        handler = _setup_logging(Path(cfg.out), args.verbose)
    except OSError as exc:
        print(f"cannot write to {cfg.out}: {exc}", file=sys.stderr)
        return EXIT_STAGE
    try:
        pipeline.run(stage)
    except ConfigError as exc:
        logging.getLogger("synthguard.pipeline").error("config error: %s", exc)
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (StageError, IoError) as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_STAGE
    finally:
        logging.getLogger("synthguard").removeHandler(handler)
        handler.close()
    print(f"{stage}: done ({cfg.out})")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
