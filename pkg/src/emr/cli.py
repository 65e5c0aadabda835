"""Command-line entry points.

    emr run --config pipeline.cfg [--seed N] [--policy qoe|qos|balance]
            [--adversary tamper|replay|impersonate|none] [--out DIR]
            [--metrics PATH] [--timings] [-v]
    emr gen-synthetic --out DIR --frames N [--seed S]
    emr validate-config PATH

Exit codes: 0 success, 1 configuration error, 2 I/O error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import synthetic
from .config import parse_config
from .errors import ConfigError, EmrError
from .pipeline import run_pipeline

log = logging.getLogger("emr")

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_IO = 2


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="emr", description="Staged mixed-reality fusion pipeline")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run the pipeline over a frame directory")
    run.add_argument("--config", required=True, help="path to the pipeline config file")
    run.add_argument("--seed", type=int, default=None, help="override [run] seed")
    run.add_argument("--policy", choices=["qoe", "qos", "balance"], default=None,
                     help="override [encoding] policy")
    run.add_argument("--adversary", choices=["tamper", "replay", "impersonate", "none"],
                     default="none", help="interpose an adversarial node")
    run.add_argument("--out", default=None, help="override [io] out_dir")
    run.add_argument("--metrics", default=None, help="override [io] metrics path")
    run.add_argument("--timings", action="store_true",
                     help="record wall-clock ms in metrics (breaks byte-identical reruns)")

    gen = sub.add_parser("gen-synthetic", help="emit the synthetic moving-square sequence")
    gen.add_argument("--out", required=True, help="output directory")
    gen.add_argument("--frames", type=int, required=True, help="number of frames")
    gen.add_argument("--seed", type=int, default=0, help="noise seed")

    val = sub.add_parser("validate-config", help="parse and validate a config file")
    val.add_argument("path", help="config file to check")
    return parser


def _load_config(path_text: str, args=None):
    path = Path(path_text)
    try:
        text = path.read_text()
    except OSError as exc:
        log.error("cannot read config %s: %s", path, exc)
        return None, EXIT_IO
    try:
        config = parse_config(text, base_dir=path.parent)
    except ConfigError as exc:
        log.error("config error: %s", exc)
        return None, EXIT_CONFIG
    for warning in config.warnings:
        log.warning("%s", warning)
    if args is not None:
        if args.seed is not None:
            config.seed = args.seed
        if args.policy is not None:
            from .qoeqos import Policy

            config.policy = {"qoe": Policy.OPT_QOE, "qos": Policy.OPT_QOS,
                             "balance": Policy.BALANCE}[args.policy]
        if args.out is not None:
            config.out_dir = Path(args.out)
        if args.metrics is not None:
            config.metrics_path = Path(args.metrics)
    return config, EXIT_OK


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )

    if args.command == "gen-synthetic":
        try:
            written = synthetic.generate(args.out, args.frames, args.seed)
        except OSError as exc:
            log.error("cannot write synthetic data: %s", exc)
            return EXIT_IO
        log.info("wrote %d files to %s", len(written), args.out)
        return EXIT_OK

    if args.command == "validate-config":
        config, status = _load_config(args.path)
        if config is not None:
            log.info("config OK: %d levels, policy %s", len(config.levels), config.policy.value)
        return status

    if args.command == "run":
        config, status = _load_config(args.config, args)
        if config is None:
            return status
        try:
            result = run_pipeline(config, adversary_mode=args.adversary, timings=args.timings)
        except OSError as exc:
            log.error("I/O failure: %s", exc)
            return EXIT_IO
        except (EmrError, ValueError) as exc:  # e.g. a corrupt persisted store
            log.error("pipeline setup failed: %s", exc)
            return EXIT_CONFIG
        drops = sum(r.drop for r in result.records)
        alarms = sum(r.tamper + r.replay + r.unauth for r in result.records)
        log.info(
            "%d frames: %d composites, %d drops, %d alarms; metrics at %s",
            len(result.records), result.outputs_written, drops, alarms, config.metrics_path,
        )
        return EXIT_OK

    return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
