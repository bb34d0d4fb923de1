"""Command-line entry points for the cropland prompting pipeline.

Exit status: 0 on success, 2 on configuration errors.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

from .config import load_config
from .errors import ConfigError
from .pipeline import (ablate_noise, run, stage_evaluate, stage_predict,
                       stage_prelabel, stage_sample)


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", required=True, help="YAML run configuration")
    parser.add_argument("--seed", type=int, default=None,
                        help="override the configured seed")
    parser.add_argument("--backend", choices=("oracle", "vfm"), default=None,
                        help="override the configured backend")
    parser.add_argument("--workers", type=int, default=None,
                        help="override the configured worker count")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cropprompt",
        description="Cropland mapping with land-cover-derived point prompts")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in [
        ("run", "full workflow: prelabel, sample, predict, evaluate"),
        ("prelabel", "stage 1: land-cover windows remapped to binary pre-labels"),
        ("sample", "stage 2: prompt plans from written pre-labels"),
        ("predict", "stage 3: backend inference from written prompt plans"),
        ("evaluate", "stage 4: score written masks against ground truth"),
        ("ablate-noise", "prompt-corruption sweep with metric mean/std"),
    ]:
        _add_common(sub.add_parser(name, help=help_text))
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    args = build_parser().parse_args(argv)
    overrides = {"seed": args.seed, "backend": args.backend,
                 "workers": args.workers}
    try:
        config = load_config(args.config, overrides)
        config.validate_paths()
        if args.command == "run":
            summary = run(config)
            print(json.dumps(summary, sort_keys=True, indent=2))
        elif args.command == "prelabel":
            records = stage_prelabel(config)
            print(f"prelabeled {sum(r.status == 'completed' for r in records)}"
                  f"/{len(records)} tiles")
        elif args.command == "sample":
            records = stage_sample(config)
            print(f"sampled {sum(r.status == 'completed' for r in records)}"
                  f"/{len(records)} tiles")
        elif args.command == "predict":
            records = stage_predict(config)
            print(f"predicted {sum(r.status == 'completed' for r in records)}"
                  f"/{len(records)} tiles")
        elif args.command == "evaluate":
            summary = stage_evaluate(config)
            print(json.dumps(summary, sort_keys=True, indent=2))
        elif args.command == "ablate-noise":
            report = ablate_noise(config)
            print(json.dumps(report, sort_keys=True, indent=2))
    except ConfigError as e:
        print(f"configuration error: {e}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
