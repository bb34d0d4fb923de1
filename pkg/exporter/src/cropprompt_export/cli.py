"""Command line for the export tool.

    cropprompt-export init-checkpoint --out ckpt.pth [--seed N]
    cropprompt-export export --checkpoint ckpt.pth --out graphs/
"""

from __future__ import annotations

import argparse
import sys

from .errors import ExportError
from .export import export, init_checkpoint


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cropprompt-export",
        description="Convert promptable-segmentation checkpoints into "
                    "TorchScript graphs + manifest for the vfm backend")
    sub = parser.add_subparsers(dest="command", required=True)

    exp = sub.add_parser("export", help="convert a checkpoint")
    exp.add_argument("--checkpoint", required=True)
    exp.add_argument("--out", required=True, help="output directory")
    exp.add_argument("--tolerance", type=float, default=1e-3,
                     help="max allowed |logit| drift in the smoke comparison")

    init = sub.add_parser("init-checkpoint",
                          help="create a checkpoint of the bundled "
                               "architecture with seeded random weights")
    init.add_argument("--out", required=True)
    init.add_argument("--seed", type=int, default=0)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "export":
            manifest = export(args.checkpoint, args.out, tolerance=args.tolerance)
            print(f"exported {manifest.encoder_path} and {manifest.decoder_path}")
            print(f"manifest: {manifest.manifest_path}")
            print(f"smoke drift: encoder {manifest.max_abs_diff_encoder:.2e}, "
                  f"decoder {manifest.max_abs_diff_decoder:.2e}")
        elif args.command == "init-checkpoint":
            path = init_checkpoint(args.out, seed=args.seed)
            print(f"wrote checkpoint {path}")
    except ExportError as e:
        print(f"export error: {e}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
