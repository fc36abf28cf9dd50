"""plrh-export command line: toy-split, checkpoint, samples, features."""
from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import Sequence

from .backbone import write_toy_checkpoint
from .errors import ExportError
from .export import export_features, export_samples
from .toy import build_toy_split


def _cmd_toy_split(args: argparse.Namespace) -> int:
    split = build_toy_split(args.out, n_samples=args.n, train_fraction=args.train_fraction)
    print(f"wrote {split.n_samples} samples under {split.root}")
    print(f"annotations: {split.annotations_path}")
    print(f"images: {split.images_dir}")
    return 0


def _cmd_checkpoint(args: argparse.Namespace) -> int:
    path = write_toy_checkpoint(args.out, output_dim=args.dim, seed=args.seed)
    print(f"wrote checkpoint {path}")
    return 0


def _manifest_out(args: argparse.Namespace) -> Path:
    return Path(args.manifest) if args.manifest else Path(str(args.out) + ".manifest.json")


def _cmd_samples(args: argparse.Namespace) -> int:
    manifest = export_samples(args.annotations, args.out, split=args.split)
    manifest.write(_manifest_out(args))
    print(manifest.to_text(), end="")
    return 0


def _cmd_features(args: argparse.Namespace) -> int:
    manifest = export_features(
        args.annotations, args.images, args.checkpoint, args.out, split=args.split
    )
    manifest.write(_manifest_out(args))
    print(manifest.to_text(), end="")
    # Skips are tolerated but visible: partial exports exit nonzero so
    # automation notices.
    return 0 if not manifest.skipped_ids else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="plrh-export",
        description="Produce plrh-compatible samples and feature files.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("toy-split", help="generate the offline toy corpus")
    p.add_argument("--out", required=True, help="directory for images/ and annotations.jsonl")
    p.add_argument("--n", type=int, default=50, help="number of samples")
    p.add_argument("--train-fraction", type=float, default=0.6)
    p.set_defaults(func=_cmd_toy_split)

    p = sub.add_parser("checkpoint", help="write a seed-fixed backbone checkpoint")
    p.add_argument("--out", required=True, help="checkpoint JSON path")
    p.add_argument("--dim", type=int, default=32, help="feature dimension")
    p.add_argument("--seed", type=int, default=7)
    p.set_defaults(func=_cmd_checkpoint)

    p = sub.add_parser("samples", help="write the samples JSONL from annotations")
    p.add_argument("--annotations", required=True, help="annotations JSONL path")
    p.add_argument("--out", required=True, help="output samples JSONL path")
    p.add_argument("--split", default="all", choices=("train", "test", "all"))
    p.add_argument("--manifest", help="manifest path (default <out>.manifest.json)")
    p.set_defaults(func=_cmd_samples)

    p = sub.add_parser("features", help="embed images and write the binary feature file")
    p.add_argument("--annotations", required=True, help="annotations JSONL path")
    p.add_argument("--images", required=True, help="directory of <id>.png images")
    p.add_argument("--checkpoint", required=True, help="backbone checkpoint JSON")
    p.add_argument("--out", required=True, help="output feature file path")
    p.add_argument("--split", default="all", choices=("train", "test", "all"))
    p.add_argument("--manifest", help="manifest path (default <out>.manifest.json)")
    p.set_defaults(func=_cmd_features)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ExportError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
