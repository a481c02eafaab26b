"""``extract`` command-line entry point."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .backbones import backbone_names
from .extract import ExtractJob, extract, read_index_file


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="extract",
        description="Export frozen ViT embeddings into an SOFB feature file.",
    )
    parser.add_argument(
        "--dataset",
        required=True,
        help="cifar10, cifar100, stl10, or folder:<dir> of images",
    )
    parser.add_argument(
        "--split",
        default="train",
        choices=["train", "test", "unlabeled"],
        help="dataset split (ignored for folder sources)",
    )
    parser.add_argument("--model", required=True, choices=backbone_names())
    parser.add_argument("--out", required=True, help="output feature file path")
    parser.add_argument("--indices", help="optional text file of row indices to keep")
    parser.add_argument("--batch-size", type=int, default=64)
    parser.add_argument("--device", default="cpu")
    parser.add_argument("--data-root", default="data", help="torchvision download root")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        indices = read_index_file(args.indices) if args.indices else None
        job = ExtractJob(
            dataset=args.dataset,
            split=args.split,
            model=args.model,
            out_path=Path(args.out),
            batch_size=args.batch_size,
            device=args.device,
            indices=indices,
            data_root=args.data_root,
        )
        manifest = extract(job)
    except Exception as exc:
        print(f"extract: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {manifest['row_count']} x {manifest['embed_dim']} features to {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
