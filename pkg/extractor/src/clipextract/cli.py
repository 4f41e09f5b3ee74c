"""Extraction command line.

Exit codes: 0 all clips extracted, 1 some clips failed (the rest were
written), 2 usage or setup errors.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .augment import TRANSFORMS, AugmentPlan, TransformParams
from .clips import parse_listing
from .errors import ExtractorError
from .pipeline import run_extraction


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="clipextract",
        description="Extract dual-stream feature sequences from labeled video clips.",
    )
    parser.add_argument("--videos", required=True, help="video root directory")
    parser.add_argument("--listing", required=True,
                        help="JSONL listing: clip_id, path, label, split")
    parser.add_argument("--out", required=True, help="output dataset directory")
    parser.add_argument("--t", type=int, default=60, help="frames sampled per clip")
    parser.add_argument("--augment-classes", default="0,1",
                        help="comma-separated labels to oversample (empty disables)")
    parser.add_argument("--multiplier", type=int, default=3,
                        help="total copies per targeted train clip")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--workers", type=int, default=1)
    parser.add_argument("--backbone", choices=("tiny", "efficientnet"), default="tiny")
    parser.add_argument("--backbone-dim", type=int, default=64,
                        help="feature width for the tiny backbone")
    parser.add_argument("--weights", help="local weights file for the efficientnet backbone")
    parser.add_argument("--transforms", default=",".join(TRANSFORMS),
                        help="comma-separated transform subset")
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(message)s",
        stream=sys.stderr,
    )
    try:
        clips = parse_listing(args.listing, args.videos)
        plan = None
        if args.augment_classes.strip():
            targets = [int(c) for c in args.augment_classes.split(",") if c.strip()]
            plan = AugmentPlan(
                multipliers={c: args.multiplier for c in targets},
                transforms=tuple(t for t in args.transforms.split(",") if t),
                params=TransformParams(),
                seed=args.seed,
            )
        result = run_extraction(
            clips,
            plan,
            Path(args.out),
            backbone_spec=(args.backbone, args.backbone_dim, args.weights),
            frames_per_clip=args.t,
            workers=args.workers,
        )
    except (ExtractorError, OSError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    print(
        f"wrote {result.originals} original + {result.augmented} augmented samples; "
        f"manifest {result.manifest_path}"
    )
    if result.failures:
        for failure in result.failures:
            print(f"failed: {failure}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
