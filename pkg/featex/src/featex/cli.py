"""featex command line: frames directory in, feature file out."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .extract import BACKBONES, ExtractionError, ExtractionJob, extract, update_manifest


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="featex",
        description="extract per-frame backbone features from a directory of "
        "ordered video frames",
    )
    parser.add_argument("--frames", required=True, help="directory of frame images")
    parser.add_argument("--out", required=True, help="output feature file")
    parser.add_argument("--backbone", default="resnet50", choices=sorted(BACKBONES))
    parser.add_argument("--no-pretrained", action="store_true",
                        help="seeded random backbone instead of pretrained weights")
    parser.add_argument("--seed", type=int, default=0,
                        help="init seed used with --no-pretrained")
    parser.add_argument("--batch-size", type=int, default=8)
    parser.add_argument("--manifest", default=None,
                        help="manifest file to append/update with this video")
    parser.add_argument("--video-id", default=None,
                        help="manifest video id (default: frames directory name)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    job = ExtractionJob(
        frames_dir=Path(args.frames),
        out_path=Path(args.out),
        backbone=args.backbone,
        pretrained=not args.no_pretrained,
        batch_size=args.batch_size,
        init_seed=args.seed,
    )
    try:
        result = extract(job)
    except ExtractionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    if args.manifest:
        video_id = args.video_id or Path(args.frames).name
        update_manifest(args.manifest, video_id, result.n_frames, result.out_path.name)
    print(f"{result.out_path}: {result.n_frames} frames x {result.dim} features")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
