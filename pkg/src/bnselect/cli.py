"""Command-line interface.

Subcommands:

* ``bn labels``: convert a performance-matrix CSV into a label table.
* ``bn train``: train a preset on a manifest + labels.
* ``bn select``: sort one video's frames and print the chosen frame.
* ``bn benchmark``: score a selection strategy over a dataset.
* ``bn ablate``: sweep comparison batch sizes for a trained model.
* ``bn synth``: generate a synthetic dataset from a spec file.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from . import harness, ingest, metrics, sorter, strategies, trainer


def _add_dataset_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--manifest", required=True, help="dataset manifest file")
    p.add_argument("--labels", required=True, help="label table CSV")


def _load_units(args):
    manifest = ingest.load_manifest(args.manifest)
    labels = ingest.load_labels(args.labels)
    return ingest.load_units(manifest, labels)


def _cmd_labels(args) -> int:
    perf = ingest.load_perf_matrix(args.perf)
    entries = {
        key: metrics.label_vector(perf.matrix(*key)) for key in perf.units()
    }
    ingest.save_labels(args.out, ingest.LabelTable(entries))
    print(f"wrote {len(entries)} label vectors to {args.out}")
    return 0


def _cmd_train(args) -> int:
    units = _load_units(args)
    feature_dim = units[0].features.dim
    hidden = tuple(int(w) for w in args.hidden.split(","))
    cfg, spec = trainer.preset(args.preset, feature_dim, hidden_widths=hidden,
                               seed=args.seed)
    if not args.paper_scale:
        spec = trainer.desk_scale(spec)
    if args.iterations is not None:
        spec = replace(spec, iterations=args.iterations)
    if args.batch_videos is not None:
        spec = replace(spec, batch_videos=args.batch_videos)

    result = trainer.train(units, cfg, spec)
    ingest.save_checkpoint(args.out, result.config, result.weights)
    if args.loss_out:
        with open(args.loss_out, "w") as fh:
            fh.write("iteration,loss\n")
            for i, loss in enumerate(result.losses):
                fh.write(f"{i},{loss!r}\n")
    print(
        f"trained {args.preset} for {spec.iterations} iterations "
        f"(batch {spec.batch_videos}); first loss {result.losses[0]:.6f}, "
        f"last {result.losses[-1]:.6f}; saved to {args.out}"
    )
    return 0


def _cmd_select(args) -> int:
    cfg, weights = ingest.load_checkpoint(args.model)
    feats = ingest.load_features(args.features)
    sort_cfg = sorter.SortConfig(
        batch_size=args.batch, passes=args.passes, seed=args.seed
    )
    result = sorter.select_frame(weights, cfg, feats, sort_cfg)
    if args.trace:
        sorter.write_trace(args.trace, result.trace)
    print(result.selected_frame)
    return 0


def _cmd_benchmark(args) -> int:
    units = _load_units(args)
    model = None
    sort_cfg = None
    if args.strategy == "bn":
        if not args.model:
            print("strategy 'bn' requires --model", file=sys.stderr)
            return 2
        model = ingest.load_checkpoint(args.model)
        sort_cfg = sorter.SortConfig(batch_size=args.batch, seed=args.seed)
    report = harness.benchmark(
        units, args.strategy, model=model, sort_cfg=sort_cfg, seed=args.seed
    )
    if args.out:
        harness.write_report(args.out, report)
    print(harness.format_report(report))
    return 0


def _cmd_ablate(args) -> int:
    units = _load_units(args)
    model = ingest.load_checkpoint(args.model)
    batches = [int(b) for b in args.batches.split(",")]
    rows = harness.ablate_batch(
        units, model, batches, sorter.SortConfig(seed=args.seed)
    )
    if args.out:
        harness.write_ablation(args.out, rows)
    print("batch_size  mean_jf   mean_sort_time_s")
    for row in rows:
        print(f"{row.batch_size:>10}  {row.mean_score:.4f}   {row.mean_sort_time:.6f}")
    return 0


def _parse_synth_spec(path) -> harness.SyntheticSpec:
    kv = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ingest.FormatError(f"{path}:{lineno}: expected key=value")
        key, value = (part.strip() for part in line.split("=", 1))
        kv[key] = value
    try:
        return harness.SyntheticSpec(
            m=int(kv["m"]),
            n_range=(int(kv["n_min"]), int(kv["n_max"])),
            dim=int(kv["dim"]),
            label_model=kv.get("label_model", "linear"),
            noise=float(kv.get("noise", "0")),
            seed=int(kv.get("seed", "0")),
        )
    except KeyError as exc:
        raise ingest.FormatError(f"{path}: missing key {exc}") from None


def _cmd_synth(args) -> int:
    spec = _parse_synth_spec(args.spec)
    manifest_path, labels_path = harness.make_synthetic(spec, args.out)
    print(f"wrote {spec.m} videos; manifest {manifest_path}, labels {labels_path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bn", description="annotation-frame selection toolkit"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("labels", help="performance matrix -> label table")
    p.add_argument("--perf", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_labels)

    p = sub.add_parser("train", help="train a preset")
    p.add_argument("--preset", required=True, choices=trainer.PRESET_IDS)
    _add_dataset_args(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="checkpoint output path")
    p.add_argument("--paper-scale", action="store_true",
                   help="full-scale iterations and 1024-video batches")
    p.add_argument("--iterations", type=int, default=None)
    p.add_argument("--batch-videos", type=int, default=None)
    p.add_argument("--hidden", default="512,256,128,64",
                   help="hidden layer widths, comma-separated")
    p.add_argument("--loss-out", default=None, help="per-iteration loss CSV")
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("select", help="pick the annotation frame for one video")
    p.add_argument("--model", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--batch", type=int, default=5)
    p.add_argument("--passes", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--trace", default=None, help="comparison trace CSV")
    p.set_defaults(func=_cmd_select)

    p = sub.add_parser("benchmark", help="score a strategy over a dataset")
    _add_dataset_args(p)
    p.add_argument("--strategy", required=True, choices=strategies.STRATEGIES)
    p.add_argument("--model", default=None)
    p.add_argument("--batch", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None, help="per-object score CSV")
    p.set_defaults(func=_cmd_benchmark)

    p = sub.add_parser("ablate", help="sweep comparison batch sizes")
    _add_dataset_args(p)
    p.add_argument("--model", required=True)
    p.add_argument("--batches", default="1,3,5,10,20")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_ablate)

    p = sub.add_parser("synth", help="generate a synthetic dataset")
    p.add_argument("--spec", required=True, help="key=value spec file")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=_cmd_synth)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ingest.FormatError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
