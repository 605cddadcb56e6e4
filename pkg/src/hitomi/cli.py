"""Umbrella command-line interface.

Subcommands: train, detect, eval, bench, synth.  Exit codes: 0 success,
1 usage error, 2 runtime error.  Diagnostics go to stderr, data to files
or stdout.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import bench, evaluate, formats, mlp, pipeline, synth
from .errors import HitomiError
from .radiometry import WbCoefficients, compute_wb, load_wb, save_wb


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _build_parser() -> _Parser:
    p = _Parser(prog="hitomi", description="Spectral clothing-based person-presence detection")
    sub = p.add_subparsers(dest="command")

    t = sub.add_parser("train", help="train the pixel classifier on a dataset directory")
    t.add_argument("--data", required=True, help="directory with samples.csv and labels.json")
    t.add_argument("--out", required=True, help="output model JSON path")
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--epochs", type=int, default=500)
    t.add_argument("--lr", type=float, default=0.001)
    t.add_argument("--patience", type=int, default=2)
    t.add_argument("--batch-size", type=int, default=256)
    t.add_argument("--val-fraction", type=float, default=0.2)
    t.add_argument("--out-dim", type=int, default=0, help="pad the label table to this width")

    d = sub.add_parser("detect", help="run the detection pipeline over frames")
    d.add_argument("--model", required=True)
    d.add_argument("--input", required=True, help="a .hmc frame or a directory of them")
    d.add_argument("--out", required=True, help="output detections JSONL")
    d.add_argument("--wb", help="WB sidecar JSON")
    d.add_argument("--wb-region", help="x,y,w,h white-plate rectangle (computed per frame)")
    d.add_argument("--save-wb", help="write the computed WB sidecar here")
    d.add_argument("--params", help="pipeline params JSON")
    d.add_argument("--dump-maps", help="directory for intermediate mask graymaps")

    e = sub.add_parser("eval", help="score detections against ground truth")
    e.add_argument("--dets", required=True)
    e.add_argument("--gt", required=True)
    e.add_argument("--iou", type=float, default=0.2)
    e.add_argument("--conf", type=float, default=0.01)
    e.add_argument("--out", required=True, help="report CSV path")
    e.add_argument("--pr-svg", help="write the PR curve as SVG")
    e.add_argument("--sweep", help="lo:hi:step IoU sweep, e.g. 0.1:0.9:0.1")
    e.add_argument("--model-name", default="hitomi-cam")
    e.add_argument("--scene-name", default="scene")

    b = sub.add_parser("bench", help="per-stage pipeline timing")
    b.add_argument("--input", required=True, help=".hmc frame")
    b.add_argument("--model", required=True)
    b.add_argument("--wb", help="WB sidecar JSON")
    b.add_argument("--params", help="pipeline params JSON")
    b.add_argument("--iters", type=int, default=100)
    b.add_argument("--warmup", type=int, default=10)
    b.add_argument("--out", required=True, help="timing CSV path")

    s = sub.add_parser("synth", help="render a scene or sample a training set")
    s.add_argument("--scene", help="scene spec JSON")
    s.add_argument("--dataset", help="dataset spec JSON")
    s.add_argument("--out", required=True, help="frame path (scene) or directory (dataset)")
    s.add_argument("--gt", help="ground-truth JSONL path (scene mode)")
    s.add_argument("--oracle-map", help="write the oracle clothing map as a graymap")
    return p


def _load_params(path) -> pipeline.PipelineParams:
    if not path:
        return pipeline.PipelineParams()
    obj = json.loads(Path(path).read_text(encoding="utf-8"))
    return pipeline.PipelineParams(**obj)


def _wb_for(args, frame) -> WbCoefficients:
    if args.wb:
        return load_wb(args.wb)
    if args.wb_region:
        region = tuple(int(v) for v in args.wb_region.split(","))
        if len(region) != 4:
            raise _UsageError("--wb-region expects x,y,w,h")
        wb = compute_wb(frame, region)
        if args.save_wb:
            save_wb(wb, args.save_wb)
        return wb
    return WbCoefficients.identity(frame.bands)


def _cmd_train(args) -> int:
    dataset = mlp.load_dataset(args.data)
    if args.out_dim:
        table = mlp.pad_labels(dataset.table, args.out_dim)
        dataset = mlp.SpectralDataset(dataset.spectra, dataset.labels, table)
    cfg = mlp.TrainConfig(
        learning_rate=args.lr,
        max_epochs=args.epochs,
        patience=args.patience,
        batch_size=args.batch_size,
        val_fraction=args.val_fraction,
        seed=args.seed,
    )
    model, log = mlp.train(dataset, cfg)
    mlp.save_model(model, args.out)
    print(
        f"trained {len(dataset)} samples, {log.epochs_run} epochs, "
        f"best epoch {log.best_epoch} (val loss {log.val_loss[log.best_epoch]:.6f})",
        file=sys.stderr,
    )
    return 0


def _cmd_detect(args) -> int:
    model = mlp.load_model(args.model)
    params = _load_params(args.params)
    src = Path(args.input)
    paths = sorted(src.glob("*.hmc")) if src.is_dir() else [src]
    if not paths:
        raise HitomiError(f"no .hmc frames under {src}")
    dump_dir = Path(args.dump_maps) if args.dump_maps else None
    if dump_dir:
        dump_dir.mkdir(parents=True, exist_ok=True)
    records = []
    for path in paths:
        frame = formats.read_frame(path)
        wb = _wb_for(args, frame)
        frame_id = path.stem
        cmap = pipeline.classify_frame(frame, wb, model)
        cleaned = pipeline.denoise(cmap, params)
        closed = pipeline.close_regions(cleaned, params)
        comps = pipeline.connected_components(closed, params.connectivity)
        dets = pipeline.fit_boxes(comps, frame_id)
        records.extend(dets.boxes)
        if dump_dir:
            formats.write_pgm(cmap.mask, dump_dir / f"{frame_id}_initial.pgm")
            formats.write_pgm(cleaned.mask, dump_dir / f"{frame_id}_denoised.pgm")
            formats.write_pgm(closed.mask, dump_dir / f"{frame_id}_closed.pgm")
    formats.write_detections(records, args.out)
    print(f"{len(records)} detections over {len(paths)} frame(s)", file=sys.stderr)
    return 0


def _parse_sweep(expr):
    lo, hi, step = (float(v) for v in expr.split(":"))
    if step <= 0 or hi < lo:
        raise _UsageError("--sweep expects lo:hi:step with step > 0")
    out = []
    t = lo
    while t <= hi + 1e-9:
        out.append(round(t, 10))
        t += step
    return out


def _cmd_eval(args) -> int:
    dets = evaluate.ingest_external_detections(args.dets)
    gts = formats.read_annotations(args.gt)
    cfg = evaluate.EvalConfig(iou_threshold=args.iou, confidence_floor=args.conf)
    thresholds = _parse_sweep(args.sweep) if args.sweep else [args.iou]
    rows = []
    primary = None
    for t in thresholds:
        tcfg = evaluate.EvalConfig(iou_threshold=t, confidence_floor=args.conf)
        rep = evaluate.evaluate(dets, gts, tcfg)
        if abs(t - args.iou) < 1e-12:
            primary = rep
        rows.append(
            {
                "model": args.model_name,
                "scene": args.scene_name,
                "iou": f"{t:g}",
                "ap": f"{rep.ap:.6f}",
                "precision": f"{rep.precision:.6f}",
                "recall": f"{rep.recall:.6f}",
                "f1": f"{rep.f1:.6f}",
                "tp": rep.tp,
                "fp": rep.fp,
                "fn": rep.fn,
            }
        )
    formats.write_report_csv(rows, args.out)
    if args.pr_svg:
        rep = primary if primary is not None else evaluate.evaluate(dets, gts, cfg)
        kept = [d for d in dets if d.confidence >= cfg.confidence_floor]
        points, confs, _, _ = evaluate._cumulative_sweep(kept, gts, cfg)
        display = evaluate.collapse_pr_for_display(points, confs)
        evaluate.render_pr_svg({args.model_name: display}, args.pr_svg)
    if primary is not None:
        print(
            f"iou {args.iou:g}: ap {primary.ap:.4f} p {primary.precision:.4f} "
            f"r {primary.recall:.4f} tp {primary.tp} fp {primary.fp} fn {primary.fn}",
            file=sys.stderr,
        )
    return 0


def _cmd_bench(args) -> int:
    frame = formats.read_frame(args.input)
    model = mlp.load_model(args.model)
    wb = load_wb(args.wb) if args.wb else WbCoefficients.identity(frame.bands)
    params = _load_params(args.params)
    report = bench.time_pipeline(
        frame, wb, model, params, iterations=args.iters, warmup=args.warmup
    )
    bench.write_timing_csv(report, args.out)
    print(
        f"{report.resolution}: total {report.total_mean_ms:.2f} ms ({report.fps:.1f} fps) "
        f"over {report.iterations} iterations",
        file=sys.stderr,
    )
    return 0


def _cmd_synth(args) -> int:
    if bool(args.scene) == bool(args.dataset):
        raise _UsageError("synth needs exactly one of --scene or --dataset")
    if args.scene:
        spec = synth.load_scene_spec(args.scene)
        frame, boxes, oracle = synth.render_scene(spec)
        formats.write_frame(frame, args.out)
        if args.gt:
            formats.write_annotations(boxes, args.gt)
        if args.oracle_map:
            formats.write_pgm(oracle.mask, args.oracle_map)
        print(f"rendered {spec.name}: {len(boxes)} clothing boxes", file=sys.stderr)
        return 0
    kwargs = synth.load_dataset_spec(args.dataset)
    dataset = synth.generate_training_set(
        kwargs["materials"],
        kwargs["illuminant"],
        kwargs["n_per_material"],
        seed=kwargs["seed"],
        noise_sigma=kwargs["noise_sigma"],
        augment=kwargs["augment"],
    )
    mlp.save_dataset(dataset, args.out)
    print(f"wrote {len(dataset)} samples to {args.out}", file=sys.stderr)
    return 0


_COMMANDS = {
    "train": _cmd_train,
    "detect": _cmd_detect,
    "eval": _cmd_eval,
    "bench": _cmd_bench,
    "synth": _cmd_synth,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if not args.command:
            parser.print_usage(sys.stderr)
            return 1
        return _COMMANDS[args.command](args)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return 1
    except (HitomiError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
