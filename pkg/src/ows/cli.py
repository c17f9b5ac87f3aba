"""Command-line orchestration: `ows <subcommand>`.

Each stage prints one machine-readable JSON log line, writes its artifacts
atomically, and exits 0 on success, 2 on usage errors, 3 on data/contract
errors, 4 on I/O failures. A config JSON may preload any subcommand's
options; explicit flags win over config values.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time
from dataclasses import fields as dataclass_fields
from pathlib import Path

import numpy as np
from filelock import FileLock, Timeout

from . import dataset as ds
from . import evaluation as ev
from . import geotiff, groundtruth, instances, synth
from .errors import ArtifactIOError, DataError, UsageError
from .inference import (
    BaselineTemporalSegmenter,
    PlaybackSegmenter,
    StitchConfig,
    stitch_predict,
)
from .raster import (
    BinaryMask,
    SarStack,
    load_stack,
    read_mask,
    read_raster,
    subset_recent,
    write_mask,
    write_raster,
)


def _log(stage: str, started: float, **extra) -> None:
    record = {"stage": stage, "status": "ok", "elapsed_s": round(time.monotonic() - started, 3)}
    record.update(extra)
    print(json.dumps(record, sort_keys=True))


def _load_config(path: str | None) -> dict:
    if not path:
        return {}
    config_path = Path(path)
    if not config_path.exists():
        raise UsageError(f"config file not found: {config_path}")
    try:
        doc = json.loads(config_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise UsageError(f"{config_path}: invalid config JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise UsageError(f"{config_path}: config must be a JSON object")
    return doc


def _opt(args: argparse.Namespace, config: dict, key: str, default):
    """Flag value if given, else config value, else default."""
    value = getattr(args, key, None)
    if value is not None:
        return value
    if key in config:
        return config[key]
    return default


def _threads(args: argparse.Namespace, config: dict) -> int:
    value = _opt(args, config, "threads", None)
    if value is None:
        value = os.environ.get("OWS_THREADS", "1")
    try:
        n = int(value)
    except ValueError as exc:
        raise UsageError(f"bad thread count {value!r}") from exc
    if n < 1:
        raise UsageError("thread count must be >= 1")
    return n


def _lock(out_dir: Path) -> FileLock:
    out_dir.mkdir(parents=True, exist_ok=True)
    lock = FileLock(out_dir / ".ows.lock")
    try:
        lock.acquire(timeout=60)
    except Timeout as exc:
        raise ArtifactIOError(f"output dir {out_dir} is locked by another run") from exc
    return lock


def cmd_synth(args: argparse.Namespace) -> None:
    started = time.monotonic()
    config = _load_config(args.config)
    spec_doc = dict(config.get("scene", {}))
    if args.spec:
        loaded = _load_config(args.spec)
        spec_doc.update(loaded.get("scene", loaded))
    if args.seed is not None:
        spec_doc["seed"] = args.seed
    known = {f.name for f in dataclass_fields(synth.SyntheticSceneSpec)}
    unknown = set(spec_doc) - known
    if unknown:
        raise UsageError(f"unknown scene spec fields: {sorted(unknown)}")
    spec = synth.SyntheticSceneSpec(**spec_doc)
    out_dir = Path(args.out)
    lock = _lock(out_dir)
    try:
        scene = synth.generate(spec)
        manifest = synth.write_scene(scene, out_dir, n_locations=args.locations)
    finally:
        lock.release()
    _log(
        "synth",
        started,
        outputs=[str(manifest), str(out_dir / "gt_mask.tif"), str(out_dir / "centers.geojson")],
        T=spec.T,
        n_turbines=spec.n_turbines,
        n_ships=spec.n_ships,
        seed=spec.seed,
    )


def cmd_groundtruth(args: argparse.Namespace) -> None:
    started = time.monotonic()
    config = _load_config(args.config)
    threshold_db = float(_opt(args, config, "threshold_db", 0.0))
    min_area_px = int(_opt(args, config, "min_area_px", 2))
    stack = load_stack(args.manifest)
    composite = groundtruth.composite_mean(stack)
    mask = groundtruth.clean_mask(
        groundtruth.threshold_mask(composite, threshold_db), min_area_px
    )
    write_mask(args.out_mask, mask)
    if args.out_composite:
        write_raster(args.out_composite, composite)
    _log(
        "groundtruth",
        started,
        outputs=[args.out_mask],
        threshold_db=threshold_db,
        min_area_px=min_area_px,
        foreground_px=int(mask.bits.sum()),
    )


def cmd_patches(args: argparse.Namespace) -> None:
    started = time.monotonic()
    config = _load_config(args.config)
    patch_size = int(_opt(args, config, "patch_size", 128))
    seed = int(_opt(args, config, "seed", 0))
    stack = load_stack(args.manifest)
    mask = read_mask(args.mask)
    centers = ds.read_centers_geojson(args.centers)
    samples = ds.extract_patches(stack, mask, centers, patch_size=patch_size, clamp=args.clamp)
    summary = ds.assign_splits(samples, ds.read_splits_json(args.splits))
    if not args.no_eval_shuffle:
        eval_samples = [s for s in samples if s.split in ("val", "test")]
        shuffled = ds.fixed_eval_shuffle(eval_samples, seed)
        by_index = {s.index: s for s in shuffled}
        samples = [by_index.get(s.index, s) for s in samples]
    out_dir = Path(args.out)
    lock = _lock(out_dir)
    try:
        index_path = ds.save_dataset(samples, out_dir, global_seed=seed, threads=_threads(args, config))
    finally:
        lock.release()
    _log(
        "patches",
        started,
        outputs=[str(index_path)],
        n_patches=len(samples),
        splits={k: {"n": n, "fraction": round(f, 6)} for k, (n, f) in summary.items()},
    )


def cmd_predict(args: argparse.Namespace) -> None:
    started = time.monotonic()
    config = _load_config(args.config)
    cfg = StitchConfig(
        window=int(_opt(args, config, "window", 128)),
        stride=int(_opt(args, config, "stride", 64)),
        binarize_at=float(_opt(args, config, "binarize_at", 0.5)),
    )
    required_t = _opt(args, config, "required_t", None)
    required_t = int(required_t) if required_t is not None else None
    stack = load_stack(args.manifest)
    if args.segmenter == "baseline":
        segmenter = BaselineTemporalSegmenter(
            threshold_db=float(_opt(args, config, "threshold_db", 0.0)), required_T=required_t
        )
    else:
        if not args.pred_raster:
            raise UsageError("--segmenter playback needs --pred-raster")
        segmenter = PlaybackSegmenter(read_raster(args.pred_raster), required_T=required_t)
    prob, mask = stitch_predict(stack, segmenter, cfg)
    write_raster(args.out_prob, prob)
    write_mask(args.out_mask, mask)
    _log(
        "predict",
        started,
        outputs=[args.out_prob, args.out_mask],
        segmenter=args.segmenter,
        window=cfg.window,
        stride=cfg.stride,
        binarize_at=cfg.binarize_at,
        T=stack.T,
    )


def cmd_instances(args: argparse.Namespace) -> None:
    started = time.monotonic()
    mask = read_mask(args.mask)
    labeled = instances.connected_components(mask, connectivity=args.connectivity)
    polyset = instances.polygonize(labeled)
    instances.write_polygons_geojson(args.out_geojson, polyset)
    outputs = [args.out_geojson]
    if args.out_labels:
        instances.write_labeled(args.out_labels, labeled)
        outputs.append(args.out_labels)
    _log("instances", started, outputs=outputs, n_instances=labeled.n_instances)


def _eval_scene(args: argparse.Namespace, config: dict) -> ev.EvalReport:
    iou_threshold = float(_opt(args, config, "iou_threshold", 0.5))
    pred = read_mask(args.pred_mask)
    gt = read_mask(args.gt_mask)
    pred_labeled = instances.connected_components(pred, connectivity=args.connectivity)
    gt_labeled = instances.connected_components(gt, connectivity=args.connectivity)
    counts, matches = ev.match_objects(pred_labeled, gt_labeled, iou_threshold)
    confusion = ev.pixel_confusion(pred, gt)
    return ev.EvalReport(
        pixel_confusion=confusion,
        pixel=ev.pixel_metrics(confusion),
        object_counts=counts,
        object=ev.object_metrics(counts),
        matches=tuple(matches),
        config={
            "mode": "scene",
            "iou_threshold": iou_threshold,
            "connectivity": args.connectivity,
            "pred_mask": str(args.pred_mask),
            "gt_mask": str(args.gt_mask),
        },
    )


def _eval_patchset(args: argparse.Namespace) -> ev.EvalReport:
    samples = ds.load_dataset(args.dataset, split=args.split)
    if not samples:
        raise DataError(f"no samples in split {args.split!r}")
    pred_dir = Path(args.pred_dir)
    preds, gts = [], []
    for sample in samples:
        pred_path = pred_dir / f"sample_{sample.index:05d}.tif"
        preds.append(read_mask(pred_path))
        gts.append(BinaryMask(bits=sample.mask, transform=sample.transform))
    confusion = ev.pooled_confusion(preds, gts)
    return ev.EvalReport(
        pixel_confusion=confusion,
        pixel=ev.pixel_metrics(confusion),
        config={
            "mode": "patchset",
            "dataset": str(args.dataset),
            "pred_dir": str(args.pred_dir),
            "split": args.split,
            "n_patches": len(samples),
        },
    )


def cmd_eval(args: argparse.Namespace) -> None:
    started = time.monotonic()
    config = _load_config(args.config)
    scene_mode = bool(args.pred_mask or args.gt_mask)
    patch_mode = bool(args.pred_dir or args.dataset)
    if scene_mode == patch_mode:
        raise UsageError("use either --pred-mask/--gt-mask or --pred-dir/--dataset")
    if scene_mode and not (args.pred_mask and args.gt_mask):
        raise UsageError("scene mode needs both --pred-mask and --gt-mask")
    if patch_mode and not (args.pred_dir and args.dataset):
        raise UsageError("patchset mode needs both --pred-dir and --dataset")
    report = _eval_scene(args, config) if scene_mode else _eval_patchset(args)
    ev.write_report(args.out_report, report)
    summary: dict = {"outputs": [args.out_report]}
    if report.object is not None:
        summary["overall_quality"] = round(report.object.overall_quality, 6)
    if report.pixel is not None:
        summary["iou"] = round(report.pixel.iou, 6)
    _log("eval", started, **summary)


def cmd_export_coco(args: argparse.Namespace) -> None:
    started = time.monotonic()
    if bool(args.dataset) == bool(args.labels):
        raise UsageError("use exactly one of --dataset or --labels")
    if args.dataset:
        samples = ds.load_dataset(args.dataset, split=args.split)
        if not samples:
            raise DataError(f"no samples in split {args.split!r}")
        doc = ds.export_coco(samples, args.out)
    else:
        labeled = instances.read_labeled(args.labels)
        doc = ds.export_coco([(Path(args.labels).name, labeled)], args.out)
    _log(
        "export_coco",
        started,
        outputs=[args.out],
        n_images=len(doc["images"]),
        n_annotations=len(doc["annotations"]),
    )


def cmd_experiment(args: argparse.Namespace) -> None:
    started = time.monotonic()
    config = _load_config(args.config)
    if "scene" not in config:
        raise UsageError("experiment config needs a 'scene' block (synthetic scene spec)")
    seed = _opt(args, config, "seed", None)
    scene_doc = dict(config["scene"])
    if seed is not None:
        scene_doc["seed"] = int(seed)
    spec = synth.SyntheticSceneSpec(**scene_doc)
    t_values = list(config.get("t_values", [1, 5, 10, 15]))
    shuffle_flags = [bool(x) for x in config.get("shuffle_flags", [False, True])]
    if any(t < 1 or t > spec.T for t in t_values):
        raise UsageError(f"t_values {t_values} outside stack depth T={spec.T}")
    cfg = StitchConfig(
        window=int(_opt(args, config, "window", 128)),
        stride=int(_opt(args, config, "stride", 64)),
        binarize_at=float(config.get("binarize_at", 0.5)),
    )
    iou_threshold = float(_opt(args, config, "iou_threshold", 0.5))
    threshold_db = float(config.get("threshold_db", 0.0))

    out_dir = Path(args.out)
    lock = _lock(out_dir)
    try:
        scene = synth.generate(spec)
        gt_mask = scene.gt_mask
        gt_labeled = scene.gt_labeled
        segmenter = BaselineTemporalSegmenter(threshold_db=threshold_db)
        ship_frames = synth.ship_frame_indices(scene)

        rows = []
        for t in sorted(t_values):
            for shuffle in shuffle_flags:
                if t == 1 and ship_frames:
                    stack_t = synth.degrade_to_single_frame(scene, ship_frames[0])
                else:
                    stack_t = subset_recent(scene.stack, t)
                if shuffle and stack_t.T > 1:
                    # same acquisition dates, frame order permuted: inference
                    # must not care, and the metrics rows demonstrate it
                    perm = np.random.default_rng(
                        ds.derive_shuffle_seed(spec.seed, t, 1)
                    ).permutation(stack_t.T)
                    stack_t = SarStack(
                        frames=tuple(stack_t.frames[i] for i in perm), dates=stack_t.dates
                    )
                prob, mask = stitch_predict(stack_t, segmenter, cfg)
                tag = f"T{t:02d}_shuffle{int(shuffle)}"
                write_raster(out_dir / f"prob_{tag}.tif", prob)
                write_mask(out_dir / f"mask_{tag}.tif", mask)
                pred_labeled = instances.connected_components(mask, connectivity=8)
                counts, _ = ev.match_objects(pred_labeled, gt_labeled, iou_threshold)
                obj = ev.object_metrics(counts)
                confusion = ev.pixel_confusion(mask, gt_mask)
                pixel = ev.pixel_metrics(confusion)
                rows.append(
                    {
                        "T": t,
                        "shuffle": int(shuffle),
                        "obj_tp": counts.tp,
                        "obj_fp": counts.fp,
                        "obj_fn": counts.fn,
                        "overall_quality": f"{obj.overall_quality:.6f}",
                        "correctness": f"{obj.correctness:.6f}",
                        "completeness": f"{obj.completeness:.6f}",
                        "px_tp": confusion.tp,
                        "px_tn": confusion.tn,
                        "px_fp": confusion.fp,
                        "px_fn": confusion.fn,
                        "oa": f"{pixel.oa:.6f}",
                        "precision": f"{pixel.precision:.6f}",
                        "recall": f"{pixel.recall:.6f}",
                        "fscore": f"{pixel.fscore:.6f}",
                        "iou": f"{pixel.iou:.6f}",
                    }
                )

        csv_path = out_dir / "results.csv"
        tmp_path = csv_path.with_name(csv_path.name + ".tmp")
        with open(tmp_path, "w", newline="", encoding="utf-8") as handle:
            writer = csv.DictWriter(handle, fieldnames=list(rows[0].keys()))
            writer.writeheader()
            writer.writerows(rows)
        os.replace(tmp_path, csv_path)
    finally:
        lock.release()
    _log(
        "experiment",
        started,
        outputs=[str(csv_path)],
        n_rows=len(rows),
        t_values=sorted(t_values),
        seed=spec.seed,
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ows",
        description="Offshore wind plant detection pipeline over SAR dB time series",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", help="JSON config preloading this subcommand's options")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--threads", default=None, help="worker threads (or env OWS_THREADS)")

    p = sub.add_parser("synth", help="generate a synthetic SAR-like scene")
    add_common(p)
    p.add_argument("--spec", help="scene spec JSON (fields of SyntheticSceneSpec)")
    p.add_argument("--out", required=True)
    p.add_argument("--locations", type=int, default=1, help="pseudo-locations for split assignment")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("groundtruth", help="composite-threshold ground-truth mask")
    add_common(p)
    p.add_argument("--manifest", required=True)
    p.add_argument("--out-mask", required=True)
    p.add_argument("--out-composite", default=None)
    p.add_argument("--threshold-db", dest="threshold_db", type=float, default=None)
    p.add_argument("--min-area-px", dest="min_area_px", type=int, default=None)
    p.set_defaults(func=cmd_groundtruth)

    p = sub.add_parser("patches", help="build the patch dataset")
    add_common(p)
    p.add_argument("--manifest", required=True)
    p.add_argument("--mask", required=True)
    p.add_argument("--centers", required=True)
    p.add_argument("--splits", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--patch-size", dest="patch_size", type=int, default=None)
    p.add_argument("--clamp", action="store_true")
    p.add_argument("--no-eval-shuffle", action="store_true")
    p.set_defaults(func=cmd_patches)

    p = sub.add_parser("predict", help="sliding-window full-scene prediction")
    add_common(p)
    p.add_argument("--manifest", required=True)
    p.add_argument("--segmenter", choices=["baseline", "playback"], default="baseline")
    p.add_argument("--pred-raster", dest="pred_raster", default=None)
    p.add_argument("--threshold-db", dest="threshold_db", type=float, default=None)
    p.add_argument("--window", type=int, default=None)
    p.add_argument("--stride", type=int, default=None)
    p.add_argument("--binarize-at", dest="binarize_at", type=float, default=None)
    p.add_argument("--required-t", dest="required_t", type=int, default=None)
    p.add_argument("--out-prob", required=True)
    p.add_argument("--out-mask", required=True)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("instances", help="connected components + polygonization")
    add_common(p)
    p.add_argument("--mask", required=True)
    p.add_argument("--out-geojson", required=True)
    p.add_argument("--out-labels", default=None)
    p.add_argument("--connectivity", type=int, choices=[4, 8], default=8)
    p.set_defaults(func=cmd_instances)

    p = sub.add_parser("eval", help="pixel and object metrics")
    add_common(p)
    p.add_argument("--pred-mask", dest="pred_mask", default=None)
    p.add_argument("--gt-mask", dest="gt_mask", default=None)
    p.add_argument("--pred-dir", dest="pred_dir", default=None)
    p.add_argument("--dataset", default=None)
    p.add_argument("--split", default=None, choices=[None, "train", "val", "test"])
    p.add_argument("--iou-threshold", dest="iou_threshold", type=float, default=None)
    p.add_argument("--connectivity", type=int, choices=[4, 8], default=8)
    p.add_argument("--out-report", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("export-coco", help="COCO annotations from patches or a labeled scene")
    add_common(p)
    p.add_argument("--dataset", default=None)
    p.add_argument("--split", default=None, choices=[None, "train", "val", "test"])
    p.add_argument("--labels", default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_export_coco)

    p = sub.add_parser("experiment", help="time-series-interval sweep on a synthetic scene")
    add_common(p)
    p.add_argument("--out", required=True)
    p.add_argument("--window", type=int, default=None)
    p.add_argument("--stride", type=int, default=None)
    p.add_argument("--iou-threshold", dest="iou_threshold", type=float, default=None)
    p.set_defaults(func=cmd_experiment)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        _threads(args, {})  # validate the threads flag/env early
        args.func(args)
    except UsageError as exc:
        print(json.dumps({"status": "error", "kind": type(exc).__name__, "message": str(exc)}))
        return 2
    except (ArtifactIOError, OSError) as exc:
        print(json.dumps({"status": "error", "kind": type(exc).__name__, "message": str(exc)}))
        return 4
    except (DataError, ValueError) as exc:
        print(json.dumps({"status": "error", "kind": type(exc).__name__, "message": str(exc)}))
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
