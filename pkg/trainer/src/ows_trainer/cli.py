"""Trainer CLI: `ows-trainer <subcommand>`.

Subcommands: train, predict-scene, predict-patches, bias-ramp, ablation.
Everything consumes and emits the detection pipeline's on-disk formats.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .ablation import ablation
from .data import inject_order_bias
from .predict import binarize_raster, predict_scene, write_patch_masks
from .train import ToyModelConfig, load_weights, train


def _config_from_args(args: argparse.Namespace, in_channels: int) -> ToyModelConfig:
    return ToyModelConfig(
        in_channels=in_channels,
        depth=args.depth,
        base_width=args.base_width,
        architecture=args.architecture,
        epochs=args.epochs,
        learning_rate=args.learning_rate,
        batch_size=args.batch_size,
        seed=args.seed,
    )


def cmd_train(args: argparse.Namespace) -> None:
    from .data import dataset_depth

    config = _config_from_args(args, dataset_depth(args.dataset))
    record = train(args.dataset, config, shuffle_augmentation=args.shuffle, out_dir=args.out)
    print(
        json.dumps(
            {
                "stage": "train",
                "selected_epoch": record.selected_epoch,
                "val_loss": record.val_loss[record.selected_epoch],
                "weights": record.weights_path,
            }
        )
    )


def cmd_predict_scene(args: argparse.Namespace) -> None:
    config, model = load_weights(args.weights)
    out = predict_scene(
        model, config.in_channels, args.manifest, args.out, window=args.window, stride=args.stride
    )
    print(json.dumps({"stage": "predict_scene", "output": str(out)}))


def cmd_predict_patches(args: argparse.Namespace) -> None:
    _, model = load_weights(args.weights)
    written = write_patch_masks(model, args.dataset, args.out, split=args.split)
    print(json.dumps({"stage": "predict_patches", "n_masks": len(written), "out_dir": str(args.out)}))


def cmd_bias_ramp(args: argparse.Namespace) -> None:
    changed = inject_order_bias(args.dataset, slope_db=args.slope_db)
    print(json.dumps({"stage": "bias_ramp", "n_patches": changed, "slope_db": args.slope_db}))


def cmd_binarize(args: argparse.Namespace) -> None:
    out = binarize_raster(args.prob, args.out, binarize_at=args.binarize_at)
    print(json.dumps({"stage": "binarize", "output": str(out)}))


def cmd_ablation(args: argparse.Namespace) -> None:
    base = ToyModelConfig(
        in_channels=1,  # replaced per depth inside ablation()
        depth=args.depth,
        base_width=args.base_width,
        architecture=args.architecture,
        epochs=args.epochs,
        learning_rate=args.learning_rate,
        batch_size=args.batch_size,
        seed=0,
    )
    csv_path = ablation(
        args.dataset_root,
        t_values=[int(t) for t in args.t_values.split(",")],
        seeds=[int(s) for s in args.seeds.split(",")],
        base_config=base,
        out_dir=args.out,
    )
    print(json.dumps({"stage": "ablation", "output": str(csv_path)}))


def _add_model_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--architecture", choices=["unet-like", "linknet-like"], default="unet-like")
    p.add_argument("--depth", type=int, default=3)
    p.add_argument("--base-width", dest="base_width", type=int, default=16)
    p.add_argument("--epochs", type=int, default=10)
    p.add_argument("--learning-rate", dest="learning_rate", type=float, default=0.001)
    p.add_argument("--batch-size", dest="batch_size", type=int, default=8)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ows-trainer", description="Toy training harness")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train one model on a patch dataset")
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--shuffle", action="store_true", help="per-epoch temporal shuffle augmentation")
    _add_model_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict-scene", help="sliding-window probability raster for a stack")
    p.add_argument("--weights", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--window", type=int, default=128)
    p.add_argument("--stride", type=int, default=64)
    p.set_defaults(func=cmd_predict_scene)

    p = sub.add_parser("predict-patches", help="binarized per-patch masks for one split")
    p.add_argument("--weights", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--split", default="test")
    p.set_defaults(func=cmd_predict_patches)

    p = sub.add_parser("bias-ramp", help="inject a frame-index brightness ramp into a dataset")
    p.add_argument("--dataset", required=True)
    p.add_argument("--slope-db", dest="slope_db", type=float, default=2.0)
    p.set_defaults(func=cmd_bias_ramp)

    p = sub.add_parser("binarize", help="threshold a probability raster to a mask")
    p.add_argument("--prob", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--binarize-at", dest="binarize_at", type=float, default=0.5)
    p.set_defaults(func=cmd_binarize)

    p = sub.add_parser("ablation", help="matched shuffle-on/off training sweep")
    p.add_argument("--dataset-root", dest="dataset_root", required=True)
    p.add_argument("--t-values", dest="t_values", default="1,5")
    p.add_argument("--seeds", default="0,1,2")
    p.add_argument("--out", required=True)
    _add_model_flags(p)
    p.set_defaults(func=cmd_ablation)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except Exception as exc:  # surface everything as a structured error line
        print(json.dumps({"status": "error", "kind": type(exc).__name__, "message": str(exc)}))
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
