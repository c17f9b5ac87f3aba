"""Seeded toy-scale training on pipeline patch datasets.

Training consumes the dataset directory as stored: train patches sit in
original temporal order, val/test patches carry their frozen evaluation
shuffle. With shuffle augmentation on, each train sample's channels are
re-permuted every epoch from the dataset's seed-derivation contract, so the
permutation stream is reproducible and never touches the torch RNG (weight
init and training noise stay identical between the on/off arms; with T=1 the
two arms produce bit-identical models).

Checkpoint selection: the epoch with the smallest validation loss.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import torch
import torch.nn as nn

from .data import Patch, ShapeError, epoch_permutation, load_patches
from .models import build_model


@dataclass(frozen=True)
class ToyModelConfig:
    in_channels: int
    depth: int = 3
    base_width: int = 16
    architecture: str = "unet-like"
    epochs: int = 10
    learning_rate: float = 0.001
    batch_size: int = 8
    seed: int = 0
    # dB inputs are scaled by this fixed factor before the first conv
    input_scale: float = 0.1
    # positive-class weight for the cross-entropy loss; None = derive the
    # background/foreground ratio from the train split (tiny targets would
    # otherwise drive the optimum to all-background)
    pos_weight: float | None = None


@dataclass
class TrainRunRecord:
    config: dict
    shuffle_augmentation: bool
    train_loss: list[float] = field(default_factory=list)
    val_loss: list[float] = field(default_factory=list)
    selected_epoch: int = -1
    weights_path: str = ""
    prediction_path: str | None = None

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2) + "\n"


def _to_batches(patches: list[Patch], batch_size: int) -> list[list[Patch]]:
    ordered = sorted(patches, key=lambda p: p.index)
    return [ordered[i : i + batch_size] for i in range(0, len(ordered), batch_size)]


def _batch_tensors(
    batch: list[Patch], global_seed: int, epoch: int, shuffle: bool
) -> tuple[torch.Tensor, torch.Tensor]:
    images = []
    for patch in batch:
        image = patch.image
        if shuffle:
            perm = epoch_permutation(global_seed, patch.index, epoch, image.shape[0])
            image = image[perm]
        images.append(image)
    x = torch.from_numpy(np.stack(images).astype(np.float32))
    y = torch.from_numpy(np.stack([p.mask for p in batch]).astype(np.float32)).unsqueeze(1)
    return x, y


def train(
    dataset_dir: str | Path,
    config: ToyModelConfig,
    shuffle_augmentation: bool,
    out_dir: str | Path,
) -> TrainRunRecord:
    dataset_dir = Path(dataset_dir)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    train_patches = load_patches(dataset_dir, split="train")
    val_patches = load_patches(dataset_dir, split="val")
    if not train_patches:
        raise ShapeError(f"no train split under {dataset_dir}")
    if not val_patches:
        raise ShapeError(f"no val split under {dataset_dir}")
    depth_t = train_patches[0].image.shape[0]
    if depth_t != config.in_channels:
        raise ShapeError(f"dataset has T={depth_t}, config expects in_channels={config.in_channels}")

    torch.manual_seed(config.seed)
    torch.set_num_threads(1)
    model = build_model(
        config.architecture, config.in_channels, config.depth, config.base_width, config.input_scale
    )
    optimizer = torch.optim.Adam(model.parameters(), lr=config.learning_rate)
    if config.pos_weight is not None:
        pos_weight = float(config.pos_weight)
    else:
        foreground = sum(int(p.mask.sum()) for p in train_patches)
        background = sum(p.mask.size for p in train_patches) - foreground
        pos_weight = min(max(background / max(foreground, 1), 1.0), 1000.0)
    criterion = nn.BCEWithLogitsLoss(pos_weight=torch.tensor(pos_weight, dtype=torch.float32))

    record = TrainRunRecord(config=asdict(config), shuffle_augmentation=shuffle_augmentation)
    best_state: dict | None = None
    for epoch in range(config.epochs):
        model.train()
        epoch_loss = 0.0
        n_samples = 0
        for batch in _to_batches(train_patches, config.batch_size):
            x, y = _batch_tensors(batch, config.seed, epoch, shuffle_augmentation)
            optimizer.zero_grad()
            loss = criterion(model(x), y)
            loss.backward()
            optimizer.step()
            epoch_loss += float(loss.detach()) * len(batch)
            n_samples += len(batch)
        record.train_loss.append(epoch_loss / n_samples)

        model.eval()
        val_total = 0.0
        val_n = 0
        with torch.no_grad():
            for batch in _to_batches(val_patches, config.batch_size):
                # val patches are served as stored (frozen eval shuffle)
                x, y = _batch_tensors(batch, config.seed, epoch, shuffle=False)
                val_total += float(criterion(model(x), y)) * len(batch)
                val_n += len(batch)
        val_loss = val_total / val_n
        record.val_loss.append(val_loss)
        if record.selected_epoch < 0 or val_loss < record.val_loss[record.selected_epoch]:
            record.selected_epoch = epoch
            best_state = {k: v.clone() for k, v in model.state_dict().items()}

    assert best_state is not None
    weights_path = out_dir / "weights.pt"
    torch.save({"config": asdict(config), "state_dict": best_state}, weights_path)
    record.weights_path = str(weights_path)
    (out_dir / "train_record.json").write_text(record.to_json(), encoding="utf-8")
    return record


def load_weights(weights_path: str | Path) -> tuple[ToyModelConfig, torch.nn.Module]:
    payload = torch.load(weights_path, map_location="cpu", weights_only=False)
    config = ToyModelConfig(**payload["config"])
    model = build_model(
        config.architecture, config.in_channels, config.depth, config.base_width, config.input_scale
    )
    model.load_state_dict(payload["state_dict"])
    model.eval()
    return config, model


def predict_patch_probabilities(model: torch.nn.Module, patch: Patch) -> np.ndarray:
    x = torch.from_numpy(patch.image.astype(np.float32)).unsqueeze(0)
    with torch.no_grad():
        logits = model(x)
    return torch.sigmoid(logits)[0, 0].numpy().astype(np.float32)
