"""Tiny fully-convolutional encoder-decoders (~100k parameters at defaults).

Two variants mirroring the classic skip-connection styles: concatenation
("unet-like") and residual addition ("linknet-like"). Configurable encoder
depth, no normalization layers, single-logit output head. Small on purpose:
the harness exists to exercise augmentation and interchange contracts, not
to chase segmentation quality.
"""

from __future__ import annotations

import torch
import torch.nn as nn


def _block(in_ch: int, out_ch: int) -> nn.Sequential:
    return nn.Sequential(
        nn.Conv2d(in_ch, out_ch, 3, padding=1),
        nn.ReLU(inplace=True),
        nn.Conv2d(out_ch, out_ch, 3, padding=1),
        nn.ReLU(inplace=True),
    )


class TinyEncoderDecoder(nn.Module):
    """Encoder widths base*2^0 .. base*2^(depth-1); symmetric decoder.

    Input spatial dims must be divisible by 2^(depth-1).
    """

    def __init__(
        self,
        in_channels: int,
        depth: int = 3,
        base_width: int = 16,
        skip_mode: str = "concat",
        input_scale: float = 1.0,
    ):
        super().__init__()
        if skip_mode not in ("concat", "add"):
            raise ValueError(f"unknown skip_mode {skip_mode!r}")
        if depth < 2:
            raise ValueError("depth must be at least 2")
        self.skip_mode = skip_mode
        self.input_scale = input_scale
        widths = [base_width * (2**i) for i in range(depth)]
        self.pool = nn.MaxPool2d(2)
        self.encoders = nn.ModuleList()
        prev = in_channels
        for w in widths:
            self.encoders.append(_block(prev, w))
            prev = w
        self.ups = nn.ModuleList()
        self.decoders = nn.ModuleList()
        for w_coarse, w_fine in zip(widths[:0:-1], widths[-2::-1]):
            self.ups.append(nn.ConvTranspose2d(w_coarse, w_fine, 2, stride=2))
            dec_in = 2 * w_fine if skip_mode == "concat" else w_fine
            self.decoders.append(_block(dec_in, w_fine))
        self.head = nn.Conv2d(widths[0], 1, 1)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        x = x * self.input_scale
        skips = []
        for i, encoder in enumerate(self.encoders):
            x = encoder(x if i == 0 else self.pool(x))
            skips.append(x)
        x = skips[-1]
        for up, decoder, skip in zip(self.ups, self.decoders, skips[-2::-1]):
            x = up(x)
            x = torch.cat([x, skip], dim=1) if self.skip_mode == "concat" else x + skip
            x = decoder(x)
        return self.head(x)


def build_model(
    architecture: str,
    in_channels: int,
    depth: int = 3,
    base_width: int = 16,
    input_scale: float = 1.0,
) -> TinyEncoderDecoder:
    if architecture == "unet-like":
        return TinyEncoderDecoder(in_channels, depth, base_width, skip_mode="concat", input_scale=input_scale)
    if architecture == "linknet-like":
        return TinyEncoderDecoder(in_channels, depth, base_width, skip_mode="add", input_scale=input_scale)
    raise ValueError(f"unknown architecture {architecture!r}")


def parameter_count(model: nn.Module) -> int:
    return sum(int(p.numel()) for p in model.parameters())
