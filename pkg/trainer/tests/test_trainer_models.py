from __future__ import annotations

import pytest
import torch

from ows_trainer.models import build_model, parameter_count


@pytest.mark.parametrize("architecture", ["unet-like", "linknet-like"])
def test_output_shape_tracks_input(architecture):
    model = build_model(architecture, in_channels=5)
    for size in (64, 128):
        x = torch.zeros(2, 5, size, size)
        assert model(x).shape == (2, 1, size, size)


@pytest.mark.parametrize("architecture", ["unet-like", "linknet-like"])
def test_parameter_budget_is_toy_scale(architecture):
    model = build_model(architecture, in_channels=5)
    assert parameter_count(model) < 150_000


def test_unknown_architecture_rejected():
    with pytest.raises(ValueError):
        build_model("efficientnet-b7", in_channels=5)


def test_depth_configurable():
    shallow = build_model("unet-like", in_channels=3, depth=2, base_width=8)
    deep = build_model("unet-like", in_channels=3, depth=4, base_width=8)
    assert parameter_count(deep) > parameter_count(shallow)
    x = torch.zeros(1, 3, 64, 64)
    assert shallow(x).shape == deep(x).shape == (1, 1, 64, 64)


def test_constant_weight_model_is_spatially_uniform():
    model = build_model("unet-like", in_channels=2)
    with torch.no_grad():
        for p in model.parameters():
            p.zero_()
    x = torch.randn(1, 2, 64, 64)
    prob = torch.sigmoid(model(x))
    assert torch.all(prob == 0.5)


def test_seeded_init_reproducible():
    torch.manual_seed(7)
    a = build_model("linknet-like", in_channels=4)
    torch.manual_seed(7)
    b = build_model("linknet-like", in_channels=4)
    for pa, pb in zip(a.parameters(), b.parameters()):
        assert torch.equal(pa, pb)
