# thermofuse - RGB and thermal image fusion for diabetic foot ulcer staging.
# Copyright (C) 2025-2026 The thermofuse developers

# This program is free software: you can redistribute it and/or modify
# it under the terms of the GNU General Public License as published by
# the Free Software Foundation, either version 3 of the License, or
# (at your option) any later version.

# This program is distributed in the hope that it will be useful,
# but WITHOUT ANY WARRANTY; without even the implied warranty of
# MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.  See the
# GNU General Public License for more details.

# You should have received a copy of the GNU General Public License
# along with this program.  If not, see <https://www.gnu.org/licenses/>.

"""Tests of the backbones, the head and the input-layer inflation."""

import pytest
import torch
from torch import nn

from thermofuse import model as model_module
from thermofuse.dataset import Modality
from thermofuse.exceptions import WeightsUnavailable, WrongChannelCount
from thermofuse.model import (
    BACKBONES,
    HeadSpec,
    InflationMode,
    build_head,
    build_model,
    count_params,
    head_params,
    inflate_conv,
    inflate_input_layer,
    to_fused,
)

#: Published head sizes, in millions, per feature dimension.
PUBLISHED_HEADS = {1024: 1.58, 1280: 1.84, 2048: 2.62, 4096: 4.72}


class TestHead:
    """Classification head."""

    @pytest.mark.parametrize("feature_dim, published", sorted(PUBLISHED_HEADS.items()))
    def test_closed_form_against_published(self, feature_dim, published):
        assert head_params(feature_dim) / 1e6 == pytest.approx(published, rel=0.01)

    @pytest.mark.parametrize("feature_dim", [256, 1024, 2048])
    def test_closed_form_matches_layers(self, feature_dim):
        head = build_head(feature_dim)
        counted = sum(p.numel() for p in head.parameters())
        expected = head_params(feature_dim)
        assert counted == expected == HeadSpec().param_count(feature_dim)

    def test_layer_order(self):
        head = build_head(64)
        kinds = [type(layer) for layer in head]
        assert kinds == [
            nn.Linear,
            nn.ReLU,
            nn.BatchNorm1d,
            nn.Dropout,
            nn.Linear,
            nn.ReLU,
            nn.BatchNorm1d,
            nn.Dropout,
            nn.Linear,
        ]
        assert head[0].out_features == 1024
        assert head[4].out_features == 512
        assert head[-1].out_features == 6
        assert head[3].p == 0.5


class TestInflation:
    """Four-channel first layer."""

    def test_mean_rgb(self):
        weights = torch.randn(8, 3, 5, 5)
        inflated = inflate_input_layer(weights, InflationMode.MEAN_RGB)
        assert inflated.shape == (8, 4, 5, 5)
        torch.testing.assert_close(inflated[:, :3], weights)
        torch.testing.assert_close(inflated[:, 3], weights.mean(dim=1))

    def test_zeros(self):
        inflated = inflate_input_layer(torch.randn(8, 3, 3, 3), "zeros")
        assert torch.count_nonzero(inflated[:, 3]) == 0

    def test_wrong_channels(self):
        with pytest.raises(WrongChannelCount):
            inflate_input_layer(torch.randn(8, 4, 3, 3))
        with pytest.raises(WrongChannelCount):
            inflate_conv(nn.Conv2d(1, 8, 3))

    def test_conv_keeps_geometry(self):
        conv = nn.Conv2d(3, 16, kernel_size=7, stride=2, padding=3, bias=False)
        inflated = inflate_conv(conv)
        assert inflated.in_channels == 4
        assert (inflated.kernel_size, inflated.stride, inflated.padding) == (
            (7, 7),
            (2, 2),
            (3, 3),
        )
        assert inflated.bias is None

    def test_mean_rgb_on_gray_input(self):
        conv = nn.Conv2d(3, 4, 3, padding=1)
        inflated = inflate_conv(conv, InflationMode.MEAN_RGB)
        gray = torch.rand(1, 1, 8, 8)
        rgb_out = conv(gray.repeat(1, 3, 1, 1))
        fused_out = inflated(torch.cat([gray.repeat(1, 3, 1, 1), gray], dim=1))
        weight_sum = conv.weight.sum(dim=1, keepdim=True)
        expected = rgb_out + nn.functional.conv2d(gray, weight_sum / 3, padding=1)
        torch.testing.assert_close(fused_out, expected, atol=1e-5, rtol=1e-5)


class TestZeroThermalEquivalence:
    """A zeros-inflated fused model ignores the thermal channel."""

    @pytest.mark.parametrize("backbone", ["TinyVGG", "ResNet50"])
    def test_logits_match(self, backbone):
        rgb_model = build_model(
            backbone, modality=Modality.RGB, pretrained=False
        ).eval()
        fused_model = to_fused(rgb_model, InflationMode.ZEROS).eval()
        size = rgb_model.input_size
        generator = torch.Generator().manual_seed(0)
        worst = 0.0
        with torch.no_grad():
            for _ in range(10 if backbone == "ResNet50" else 50):
                rgb = torch.rand(1, 3, size, size, generator=generator)
                thermal = torch.rand(1, 1, size, size, generator=generator)
                fused = fused_model(torch.cat([rgb, thermal], dim=1))
                difference = rgb_model(rgb) - fused
                worst = max(worst, difference.abs().max().item())
        assert worst < 1e-5
        assert rgb_model.in_channels == 3 and fused_model.in_channels == 4

    def test_only_three_channel_models(self):
        fused = build_model("TinyVGG", modality=Modality.FUSED, pretrained=False)
        with pytest.raises(WrongChannelCount):
            to_fused(fused)


class TestBackbones:
    """Parameter counts and construction of the backbones."""

    @pytest.mark.parametrize(
        "backbone", ["DenseNet121", "EfficientNetV2S", "ResNet50", "VGG16"]
    )
    def test_published_backbone_sizes(self, backbone):
        rgb = build_model(backbone, modality=Modality.RGB, pretrained=False)
        fused = build_model(backbone, modality=Modality.FUSED, pretrained=False)
        rgb_backbone, rgb_head = count_params(rgb)
        fused_backbone, _ = count_params(fused)
        spec = BACKBONES[backbone]
        expected = spec.backbone_params_expected
        assert rgb_backbone / 1e6 == pytest.approx(expected, rel=0.005)
        assert rgb_head == head_params(spec.feature_dim)
        conv = rgb.backbone.get_submodule(spec.first_conv)
        kh, kw = conv.kernel_size
        assert fused_backbone - rgb_backbone == kh * kw * conv.out_channels

    def test_tiny_forward(self):
        model = build_model("TinyVGG", modality="fused", pretrained=False).eval()
        logits = model(torch.rand(2, 4, 64, 64))
        assert logits.shape == (2, 6)
        assert model.backbone_id == "TinyVGG"

    def test_thermal_uses_three_channels(self):
        model = build_model("TinyVGG", modality=Modality.THERMAL, pretrained=False)
        assert model.in_channels == 3
        assert model.backbone.features[0].in_channels == 3

    def test_freeze_backbone(self):
        model = build_model("TinyVGG", pretrained=False, freeze_backbone=True)
        assert not any(p.requires_grad for p in model.backbone.parameters())
        assert all(p.requires_grad for p in model.head.parameters())

    def test_unknown_backbone(self):
        with pytest.raises(KeyError):
            build_model("AlexNet", pretrained=False)

    def test_weights_unavailable(self, monkeypatch):
        def offline(**_kwargs):
            raise RuntimeError("no network")

        monkeypatch.setattr(model_module.models, "resnet50", offline)
        with pytest.raises(WeightsUnavailable):
            build_model("ResNet50", pretrained=True)

    def test_pretrained_inception_drops_aux_head(self, monkeypatch):
        reference = model_module.models.inception_v3(
            weights=None, aux_logits=True, transform_input=False, init_weights=True
        ).state_dict()

        def offline_state_dict(_self, *_args, **_kwargs):
            return reference

        weights = model_module.models.Inception_V3_Weights
        monkeypatch.setattr(weights, "get_state_dict", offline_state_dict)
        model = build_model("InceptionV3", modality=Modality.RGB, pretrained=True)
        model.eval()
        assert model.backbone.AuxLogits is None
        assert not model.backbone.aux_logits
        first_conv = model.backbone.Conv2d_1a_3x3.conv.weight
        torch.testing.assert_close(first_conv, reference["Conv2d_1a_3x3.conv.weight"])
        with torch.no_grad():
            assert model(torch.rand(1, 3, 299, 299)).shape == (1, 6)

    @pytest.mark.slow
    @pytest.mark.parametrize("backbone", sorted(BACKBONES))
    @pytest.mark.parametrize("modality", list(Modality))
    def test_every_backbone_forward(self, backbone, modality):
        model = build_model(backbone, modality=modality, pretrained=False).eval()
        size = model.input_size
        with torch.no_grad():
            logits = model(torch.rand(1, modality.channels, size, size))
        assert logits.shape == (1, 6)
        features = model.features(torch.rand(1, modality.channels, size, size))
        assert features.shape == (1, BACKBONES[backbone].feature_dim)
