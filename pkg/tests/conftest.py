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

"""Shared fixtures: small synthetic datasets, raw frames and fast configurations."""

import numpy as np
import pytest
import torch

from thermofuse.configuration import RunConfiguration
from thermofuse.synth import SynthSpec, generate
from thermofuse.thermal import (
    FRAME_HEIGHT,
    FRAME_WIDTH,
    RawThermalFrame,
    celsius_to_counts,
)


@pytest.fixture(autouse=True)
def _no_seed_environment(monkeypatch):
    monkeypatch.delenv("THERMOFUSE_SEED", raising=False)


@pytest.fixture(autouse=True)
def _deterministic_torch():
    torch.manual_seed(0)
    torch.set_num_threads(1)


def make_frame(celsius) -> RawThermalFrame:
    """Frame of constant or given temperatures."""
    celsius = np.broadcast_to(
        np.asarray(celsius, dtype=np.float64), (FRAME_HEIGHT, FRAME_WIDTH)
    )
    return RawThermalFrame(pixels=celsius_to_counts(celsius))


@pytest.fixture
def frame_factory():
    return make_frame


SMALL_SPEC = SynthSpec(seed=3, n_per_class=(10,) * 6, image_width=64, image_height=48)


@pytest.fixture(scope="session")
def small_synth(tmp_path_factory):
    """60 samples, 10 per grade: (root, manifest, ground truth)."""
    root = tmp_path_factory.mktemp("synth_small")
    manifest, ground_truth = generate(SMALL_SPEC, root)
    return root, manifest, ground_truth


@pytest.fixture
def fast_config(small_synth):
    """Configuration running TinyVGG for one epoch on the small synthetic dataset."""
    root, _, _ = small_synth
    config = RunConfiguration()
    config.data.manifest = str(root / "manifest.csv")
    config.split.n_folds = 2
    config.model.backbone = "TinyVGG"
    config.model.pretrained = False
    config.model.matrix_backbones = ["TinyVGG"]
    config.model.matrix_modalities = ["rgb", "fused"]
    config.train.epochs = 1
    config.train.batch_size = 16
    config.train.device = "cpu"
    config.eval.batch_size = 16
    config.eval.figures = False
    config.eval.cam_max_samples = 2
    config.bench.backbones = ["TinyVGG"]
    config.bench.modalities = ["rgb"]
    config.bench.n_warmup = 1
    config.bench.n_iter = 3
    config.bench.device = "cpu"
    config.validate()
    return config
