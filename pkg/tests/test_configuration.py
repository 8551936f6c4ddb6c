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

"""Tests of the TOML configuration."""

from pathlib import Path

import pytest

from thermofuse.configuration import (
    SEED_ENVIRONMENT_VARIABLE,
    InvalidConfiguration,
    RunConfiguration,
)

#: The default configuration shipped with the repository.
SHIPPED_CONFIG = Path(__file__).parent.parent / "config.toml"


class TestDefaults:
    """Default values."""

    def test_training_defaults(self):
        config = RunConfiguration()
        assert config.split.seed == 42
        assert config.split.test_fraction == 0.15
        assert config.split.n_folds == 5
        assert config.model.backbone == "VGG16"
        assert config.model.modality == "fused"
        assert config.train.learning_rate == 1e-4
        assert config.train.optimizer == "adam"
        assert config.train.hflip_p == 0.3
        assert config.train.rotation_deg == 10.0
        assert len(config.model.matrix_backbones) == 5

    def test_shipped_file_is_valid(self):
        config = RunConfiguration.from_file(SHIPPED_CONFIG)
        assert config.model.modality in config.model.matrix_modalities

    def test_empty_document(self):
        assert RunConfiguration.from_dict({}) == RunConfiguration()


class TestValidation:
    """Rejection of invalid documents."""

    @pytest.mark.parametrize(
        "content",
        [
            {"optimizer": {"name": "adam"}},
            {"train": {"learning_rte": 1e-3}},
            {"train": {"epochs": "ten"}},
            {"train": {"epochs": True}},
            {"train": {"learning_rate": -1.0}},
            {"model": {"backbone": "AlexNet"}},
            {"model": {"modality": "depth"}},
            {"model": {"matrix_modalities": ["rgb", "xray"]}},
            {"split": {"n_folds": 1}},
            {"split": {"test_fraction": 1.5}},
            {"eval": {"cam_target": 6}},
            {"data": {"convert_format": "jpeg"}},
            {"synth": {"n_per_class": [10, 10]}},
            {"train": []},
        ],
    )
    def test_invalid(self, content):
        with pytest.raises(InvalidConfiguration):
            RunConfiguration.from_dict(content)

    def test_integers_accepted_for_floats(self):
        config = RunConfiguration.from_dict({"train": {"learning_rate": 1}})
        assert isinstance(config.train.learning_rate, float)

    def test_unreadable_file(self, tmp_path):
        with pytest.raises(InvalidConfiguration):
            RunConfiguration.from_file(tmp_path / "missing.toml")
        (tmp_path / "broken.toml").write_text("[train\nepochs = 3\n")
        with pytest.raises(InvalidConfiguration):
            RunConfiguration.from_file(tmp_path / "broken.toml")


class TestSeeds:
    """Precedence of the seeds: defaults, file, environment, command line."""

    def test_file_overrides_defaults(self, tmp_path):
        path = tmp_path / "config.toml"
        path.write_text("[split]\nseed = 7\n")
        config = RunConfiguration.from_file(path)
        assert config.split.seed == 7
        assert config.train.seed == 0

    def test_environment_overrides_file(self, tmp_path, monkeypatch):
        path = tmp_path / "config.toml"
        path.write_text("[split]\nseed = 7\n")
        monkeypatch.setenv(SEED_ENVIRONMENT_VARIABLE, "11")
        config = RunConfiguration.from_file(path)
        config.apply_environment()
        assert (config.split.seed, config.train.seed, config.synth.seed) == (11, 11, 11)

    def test_command_line_overrides_environment(self, monkeypatch):
        monkeypatch.setenv(SEED_ENVIRONMENT_VARIABLE, "11")
        config = RunConfiguration()
        config.apply_environment()
        config.apply_overrides(seed=3, modality="rgb", backbone="ResNet50")
        assert (config.split.seed, config.train.seed) == (3, 3)
        assert config.model.modality == "rgb"
        assert config.model.backbone == "ResNet50"

    def test_bad_environment(self, monkeypatch):
        monkeypatch.setenv(SEED_ENVIRONMENT_VARIABLE, "forty-two")
        with pytest.raises(InvalidConfiguration):
            RunConfiguration().apply_environment()

    def test_bad_override(self):
        with pytest.raises(InvalidConfiguration):
            RunConfiguration().apply_overrides(modality="depth")


def test_dump_and_reload(tmp_path):
    config = RunConfiguration.from_dict(
        {
            "train": {"epochs": 3, "learning_rate": 5e-4},
            "model": {"backbone": "TinyVGG", "matrix_modalities": ["rgb"]},
            "eval": {"cam_samples": ["a", "b"]},
        }
    )
    config.dump(tmp_path / "config.toml")
    assert RunConfiguration.from_file(tmp_path / "config.toml") == config
    assert "[train]" in str(config)
