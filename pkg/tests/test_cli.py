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

"""Tests of the command line interface."""

import json

import numpy as np
import pandas as pd
import pytest

from thermofuse import cli
from thermofuse.cli import main
from thermofuse.configuration import RunConfiguration
from thermofuse.dataset import Modality, load_manifest
from thermofuse.exceptions import NonFiniteLoss

RUN_FILES = ("run.json", "history.csv", "best.ckpt", "env.txt", "metrics.json")


@pytest.fixture
def config_file(fast_config, tmp_path):
    path = tmp_path / "config.toml"
    fast_config.dump(path)
    return path


class TestConfigCreate:
    """The config create command."""

    def test_create(self, tmp_path):
        path = tmp_path / "config.toml"
        assert main(["config", "create", "-f", str(path)]) == 0
        assert RunConfiguration.from_file(path) == RunConfiguration()

    def test_refuses_to_overwrite(self, tmp_path):
        path = tmp_path / "config.toml"
        path.write_text("# mine\n")
        assert main(["config", "create", "-f", str(path)]) == 1
        assert path.read_text() == "# mine\n"
        assert main(["config", "create", "-f", str(path), "--force"]) == 0
        assert "[train]" in path.read_text()


class TestDataCommands:
    """Commands working on the data only."""

    def test_no_command(self):
        assert main([]) == 0

    def test_synth(self, tmp_path):
        config = RunConfiguration()
        config.synth.n_per_class = [3] * 6
        config.synth.image_width = 32
        config.synth.image_height = 24
        config.dump(tmp_path / "synth.toml")
        out = tmp_path / "synth"
        synth_config = str(tmp_path / "synth.toml")
        assert main(["synth", "--config", synth_config, "--out", str(out)]) == 0
        assert len(load_manifest(out / "manifest.csv")) == 18
        assert (out / "ground_truth.json").is_file()
        written = RunConfiguration.from_file(out / "config.toml")
        assert written.synth.n_per_class == [3] * 6

    def test_prepare(self, config_file, tmp_path):
        args = ["--config", str(config_file), "--out", str(tmp_path)]
        assert main(["prepare", *args]) == 0
        summary = json.loads((tmp_path / "dataset_summary.json").read_text())
        assert summary["counts"]["fused"] == [10] * 6
        assert summary["matches_table1"] is False

    def test_split_is_reproducible(self, config_file, tmp_path):
        config = ["-f", str(config_file)]
        for name in ("a", "b"):
            assert main(["split", *config, "--out", str(tmp_path / name)]) == 0
        first = (tmp_path / "a" / "split_fused.json").read_bytes()
        assert first == (tmp_path / "b" / "split_fused.json").read_bytes()
        reseeded = [*config, "--seed", "1", "--out", str(tmp_path / "c")]
        assert main(["split", *reseeded]) == 0
        assert first != (tmp_path / "c" / "split_fused.json").read_bytes()

    def test_input_overrides_manifest(self, small_synth, tmp_path):
        root, _, _ = small_synth
        out = ["--out", str(tmp_path)]
        assert main(["prepare", "--input", str(root / "manifest.csv"), *out]) == 0
        assert main(["prepare", "--input", str(tmp_path / "nothing.csv"), *out]) == 1

    def test_convert(self, small_synth, tmp_path):
        root, _, _ = small_synth
        empty = tmp_path / "empty"
        empty.mkdir()
        none = str(tmp_path / "none")
        assert main(["convert", "--input", str(empty), "--out", none]) == 0
        thermal = str(root / "thermal")
        assert main(["convert", "--input", thermal, "--out", str(tmp_path / "ok")]) == 0
        assert len(list((tmp_path / "ok").glob("*.json"))) == 60

        broken = tmp_path / "broken"
        broken.mkdir()
        frame = (root / "thermal" / "synth_00000.tiff").read_bytes()
        (broken / "good.tiff").write_bytes(frame)
        (broken / "bad.tiff").write_bytes(b"not a tiff")
        partial = str(tmp_path / "partial")
        assert main(["convert", "--input", str(broken), "--out", partial]) == 1
        assert (tmp_path / "partial" / "good.tiff").is_file()
        assert not (tmp_path / "partial" / "bad.tiff").exists()

    def test_convert_needs_input(self, tmp_path):
        assert main(["convert", "--out", str(tmp_path)]) == 1

    def test_invalid_configuration(self, tmp_path):
        path = tmp_path / "config.toml"
        path.write_text("[train]\nepochs = -1\n")
        assert main(["prepare", "--config", str(path), "--out", str(tmp_path)]) == 1

    def test_bench(self, config_file, tmp_path):
        assert main(["bench", "-f", str(config_file), "--out", str(tmp_path)]) == 0
        reports = json.loads((tmp_path / "bench" / "bench.json").read_text())
        assert [(r["model_id"], r["modality"]) for r in reports] == [("TinyVGG", "rgb")]


class TestTrainingCommands:
    """Commands training and evaluating models."""

    def test_train_eval_and_gradcam(self, config_file, tmp_path):
        out = tmp_path / "out"
        args = ["-f", str(config_file), "--out", str(out)]
        assert main(["train", *args]) == 0
        cell = out / "TinyVGG" / "fused"
        for fold in (1, 2):
            for name in RUN_FILES:
                assert (cell / f"fold_{fold}" / name).is_file()
            predictions = pd.read_csv(cell / f"fold_{fold}" / "predictions.csv")
            assert len(predictions) == 9
            np.testing.assert_allclose(
                predictions[[f"p{g}" for g in range(6)]].sum(axis=1), 1.0, atol=1e-5
            )
        aggregate = json.loads((cell / "aggregate_metrics.json").read_text())
        assert aggregate["n_reports"] == 2
        assert (cell / "row.md").read_text().count("\n") == 3

        split = (cell / "split.json").read_bytes()
        metrics = (cell / "fold_1" / "metrics.json").read_bytes()
        # Complete folds are skipped.
        assert main(["train", *args]) == 0
        assert (cell / "split.json").read_bytes() == split
        assert (cell / "fold_1" / "metrics.json").read_bytes() == metrics

        assert main(["eval", *args, "--fold", "1"]) == 0
        evaluated = json.loads((cell / "fold_1" / "metrics.json").read_text())
        assert evaluated["confusion"] == json.loads(metrics)["confusion"]

        assert main(["gradcam", *args]) == 0
        overlays = sorted((cell / "gradcam" / "fold_1").glob("*_cam.png"))
        assert len(overlays) == 2

    def test_eval_without_runs(self, config_file, tmp_path):
        out = tmp_path / "out"
        assert main(["split", "-f", str(config_file), "--out", str(out)]) == 0
        assert main(["eval", "-f", str(config_file), "--out", str(out)]) == 1

    def test_matrix_resumes(self, config_file, tmp_path):
        out = tmp_path / "out"
        args = ["-f", str(config_file), "--out", str(out)]
        assert main(["matrix", *args]) == 0
        comparison = pd.read_csv(out / "comparison.csv")
        assert list(comparison["dataset"]) == ["RGB", "RGB+Thermal"]
        assert (out / "comparison.md").read_text().count("\n") == 4
        assert (out / "fig5.png").is_file()

        aggregate = (out / "TinyVGG" / "rgb" / "aggregate_metrics.json").read_bytes()
        assert main(["matrix", *args]) == 0
        rgb_cell = out / "TinyVGG" / "rgb"
        assert (rgb_cell / "aggregate_metrics.json").read_bytes() == aggregate

    def test_matrix_continues_after_a_failure(self, config_file, tmp_path, monkeypatch):
        train_fold = cli.train_fold

        def diverging(manifest, split, fold, weights, train_config):
            if train_config.modality is Modality.RGB:
                raise NonFiniteLoss("Loss is nan at epoch 1.")
            return train_fold(manifest, split, fold, weights, train_config)

        monkeypatch.setattr(cli, "train_fold", diverging)
        out = tmp_path / "out"
        assert main(["matrix", "-f", str(config_file), "--out", str(out)]) == 1
        failures = json.loads((out / "failures.json").read_text())
        assert [(f["backbone"], f["dataset"]) for f in failures] == [("TinyVGG", "RGB")]
        assert (out / "TinyVGG" / "fused" / "aggregate_metrics.json").is_file()
        comparison = pd.read_csv(out / "comparison.csv")
        assert list(comparison["dataset"]) == ["RGB+Thermal"]

        monkeypatch.setattr(cli, "train_fold", train_fold)
        assert main(["matrix", "-f", str(config_file), "--out", str(out)]) == 0
        assert not (out / "failures.json").exists()

@pytest.mark.slow
class TestFusionAdvantage:
    """On the default synthetic dataset, fusion beats both single-modality models."""

    def test_fused_beats_single_modalities(self, tmp_path):
        data = tmp_path / "data"
        assert main(["synth", "--out", str(data)]) == 0

        config = RunConfiguration()
        config.data.manifest = str(data / "manifest.csv")
        config.split.n_folds = 2
        config.model.pretrained = False
        config.model.matrix_backbones = ["TinyVGG"]
        config.train.epochs = 15
        config.train.device = "cpu"
        config.eval.figures = False
        path = tmp_path / "config.toml"
        config.dump(path)

        accuracies = {"rgb": [], "thermal": [], "fused": []}
        for seed in (0, 1, 2):
            out = tmp_path / f"seed_{seed}"
            args = ["-f", str(path), "--seed", str(seed), "--out", str(out)]
            assert main(["matrix", *args]) == 0
            for modality, values in accuracies.items():
                aggregate = json.loads(
                    (out / "TinyVGG" / modality / "aggregate_metrics.json").read_text()
                )
                values.append(aggregate["accuracy"])
                if modality == "fused":
                    fold = out / "TinyVGG" / "fused" / "fold_1"
                    history = pd.read_csv(fold / "history.csv")
                    assert history["val_acc"].max() > 0.8

        fused = np.mean(accuracies["fused"])
        assert fused - np.mean(accuracies["rgb"]) >= 0.05
        assert fused - np.mean(accuracies["thermal"]) >= 0.05
