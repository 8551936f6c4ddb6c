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

"""Tests of the loss, the training loop, the evaluation and the run directories."""

import dataclasses

import numpy as np
import pytest
import torch
import torch.nn.functional as F

from thermofuse import training
from thermofuse.dataset import (
    AugmentationConfig,
    FusedSample,
    Modality,
    class_weights,
    load_sample,
    make_split,
)
from thermofuse.exceptions import LeakageDetected, NonFiniteLoss, ShapeMismatch
from thermofuse.model import build_model
from thermofuse.training import (
    TrainConfig,
    evaluate_test,
    is_complete,
    load_run,
    predict,
    predict_batch,
    save_run,
    train,
    train_fold,
    weighted_cross_entropy,
)


@pytest.fixture
def tiny_setup(small_synth):
    _, manifest, _ = small_synth
    split = make_split(manifest, Modality.FUSED, seed=0, n_folds=2)
    weights = class_weights(manifest.class_counts(Modality.FUSED))
    config = TrainConfig(
        modality=Modality.FUSED,
        backbone="TinyVGG",
        epochs=2,
        batch_size=16,
        pretrained=False,
        device="cpu",
        augmentation=AugmentationConfig(),
    )
    return manifest, split, weights, config


class TestLoss:
    """Class-weighted cross-entropy."""

    def test_uniform_weights_is_mean_cross_entropy(self):
        logits = torch.randn(10, 6)
        targets = torch.randint(0, 6, (10,))
        loss = weighted_cross_entropy(logits, targets, torch.ones(6))
        torch.testing.assert_close(loss, F.cross_entropy(logits, targets))

    def test_weight_scales_class_contribution(self):
        logits = torch.randn(8, 6)
        targets = torch.full((8,), 3)
        weights = torch.ones(6)
        base = weighted_cross_entropy(logits, targets, weights)
        weights[3] = 2.0
        doubled = weighted_cross_entropy(logits, targets, weights)
        torch.testing.assert_close(doubled, 2 * base)

    def test_heavier_class_increases_loss(self):
        logits = torch.randn(12, 6)
        targets = torch.arange(12) % 6
        weights = torch.ones(6)
        before = weighted_cross_entropy(logits, targets, weights)
        weights[0] = 3.0
        assert weighted_cross_entropy(logits, targets, weights) > before

    def test_gradient_against_finite_differences(self):
        model = build_model("TinyVGG", modality=Modality.FUSED, pretrained=False)
        model = model.double().eval()
        inputs = torch.rand(4, 4, 64, 64, dtype=torch.float64)
        targets = torch.tensor([0, 2, 3, 5])
        weights = torch.tensor([1.0, 2.0, 0.5, 1.5, 1.0, 3.0], dtype=torch.float64)
        layer = model.head[-1].weight

        loss = weighted_cross_entropy(model(inputs), targets, weights)
        (gradient,) = torch.autograd.grad(loss, layer)

        rng = np.random.default_rng(0)
        eps = 1e-6
        for _ in range(20):
            i, j = int(rng.integers(layer.shape[0])), int(rng.integers(layer.shape[1]))
            with torch.no_grad():
                original = layer[i, j].item()
                layer[i, j] = original + eps
                plus = weighted_cross_entropy(model(inputs), targets, weights).item()
                layer[i, j] = original - eps
                minus = weighted_cross_entropy(model(inputs), targets, weights).item()
                layer[i, j] = original
            numerical = (plus - minus) / (2 * eps)
            assert gradient[i, j].item() == pytest.approx(numerical, rel=1e-3, abs=1e-9)


class TestTrain:
    """Training loop."""

    def test_zero_epochs_returns_initial_model(self, tiny_setup):
        manifest, split, weights, config = tiny_setup
        model = build_model("TinyVGG", pretrained=False)
        before = {k: v.clone() for k, v in model.state_dict().items()}
        no_epoch = dataclasses.replace(config, epochs=0)
        run = train(model, manifest, split, 1, weights, no_epoch)
        assert run.best_epoch == 0
        assert run.history == []
        for key, value in run.model.state_dict().items():
            torch.testing.assert_close(value, before[key])

    def test_two_epochs(self, tiny_setup):
        manifest, split, weights, config = tiny_setup
        run = train_fold(manifest, split, 1, weights, config)
        assert 1 <= len(run.history) <= 2
        assert 1 <= run.best_epoch <= len(run.history)
        assert np.isfinite(run.best_val_loss)
        assert not set(run.train_ids) & split.test_ids
        assert set(run.val_ids) == set(split.val_ids(1))
        assert run.weights == pytest.approx(weights.tolist())

    def test_training_is_reproducible(self, tiny_setup):
        manifest, split, weights, config = tiny_setup
        config = dataclasses.replace(config, epochs=1)
        first = train_fold(manifest, split, 2, weights, config)
        second = train_fold(manifest, split, 2, weights, config)
        assert first.history == second.history

    def test_modality_mismatch(self, tiny_setup):
        manifest, split, weights, config = tiny_setup
        model = build_model("TinyVGG", modality=Modality.RGB, pretrained=False)
        with pytest.raises(ValueError):
            train(model, manifest, split, 1, weights, config)

    def test_non_finite_loss(self, tiny_setup, monkeypatch):
        manifest, split, weights, config = tiny_setup

        def broken(logits, targets, weights):
            return (logits * float("nan")).sum()

        monkeypatch.setattr(training, "weighted_cross_entropy", broken)
        with pytest.raises(NonFiniteLoss):
            train_fold(manifest, split, 1, weights, config)


class TestInference:
    """Prediction, evaluation and run directories."""

    def test_predict_shapes(self):
        model = build_model("TinyVGG", modality=Modality.RGB, pretrained=False)
        probabilities = predict_batch(model, torch.rand(3, 3, 64, 64))
        assert probabilities.shape == (3, 6)
        np.testing.assert_allclose(probabilities.sum(axis=1), 1.0)
        with pytest.raises(ShapeMismatch):
            predict_batch(model, torch.rand(2, 4, 64, 64))

    def test_predict_is_a_distribution(self):
        model = build_model("TinyVGG", modality=Modality.FUSED, pretrained=False)
        sample = FusedSample(
            tensor=torch.rand(4, 64, 64),
            label=0,
            modality=Modality.FUSED,
            sample_id="s0",
        )
        first = predict(model, sample)
        np.testing.assert_array_equal(first, predict(model, sample))
        assert np.all(first >= 0.0)
        assert abs(first.sum() - 1.0) < 1e-6
        assert model.training

    def test_predict_keeps_the_mode(self):
        model = build_model("TinyVGG", modality=Modality.RGB, pretrained=False)
        model.train()
        predict_batch(model, torch.rand(2, 3, 64, 64))
        assert model.training and model.head.training
        model.eval()
        predict_batch(model, torch.rand(2, 3, 64, 64))
        assert not model.training and not model.head.training

    def test_zero_output_layer_is_uniform(self):
        model = build_model("TinyVGG", modality=Modality.FUSED, pretrained=False)
        with torch.no_grad():
            model.head[-1].weight.zero_()
            model.head[-1].bias.zero_()
        sample = FusedSample(
            tensor=torch.rand(4, 64, 64),
            label=3,
            modality=Modality.FUSED,
            sample_id="s1",
        )
        uniform = np.full(6, 1 / 6)
        np.testing.assert_allclose(predict(model, sample), uniform, atol=1e-12)

    def test_run_directory(self, tiny_setup, tmp_path):
        manifest, split, weights, config = tiny_setup
        one_epoch = dataclasses.replace(config, epochs=1)
        run = train_fold(manifest, split, 1, weights, one_epoch)
        save_run(run, tmp_path / "fold_1", {"train": {"epochs": 1}})
        assert not is_complete(tmp_path / "fold_1")
        evaluation = evaluate_test(run, manifest, split, batch_size=8)
        evaluation.report.save(tmp_path / "fold_1")
        assert is_complete(tmp_path / "fold_1")
        assert sorted(evaluation.ids) == sorted(split.test_ids)
        assert evaluation.probabilities.shape == (len(split.test_ids), 6)
        assert (tmp_path / "fold_1" / "env.txt").read_text().startswith("thermofuse")

        loaded = load_run(tmp_path / "fold_1")
        assert loaded.config == run.config
        assert loaded.best_epoch == run.best_epoch
        record = manifest.get(evaluation.ids[0])
        sample = load_sample(record, Modality.FUSED, 64)
        np.testing.assert_allclose(
            predict(loaded.model, sample), predict(run.model, sample), atol=1e-6
        )

    def test_leakage_in_evaluation(self, tiny_setup):
        manifest, split, weights, config = tiny_setup
        run = train(
            build_model("TinyVGG", pretrained=False),
            manifest,
            split,
            1,
            weights,
            dataclasses.replace(config, epochs=0),
        )
        run.train_ids.append(sorted(split.test_ids)[0])
        with pytest.raises(LeakageDetected):
            evaluate_test(run, manifest, split)

    def test_config_round_trip(self):
        config = TrainConfig(backbone="TinyVGG", augmentation=None)
        assert TrainConfig.from_dict(config.to_dict()) == config
        config = TrainConfig(backbone="TinyVGG")
        assert TrainConfig.from_dict(config.to_dict()) == config
