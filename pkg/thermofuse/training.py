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

"""
Training, inference and run directories.

A run trains one classifier on four folds, validates it on the remaining fold and keeps
the weights of the epoch with the lowest validation loss. A run directory contains:

* ``run.json``: the training configuration, the fold, the split seed and the class weights;
* ``history.csv``: the per-epoch losses and accuracies;
* ``best.ckpt``: the weights of the best epoch;
* ``env.txt``: the versions of the software stack.
"""
import copy
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import TYPE_CHECKING, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
import torch
import torch.nn.functional as F
from torch.utils.data import DataLoader

from thermofuse.dataset import (
    AugmentationConfig,
    ClassWeights,
    DatasetManifest,
    FootDataset,
    FusedSample,
    NUM_CLASSES,
    Modality,
    SampleRecord,
    SplitPlan,
    records_by_id,
)
from thermofuse.exceptions import LeakageDetected, NonFiniteLoss, ShapeMismatch
from thermofuse.infos import get_script_infos
from thermofuse.metrics import MetricsReport, compute_report
from thermofuse.model import FusionClassifier, InflationMode, build_model
from thermofuse.utils import PathLike, dump_json, load_json

if TYPE_CHECKING:
    from thermofuse.configuration import RunConfiguration

logger = logging.getLogger(__name__)

RUN_FILE = "run.json"
HISTORY_FILE = "history.csv"
CHECKPOINT_FILE = "best.ckpt"
ENV_FILE = "env.txt"
METRICS_FILE = "metrics.json"


# pylint: disable=too-many-instance-attributes
@dataclass
class TrainConfig:
    """
    Everything needed to reproduce a training run.
    """

    modality: Modality = Modality.FUSED  #: Dataset the model is trained on.
    backbone: str = "VGG16"  #: Identifier of the backbone.
    epochs: int = 50  #: Maximal number of epochs.
    batch_size: int = 32  #: Batch size.
    learning_rate: float = 1e-4  #: Learning rate.
    optimizer_id: str = "adam"  #: adam, adamw or sgd.
    early_stop_patience: int = 10  #: Epochs without improvement before stopping.
    seed: int = 0  #: Seed of the initialization, the shuffling and the augmentation.
    inflation_mode: InflationMode = InflationMode.MEAN_RGB  #: Kernels of the thermal channel.
    pretrained: bool = True  #: Start from the ImageNet weights.
    freeze_backbone: bool = False  #: Only train the head.
    augmentation: Optional[AugmentationConfig] = field(
        default_factory=AugmentationConfig
    )  #: Augmentation of the training samples, None to disable.
    device: str = "auto"  #: auto, cpu or cuda.
    num_workers: int = 0  #: Data loader workers.
    thermal_step: float = 1.0  #: Step of the adaptive window, in °C.
    thermal_floor: float = 0.0  #: Floor of the adaptive window, in °C.
    cache: bool = False  #: Keep the decoded samples in memory.

    @classmethod
    def from_configuration(cls, config: "RunConfiguration") -> "TrainConfig":
        """
        Extract the training configuration from the run configuration.

        Args:
            config (RunConfiguration): the run configuration.

        Returns:
            TrainConfig: the training configuration.
        """
        train = config.train
        augmentation = None
        if train.augment:
            augmentation = AugmentationConfig(
                hflip_p=train.hflip_p,
                rotation_deg=train.rotation_deg,
                affine=train.affine,
                crop_resize=train.crop_resize,
                brightness=train.brightness,
                contrast=train.contrast,
                saturation=train.saturation,
                hue=train.hue,
            )
        return cls(
            modality=Modality(config.model.modality),
            backbone=config.model.backbone,
            epochs=train.epochs,
            batch_size=train.batch_size,
            learning_rate=train.learning_rate,
            optimizer_id=train.optimizer,
            early_stop_patience=train.early_stop_patience,
            seed=train.seed,
            inflation_mode=InflationMode(config.model.inflation_mode),
            pretrained=config.model.pretrained,
            freeze_backbone=config.model.freeze_backbone,
            augmentation=augmentation,
            device=train.device,
            num_workers=train.num_workers,
            thermal_step=config.data.thermal_step,
            thermal_floor=config.data.thermal_floor,
            cache=config.data.cache,
        )

    def to_dict(self) -> dict:
        """
        Convert the configuration to a JSON compatible dictionary.

        Returns:
            dict: the configuration.
        """
        content = asdict(self)
        content["modality"] = self.modality.value
        content["inflation_mode"] = self.inflation_mode.value
        if self.augmentation is not None:
            content["augmentation"] = {
                k: list(v) if isinstance(v, tuple) else v
                for k, v in asdict(self.augmentation).items()
            }
        return content

    @classmethod
    def from_dict(cls, content: dict) -> "TrainConfig":
        """
        Build the configuration from :py:meth:`to_dict` output.

        Args:
            content (dict): the dictionary.

        Returns:
            TrainConfig: the configuration.
        """
        content = dict(content)
        content["modality"] = Modality(content["modality"])
        content["inflation_mode"] = InflationMode(content["inflation_mode"])
        augmentation = content.get("augmentation")
        if augmentation is not None:
            content["augmentation"] = AugmentationConfig(
                **{
                    k: tuple(v) if isinstance(v, list) else v
                    for k, v in augmentation.items()
                }
            )
        return cls(**content)


@dataclass
class TrainedRun:
    """
    Result of a training run.
    """

    model: FusionClassifier  #: The model with the weights of the best epoch.
    config: TrainConfig  #: The training configuration.
    fold: int  #: Validation fold.
    split_seed: int  #: Seed of the split.
    weights: List[float]  #: Class weights of the loss.
    history: List[Dict[str, float]] = field(default_factory=list)  #: One entry per epoch.
    best_epoch: int = 0  #: Epoch of the kept weights, 0 for the initial ones.
    best_val_loss: float = math.inf  #: Validation loss of the kept weights.
    train_ids: List[str] = field(default_factory=list)  #: Ids of the training samples.
    val_ids: List[str] = field(default_factory=list)  #: Ids of the validation samples.


def select_device(name: str = "auto") -> torch.device:
    """
    Get the torch device.

    Args:
        name (str, optional): auto, cpu or cuda. Defaults to "auto".

    Returns:
        torch.device: cuda if requested or if auto and available, cpu otherwise.
    """
    if name == "cuda" or (name == "auto" and torch.cuda.is_available()):
        if not torch.cuda.is_available():
            logger.warning("CUDA requested but not available, using the CPU")
            return torch.device("cpu")
        return torch.device("cuda")
    return torch.device("cpu")


def weighted_cross_entropy(
    logits: torch.Tensor, targets: torch.Tensor, weights: torch.Tensor
) -> torch.Tensor:
    """
    Class-weighted cross-entropy: sum of w[y_i] x CE_i divided by the batch size.

    With uniform unit weights, this is the usual mean cross-entropy. Doubling the
    weight of a class doubles the contribution of its samples.

    Args:
        logits (torch.Tensor): logits of shape (B, 6).
        targets (torch.Tensor): grades of shape (B,).
        weights (torch.Tensor): class weights of shape (6,).

    Returns:
        torch.Tensor: the scalar loss.
    """
    losses = F.cross_entropy(
        logits, targets, weight=weights.to(logits.dtype), reduction="sum"
    )
    return losses / max(targets.shape[0], 1)


def _make_optimizer(
    model: FusionClassifier, config: TrainConfig
) -> torch.optim.Optimizer:
    parameters = [p for p in model.parameters() if p.requires_grad]
    if config.optimizer_id == "adam":
        return torch.optim.Adam(parameters, lr=config.learning_rate)
    if config.optimizer_id == "adamw":
        return torch.optim.AdamW(parameters, lr=config.learning_rate)
    if config.optimizer_id == "sgd":
        return torch.optim.SGD(parameters, lr=config.learning_rate, momentum=0.9)
    raise ValueError(f"Unknown optimizer {config.optimizer_id}.")


def _run_epoch(
    model: FusionClassifier,
    loader: DataLoader,
    weights: torch.Tensor,
    device: torch.device,
    optimizer: Optional[torch.optim.Optimizer] = None,
) -> Tuple[float, float]:
    total_loss = 0.0
    correct = 0
    count = 0
    for inputs, targets in loader:
        inputs = inputs.to(device)
        targets = targets.to(device)
        with torch.set_grad_enabled(optimizer is not None):
            logits = model(inputs)
            loss = weighted_cross_entropy(logits, targets, weights)
        if not torch.isfinite(loss):
            raise NonFiniteLoss(f"The loss is {loss.item()}.")
        if optimizer is not None:
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
        total_loss += loss.item() * targets.shape[0]
        correct += int((logits.argmax(dim=1) == targets).sum().item())
        count += targets.shape[0]
    if count == 0:
        return math.nan, math.nan
    return total_loss / count, correct / count


# pylint: disable=too-many-arguments, too-many-locals
def train(
    model: FusionClassifier,
    manifest: DatasetManifest,
    split: SplitPlan,
    fold: int,
    weights: ClassWeights,
    config: TrainConfig,
) -> TrainedRun:
    """
    Train a model on every fold except one, validated on the remaining fold.

    The test samples of the split are never loaded. After the last epoch, the model
    holds the weights of the epoch with the lowest validation loss.

    Args:
        model (FusionClassifier): the model, trained in place.
        manifest (DatasetManifest): the manifest.
        split (SplitPlan): the split.
        fold (int): validation fold, 1..n_folds.
        weights (ClassWeights): class weights of the loss.
        config (TrainConfig): the training configuration.

    Raises:
        LeakageDetected: if a test sample is part of the training or validation samples.
        NonFiniteLoss: if the loss becomes NaN or infinite.

    Returns:
        TrainedRun: the run.
    """
    if model.modality is not config.modality:
        raise ValueError(
            f"The model takes the {model.modality.display_name} dataset, "
            f"the configuration the {config.modality.display_name} dataset."
        )
    records = manifest.records_for(config.modality)
    train_ids = split.train_ids(fold)
    val_ids = split.val_ids(fold)
    run = TrainedRun(
        model=model,
        config=config,
        fold=fold,
        split_seed=split.seed,
        weights=weights.tolist(),
        train_ids=train_ids,
        val_ids=val_ids,
    )
    if config.epochs == 0:
        logger.info("No epoch requested, returning the initial model")
        return run

    device = select_device(config.device)
    model.to(device)
    torch.manual_seed(config.seed)

    common = {
        "modality": config.modality,
        "input_size": model.input_size,
        "forbidden_ids": split.test_ids,
        "cache": config.cache,
        "step": config.thermal_step,
        "floor": config.thermal_floor,
    }
    train_set = FootDataset(
        records_by_id(records, train_ids),
        augmentation=config.augmentation,
        seed=config.seed,
        **common,
    )
    val_set = FootDataset(records_by_id(records, val_ids), **common)
    generator = torch.Generator().manual_seed(config.seed)
    train_loader = DataLoader(
        train_set,
        batch_size=config.batch_size,
        shuffle=True,
        generator=generator,
        num_workers=config.num_workers,
        # Batch normalization cannot train on a batch of one sample.
        drop_last=len(train_set) % config.batch_size == 1,
    )
    val_loader = DataLoader(
        val_set, batch_size=config.batch_size, num_workers=config.num_workers
    )

    class_weights = weights.as_tensor(device)
    optimizer = _make_optimizer(model, config)
    best_state = copy.deepcopy(model.state_dict())
    stale_epochs = 0

    logger.info(
        "Training %s on %s, fold %i: %i training and %i validation samples",
        model.backbone_id,
        config.modality.display_name,
        fold,
        len(train_set),
        len(val_set),
    )
    for epoch in range(1, config.epochs + 1):
        train_set.set_epoch(epoch)
        model.train()
        train_loss, train_acc = _run_epoch(
            model, train_loader, class_weights, device, optimizer
        )
        model.eval()
        val_loss, val_acc = _run_epoch(model, val_loader, class_weights, device)
        monitored = train_loss if math.isnan(val_loss) else val_loss
        run.history.append(
            {
                "epoch": epoch,
                "train_loss": train_loss,
                "train_acc": train_acc,
                "val_loss": val_loss,
                "val_acc": val_acc,
            }
        )
        logger.info(
            "Epoch %i: train loss %f, val loss %f, val accuracy %f",
            epoch,
            train_loss,
            val_loss,
            val_acc,
        )
        if monitored < run.best_val_loss:
            run.best_val_loss = monitored
            run.best_epoch = epoch
            best_state = copy.deepcopy(model.state_dict())
            stale_epochs = 0
        else:
            stale_epochs += 1
            if stale_epochs >= config.early_stop_patience:
                logger.info("Early stopping at epoch %i", epoch)
                break

    model.load_state_dict(best_state)
    model.eval()
    logger.info(
        "Best epoch %i with validation loss %f", run.best_epoch, run.best_val_loss
    )
    return run


def check_input(model: FusionClassifier, tensor: torch.Tensor) -> None:
    """
    Check that a sample tensor matches the input of a model.

    Args:
        model (FusionClassifier): the model.
        tensor (torch.Tensor): tensor of shape (C, S, S).

    Raises:
        ShapeMismatch: if the shape does not match.
    """
    expected = (model.in_channels, model.input_size, model.input_size)
    if tuple(tensor.shape) != expected:
        raise ShapeMismatch(
            f"Expected an input of shape {expected}, got {tuple(tensor.shape)}."
        )


@torch.no_grad()
def predict_batch(model: FusionClassifier, tensors: torch.Tensor) -> np.ndarray:
    """
    Compute the class probabilities of a batch.

    Args:
        model (FusionClassifier): the model.
        tensors (torch.Tensor): batch of shape (B, C, S, S).

    Raises:
        ShapeMismatch: if the inputs do not match the model.

    Returns:
        np.ndarray: probabilities of shape (B, 6), as float64.
    """
    if tensors.ndim != 4:
        raise ShapeMismatch(
            f"Expected a batch of shape (B, C, S, S), got {tuple(tensors.shape)}."
        )
    check_input(model, tensors[0])
    was_training = model.training
    model.eval()
    try:
        device = next(model.parameters()).device
        logits = model(tensors.to(device)).double()
    finally:
        model.train(was_training)
    return torch.softmax(logits, dim=1).cpu().numpy()


def predict(model: FusionClassifier, sample: FusedSample) -> np.ndarray:
    """
    Compute the class probabilities of a sample.

    The model runs in inference mode (no dropout and batch normalization with the
    running statistics), its previous mode is restored afterwards.

    Args:
        model (FusionClassifier): the model.
        sample (FusedSample): the sample.

    Raises:
        ShapeMismatch: if the sample does not match the model.

    Returns:
        np.ndarray: the 6 probabilities.
    """
    check_input(model, sample.tensor)
    return predict_batch(model, sample.tensor.unsqueeze(0))[0]


@dataclass
class Evaluation:
    """
    Predictions of a model on a set of samples and their metrics.
    """

    ids: List[str]  #: Ids of the samples.
    labels: np.ndarray  #: True grades.
    probabilities: np.ndarray  #: Probabilities of shape (N, 6).
    report: MetricsReport  #: Metrics of the predictions.

    @property
    def predictions(self) -> np.ndarray:
        """
        Predicted grades.

        Returns:
            np.ndarray: argmax of the probabilities.
        """
        return self.probabilities.argmax(axis=1)


def evaluate(
    model: FusionClassifier,
    records: Sequence[SampleRecord],
    batch_size: int = 32,
    step: float = 1.0,
    floor: float = 0.0,
    num_workers: int = 0,
) -> Evaluation:
    """
    Evaluate a model on samples, without augmentation.

    Args:
        model (FusionClassifier): the model.
        records (Sequence[SampleRecord]): the samples.
        batch_size (int, optional): batch size. Defaults to 32.
        step (float, optional): step of the adaptive window, in °C. Defaults to 1.0.
        floor (float, optional): floor of the adaptive window, in °C. Defaults to 0.0.
        num_workers (int, optional): data loader workers. Defaults to 0.

    Returns:
        Evaluation: predictions and metrics.
    """
    dataset = FootDataset(
        records, model.modality, model.input_size, step=step, floor=floor
    )
    loader = DataLoader(dataset, batch_size=batch_size, num_workers=num_workers)
    probabilities = [np.zeros((0, NUM_CLASSES))]
    for inputs, _ in loader:
        probabilities.append(predict_batch(model, inputs))
    probabilities = np.concatenate(probabilities)
    labels = np.asarray(dataset.labels, dtype=int)
    logger.info("Evaluated %i samples", len(labels))
    return Evaluation(
        ids=dataset.ids,
        labels=labels,
        probabilities=probabilities,
        report=compute_report(labels, probabilities=probabilities),
    )


def evaluate_test(
    run: TrainedRun, manifest: DatasetManifest, split: SplitPlan, batch_size: int = 32
) -> Evaluation:
    """
    Evaluate a run on the test set of its split.

    Args:
        run (TrainedRun): the run.
        manifest (DatasetManifest): the manifest.
        split (SplitPlan): the split the run was trained on.
        batch_size (int, optional): batch size. Defaults to 32.

    Raises:
        LeakageDetected: if a test sample was used to train or validate the run.

    Returns:
        Evaluation: predictions and metrics on the test set.
    """
    seen = split.test_ids.intersection(run.train_ids + run.val_ids)
    if seen:
        raise LeakageDetected(f"{len(seen)} test samples were seen during training.")
    records = records_by_id(
        manifest.records_for(run.config.modality), sorted(split.test_ids)
    )
    return evaluate(
        run.model,
        records,
        batch_size=batch_size,
        step=run.config.thermal_step,
        floor=run.config.thermal_floor,
        num_workers=run.config.num_workers,
    )


def save_run(
    run: TrainedRun, run_dir: PathLike, configuration: Optional[dict] = None
) -> Path:
    """
    Write a run directory.

    Args:
        run (TrainedRun): the run.
        run_dir (PathLike): the directory.
        configuration (Optional[dict], optional): the full run configuration, embedded in run.json. Defaults to None.

    Returns:
        Path: the directory.
    """
    run_dir = Path(run_dir)
    run_dir.mkdir(parents=True, exist_ok=True)
    dump_json(
        {
            "backbone": run.model.backbone_id,
            "modality": run.config.modality.value,
            "fold": run.fold,
            "split_seed": run.split_seed,
            "class_weights": run.weights,
            "best_epoch": run.best_epoch,
            "best_val_loss": (
                None if math.isinf(run.best_val_loss) else run.best_val_loss
            ),
            "train_ids": run.train_ids,
            "val_ids": run.val_ids,
            "train_config": run.config.to_dict(),
            "configuration": configuration,
        },
        run_dir / RUN_FILE,
    )
    pd.DataFrame(
        run.history,
        columns=["epoch", "train_loss", "train_acc", "val_loss", "val_acc"],
    ).to_csv(run_dir / HISTORY_FILE, index=False)
    torch.save(run.model.state_dict(), run_dir / CHECKPOINT_FILE)
    (run_dir / ENV_FILE).write_text(get_script_infos() + "\n", encoding="utf-8")
    logger.info("Run saved in %s", run_dir)
    return run_dir


def load_run(run_dir: PathLike, device: str = "cpu") -> TrainedRun:
    """
    Read a run directory written by :py:func:`save_run`.

    Args:
        run_dir (PathLike): the directory.
        device (str, optional): device of the model. Defaults to "cpu".

    Returns:
        TrainedRun: the run, with the model in inference mode.
    """
    run_dir = Path(run_dir)
    content = load_json(run_dir / RUN_FILE)
    config = TrainConfig.from_dict(content["train_config"])
    model = build_model(
        content["backbone"],
        modality=config.modality,
        inflation_mode=config.inflation_mode,
        pretrained=False,
        freeze_backbone=config.freeze_backbone,
    )
    torch_device = select_device(device)
    state = torch.load(
        run_dir / CHECKPOINT_FILE, map_location=torch_device, weights_only=True
    )
    model.load_state_dict(state)
    model.to(torch_device).eval()
    history = pd.read_csv(run_dir / HISTORY_FILE).to_dict(orient="records")
    best_val_loss = content["best_val_loss"]
    return TrainedRun(
        model=model,
        config=config,
        fold=content["fold"],
        split_seed=content["split_seed"],
        weights=content["class_weights"],
        history=history,
        best_epoch=content["best_epoch"],
        best_val_loss=math.inf if best_val_loss is None else best_val_loss,
        train_ids=content["train_ids"],
        val_ids=content["val_ids"],
    )


def is_complete(run_dir: PathLike) -> bool:
    """
    Check if a run directory holds a trained and evaluated run.

    Args:
        run_dir (PathLike): the directory.

    Returns:
        bool: True if run.json, best.ckpt and metrics.json exist.
    """
    run_dir = Path(run_dir)
    return all(
        (run_dir / name).is_file()
        for name in (RUN_FILE, CHECKPOINT_FILE, METRICS_FILE)
    )


def train_fold(
    manifest: DatasetManifest,
    split: SplitPlan,
    fold: int,
    weights: ClassWeights,
    config: TrainConfig,
) -> TrainedRun:
    """
    Build a model from the configuration and train it on a fold.

    Args:
        manifest (DatasetManifest): the manifest.
        split (SplitPlan): the split.
        fold (int): validation fold.
        weights (ClassWeights): class weights of the loss.
        config (TrainConfig): the training configuration.

    Returns:
        TrainedRun: the run.
    """
    torch.manual_seed(config.seed)
    model = build_model(
        config.backbone,
        modality=config.modality,
        inflation_mode=config.inflation_mode,
        pretrained=config.pretrained,
        freeze_backbone=config.freeze_backbone,
    )
    return train(model, manifest, split, fold, weights, config)
