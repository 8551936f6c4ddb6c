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
Sample manifest, modality datasets, stratified split, class weights and augmentation.

The manifest is a CSV file with the header ``id,rgb_path,thermal_raw_path,grade,thermal_valid``.
Relative paths are resolved against the directory of the manifest. A sample with
``thermal_valid=false`` is only part of the RGB dataset.
"""
import logging
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Dict, FrozenSet, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
import torch
import torch.nn.functional as F
import torchvision.transforms.functional as TF
from PIL import Image
from sklearn.model_selection import StratifiedKFold, train_test_split
from sklearn.utils.class_weight import compute_class_weight
from torch.utils.data import Dataset
from torchvision.transforms import InterpolationMode

from thermofuse.exceptions import (
    BadGrade,
    DuplicateId,
    EmptyClass,
    IoError,
    LeakageDetected,
    MissingFile,
    TooFewSamples,
)
from thermofuse.thermal import process_raw
from thermofuse.utils import PathLike, dump_json, load_json

logger = logging.getLogger(__name__)

NUM_CLASSES = 6  #: Number of Wagner grades.
GRADES = tuple(range(NUM_CLASSES))  #: The Wagner grades 0..5.

MANIFEST_COLUMNS = ["id", "rgb_path", "thermal_raw_path", "grade", "thermal_valid"]

TABLE1_RGB_COUNTS = [150, 106, 496, 226, 184, 43]  #: Per-grade counts of the clinical RGB dataset.
TABLE1_THERMAL_COUNTS = [134, 84, 456, 214, 179, 41]  #: Per-grade counts of the clinical thermal datasets.

TRUE_VALUES = ("true", "1", "yes")
FALSE_VALUES = ("false", "0", "no", "")


class Modality(str, Enum):
    """
    The three datasets: RGB only, thermal only and the fused four-channel one.
    """

    RGB = "rgb"
    THERMAL = "thermal"
    FUSED = "fused"

    @property
    def channels(self) -> int:
        """
        Number of channels of the model input.

        Returns:
            int: 4 for the fused modality, 3 otherwise (the thermal channel is replicated).
        """
        return 4 if self is Modality.FUSED else 3

    @property
    def uses_thermal(self) -> bool:
        """
        Whether the modality needs a valid thermal frame.

        Returns:
            bool: True for the thermal and fused modalities.
        """
        return self is not Modality.RGB

    @property
    def display_name(self) -> str:
        """
        Name of the dataset in tables and figures.

        Returns:
            str: "RGB", "Thermal" or "RGB+Thermal".
        """
        return {
            Modality.RGB: "RGB",
            Modality.THERMAL: "Thermal",
            Modality.FUSED: "RGB+Thermal",
        }[self]


@dataclass(frozen=True)
class SampleRecord:
    """
    One row of the manifest.
    """

    id: str  #: Unique sample identifier.
    rgb_path: Path  #: Path of the RGB image.
    thermal_raw_path: Optional[Path]  #: Path of the raw thermal TIFF, if any.
    grade: int  #: Wagner grade, 0..5.
    thermal_valid: bool  #: False if the thermal frame is distorted or absent.

    def usable_for(self, modality: Modality) -> bool:
        """
        Check if the sample belongs to the dataset of a modality.

        Args:
            modality (Modality): the modality.

        Returns:
            bool: True if the sample can be used.
        """
        if modality.uses_thermal:
            return self.thermal_valid and self.thermal_raw_path is not None
        return True


@dataclass(frozen=True)
class DatasetManifest:
    """
    Ordered list of samples.
    """

    records: Tuple[SampleRecord, ...] = ()  #: Samples in manifest order.

    def __len__(self) -> int:
        return len(self.records)

    def records_for(self, modality: Modality) -> List[SampleRecord]:
        """
        Get the samples of the dataset of a modality, in manifest order.

        Args:
            modality (Modality): the modality.

        Returns:
            List[SampleRecord]: the usable samples.
        """
        return [record for record in self.records if record.usable_for(modality)]

    def class_counts(self, modality: Modality) -> List[int]:
        """
        Count the samples of each grade in the dataset of a modality.

        Args:
            modality (Modality): the modality.

        Returns:
            List[int]: six counts.
        """
        grades = [record.grade for record in self.records_for(modality)]
        counts = np.bincount(np.asarray(grades, dtype=int), minlength=NUM_CLASSES)
        return counts.tolist()

    @property
    def counts(self) -> Dict[str, List[int]]:
        """
        Per-grade counts of every modality.

        Returns:
            Dict[str, List[int]]: mapping modality value -> six counts.
        """
        return {modality.value: self.class_counts(modality) for modality in Modality}

    def get(self, sample_id: str) -> SampleRecord:
        """
        Get a sample by its id.

        Args:
            sample_id (str): the id.

        Raises:
            KeyError: if there is no such sample.

        Returns:
            SampleRecord: the sample.
        """
        for record in self.records:
            if record.id == sample_id:
                return record
        raise KeyError(sample_id)

    def check_table1(self) -> bool:
        """
        Compare the counts with the clinical dataset counts.

        Returns:
            bool: True if the RGB, thermal and fused counts are the published ones.
        """
        ok = True
        expected = {
            Modality.RGB: TABLE1_RGB_COUNTS,
            Modality.THERMAL: TABLE1_THERMAL_COUNTS,
            Modality.FUSED: TABLE1_THERMAL_COUNTS,
        }
        for modality, counts in expected.items():
            actual = self.class_counts(modality)
            if actual != counts:
                logger.warning(
                    "%s counts %s differ from the clinical counts %s",
                    modality.display_name,
                    actual,
                    counts,
                )
                ok = False
        return ok


def _parse_bool(value: str, row: int) -> bool:
    lowered = value.strip().lower()
    if lowered in TRUE_VALUES:
        return True
    if lowered in FALSE_VALUES:
        return False
    raise ValueError(f"Row {row}: thermal_valid must be true or false, got {value}.")


def _parse_grade(value: str, sample_id: str) -> int:
    try:
        grade = int(value.strip())
    except ValueError as exc:
        raise BadGrade(f"Sample {sample_id} has a non integer grade {value}.") from exc
    if grade not in GRADES:
        raise BadGrade(f"Sample {sample_id} has grade {grade}, outside of 0..5.")
    return grade


def _resolve(root: Path, value: str) -> Optional[Path]:
    value = value.strip()
    if not value:
        return None
    path = Path(value)
    return path if path.is_absolute() else root / path


def load_manifest(path: PathLike, check_files: bool = True) -> DatasetManifest:
    """
    Load and validate a manifest CSV file.

    Args:
        path (PathLike): path of the manifest.
        check_files (bool, optional): verify that every referenced image exists. Defaults to True.

    Raises:
        MissingFile: if the manifest or a referenced image does not exist.
        BadGrade: if a grade is outside of 0..5.
        DuplicateId: if an id appears twice.

    Returns:
        DatasetManifest: the manifest.
    """
    path = Path(path)
    if not path.is_file():
        raise MissingFile(f"Manifest {path} does not exist.")
    logger.info("Loading manifest %s", path)

    frame = pd.read_csv(path, dtype=str, keep_default_na=False)
    missing = [column for column in MANIFEST_COLUMNS if column not in frame.columns]
    if missing:
        raise ValueError(f"Manifest {path} lacks the columns {missing}.")

    root = path.parent
    seen = set()
    records = []
    for row, line in enumerate(frame.itertuples(index=False), start=2):
        sample_id = str(line.id).strip()
        if sample_id in seen:
            raise DuplicateId(f"Sample id {sample_id} appears twice (row {row}).")
        seen.add(sample_id)

        grade = _parse_grade(str(line.grade), sample_id)
        rgb_path = _resolve(root, str(line.rgb_path))
        if rgb_path is None:
            raise MissingFile(f"Sample {sample_id} has no RGB image.")
        thermal_path = _resolve(root, str(line.thermal_raw_path))
        thermal_valid = _parse_bool(str(line.thermal_valid), row)
        if thermal_valid and thermal_path is None:
            logger.warning(
                "Sample %s is marked thermal valid without a thermal file", sample_id
            )
            thermal_valid = False

        if check_files:
            if not rgb_path.is_file():
                raise MissingFile(
                    f"RGB image {rgb_path} of sample {sample_id} is missing."
                )
            if thermal_valid and not thermal_path.is_file():
                raise MissingFile(
                    f"Thermal frame {thermal_path} of sample {sample_id} is missing."
                )

        records.append(
            SampleRecord(
                id=sample_id,
                rgb_path=rgb_path,
                thermal_raw_path=thermal_path,
                grade=grade,
                thermal_valid=thermal_valid,
            )
        )

    manifest = DatasetManifest(records=tuple(records))
    for modality in Modality:
        logger.info(
            "%s dataset: %i samples, counts %s",
            modality.display_name,
            len(manifest.records_for(modality)),
            manifest.class_counts(modality),
        )
    return manifest


def write_manifest(records: Sequence[SampleRecord], path: PathLike) -> Path:
    """
    Write a manifest CSV file.

    Paths below the directory of the manifest are written relative to it.

    Args:
        records (Sequence[SampleRecord]): the samples.
        path (PathLike): path of the manifest.

    Raises:
        IoError: if the file cannot be written.

    Returns:
        Path: path of the manifest.
    """
    path = Path(path)
    root = path.parent.resolve()

    def _relative(value: Optional[Path]) -> str:
        if value is None:
            return ""
        try:
            return Path(value).resolve().relative_to(root).as_posix()
        except ValueError:
            return str(value)

    frame = pd.DataFrame(
        [
            {
                "id": record.id,
                "rgb_path": _relative(record.rgb_path),
                "thermal_raw_path": _relative(record.thermal_raw_path),
                "grade": record.grade,
                "thermal_valid": "true" if record.thermal_valid else "false",
            }
            for record in records
        ],
        columns=MANIFEST_COLUMNS,
    )
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        frame.to_csv(path, index=False)
    except OSError as exc:
        raise IoError(f"Cannot write manifest {path}: {exc}") from exc
    return path


@dataclass(frozen=True)
class SplitPlan:
    """
    Frozen test set and cross-validation folds of the remaining samples.
    """

    seed: int  #: Seed the plan was drawn with.
    test_ids: FrozenSet[str]  #: Ids of the test set, shared by every fold.
    fold_of: Dict[str, int]  #: Fold index 1..n_folds of every non-test id.
    modality: str = Modality.FUSED.value  #: Modality the plan was drawn for.

    @property
    def n_folds(self) -> int:
        """
        Number of folds.

        Returns:
            int: the largest fold index.
        """
        return max(self.fold_of.values(), default=0)

    def val_ids(self, fold: int) -> List[str]:
        """
        Ids of the validation samples of a fold, sorted.

        Args:
            fold (int): fold index, 1..n_folds.

        Returns:
            List[str]: the ids.
        """
        self._check_fold(fold)
        return sorted(i for i, k in self.fold_of.items() if k == fold)

    def train_ids(self, fold: int) -> List[str]:
        """
        Ids of the training samples of a fold (every other fold), sorted.

        Args:
            fold (int): fold index, 1..n_folds.

        Returns:
            List[str]: the ids.
        """
        self._check_fold(fold)
        return sorted(i for i, k in self.fold_of.items() if k != fold)

    def _check_fold(self, fold: int) -> None:
        if not 1 <= fold <= self.n_folds:
            raise ValueError(f"Fold must be in 1..{self.n_folds}, got {fold}.")

    def to_json_dict(self) -> dict:
        """
        Convert the plan to its JSON form.

        Returns:
            dict: {seed, modality, test_ids, folds}.
        """
        return {
            "seed": self.seed,
            "modality": self.modality,
            "test_ids": sorted(self.test_ids),
            "folds": {
                str(k): self.val_ids(k) for k in range(1, self.n_folds + 1)
            },
        }

    def save(self, path: PathLike) -> None:
        """
        Save the plan as JSON.

        Args:
            path (PathLike): output path.
        """
        dump_json(self.to_json_dict(), path)

    @classmethod
    def load(cls, path: PathLike) -> "SplitPlan":
        """
        Load a plan saved with :py:meth:`save`.

        Args:
            path (PathLike): path of the JSON file.

        Returns:
            SplitPlan: the plan.
        """
        content = load_json(path)
        fold_of = {
            sample_id: int(fold)
            for fold, ids in content["folds"].items()
            for sample_id in ids
        }
        return cls(
            seed=int(content["seed"]),
            test_ids=frozenset(content["test_ids"]),
            fold_of=fold_of,
            modality=content.get("modality", Modality.FUSED.value),
        )


def make_split(
    manifest: DatasetManifest,
    modality: Modality,
    seed: int,
    test_fraction: float = 0.15,
    n_folds: int = 5,
) -> SplitPlan:
    """
    Set aside a stratified test set, then split the rest into stratified folds.

    The test set holds round(test_fraction x N) samples, the per-class counts are
    apportioned with the largest remainders. The plan only depends on the manifest
    order, the modality and the seed.

    Args:
        manifest (DatasetManifest): the manifest.
        modality (Modality): the dataset to split.
        seed (int): seed of the split.
        test_fraction (float, optional): fraction of the test set. Defaults to 0.15.
        n_folds (int, optional): number of folds. Defaults to 5.

    Raises:
        TooFewSamples: if the dataset is empty or a class has less than n_folds + 2 samples.

    Returns:
        SplitPlan: the plan.
    """
    records = manifest.records_for(modality)
    if not records:
        raise TooFewSamples(f"The {modality.display_name} dataset is empty.")

    ids = np.array([record.id for record in records])
    labels = np.array([record.grade for record in records])
    counts = np.bincount(labels, minlength=NUM_CLASSES)
    minimum = n_folds + 2
    for grade, count in enumerate(counts):
        if count < minimum:
            raise TooFewSamples(
                f"Grade {grade} has {count} {modality.display_name} samples, "
                f"at least {minimum} are needed."
            )

    n_test = int(np.floor(test_fraction * len(ids) + 0.5))
    rest_ids, test_ids, rest_labels, _ = train_test_split(
        ids, labels, test_size=n_test, stratify=labels, random_state=seed
    )

    fold_of = {}
    folds = StratifiedKFold(n_splits=n_folds, shuffle=True, random_state=seed)
    for k, (_, val_index) in enumerate(folds.split(rest_ids, rest_labels), start=1):
        for sample_id in rest_ids[val_index]:
            fold_of[str(sample_id)] = k

    plan = SplitPlan(
        seed=seed,
        test_ids=frozenset(str(i) for i in test_ids),
        fold_of=fold_of,
        modality=modality.value,
    )
    logger.info(
        "Split of %i %s samples: %i test, folds of %s",
        len(ids),
        modality.display_name,
        len(plan.test_ids),
        [len(plan.val_ids(k)) for k in range(1, n_folds + 1)],
    )
    return plan


@dataclass(frozen=True)
class ClassWeights:
    """
    Per-class weights of the loss, inversely proportional to the class frequency.
    """

    w: np.ndarray  #: Six positive weights.

    def as_tensor(self, device: Optional[torch.device] = None) -> torch.Tensor:
        """
        Get the weights as a float tensor.

        Args:
            device (Optional[torch.device], optional): target device. Defaults to None.

        Returns:
            torch.Tensor: tensor of shape (6,).
        """
        return torch.as_tensor(self.w, dtype=torch.float32, device=device)

    def tolist(self) -> List[float]:
        """
        Get the weights as a list.

        Returns:
            List[float]: the six weights.
        """
        return [float(x) for x in self.w]


def class_weights(counts: Sequence[int]) -> ClassWeights:
    """
    Compute the balanced class weights w_c = N / (6 n_c).

    Args:
        counts (Sequence[int]): six per-class counts.

    Raises:
        EmptyClass: if a class has no sample.

    Returns:
        ClassWeights: the weights.
    """
    counts = np.asarray(counts, dtype=int)
    if counts.shape != (NUM_CLASSES,):
        raise ValueError(f"Expected {NUM_CLASSES} counts, got {counts.shape}.")
    empty = np.flatnonzero(counts == 0)
    if empty.size:
        raise EmptyClass(f"Grade {int(empty[0])} has no sample.")
    classes = np.arange(NUM_CLASSES)
    w = compute_class_weight("balanced", classes=classes, y=np.repeat(classes, counts))
    return ClassWeights(w=w)


# pylint: disable=too-many-instance-attributes
@dataclass(frozen=True)
class AugmentationConfig:
    """
    Parameters of the training augmentation.

    Geometric transformations are applied to every channel with the same parameters.
    The color jitter is only applied to the RGB channels.
    """

    hflip_p: float = 0.3  #: Probability of horizontal flip.
    rotation_deg: float = 10.0  #: Maximal absolute rotation, in degrees.
    affine: bool = True  #: Random translation and scaling.
    crop_resize: bool = True  #: Random crop resized back to the input size.
    brightness: float = 0.2  #: Brightness factor range [1 - b, 1 + b].
    contrast: float = 0.2  #: Contrast factor range [1 - c, 1 + c].
    saturation: float = 0.2  #: Saturation factor range [1 - s, 1 + s].
    hue: float = 0.1  #: Hue shift range [-h, h].
    photometric_rgb_only: bool = True  #: Never jitter the thermal channel.
    max_translate: float = 0.05  #: Maximal translation, fraction of the width and height.
    scale_range: Tuple[float, float] = (0.95, 1.05)  #: Range of the affine scaling.
    crop_area: Tuple[float, float] = (0.85, 1.0)  #: Range of the cropped area fraction.

    def __post_init__(self):
        if not self.photometric_rgb_only:
            raise ValueError(
                "The color jitter cannot be applied to the thermal channel."
            )

    @classmethod
    def identity(cls) -> "AugmentationConfig":
        """
        Get a configuration that leaves every sample unchanged.

        Returns:
            AugmentationConfig: the configuration.
        """
        return cls(
            hflip_p=0.0,
            rotation_deg=0.0,
            affine=False,
            crop_resize=False,
            brightness=0.0,
            contrast=0.0,
            saturation=0.0,
            hue=0.0,
        )

    @property
    def has_jitter(self) -> bool:
        """
        Whether a photometric transformation is enabled.

        Returns:
            bool: True if one of the jitter ranges is not zero.
        """
        return any(
            v > 0 for v in (self.brightness, self.contrast, self.saturation, self.hue)
        )


@dataclass(frozen=True)
class FusedSample:
    """
    A model input with its label.
    """

    tensor: torch.Tensor  #: Float tensor of shape (C, S, S), values in [0, 1].
    label: int  #: Wagner grade.
    modality: Modality = Modality.FUSED  #: Modality of the tensor.
    sample_id: str = ""  #: Id of the sample, if any.


def _jitter(
    rgb: torch.Tensor, config: AugmentationConfig, rng: np.random.Generator
) -> torch.Tensor:
    operations = []
    if config.brightness > 0:
        factor = rng.uniform(1 - config.brightness, 1 + config.brightness)
        operations.append(lambda x, f=factor: TF.adjust_brightness(x, f))
    if config.contrast > 0:
        factor = rng.uniform(1 - config.contrast, 1 + config.contrast)
        operations.append(lambda x, f=factor: TF.adjust_contrast(x, f))
    if config.saturation > 0:
        factor = rng.uniform(1 - config.saturation, 1 + config.saturation)
        operations.append(lambda x, f=factor: TF.adjust_saturation(x, f))
    if config.hue > 0:
        shift = rng.uniform(-config.hue, config.hue)
        operations.append(lambda x, f=shift: TF.adjust_hue(x, f))
    for index in rng.permutation(len(operations)):
        rgb = operations[index](rgb)
    return rgb


def augment(
    sample: FusedSample, config: AugmentationConfig, rng: np.random.Generator
) -> FusedSample:
    """
    Apply a random augmentation to a sample.

    The parameters are drawn from rng. The horizontal flip, rotation, affine transform
    and crop are applied to all the channels with the same parameters. The color jitter
    is applied to the three RGB channels only, in a random order, and never to the
    thermal modality. A transformation with a zero range is skipped, so that
    :py:meth:`AugmentationConfig.identity` returns the input unchanged.

    Args:
        sample (FusedSample): the sample.
        config (AugmentationConfig): the augmentation parameters.
        rng (np.random.Generator): the random generator.

    Returns:
        FusedSample: the augmented sample, with the same label and shape.
    """
    x = sample.tensor
    _, height, width = x.shape

    if config.hflip_p > 0 and rng.random() < config.hflip_p:
        x = TF.hflip(x)

    angle = 0.0
    if config.rotation_deg > 0:
        angle = rng.uniform(-config.rotation_deg, config.rotation_deg)
    translate = [0, 0]
    scale = 1.0
    if config.affine:
        shift = rng.uniform(-config.max_translate, config.max_translate, size=2)
        translate = [int(round(shift[0] * width)), int(round(shift[1] * height))]
        scale = rng.uniform(*config.scale_range)
    if config.rotation_deg > 0 or config.affine:
        x = TF.affine(
            x,
            angle=float(angle),
            translate=translate,
            scale=float(scale),
            shear=[0.0, 0.0],
            interpolation=InterpolationMode.BILINEAR,
        )

    if config.crop_resize:
        area = rng.uniform(*config.crop_area)
        crop_height = max(1, int(round(height * np.sqrt(area))))
        crop_width = max(1, int(round(width * np.sqrt(area))))
        top = int(rng.integers(0, height - crop_height + 1))
        left = int(rng.integers(0, width - crop_width + 1))
        x = TF.resized_crop(
            x,
            top,
            left,
            crop_height,
            crop_width,
            [height, width],
            interpolation=InterpolationMode.BILINEAR,
            antialias=True,
        )

    if config.has_jitter and sample.modality is not Modality.THERMAL:
        x = torch.cat([_jitter(x[:3], config, rng), x[3:]])

    return FusedSample(
        tensor=x.clamp(0.0, 1.0),
        label=sample.label,
        modality=sample.modality,
        sample_id=sample.sample_id,
    )


def load_rgb(path: PathLike, input_size: int) -> torch.Tensor:
    """
    Load an RGB image resized to a square input.

    Args:
        path (PathLike): path of the image.
        input_size (int): side of the output, in pixels.

    Returns:
        torch.Tensor: tensor of shape (3, input_size, input_size) in [0, 1].
    """
    with Image.open(path) as image:
        image = image.convert("RGB").resize(
            (input_size, input_size), resample=Image.BILINEAR
        )
        return TF.pil_to_tensor(image).float() / 255.0


def load_thermal(
    path: PathLike, input_size: int, step: float = 1.0, floor: float = 0.0
) -> torch.Tensor:
    """
    Load a raw thermal frame, normalize it and resample it to a square input.

    Args:
        path (PathLike): path of the raw TIFF.
        input_size (int): side of the output, in pixels.
        step (float, optional): step of the adaptive window, in °C. Defaults to 1.0.
        floor (float, optional): floor of the adaptive window, in °C. Defaults to 0.0.

    Returns:
        torch.Tensor: tensor of shape (1, input_size, input_size) in [0, 1].
    """
    _, _, norm = process_raw(Path(path).read_bytes(), step=step, floor=floor)
    values = torch.from_numpy(norm.values.astype(np.float32))[None, None]
    resampled = F.interpolate(
        values, size=(input_size, input_size), mode="bilinear", align_corners=False
    )
    return resampled[0].clamp(0.0, 1.0)


def load_sample(
    record: SampleRecord,
    modality: Modality,
    input_size: int,
    step: float = 1.0,
    floor: float = 0.0,
) -> FusedSample:
    """
    Load the model input of a sample.

    Both images are resized to input_size x input_size, accepting the aspect distortion.
    The thermal modality replicates the thermal channel three times.

    Args:
        record (SampleRecord): the sample.
        modality (Modality): the modality.
        input_size (int): side of the backbone input, in pixels.
        step (float, optional): step of the adaptive window, in °C. Defaults to 1.0.
        floor (float, optional): floor of the adaptive window, in °C. Defaults to 0.0.

    Raises:
        MissingFile: if the modality needs a thermal frame the sample does not have.

    Returns:
        FusedSample: the sample.
    """
    if modality.uses_thermal and not record.usable_for(modality):
        raise MissingFile(f"Sample {record.id} has no valid thermal frame.")

    if modality is Modality.RGB:
        tensor = load_rgb(record.rgb_path, input_size)
    elif modality is Modality.THERMAL:
        thermal = load_thermal(record.thermal_raw_path, input_size, step, floor)
        tensor = thermal.repeat(3, 1, 1)
    else:
        tensor = torch.cat(
            [
                load_rgb(record.rgb_path, input_size),
                load_thermal(record.thermal_raw_path, input_size, step, floor),
            ]
        )
    return FusedSample(
        tensor=tensor, label=record.grade, modality=modality, sample_id=record.id
    )


# pylint: disable=too-many-instance-attributes
class FootDataset(Dataset):
    """
    Torch dataset of the samples of one modality.

    Every item is a tuple (tensor, label). The augmentation of an item only depends on
    (seed, epoch, index), so that the batches can be reproduced whatever the number of
    workers.
    """

    # pylint: disable=too-many-arguments
    def __init__(
        self,
        records: Sequence[SampleRecord],
        modality: Modality,
        input_size: int,
        augmentation: Optional[AugmentationConfig] = None,
        seed: int = 0,
        forbidden_ids: FrozenSet[str] = frozenset(),
        cache: bool = False,
        step: float = 1.0,
        floor: float = 0.0,
    ):
        """
        Args:
            records (Sequence[SampleRecord]): the samples.
            modality (Modality): the modality.
            input_size (int): side of the backbone input, in pixels.
            augmentation (Optional[AugmentationConfig], optional): augmentation, None to disable it. Defaults to None.
            seed (int, optional): seed of the augmentation. Defaults to 0.
            forbidden_ids (FrozenSet[str], optional): ids that must never be loaded, typically the test set. Defaults to frozenset().
            cache (bool, optional): keep the decoded samples in memory. Defaults to False.
            step (float, optional): step of the adaptive window, in °C. Defaults to 1.0.
            floor (float, optional): floor of the adaptive window, in °C. Defaults to 0.0.

        Raises:
            LeakageDetected: if one of the samples is forbidden.
        """
        self.records = list(records)
        self.modality = modality
        self.input_size = input_size
        self.augmentation = augmentation
        self.seed = seed
        self.forbidden_ids = frozenset(forbidden_ids)
        self.step = step
        self.floor = floor
        self.epoch = 0
        self._cache: Optional[Dict[int, FusedSample]] = {} if cache else None

        leaked = sorted(self.forbidden_ids.intersection(self.ids))
        if leaked:
            raise LeakageDetected(
                f"{len(leaked)} test samples requested for training, first is {leaked[0]}."
            )

    @property
    def ids(self) -> List[str]:
        """
        Ids of the samples, in order.

        Returns:
            List[str]: the ids.
        """
        return [record.id for record in self.records]

    @property
    def labels(self) -> List[int]:
        """
        Grades of the samples, in order.

        Returns:
            List[int]: the grades.
        """
        return [record.grade for record in self.records]

    def set_epoch(self, epoch: int) -> None:
        """
        Set the epoch used to derive the augmentation parameters.

        Args:
            epoch (int): the epoch.
        """
        self.epoch = epoch

    def __len__(self) -> int:
        return len(self.records)

    def sample(self, index: int) -> FusedSample:
        """
        Load a sample without augmentation.

        Args:
            index (int): index of the sample.

        Raises:
            LeakageDetected: if the sample is forbidden.

        Returns:
            FusedSample: the sample.
        """
        record = self.records[index]
        if record.id in self.forbidden_ids:
            raise LeakageDetected(f"Test sample {record.id} requested for training.")
        if self._cache is not None and index in self._cache:
            return self._cache[index]
        loaded = load_sample(
            record, self.modality, self.input_size, self.step, self.floor
        )
        if self._cache is not None:
            self._cache[index] = loaded
        return loaded

    def __getitem__(self, index: int) -> Tuple[torch.Tensor, int]:
        loaded = self.sample(index)
        if self.augmentation is not None:
            rng = np.random.default_rng([self.seed, self.epoch, index])
            loaded = augment(loaded, self.augmentation, rng)
        return loaded.tensor, loaded.label


def records_by_id(
    records: Sequence[SampleRecord], ids: Sequence[str]
) -> List[SampleRecord]:
    """
    Select samples by id, in the order of the ids.

    Args:
        records (Sequence[SampleRecord]): the samples.
        ids (Sequence[str]): ids to select.

    Raises:
        KeyError: if an id is unknown.

    Returns:
        List[SampleRecord]: the selected samples.
    """
    index = {record.id: record for record in records}
    return [index[sample_id] for sample_id in ids]


@dataclass
class DatasetSummary:
    """
    Counts and class weights of every modality, as written by the prepare command.
    """

    counts: Dict[str, List[int]] = field(default_factory=dict)  #: Per-modality counts.
    weights: Dict[str, Optional[List[float]]] = field(
        default_factory=dict
    )  #: Per-modality class weights, None if a class is empty.
    matches_table1: bool = False  #: Whether the counts are the clinical ones.


def summarize(manifest: DatasetManifest) -> DatasetSummary:
    """
    Summarize a manifest.

    Args:
        manifest (DatasetManifest): the manifest.

    Returns:
        DatasetSummary: the counts and class weights of every modality.
    """
    summary = DatasetSummary(
        counts=manifest.counts, matches_table1=manifest.check_table1()
    )
    for modality in Modality:
        try:
            summary.weights[modality.value] = class_weights(
                manifest.class_counts(modality)
            ).tolist()
        except EmptyClass as exc:
            logger.warning("No class weights for %s: %s", modality.display_name, exc)
            summary.weights[modality.value] = None
    return summary
