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
Declarative configuration of a run.

The configuration is a TOML document with the sections ``[data]``, ``[split]``,
``[model]``, ``[train]``, ``[eval]``, ``[bench]`` and ``[synth]``. Every key has a
default value, unknown keys are errors. The seeds can be overridden for every section
at once with the ``THERMOFUSE_SEED`` environment variable; command line flags are
applied last.
"""
import os
import logging
import typing
from dataclasses import dataclass, field, fields, asdict
from typing import Any, Dict, List, Optional

import toml

from thermofuse.configuration.exceptions import InvalidConfiguration
from thermofuse.dataset import Modality, NUM_CLASSES
from thermofuse.model import BACKBONES, InflationMode
from thermofuse.utils import PathLike

logger = logging.getLogger(__name__)

SEED_ENVIRONMENT_VARIABLE = "THERMOFUSE_SEED"  #: Variable overriding every seed.

DEFAULT_MANIFEST: str = "manifest.csv"  #: Default path of the manifest.
DEFAULT_THERMAL_STEP: float = 1.0  #: Default step of the adaptive window, in °C.
DEFAULT_THERMAL_FLOOR: float = 0.0  #: Default floor of the adaptive window, in °C.
DEFAULT_CONVERT_FORMAT: str = "tiff"  #: Default output format of the conversion.

DEFAULT_SPLIT_SEED: int = 42  #: Default seed of the split.
DEFAULT_TEST_FRACTION: float = 0.15  #: Default fraction of the test set.
DEFAULT_N_FOLDS: int = 5  #: Default number of folds.

DEFAULT_BACKBONE: str = "VGG16"  #: Default backbone.
DEFAULT_MODALITY: str = "fused"  #: Default modality.
DEFAULT_INFLATION_MODE: str = "mean_rgb"  #: Default inflation of the first layer.
PUBLISHED_BACKBONES: List[str] = [
    "DenseNet121",
    "EfficientNetV2S",
    "InceptionV3",
    "ResNet50",
    "VGG16",
]  #: The five ImageNet backbones of the comparison.
ALL_MODALITIES: List[str] = [m.value for m in Modality]  #: The three datasets.

DEFAULT_EPOCHS: int = 50  #: Default maximal number of epochs.
DEFAULT_BATCH_SIZE: int = 32  #: Default batch size.
DEFAULT_LEARNING_RATE: float = 1e-4  #: Default learning rate.
DEFAULT_OPTIMIZER: str = "adam"  #: Default optimizer.
DEFAULT_PATIENCE: int = 10  #: Default early stopping patience, in epochs.
DEFAULT_TRAIN_SEED: int = 0  #: Default seed of the training.

DEFAULT_N_WARMUP: int = 20  #: Default number of untimed passes.
DEFAULT_N_ITER: int = 200  #: Default number of timed passes.

OPTIMIZERS = ("adam", "adamw", "sgd")
DEVICES = ("auto", "cpu", "cuda")
CONVERT_FORMATS = ("tiff", "png")


@dataclass
class DataConfiguration:
    """
    Configuration of the data: manifest and thermal pre-processing.
    """

    manifest: str = field(default=DEFAULT_MANIFEST)  #: Path of the manifest CSV.
    thermal_step: float = field(
        default=DEFAULT_THERMAL_STEP
    )  #: Step of the adaptive window shift, in °C.
    thermal_floor: float = field(
        default=DEFAULT_THERMAL_FLOOR
    )  #: Lowest allowed lower bound of the window, in °C.
    convert_format: str = field(
        default=DEFAULT_CONVERT_FORMAT
    )  #: Output of the conversion: "tiff" (float32) or "png" (16 bits).
    cache: bool = field(default=False)  #: Keep decoded samples in memory.

    def validate(self) -> None:
        """
        Check the values of the section.

        Raises:
            InvalidConfiguration: if a value is invalid.
        """
        if self.thermal_step <= 0:
            raise InvalidConfiguration("data.thermal_step must be positive.")
        if self.convert_format not in CONVERT_FORMATS:
            raise InvalidConfiguration(
                f"data.convert_format must be one of {CONVERT_FORMATS}."
            )


@dataclass
class SplitConfiguration:
    """
    Configuration of the test set and cross-validation split.
    """

    seed: int = field(default=DEFAULT_SPLIT_SEED)  #: Seed of the split.
    test_fraction: float = field(
        default=DEFAULT_TEST_FRACTION
    )  #: Fraction of the samples set aside for the test set.
    n_folds: int = field(default=DEFAULT_N_FOLDS)  #: Number of folds.

    def validate(self) -> None:
        """
        Check the values of the section.

        Raises:
            InvalidConfiguration: if a value is invalid.
        """
        if not 0 < self.test_fraction < 1:
            raise InvalidConfiguration("split.test_fraction must be in ]0, 1[.")
        if self.n_folds < 2:
            raise InvalidConfiguration("split.n_folds must be at least 2.")


# pylint: disable=too-many-instance-attributes
@dataclass
class ModelConfiguration:
    """
    Configuration of the classifier.
    """

    backbone: str = field(default=DEFAULT_BACKBONE)  #: Backbone identifier.
    modality: str = field(default=DEFAULT_MODALITY)  #: rgb, thermal or fused.
    inflation_mode: str = field(
        default=DEFAULT_INFLATION_MODE
    )  #: Kernels of the 4th input channel: mean_rgb or zeros.
    pretrained: bool = field(default=True)  #: Start from ImageNet weights.
    freeze_backbone: bool = field(default=False)  #: Only train the head.
    matrix_backbones: List[str] = field(
        default_factory=lambda: list(PUBLISHED_BACKBONES)
    )  #: Backbones of the comparison sweep.
    matrix_modalities: List[str] = field(
        default_factory=lambda: list(ALL_MODALITIES)
    )  #: Modalities of the comparison sweep.

    def validate(self) -> None:
        """
        Check the values of the section.

        Raises:
            InvalidConfiguration: if a value is invalid.
        """
        for backbone in [self.backbone] + self.matrix_backbones:
            if backbone not in BACKBONES:
                raise InvalidConfiguration(
                    f"Unknown backbone {backbone}. Choose from {sorted(BACKBONES)}."
                )
        for modality in [self.modality] + self.matrix_modalities:
            if modality not in ALL_MODALITIES:
                raise InvalidConfiguration(
                    f"Unknown modality {modality}. Choose from {ALL_MODALITIES}."
                )
        if self.inflation_mode not in [m.value for m in InflationMode]:
            raise InvalidConfiguration(
                f"Unknown inflation mode {self.inflation_mode}."
            )


# pylint: disable=too-many-instance-attributes
@dataclass
class TrainConfiguration:
    """
    Configuration of the optimization and of the augmentation.
    """

    epochs: int = field(default=DEFAULT_EPOCHS)  #: Maximal number of epochs.
    batch_size: int = field(default=DEFAULT_BATCH_SIZE)  #: Batch size.
    learning_rate: float = field(default=DEFAULT_LEARNING_RATE)  #: Learning rate.
    optimizer: str = field(default=DEFAULT_OPTIMIZER)  #: adam, adamw or sgd.
    early_stop_patience: int = field(
        default=DEFAULT_PATIENCE
    )  #: Epochs without validation loss improvement before stopping.
    seed: int = field(default=DEFAULT_TRAIN_SEED)  #: Seed of the training.
    num_workers: int = field(default=0)  #: Data loader workers.
    device: str = field(default="auto")  #: auto, cpu or cuda.
    augment: bool = field(default=True)  #: Apply the augmentation to training batches.
    hflip_p: float = field(default=0.3)  #: Probability of horizontal flip.
    rotation_deg: float = field(default=10.0)  #: Maximal rotation, in degrees.
    affine: bool = field(default=True)  #: Random translation and scaling.
    crop_resize: bool = field(default=True)  #: Random crop resized to the input size.
    brightness: float = field(default=0.2)  #: Color jitter brightness.
    contrast: float = field(default=0.2)  #: Color jitter contrast.
    saturation: float = field(default=0.2)  #: Color jitter saturation.
    hue: float = field(default=0.1)  #: Color jitter hue.

    def validate(self) -> None:
        """
        Check the values of the section.

        Raises:
            InvalidConfiguration: if a value is invalid.
        """
        if self.epochs < 0:
            raise InvalidConfiguration("train.epochs must be non-negative.")
        if self.batch_size < 1:
            raise InvalidConfiguration("train.batch_size must be at least 1.")
        if self.learning_rate <= 0:
            raise InvalidConfiguration("train.learning_rate must be positive.")
        if self.optimizer not in OPTIMIZERS:
            raise InvalidConfiguration(f"train.optimizer must be one of {OPTIMIZERS}.")
        if self.device not in DEVICES:
            raise InvalidConfiguration(f"train.device must be one of {DEVICES}.")
        if not 0 <= self.hflip_p <= 1:
            raise InvalidConfiguration("train.hflip_p must be in [0, 1].")
        if not 0 <= self.hue <= 0.5:
            raise InvalidConfiguration("train.hue must be in [0, 0.5].")


@dataclass
class EvalConfiguration:
    """
    Configuration of the evaluation and of the Grad-CAM explanations.
    """

    batch_size: int = field(default=DEFAULT_BATCH_SIZE)  #: Evaluation batch size.
    figures: bool = field(default=True)  #: Save confusion matrix and ROC figures.
    cam_layer: str = field(default="")  #: Grad-CAM layer, empty for the default one.
    cam_target: int = field(default=-1)  #: Grad-CAM class, -1 for the predicted one.
    cam_samples: List[str] = field(
        default_factory=list
    )  #: Sample ids to explain, empty for the first test samples.
    cam_max_samples: int = field(default=8)  #: Number of samples when none is given.

    def validate(self) -> None:
        """
        Check the values of the section.

        Raises:
            InvalidConfiguration: if a value is invalid.
        """
        if not -1 <= self.cam_target < NUM_CLASSES:
            raise InvalidConfiguration("eval.cam_target must be -1 or a grade 0..5.")


@dataclass
class BenchConfiguration:
    """
    Configuration of the inference benchmark.
    """

    n_warmup: int = field(default=DEFAULT_N_WARMUP)  #: Untimed passes.
    n_iter: int = field(default=DEFAULT_N_ITER)  #: Timed passes.
    device: str = field(default="auto")  #: auto, cpu or cuda.
    backbones: List[str] = field(
        default_factory=lambda: list(PUBLISHED_BACKBONES)
    )  #: Backbones to time.
    modalities: List[str] = field(
        default_factory=lambda: list(ALL_MODALITIES)
    )  #: Modalities to time.

    def validate(self) -> None:
        """
        Check the values of the section.

        Raises:
            InvalidConfiguration: if a value is invalid.
        """
        if self.n_iter < 1:
            raise InvalidConfiguration("bench.n_iter must be at least 1.")
        if self.device not in DEVICES:
            raise InvalidConfiguration(f"bench.device must be one of {DEVICES}.")
        for backbone in self.backbones:
            if backbone not in BACKBONES:
                raise InvalidConfiguration(f"Unknown backbone {backbone}.")
        for modality in self.modalities:
            if modality not in ALL_MODALITIES:
                raise InvalidConfiguration(f"Unknown modality {modality}.")


# pylint: disable=too-many-instance-attributes
@dataclass
class SynthConfiguration:
    """
    Configuration of the synthetic dataset.
    """

    seed: int = field(default=0)  #: Seed of the generation.
    n_per_class: List[int] = field(
        default_factory=lambda: [100] * NUM_CLASSES
    )  #: Samples per grade.
    table1_ratios: bool = field(
        default=False
    )  #: Ignore n_per_class and use the class ratios of the clinical dataset.
    total: int = field(default=600)  #: Number of samples when table1_ratios is set.
    image_width: int = field(default=160)  #: Width of the images, in pixels.
    image_height: int = field(default=120)  #: Height of the images, in pixels.
    rgb_signal_classes: List[int] = field(
        default_factory=lambda: [0, 1]
    )  #: Grades told apart by the RGB texture only.
    thermal_signal_classes: List[int] = field(
        default_factory=lambda: [2, 3, 4, 5]
    )  #: Grades told apart by the hotspot magnitude only.
    hotspot_radius: float = field(default=10.0)  #: Radius of the hotspot, in pixels.
    hotspot_peaks: List[float] = field(
        default_factory=lambda: [32.0, 32.0, 34.0, 36.0, 38.0, 40.0]
    )  #: Peak temperature of the hotspot per grade, in °C.
    background_c: float = field(default=22.0)  #: Ambient temperature, in °C.
    foot_c: float = field(default=31.0)  #: Skin temperature, in °C.
    thermal_noise: float = field(default=0.2)  #: Thermal noise std, in °C.
    rgb_noise: float = field(default=0.03)  #: RGB noise std, in [0, 1] units.
    invalid_fraction: float = field(
        default=0.0
    )  #: Fraction of distorted thermal frames.
    workers: int = field(default=1)  #: Parallel writers.

    def validate(self) -> None:
        """
        Check the values of the section.

        Raises:
            InvalidConfiguration: if a value is invalid.
        """
        if len(self.n_per_class) != NUM_CLASSES:
            raise InvalidConfiguration("synth.n_per_class must have 6 values.")
        if len(self.hotspot_peaks) != NUM_CLASSES:
            raise InvalidConfiguration("synth.hotspot_peaks must have 6 values.")
        if not 0 <= self.invalid_fraction < 1:
            raise InvalidConfiguration("synth.invalid_fraction must be in [0, 1[.")


SECTIONS = {
    "data": DataConfiguration,
    "split": SplitConfiguration,
    "model": ModelConfiguration,
    "train": TrainConfiguration,
    "eval": EvalConfiguration,
    "bench": BenchConfiguration,
    "synth": SynthConfiguration,
}


def _coerce(section: str, name: str, expected: Any, value: Any) -> Any:
    """
    Check that a value read from the file has the type of the field.

    Integers are accepted for float fields. Booleans are never accepted as numbers.

    Args:
        section (str): name of the section, for error messages.
        name (str): name of the key, for error messages.
        expected (Any): annotation of the dataclass field.
        value (Any): value read from the file.

    Raises:
        InvalidConfiguration: if the type does not match.

    Returns:
        Any: the value, converted if needed.
    """
    where = f"{section}.{name}"
    if typing.get_origin(expected) in (list, List):
        (item_type,) = typing.get_args(expected)
        if not isinstance(value, list):
            raise InvalidConfiguration(f"{where} must be a list.")
        return [_coerce(section, name, item_type, item) for item in value]
    if expected is bool:
        if not isinstance(value, bool):
            raise InvalidConfiguration(f"{where} must be a boolean.")
        return value
    if expected is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise InvalidConfiguration(f"{where} must be an integer.")
        return value
    if expected is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise InvalidConfiguration(f"{where} must be a number.")
        return float(value)
    if expected is str:
        if not isinstance(value, str):
            raise InvalidConfiguration(f"{where} must be a string.")
        return value
    return value


@dataclass
class RunConfiguration:
    """
    The full configuration of a run, one attribute per section.
    """

    data: DataConfiguration = field(default_factory=DataConfiguration)
    split: SplitConfiguration = field(default_factory=SplitConfiguration)
    model: ModelConfiguration = field(default_factory=ModelConfiguration)
    train: TrainConfiguration = field(default_factory=TrainConfiguration)
    eval: EvalConfiguration = field(default_factory=EvalConfiguration)
    bench: BenchConfiguration = field(default_factory=BenchConfiguration)
    synth: SynthConfiguration = field(default_factory=SynthConfiguration)

    @classmethod
    def from_dict(cls, content: Dict[str, Any]) -> "RunConfiguration":
        """
        Build the configuration from a dictionary, typically a parsed TOML document.

        Args:
            content (Dict[str, Any]): mapping section -> mapping key -> value.

        Raises:
            InvalidConfiguration: if a section or a key is unknown, or a value invalid.

        Returns:
            RunConfiguration: the validated configuration.
        """
        sections = {}
        for section_name, section_content in content.items():
            if section_name not in SECTIONS:
                raise InvalidConfiguration(f"Unknown section [{section_name}].")
            if not isinstance(section_content, dict):
                raise InvalidConfiguration(f"[{section_name}] must be a table.")
            section_cls = SECTIONS[section_name]
            known = {f.name: f for f in fields(section_cls)}
            values = {}
            for key, value in section_content.items():
                if key not in known:
                    raise InvalidConfiguration(
                        f"Unknown key {key} in section [{section_name}]."
                    )
                values[key] = _coerce(section_name, key, known[key].type, value)
            sections[section_name] = section_cls(**values)
        config = cls(**sections)
        config.validate()
        return config

    @classmethod
    def from_file(cls, path: PathLike) -> "RunConfiguration":
        """
        Read the configuration from a TOML file.

        Args:
            path (PathLike): path of the file.

        Raises:
            InvalidConfiguration: if the file cannot be read or parsed.

        Returns:
            RunConfiguration: the validated configuration.
        """
        logger.info("Loading configuration at %s", path)
        try:
            content = toml.load(str(path))
        except (OSError, toml.TomlDecodeError) as exc:
            raise InvalidConfiguration(
                f"Cannot read configuration file {path}: {exc}"
            ) from exc
        return cls.from_dict(content)

    def validate(self) -> None:
        """
        Validate every section.

        Raises:
            InvalidConfiguration: if a value is invalid.
        """
        for section_name in SECTIONS:
            getattr(self, section_name).validate()

    def apply_seed(self, seed: int) -> None:
        """
        Override every seed of the configuration.

        Args:
            seed (int): the seed.
        """
        logger.info("Overriding every seed with %i", seed)
        self.split.seed = seed
        self.train.seed = seed
        self.synth.seed = seed

    def apply_environment(self) -> None:
        """
        Apply the seed given by the THERMOFUSE_SEED environment variable, if any.

        Raises:
            InvalidConfiguration: if the variable is not an integer.
        """
        value = os.environ.get(SEED_ENVIRONMENT_VARIABLE)
        if value is None or value == "":
            return
        try:
            seed = int(value)
        except ValueError as exc:
            raise InvalidConfiguration(
                f"{SEED_ENVIRONMENT_VARIABLE} must be an integer, got {value}."
            ) from exc
        self.apply_seed(seed)

    def apply_overrides(
        self,
        seed: Optional[int] = None,
        modality: Optional[str] = None,
        backbone: Optional[str] = None,
    ) -> None:
        """
        Apply the command line overrides, then validate.

        Args:
            seed (Optional[int], optional): seed for every section. Defaults to None.
            modality (Optional[str], optional): modality of the model. Defaults to None.
            backbone (Optional[str], optional): backbone of the model. Defaults to None.
        """
        if seed is not None:
            self.apply_seed(seed)
        if modality is not None:
            self.model.modality = modality
        if backbone is not None:
            self.model.backbone = backbone
        self.validate()

    def to_dict(self) -> Dict[str, Dict[str, Any]]:
        """
        Convert the configuration to nested dictionaries.

        Returns:
            Dict[str, Dict[str, Any]]: mapping section -> mapping key -> value.
        """
        return {name: asdict(getattr(self, name)) for name in SECTIONS}

    def dump(self, path: PathLike) -> None:
        """
        Write the configuration as a TOML file.

        Args:
            path (PathLike): output path.
        """
        with open(path, "w", encoding="utf-8") as fd:
            toml.dump(self.to_dict(), fd)

    def __str__(self) -> str:
        return toml.dumps(self.to_dict())
