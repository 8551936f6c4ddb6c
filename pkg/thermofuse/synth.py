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
Synthetic RGB and thermal datasets with a known class structure.

Every sample shows a foot-shaped ellipse with a lesion. Some grades are told apart by
the color and texture of the lesion in the RGB image only, the other grades by the
peak temperature of the hotspot under the lesion only. By default, grades 0 and 1
have the same thermal signature and grades 2 to 5 the same RGB signature, so that only
the fused dataset holds enough information to separate the six grades.

The thermal frames are written as raw 160x120 TIFF files of centi-Kelvin counts, so
that they go through the same pre-processing as camera frames.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import TYPE_CHECKING, Dict, List, Sequence, Tuple

import numpy as np
from PIL import Image
from scipy.ndimage import gaussian_filter

from thermofuse.dataset import (
    NUM_CLASSES,
    TABLE1_RGB_COUNTS,
    DatasetManifest,
    SampleRecord,
    write_manifest,
)
from thermofuse.exceptions import BadSpec, IoError
from thermofuse.thermal import (
    FRAME_HEIGHT,
    FRAME_WIDTH,
    RawThermalFrame,
    celsius_to_counts,
    encode_raw,
)
from thermofuse.utils import PathLike, dump_json

if TYPE_CHECKING:
    from thermofuse.configuration import SynthConfiguration

logger = logging.getLogger(__name__)

RGB_BACKGROUND = (0.25, 0.30, 0.35)
RGB_SKIN = (0.87, 0.70, 0.58)
#: Lesion colors of the grades with an RGB signature, in the order of rgb_signal_classes.
RGB_LESION_PALETTE = [
    (0.93, 0.62, 0.60),
    (0.72, 0.16, 0.18),
    (0.55, 0.45, 0.10),
    (0.20, 0.45, 0.25),
    (0.45, 0.25, 0.55),
    (0.15, 0.15, 0.15),
]
RGB_SHARED_LESION = (0.36, 0.22, 0.15)  #: Lesion color of the grades without RGB signature.

FOOT_CENTER_JITTER = 0.03
FOOT_AXES = (0.30, 0.42)
FOOT_AXES_JITTER = 0.02
FOOT_EDGE_SIGMA = 2.0  #: Blur of the foot edge, in thermal pixels.
HOTSPOT_SPREAD = 0.55  #: Hotspot centers lie in the foot ellipse scaled by this factor.

MANIFEST_NAME = "manifest.csv"
GROUND_TRUTH_NAME = "ground_truth.json"


# pylint: disable=too-many-instance-attributes
@dataclass(frozen=True)
class SynthSpec:
    """
    Description of a synthetic dataset.
    """

    seed: int = 0  #: Seed of the generation.
    n_per_class: Tuple[int, ...] = (100,) * NUM_CLASSES  #: Samples per grade.
    image_width: int = 160  #: Width of the RGB images, in pixels.
    image_height: int = 120  #: Height of the RGB images, in pixels.
    rgb_signal_classes: Tuple[int, ...] = (0, 1)  #: Grades with an RGB signature.
    thermal_signal_classes: Tuple[int, ...] = (2, 3, 4, 5)  #: Grades with a thermal signature.
    hotspot_radius: float = 10.0  #: Radius of the lesion and hotspot, in thermal pixels.
    hotspot_peaks: Tuple[float, ...] = (32.0, 32.0, 34.0, 36.0, 38.0, 40.0)  #: Peak °C per grade.
    background_c: float = 22.0  #: Ambient temperature, in °C.
    foot_c: float = 31.0  #: Skin temperature, in °C.
    thermal_noise: float = 0.2  #: Standard deviation of the thermal noise, in °C.
    rgb_noise: float = 0.03  #: Standard deviation of the RGB noise.
    invalid_fraction: float = 0.0  #: Fraction of distorted thermal frames.
    workers: int = 1  #: Parallel writers.

    @classmethod
    def from_configuration(cls, config: "SynthConfiguration") -> "SynthSpec":
        """
        Build the description from the synth section of the configuration.

        Args:
            config (SynthConfiguration): the section.

        Returns:
            SynthSpec: the description.
        """
        spec = cls(
            seed=config.seed,
            n_per_class=tuple(config.n_per_class),
            image_width=config.image_width,
            image_height=config.image_height,
            rgb_signal_classes=tuple(config.rgb_signal_classes),
            thermal_signal_classes=tuple(config.thermal_signal_classes),
            hotspot_radius=config.hotspot_radius,
            hotspot_peaks=tuple(config.hotspot_peaks),
            background_c=config.background_c,
            foot_c=config.foot_c,
            thermal_noise=config.thermal_noise,
            rgb_noise=config.rgb_noise,
            invalid_fraction=config.invalid_fraction,
            workers=config.workers,
        )
        if config.table1_ratios:
            spec = spec.with_table1_ratios(config.total)
        return spec

    def with_table1_ratios(self, total: int) -> "SynthSpec":
        """
        Get a copy whose class counts follow the ratios of the clinical RGB dataset.

        The counts are apportioned with the largest remainders and sum to total.

        Args:
            total (int): number of samples.

        Returns:
            SynthSpec: the copy.
        """
        ratios = np.asarray(TABLE1_RGB_COUNTS, dtype=np.float64)
        quotas = total * ratios / ratios.sum()
        counts = np.floor(quotas).astype(int)
        remainders = quotas - counts
        for index in np.argsort(-remainders, kind="stable")[: total - counts.sum()]:
            counts[index] += 1
        return replace(self, n_per_class=tuple(int(c) for c in counts))

    @property
    def total(self) -> int:
        """
        Number of samples.

        Returns:
            int: sum of the class counts.
        """
        return int(sum(self.n_per_class))

    def validate(self) -> None:
        """
        Check the description.

        Raises:
            BadSpec: if the description is invalid.
        """
        if len(self.n_per_class) != NUM_CLASSES or any(
            n <= 0 for n in self.n_per_class
        ):
            raise BadSpec("n_per_class must hold 6 positive counts.")
        if len(self.hotspot_peaks) != NUM_CLASSES:
            raise BadSpec("hotspot_peaks must hold 6 temperatures.")
        signal = set(self.rgb_signal_classes) | set(self.thermal_signal_classes)
        if signal != set(range(NUM_CLASSES)):
            raise BadSpec(
                "The RGB and thermal signal classes must cover the six grades."
            )
        if not self.rgb_signal_classes or not self.thermal_signal_classes:
            raise BadSpec("Both modalities must carry the signal of some grades.")
        if self.image_width < 8 or self.image_height < 8:
            raise BadSpec("The RGB images must be at least 8x8 pixels.")
        if self.hotspot_radius <= 0:
            raise BadSpec("hotspot_radius must be positive.")
        if not 0 <= self.invalid_fraction < 1:
            raise BadSpec("invalid_fraction must be in [0, 1[.")
        if self.thermal_noise < 0 or self.rgb_noise < 0:
            raise BadSpec("Noise levels must be non-negative.")


@dataclass(frozen=True)
class _Geometry:
    foot_center: Tuple[float, float]
    foot_axes: Tuple[float, float]
    hotspot_center: Tuple[float, float]


@dataclass
class SynthSample:
    """
    A generated sample with its ground truth.
    """

    record: SampleRecord  #: The manifest row.
    hotspot_bbox: Tuple[int, int, int, int]  #: (x0, y0, x1, y1) in thermal pixels, end excluded.
    hotspot_bbox_frac: Tuple[float, float, float, float]  #: Same box as fractions of the frame.
    hotspot_center_frac: Tuple[float, float]  #: Center of the hotspot as fractions of the frame.
    peak_c: float  #: Peak temperature of the hotspot, in °C.
    extra: Dict[str, float] = field(default_factory=dict)  #: Diagnostics.

    def to_json_dict(self) -> dict:
        """
        Convert the ground truth to its JSON form.

        Returns:
            dict: the ground truth.
        """
        return {
            "grade": self.record.grade,
            "thermal_valid": self.record.thermal_valid,
            "hotspot_bbox": list(self.hotspot_bbox),
            "hotspot_bbox_frac": list(self.hotspot_bbox_frac),
            "hotspot_center_frac": list(self.hotspot_center_frac),
            "peak_c": self.peak_c,
            **self.extra,
        }


def _grid(width: int, height: int) -> Tuple[np.ndarray, np.ndarray]:
    xs = (np.arange(width) + 0.5) / width
    ys = (np.arange(height) + 0.5) / height
    return np.meshgrid(xs, ys)


def _draw_geometry(rng: np.random.Generator) -> _Geometry:
    cx, cy = 0.5 + rng.uniform(-FOOT_CENTER_JITTER, FOOT_CENTER_JITTER, size=2)
    jitter = rng.uniform(-FOOT_AXES_JITTER, FOOT_AXES_JITTER, size=2)
    ax, ay = np.asarray(FOOT_AXES) + jitter
    radius = HOTSPOT_SPREAD * np.sqrt(rng.uniform())
    angle = rng.uniform(0, 2 * np.pi)
    hx = cx + radius * np.cos(angle) * ax
    hy = cy + radius * np.sin(angle) * ay
    return _Geometry((cx, cy), (ax, ay), (hx, hy))


def _foot_mask(geometry: _Geometry, width: int, height: int) -> np.ndarray:
    x, y = _grid(width, height)
    (cx, cy), (ax, ay) = geometry.foot_center, geometry.foot_axes
    return (((x - cx) / ax) ** 2 + ((y - cy) / ay) ** 2 <= 1.0).astype(np.float64)


def _hotspot_distance(geometry: _Geometry, width: int, height: int) -> np.ndarray:
    """Distance to the hotspot center, in thermal pixels."""
    x, y = _grid(width, height)
    hx, hy = geometry.hotspot_center
    return np.hypot((x - hx) * FRAME_WIDTH, (y - hy) * FRAME_HEIGHT)


def thermal_field(
    spec: SynthSpec, grade: int, geometry: _Geometry, rng: np.random.Generator
) -> np.ndarray:
    """
    Render the temperatures of a sample.

    Args:
        spec (SynthSpec): the description.
        grade (int): the grade.
        geometry (_Geometry): positions of the foot and of the hotspot.
        rng (np.random.Generator): generator of the noise.

    Returns:
        np.ndarray: temperatures of shape (120, 160), in °C.
    """
    foot = gaussian_filter(
        _foot_mask(geometry, FRAME_WIDTH, FRAME_HEIGHT), FOOT_EDGE_SIGMA
    )
    celsius = spec.background_c + (spec.foot_c - spec.background_c) * foot
    sigma = spec.hotspot_radius / 2
    distance = _hotspot_distance(geometry, FRAME_WIDTH, FRAME_HEIGHT)
    celsius = celsius + (spec.hotspot_peaks[grade] - spec.foot_c) * np.exp(
        -(distance**2) / (2 * sigma**2)
    )
    if spec.thermal_noise > 0:
        celsius = celsius + rng.normal(0.0, spec.thermal_noise, size=celsius.shape)
    return celsius


def rgb_image(
    spec: SynthSpec, grade: int, geometry: _Geometry, rng: np.random.Generator
) -> np.ndarray:
    """
    Render the RGB image of a sample.

    Args:
        spec (SynthSpec): the description.
        grade (int): the grade.
        geometry (_Geometry): positions of the foot and of the lesion.
        rng (np.random.Generator): generator of the noise.

    Returns:
        np.ndarray: image of shape (height, width, 3) as uint8.
    """
    width, height = spec.image_width, spec.image_height
    foot = gaussian_filter(
        _foot_mask(geometry, width, height), FOOT_EDGE_SIGMA * width / FRAME_WIDTH
    )[..., None]
    image = (1 - foot) * np.asarray(RGB_BACKGROUND) + foot * np.asarray(RGB_SKIN)

    lesion = _hotspot_distance(geometry, width, height) <= spec.hotspot_radius
    if grade in spec.rgb_signal_classes:
        position = list(spec.rgb_signal_classes).index(grade)
        color = np.asarray(RGB_LESION_PALETTE[position % len(RGB_LESION_PALETTE)])
        if position % 2 == 1:
            # Striped texture.
            x, _ = _grid(width, height)
            stripes = np.sin(2 * np.pi * x * width / 4) > 0
            image[lesion & stripes] = 0.6 * color
            image[lesion & ~stripes] = color
        else:
            image[lesion] = color
    else:
        image[lesion] = np.asarray(RGB_SHARED_LESION)

    if spec.rgb_noise > 0:
        image = image + rng.normal(0.0, spec.rgb_noise, size=image.shape)
    return np.rint(np.clip(image, 0.0, 1.0) * 255).astype(np.uint8)


def distort(celsius: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """
    Simulate a corrupted frame: torn rows and a cold band.

    Args:
        celsius (np.ndarray): temperatures, in °C.
        rng (np.random.Generator): generator of the distortion.

    Returns:
        np.ndarray: the distorted temperatures.
    """
    distorted = celsius.copy()
    for row in range(distorted.shape[0]):
        distorted[row] = np.roll(distorted[row], int(rng.integers(-20, 21)))
    top = int(rng.integers(0, distorted.shape[0] - 10))
    distorted[top : top + 10] = 0.0
    return distorted


def hotspot_bbox(
    geometry: _Geometry, radius: float
) -> Tuple[Tuple[int, int, int, int], Tuple[float, float, float, float]]:
    """
    Bounding box of the hotspot.

    Args:
        geometry (_Geometry): position of the hotspot.
        radius (float): radius of the hotspot, in thermal pixels.

    Returns:
        Tuple[Tuple[int, int, int, int], Tuple[float, float, float, float]]: box in thermal pixels and as fractions.
    """
    hx = geometry.hotspot_center[0] * FRAME_WIDTH
    hy = geometry.hotspot_center[1] * FRAME_HEIGHT
    x0 = int(max(0, np.floor(hx - radius)))
    y0 = int(max(0, np.floor(hy - radius)))
    x1 = int(min(FRAME_WIDTH, np.ceil(hx + radius)))
    y1 = int(min(FRAME_HEIGHT, np.ceil(hy + radius)))
    return (x0, y0, x1, y1), (
        x0 / FRAME_WIDTH,
        y0 / FRAME_HEIGHT,
        x1 / FRAME_WIDTH,
        y1 / FRAME_HEIGHT,
    )


def mean_hotspot_temperature(
    celsius: np.ndarray, bbox: Tuple[int, int, int, int]
) -> float:
    """
    Mean temperature inside a box.

    Args:
        celsius (np.ndarray): temperatures, in °C.
        bbox (Tuple[int, int, int, int]): (x0, y0, x1, y1), end excluded.

    Returns:
        float: the mean temperature.
    """
    x0, y0, x1, y1 = bbox
    return float(np.mean(celsius[y0:y1, x0:x1]))


def grades_of(spec: SynthSpec) -> List[int]:
    """
    Grade of every sample, in generation order.

    Args:
        spec (SynthSpec): the description.

    Returns:
        List[int]: the grades.
    """
    return [grade for grade, count in enumerate(spec.n_per_class) for _ in range(count)]


def generate_sample(
    spec: SynthSpec, index: int, grade: int, out_dir: Path
) -> SynthSample:
    """
    Generate and write one sample.

    The sample only depends on (seed, index, grade).

    Args:
        spec (SynthSpec): the description.
        index (int): index of the sample.
        grade (int): grade of the sample.
        out_dir (Path): root of the dataset.

    Raises:
        IoError: if a file cannot be written.

    Returns:
        SynthSample: the sample and its ground truth.
    """
    rng = np.random.default_rng([spec.seed, index])
    geometry = _draw_geometry(rng)
    invalid = bool(rng.uniform() < spec.invalid_fraction)
    celsius = thermal_field(spec, grade, geometry, rng)
    rgb = rgb_image(spec, grade, geometry, rng)
    if invalid:
        celsius = distort(celsius, rng)

    sample_id = f"synth_{index:05d}"
    rgb_path = out_dir / "rgb" / f"{sample_id}.png"
    thermal_path = out_dir / "thermal" / f"{sample_id}.tiff"
    try:
        rgb_path.parent.mkdir(parents=True, exist_ok=True)
        thermal_path.parent.mkdir(parents=True, exist_ok=True)
        Image.fromarray(rgb, mode="RGB").save(rgb_path, format="PNG")
        frame = RawThermalFrame(pixels=celsius_to_counts(celsius))
        thermal_path.write_bytes(encode_raw(frame))
    except OSError as exc:
        raise IoError(f"Cannot write sample {sample_id}: {exc}") from exc

    bbox, bbox_frac = hotspot_bbox(geometry, spec.hotspot_radius)
    return SynthSample(
        record=SampleRecord(
            id=sample_id,
            rgb_path=rgb_path,
            thermal_raw_path=thermal_path,
            grade=grade,
            thermal_valid=not invalid,
        ),
        hotspot_bbox=bbox,
        hotspot_bbox_frac=bbox_frac,
        hotspot_center_frac=tuple(float(v) for v in geometry.hotspot_center),
        peak_c=float(spec.hotspot_peaks[grade]),
        extra={"mean_hotspot_c": mean_hotspot_temperature(celsius, bbox)},
    )


def generate(
    spec: SynthSpec, out_dir: PathLike
) -> Tuple[DatasetManifest, Dict[str, dict]]:
    """
    Generate a synthetic dataset.

    The output directory receives rgb/<id>.png, thermal/<id>.tiff, manifest.csv and
    ground_truth.json. The files only depend on the description, whatever the number of
    workers.

    Args:
        spec (SynthSpec): the description.
        out_dir (PathLike): output directory.

    Raises:
        BadSpec: if the description is invalid.
        IoError: if a file cannot be written.

    Returns:
        Tuple[DatasetManifest, Dict[str, dict]]: the manifest and the ground truth of every sample.
    """
    spec.validate()
    out_dir = Path(out_dir)
    grades = grades_of(spec)
    logger.info(
        "Generating %i synthetic samples (counts %s) in %s",
        len(grades),
        list(spec.n_per_class),
        out_dir,
    )

    def _generate(index: int) -> SynthSample:
        return generate_sample(spec, index, grades[index], out_dir)

    if spec.workers > 1:
        with ThreadPoolExecutor(max_workers=spec.workers) as executor:
            samples = list(executor.map(_generate, range(len(grades))))
    else:
        samples = [_generate(index) for index in range(len(grades))]

    manifest = DatasetManifest(records=tuple(sample.record for sample in samples))
    write_manifest(manifest.records, out_dir / MANIFEST_NAME)
    ground_truth = {sample.record.id: sample.to_json_dict() for sample in samples}
    spec_dict = {
        k: list(v) if isinstance(v, tuple) else v for k, v in asdict(spec).items()
    }
    dump_json({"spec": spec_dict, "samples": ground_truth}, out_dir / GROUND_TRUTH_NAME)
    invalid = sum(1 for sample in samples if not sample.record.thermal_valid)
    logger.info(
        "%i samples written, %i with a distorted thermal frame", len(samples), invalid
    )
    return manifest, ground_truth


def nearest_centroid_accuracy(
    features: Sequence[float], labels: Sequence[int], classes: Sequence[int]
) -> float:
    """
    Accuracy of a nearest-centroid classifier on a scalar feature, restricted to some classes.

    The centroids are the per-class means of the feature over the same samples.

    Args:
        features (Sequence[float]): one scalar per sample.
        labels (Sequence[int]): grades.
        classes (Sequence[int]): grades to classify.

    Returns:
        float: the accuracy.
    """
    features = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels)
    keep = np.isin(labels, classes)
    features, labels = features[keep], labels[keep]
    classes = np.asarray(sorted(classes))
    centroids = np.array([features[labels == c].mean() for c in classes])
    distances = np.abs(features[:, None] - centroids[None, :])
    predicted = classes[np.argmin(distances, axis=1)]
    return float(np.mean(predicted == labels))
