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
Radiometric thermal pre-processing.

This module holds two different things :

* First the convert_directory_config function, that takes a configuration object as a parameter and converts a directory of raw frames;
* And the individual operations (decoding, conversion to Celsius, adaptive window, normalization) that take individual parameters.

The raw frames are 160x120 TIFF files of 16-bit counts in centi-Kelvin. The
temperature of a count c is c / 100 - 273.15 °C.
"""
import io
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import TYPE_CHECKING, List, Optional, Tuple

import numpy as np
from PIL import Image, UnidentifiedImageError

from thermofuse.exceptions import IoError, MalformedTiff, WrongDepth, WrongShape
from thermofuse.utils import PathLike, dump_json

if TYPE_CHECKING:
    from thermofuse.configuration import RunConfiguration

logger = logging.getLogger(__name__)

FRAME_WIDTH = 160  #: Width of a raw thermal frame, in pixels.
FRAME_HEIGHT = 120  #: Height of a raw thermal frame, in pixels.
KELVIN_OFFSET = 273.15  #: 0 °C in Kelvin.
COUNTS_PER_KELVIN = 100.0  #: Radiometric resolution of 0.01 K.

DEFAULT_WINDOW_LO = 30.0  #: Lower bound of the default window, in °C.
DEFAULT_WINDOW_HI = 45.0  #: Upper bound of the default window, in °C.
WINDOW_WIDTH = DEFAULT_WINDOW_HI - DEFAULT_WINDOW_LO  #: Width of every window, in °C.

TIFF_BITS_PER_SAMPLE = 258
TIFF_SAMPLES_PER_PIXEL = 277
TIFF_SAMPLE_FORMAT = 339

TIFF_SUFFIXES = (".tif", ".tiff")


@dataclass(frozen=True)
class RawThermalFrame:
    """
    A raw radiometric frame: 120 rows of 160 unsigned 16-bit counts (Kelvin x 100).
    """

    pixels: np.ndarray  #: Array of shape (120, 160) and dtype uint16, top-left origin.

    def __post_init__(self):
        if self.pixels.shape != (FRAME_HEIGHT, FRAME_WIDTH):
            raise WrongShape(
                f"Expected a {FRAME_WIDTH}x{FRAME_HEIGHT} frame, got "
                f"{self.pixels.shape[-1] if self.pixels.ndim else 0}x"
                f"{self.pixels.shape[0] if self.pixels.ndim else 0}."
            )
        if self.pixels.dtype != np.uint16:
            raise WrongDepth(f"Expected uint16 counts, got {self.pixels.dtype}.")

    @property
    def width(self) -> int:
        """
        Width of the frame, in pixels.
        """
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        """
        Height of the frame, in pixels.
        """
        return self.pixels.shape[0]


@dataclass(frozen=True)
class TemperatureMap:
    """
    Temperatures of a frame in °C and their mean.
    """

    celsius: np.ndarray  #: Array of shape (120, 160) of temperatures in °C.
    mean_c: float  #: Arithmetic mean of all the pixels, in °C.


@dataclass(frozen=True)
class ThermalWindow:
    """
    Temperature interval the thermal channel is normalized against.
    """

    lo: float  #: Lower bound, in °C.
    hi: float  #: Upper bound, in °C.
    floor_saturated: bool = False  #: True if the window hit the floor before containing the mean.
    steps: int = 0  #: Number of shifts from the default window (negative when shifted up).

    def contains(self, temperature: float) -> bool:
        """
        Check if a temperature is inside the window, bounds included.

        Args:
            temperature (float): temperature in °C.

        Returns:
            bool: True if lo <= temperature <= hi.
        """
        return self.lo <= temperature <= self.hi


@dataclass(frozen=True)
class NormalizedThermal:
    """
    Thermal channel normalized into [0, 1] with the mask of the in-window pixels.
    """

    values: np.ndarray  #: Array of shape (120, 160) of values in [0, 1].
    window: ThermalWindow  #: The window used for the normalization.
    mask: np.ndarray  #: Boolean array, True where lo <= temperature <= hi.


def decode_raw(tiff_bytes: bytes) -> RawThermalFrame:
    """
    Decode a raw thermal TIFF.

    The file must hold a single image with one unsigned 16-bit sample per pixel,
    either uncompressed or deflate-compressed, of exactly 160x120 pixels.

    Args:
        tiff_bytes (bytes): content of the TIFF file.

    Raises:
        MalformedTiff: if the bytes cannot be parsed as a single-image TIFF.
        WrongDepth: if the image does not have a single 16-bit sample per pixel.
        WrongShape: if the image is not 160x120.

    Returns:
        RawThermalFrame: the decoded frame, row-major with top-left origin.
    """
    try:
        image = Image.open(io.BytesIO(tiff_bytes))
        image.load()
    except (UnidentifiedImageError, OSError, ValueError, SyntaxError) as exc:
        raise MalformedTiff(f"Cannot parse the TIFF data: {exc}") from exc

    if image.format != "TIFF":
        raise MalformedTiff(f"Expected a TIFF file, got {image.format}.")
    if getattr(image, "n_frames", 1) != 1:
        raise MalformedTiff(f"Expected a single image, got {image.n_frames}.")

    tags = image.tag_v2
    samples_per_pixel = tags.get(TIFF_SAMPLES_PER_PIXEL, 1)
    bits = tags.get(TIFF_BITS_PER_SAMPLE, 1)
    if isinstance(bits, tuple):
        bits = bits[0] if len(bits) == 1 else bits
    sample_format = tags.get(TIFF_SAMPLE_FORMAT, 1)
    if isinstance(sample_format, tuple):
        sample_format = sample_format[0]
    if samples_per_pixel != 1 or bits != 16 or sample_format != 1:
        raise WrongDepth(
            f"Expected one unsigned 16-bit sample per pixel, got {samples_per_pixel} "
            f"sample(s) of {bits} bits (format {sample_format})."
        )

    width, height = image.size
    if (width, height) != (FRAME_WIDTH, FRAME_HEIGHT):
        raise WrongShape(
            f"Expected a {FRAME_WIDTH}x{FRAME_HEIGHT} frame, got {width}x{height}."
        )

    pixels = np.asarray(image).astype(np.uint16)
    logger.debug("Decoded a %ix%i frame in mode %s", width, height, image.mode)
    return RawThermalFrame(pixels=pixels)


def encode_raw(frame: RawThermalFrame, compression: Optional[str] = None) -> bytes:
    """
    Encode a raw frame as a 16-bit grayscale TIFF.

    Args:
        frame (RawThermalFrame): the frame to encode.
        compression (Optional[str], optional): None for an uncompressed file or "deflate". Defaults to None.

    Returns:
        bytes: content of the TIFF file.
    """
    image = Image.fromarray(frame.pixels.astype("<u2"), mode="I;16")
    buffer = io.BytesIO()
    if compression == "deflate":
        image.save(buffer, format="TIFF", compression="tiff_adobe_deflate")
    elif compression is None:
        image.save(buffer, format="TIFF")
    else:
        raise ValueError(f"Unknown compression {compression}.")
    return buffer.getvalue()


def read_raw(path: PathLike) -> RawThermalFrame:
    """
    Read and decode a raw thermal TIFF file.

    Args:
        path (PathLike): path of the file.

    Raises:
        IoError: if the file cannot be read.

    Returns:
        RawThermalFrame: the decoded frame.
    """
    try:
        content = Path(path).read_bytes()
    except OSError as exc:
        raise IoError(f"Cannot read {path}: {exc}") from exc
    return decode_raw(content)


def to_celsius(frame: RawThermalFrame) -> TemperatureMap:
    """
    Convert the counts of a frame to temperatures in °C.

    Each count c is converted to c / 100 - 273.15.

    Args:
        frame (RawThermalFrame): the raw frame.

    Returns:
        TemperatureMap: the temperatures and their mean over the 19200 pixels.
    """
    celsius = frame.pixels.astype(np.float64) / COUNTS_PER_KELVIN - KELVIN_OFFSET
    return TemperatureMap(celsius=celsius, mean_c=float(np.mean(celsius)))


def celsius_to_counts(celsius: np.ndarray) -> np.ndarray:
    """
    Convert temperatures in °C to the nearest radiometric counts.

    Args:
        celsius (np.ndarray): temperatures in °C.

    Returns:
        np.ndarray: counts as uint16, clipped to the 16-bit range.
    """
    counts = np.rint((np.asarray(celsius, dtype=np.float64) + KELVIN_OFFSET) * 100)
    return np.clip(counts, 0, np.iinfo(np.uint16).max).astype(np.uint16)


def window_for_mean(
    mean_c: float, step: float = 1.0, floor: float = 0.0
) -> ThermalWindow:
    """
    Compute the adaptive window for a mean temperature.

    The default window is [30, 45] °C. If the mean is below 30 °C, the window is shifted
    down by step until it contains the mean, without its lower bound going below floor.
    If the mean is above 45 °C, the window is shifted up the same way. The width is
    always 15 °C.

    Args:
        mean_c (float): mean temperature of the image, in °C.
        step (float, optional): shift applied at each iteration, in °C. Defaults to 1.0.
        floor (float, optional): lowest lower bound allowed, in °C. Defaults to 0.0.

    Returns:
        ThermalWindow: the window.
    """
    if step <= 0:
        raise ValueError("The step of the adaptive window must be positive.")

    if DEFAULT_WINDOW_LO <= mean_c <= DEFAULT_WINDOW_HI:
        return ThermalWindow(lo=DEFAULT_WINDOW_LO, hi=DEFAULT_WINDOW_HI)

    if mean_c < DEFAULT_WINDOW_LO:
        steps = 0
        lo = DEFAULT_WINDOW_LO
        while mean_c < lo and lo > floor:
            steps += 1
            lo = max(DEFAULT_WINDOW_LO - steps * step, floor)
        saturated = mean_c < lo
        if saturated:
            logger.warning(
                "Mean temperature %f °C is below the window floor %f °C.",
                mean_c,
                floor,
            )
        return ThermalWindow(
            lo=lo, hi=lo + WINDOW_WIDTH, floor_saturated=saturated, steps=steps
        )

    steps = 0
    hi = DEFAULT_WINDOW_HI
    while mean_c > hi:
        steps += 1
        hi = DEFAULT_WINDOW_HI + steps * step
    return ThermalWindow(lo=hi - WINDOW_WIDTH, hi=hi, steps=-steps)


def adaptive_window(
    temperature_map: TemperatureMap, step: float = 1.0, floor: float = 0.0
) -> ThermalWindow:
    """
    Compute the adaptive window of a temperature map from its mean temperature.

    See :py:func:`window_for_mean` for the rule.

    Args:
        temperature_map (TemperatureMap): the temperature map.
        step (float, optional): shift applied at each iteration, in °C. Defaults to 1.0.
        floor (float, optional): lowest lower bound allowed, in °C. Defaults to 0.0.

    Returns:
        ThermalWindow: the window.
    """
    window = window_for_mean(temperature_map.mean_c, step=step, floor=floor)
    logger.debug(
        "Window for mean %f °C is [%f, %f]",
        temperature_map.mean_c,
        window.lo,
        window.hi,
    )
    return window


def normalize(
    temperature_map: TemperatureMap, window: ThermalWindow
) -> NormalizedThermal:
    """
    Normalize the temperatures into [0, 1] against the window.

    Pixels below the window are set to 0 and pixels above the window to 1.

    Args:
        temperature_map (TemperatureMap): the temperature map.
        window (ThermalWindow): the window.

    Returns:
        NormalizedThermal: normalized values and mask of in-window pixels.
    """
    celsius = temperature_map.celsius
    values = np.clip((celsius - window.lo) / (window.hi - window.lo), 0.0, 1.0)
    mask = (celsius >= window.lo) & (celsius <= window.hi)
    return NormalizedThermal(values=values, window=window, mask=mask)


def process_raw(
    tiff_bytes: bytes, step: float = 1.0, floor: float = 0.0
) -> Tuple[TemperatureMap, ThermalWindow, NormalizedThermal]:
    """
    Run the whole pipeline on the content of a raw TIFF file.

    Args:
        tiff_bytes (bytes): content of the TIFF file.
        step (float, optional): step of the adaptive window, in °C. Defaults to 1.0.
        floor (float, optional): floor of the adaptive window, in °C. Defaults to 0.0.

    Returns:
        Tuple[TemperatureMap, ThermalWindow, NormalizedThermal]: the temperature map, the window and the normalized channel.
    """
    temperature_map = to_celsius(decode_raw(tiff_bytes))
    window = adaptive_window(temperature_map, step=step, floor=floor)
    return temperature_map, window, normalize(temperature_map, window)


def window_sidecar(window: ThermalWindow, mean_c: float) -> dict:
    """
    Build the JSON diagnostics of a window.

    Args:
        window (ThermalWindow): the window.
        mean_c (float): mean temperature of the image, in °C.

    Returns:
        dict: {lo, hi, mean_c, floor_saturated}.
    """
    return {
        "lo": window.lo,
        "hi": window.hi,
        "mean_c": mean_c,
        "floor_saturated": window.floor_saturated,
    }


def save_normalized(
    norm: NormalizedThermal, mean_c: float, path: PathLike, fmt: str = "tiff"
) -> Path:
    """
    Save a normalized thermal channel and its JSON sidecar.

    With fmt="tiff" the values are saved as a 32-bit float single channel TIFF. With
    fmt="png" they are saved as a 16-bit PNG holding round(value x 65535). The sidecar
    is saved next to the image with the .json suffix.

    Args:
        norm (NormalizedThermal): the normalized channel.
        mean_c (float): mean temperature of the image, in °C.
        path (PathLike): path of the image, without or with suffix.
        fmt (str, optional): "tiff" or "png". Defaults to "tiff".

    Raises:
        IoError: if the files cannot be written.

    Returns:
        Path: path of the written image.
    """
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        if fmt == "tiff":
            path = path.with_suffix(".tiff")
            Image.fromarray(norm.values.astype(np.float32), mode="F").save(
                path, format="TIFF"
            )
        elif fmt == "png":
            path = path.with_suffix(".png")
            scaled = np.rint(norm.values * 65535).astype(np.uint16)
            Image.fromarray(scaled, mode="I;16").save(path, format="PNG")
        else:
            raise ValueError(f"Unknown output format {fmt}.")
    except OSError as exc:
        raise IoError(f"Cannot write {path}: {exc}") from exc
    dump_json(window_sidecar(norm.window, mean_c), path.with_suffix(".json"))
    return path


def convert_directory_config(
    config: "RunConfiguration", in_dir: PathLike, out_dir: PathLike
) -> Tuple[List[Path], List[Tuple[Path, str]]]:
    """
    Convert a directory of raw frames given the configuration.

    Args:
        config (RunConfiguration): configuration object, the data section is used.
        in_dir (PathLike): directory containing the raw TIFF files.
        out_dir (PathLike): output directory.

    Returns:
        Tuple[List[Path], List[Tuple[Path, str]]]: written images, and failed inputs with their error.
    """
    return convert_directory(
        in_dir=in_dir,
        out_dir=out_dir,
        step=config.data.thermal_step,
        floor=config.data.thermal_floor,
        fmt=config.data.convert_format,
    )


def convert_directory(
    in_dir: PathLike,
    out_dir: PathLike,
    step: float = 1.0,
    floor: float = 0.0,
    fmt: str = "tiff",
) -> Tuple[List[Path], List[Tuple[Path, str]]]:
    """
    Convert every raw TIFF of a directory into a normalized channel and its sidecar.

    A file that fails is logged and reported, the other files are still converted.

    Args:
        in_dir (PathLike): directory containing the raw TIFF files.
        out_dir (PathLike): output directory.
        step (float, optional): step of the adaptive window, in °C. Defaults to 1.0.
        floor (float, optional): floor of the adaptive window, in °C. Defaults to 0.0.
        fmt (str, optional): "tiff" or "png". Defaults to "tiff".

    Returns:
        Tuple[List[Path], List[Tuple[Path, str]]]: written images, and failed inputs with their error.
    """
    in_dir = Path(in_dir)
    out_dir = Path(out_dir)
    inputs = sorted(
        p
        for p in in_dir.rglob("*")
        if p.is_file() and p.suffix.lower() in TIFF_SUFFIXES
    )
    if not inputs:
        logger.warning("No raw TIFF file found in %s", in_dir)
        return [], []

    logger.info("Converting %i raw frames from %s", len(inputs), in_dir)
    written: List[Path] = []
    failures: List[Tuple[Path, str]] = []
    for input_path in inputs:
        relative = input_path.relative_to(in_dir)
        try:
            temperature_map, _, norm = process_raw(
                input_path.read_bytes(), step=step, floor=floor
            )
            written.append(
                save_normalized(norm, temperature_map.mean_c, out_dir / relative, fmt)
            )
        except (MalformedTiff, WrongDepth, WrongShape, OSError) as exc:
            logger.error("Conversion of %s failed: %s", input_path, exc)
            failures.append((input_path, str(exc)))
    logger.info("%i frames converted, %i failures", len(written), len(failures))
    return written, failures
