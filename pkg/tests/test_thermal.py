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

"""Tests of the radiometric decoding, the adaptive window and the batch conversion."""

import io
import json
from pathlib import Path

import numpy as np
import pytest
from PIL import Image

from thermofuse.exceptions import IoError, MalformedTiff, WrongDepth, WrongShape
from thermofuse.thermal import (
    RawThermalFrame,
    TemperatureMap,
    adaptive_window,
    convert_directory,
    decode_raw,
    encode_raw,
    normalize,
    process_raw,
    read_raw,
    to_celsius,
    window_for_mean,
)


class TestDecode:
    """Decoding of raw 16-bit TIFF files."""

    @pytest.mark.parametrize("compression", [None, "deflate"])
    def test_pixels_survive_encoding(self, compression):
        rng = np.random.default_rng(0)
        pixels = rng.integers(0, 65536, size=(120, 160), dtype=np.uint16)
        frame = decode_raw(encode_raw(RawThermalFrame(pixels), compression))
        np.testing.assert_array_equal(frame.pixels, pixels)
        assert frame.pixels.dtype == np.uint16

    def test_top_left_origin(self):
        pixels = np.zeros((120, 160), dtype=np.uint16)
        pixels[0, 0] = 31015
        pixels[119, 159] = 1
        frame = decode_raw(encode_raw(RawThermalFrame(pixels)))
        assert frame.pixels[0, 0] == 31015
        assert frame.pixels[-1, -1] == 1

    def test_garbage_is_malformed(self):
        with pytest.raises(MalformedTiff):
            decode_raw(b"not a tiff at all")

    def test_png_is_malformed(self):
        buffer = io.BytesIO()
        Image.fromarray(np.zeros((120, 160), dtype=np.uint8)).save(buffer, format="PNG")
        with pytest.raises(MalformedTiff):
            decode_raw(buffer.getvalue())

    def test_wrong_shape(self):
        buffer = io.BytesIO()
        Image.fromarray(np.zeros((100, 160), dtype=np.uint16), mode="I;16").save(
            buffer, format="TIFF"
        )
        with pytest.raises(WrongShape):
            decode_raw(buffer.getvalue())

    def test_eight_bit_is_wrong_depth(self):
        buffer = io.BytesIO()
        Image.fromarray(np.zeros((120, 160), dtype=np.uint8), mode="L").save(
            buffer, format="TIFF"
        )
        with pytest.raises(WrongDepth):
            decode_raw(buffer.getvalue())

    def test_rgb_is_wrong_depth(self):
        buffer = io.BytesIO()
        Image.fromarray(np.zeros((120, 160, 3), dtype=np.uint8), mode="RGB").save(
            buffer, format="TIFF"
        )
        with pytest.raises(WrongDepth):
            decode_raw(buffer.getvalue())

    def test_depth_is_checked_before_shape(self):
        buffer = io.BytesIO()
        Image.fromarray(np.zeros((10, 10), dtype=np.uint8), mode="L").save(
            buffer, format="TIFF"
        )
        with pytest.raises(WrongDepth):
            decode_raw(buffer.getvalue())


class TestCelsius:
    """Conversion of counts to degrees."""

    def test_every_count(self):
        counts = np.arange(65536, dtype=np.uint16)
        pixels = np.resize(counts, (4, 120, 160))
        for block in pixels:
            celsius = to_celsius(RawThermalFrame(block.astype(np.uint16))).celsius
            expected = block.astype(np.float64) / 100 - 273.15
            np.testing.assert_array_max_ulp(celsius, expected, maxulp=1)

    def test_known_values(self, frame_factory):
        frame = RawThermalFrame(np.full((120, 160), 31015, dtype=np.uint16))
        tmap = to_celsius(frame)
        assert tmap.mean_c == pytest.approx(37.0, abs=1e-9)
        zero = RawThermalFrame(np.zeros((120, 160), np.uint16))
        assert to_celsius(zero).mean_c == pytest.approx(-273.15)
        full = RawThermalFrame(np.full((120, 160), 65535, np.uint16))
        assert to_celsius(full).mean_c == pytest.approx(382.2)

    def test_mean_over_all_pixels(self, frame_factory):
        celsius = np.full((120, 160), 30.0)
        celsius[:60] = 40.0
        mean_c = to_celsius(frame_factory(celsius)).mean_c
        assert mean_c == pytest.approx(35.0, abs=1e-6)


class TestWindow:
    """Adaptive windowing rule."""

    @pytest.mark.parametrize(
        "mean, lo, hi",
        [
            (35.0, 30.0, 45.0),
            (30.0, 30.0, 45.0),
            (45.0, 30.0, 45.0),
            (28.4, 28.0, 43.0),
            (25.0, 25.0, 40.0),
            (46.5, 32.0, 47.0),
        ],
    )
    def test_examples(self, mean, lo, hi):
        window = window_for_mean(mean)
        assert (window.lo, window.hi) == (lo, hi)
        assert not window.floor_saturated

    def test_floor_saturation(self):
        window = window_for_mean(-5.0, step=1.0, floor=0.0)
        assert window.lo == 0.0
        assert window.hi == 15.0
        assert window.floor_saturated
        assert not window.contains(-5.0)

    def test_random_means(self):
        rng = np.random.default_rng(1)
        for mean in rng.uniform(-20.0, 80.0, size=10000):
            step = float(rng.choice([0.5, 1.0, 2.0]))
            window = window_for_mean(mean, step=step, floor=0.0)
            assert window.hi - window.lo == pytest.approx(15.0)
            if window.floor_saturated:
                assert window.lo == 0.0 and mean < 0.0
            else:
                assert window.contains(mean)
            assert window_for_mean(mean, step=step, floor=0.0) == window

    def test_shift_is_minimal(self):
        rng = np.random.default_rng(2)
        for mean in rng.uniform(1.0, 29.99, size=500):
            window = window_for_mean(mean, step=1.0)
            assert window.lo <= mean < window.lo + 1.0

    def test_nonpositive_step(self):
        with pytest.raises(ValueError):
            window_for_mean(20.0, step=0.0)

    def test_from_map(self, frame_factory):
        tmap = to_celsius(frame_factory(26.5))
        window = adaptive_window(tmap)
        assert (window.lo, window.hi) == (26.0, 41.0)


class TestNormalize:
    """Normalization against the window."""

    def test_range_and_mask(self):
        celsius = np.linspace(20.0, 50.0, 120 * 160).reshape(120, 160)
        tmap = TemperatureMap(celsius=celsius, mean_c=float(celsius.mean()))
        norm = normalize(tmap, window_for_mean(tmap.mean_c))
        assert norm.values.min() == 0.0
        assert norm.values.max() == 1.0
        np.testing.assert_array_equal(norm.mask, (celsius >= 30.0) & (celsius <= 45.0))
        inside = norm.mask
        np.testing.assert_allclose(norm.values[inside], (celsius[inside] - 30.0) / 15.0)

    def test_monotonic(self):
        values = np.random.default_rng(3).uniform(10, 60, 120 * 160)
        celsius = np.sort(values).reshape(120, 160)
        tmap = TemperatureMap(celsius=celsius, mean_c=float(celsius.mean()))
        values = normalize(tmap, window_for_mean(tmap.mean_c)).values.ravel()
        assert np.all(np.diff(values) >= 0)

    def test_pipeline(self, frame_factory):
        tmap, window, norm = process_raw(encode_raw(frame_factory(37.0)))
        assert tmap.mean_c == pytest.approx(37.0, abs=1e-6)
        assert (window.lo, window.hi) == (30.0, 45.0)
        np.testing.assert_allclose(norm.values, 7.0 / 15.0, atol=1e-6)


class TestConvertDirectory:
    """Batch conversion of a directory."""

    def test_empty_directory(self, tmp_path):
        written, failures = convert_directory(tmp_path / "in", tmp_path / "out")
        assert written == [] and failures == []

    def test_partial_failure(self, tmp_path, frame_factory):
        in_dir = tmp_path / "in"
        in_dir.mkdir()
        (in_dir / "good.tiff").write_bytes(encode_raw(frame_factory(28.4)))
        (in_dir / "bad.tif").write_bytes(b"garbage")
        written, failures = convert_directory(in_dir, tmp_path / "out")
        assert [p.name for p in written] == ["good.tiff"]
        assert [p.name for p, _ in failures] == ["bad.tif"]
        sidecar = json.loads((tmp_path / "out" / "good.json").read_text())
        assert sidecar["lo"] == 28.0
        assert sidecar["hi"] == 43.0
        assert sidecar["mean_c"] == pytest.approx(28.4, abs=1e-6)
        assert sidecar["floor_saturated"] is False

    def test_unreadable_file(self, tmp_path, frame_factory, monkeypatch):
        in_dir = tmp_path / "in"
        in_dir.mkdir()
        (in_dir / "a.tiff").write_bytes(encode_raw(frame_factory(33.0)))
        (in_dir / "locked.tiff").write_bytes(encode_raw(frame_factory(33.0)))
        read_bytes = Path.read_bytes

        def guarded(path):
            if path.name == "locked.tiff":
                raise PermissionError(13, "Permission denied", str(path))
            return read_bytes(path)

        monkeypatch.setattr(Path, "read_bytes", guarded)
        written, failures = convert_directory(in_dir, tmp_path / "out")
        assert [p.name for p in written] == ["a.tiff"]
        assert [p.name for p, _ in failures] == ["locked.tiff"]
        with pytest.raises(IoError):
            read_raw(in_dir / "locked.tiff")

    def test_png_output(self, tmp_path, frame_factory):
        in_dir = tmp_path / "in"
        in_dir.mkdir()
        (in_dir / "a.tiff").write_bytes(encode_raw(frame_factory(38.0)))
        written, _ = convert_directory(in_dir, tmp_path / "out", fmt="png")
        assert written[0].suffix == ".png"
        with Image.open(written[0]) as image:
            values = np.asarray(image).astype(np.int64)
        assert np.all(np.abs(values - round(8 / 15 * 65535)) <= 1)
