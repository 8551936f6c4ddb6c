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
Exceptions raised by the thermofuse library.

Library functions raise these exceptions; only the command line turns them into
log records and exit codes.
"""


class ThermofuseError(Exception):
    """
    Base class of every error raised by thermofuse.
    """


# Thermal pipeline


class MalformedTiff(ThermofuseError):
    """
    The bytes could not be parsed as a single-image TIFF file.
    """


class WrongShape(ThermofuseError):
    """
    The thermal frame does not have the expected 160x120 dimensions.
    """


class WrongDepth(ThermofuseError):
    """
    The thermal frame is not a single channel of 16 bits per sample.
    """


# Dataset


class MissingFile(ThermofuseError):
    """
    A file referenced by the manifest does not exist.
    """


class BadGrade(ThermofuseError):
    """
    A grade label is outside of 0..5.
    """


class DuplicateId(ThermofuseError):
    """
    The same sample id appears twice in the manifest.
    """


class TooFewSamples(ThermofuseError):
    """
    A class has too few samples to be stratified into the test set and every fold.
    """


class EmptyClass(ThermofuseError):
    """
    A class has no sample, so its inverse frequency weight is undefined.
    """


# Models and training


class WrongChannelCount(ThermofuseError):
    """
    A first-layer kernel does not have the expected number of input channels.
    """


class WeightsUnavailable(ThermofuseError):
    """
    The pretrained weights of a backbone could not be loaded.
    """


class LeakageDetected(ThermofuseError):
    """
    A test sample was requested while building a training or validation batch.
    """


class NonFiniteLoss(ThermofuseError):
    """
    The training loss became NaN or infinite.
    """


class ShapeMismatch(ThermofuseError):
    """
    The input tensor does not match the model input.
    """


# Metrics


class LengthMismatch(ThermofuseError):
    """
    Label sequences have different lengths.
    """


class BadLabel(ThermofuseError):
    """
    A label is outside of 0..5.
    """


class EmptyMatrix(ThermofuseError):
    """
    A confusion matrix with no sample was given.
    """


class SingleClassOnly(ThermofuseError):
    """
    No class has both positive and negative samples, so no AUC is defined.
    """


class EmptyList(ThermofuseError):
    """
    An empty list of reports was given for aggregation.
    """


# Explainability


class UnknownLayer(ThermofuseError):
    """
    The requested layer does not exist in the model.
    """


class NonSpatialLayer(ThermofuseError):
    """
    The requested layer does not output a spatial feature map.
    """


# Files and synthetic data


class IoError(ThermofuseError, OSError):
    """
    An output file could not be written.
    """


class BadSpec(ThermofuseError):
    """
    The synthetic dataset specification is invalid.
    """
