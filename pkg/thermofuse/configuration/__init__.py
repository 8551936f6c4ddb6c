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
Configuration of thermofuse runs, read from a TOML file.
"""
from thermofuse.configuration.config import (
    BenchConfiguration,
    DataConfiguration,
    EvalConfiguration,
    ModelConfiguration,
    RunConfiguration,
    SplitConfiguration,
    SynthConfiguration,
    TrainConfiguration,
    SEED_ENVIRONMENT_VARIABLE,
)
from thermofuse.configuration.exceptions import InvalidConfiguration

__all__ = [
    "BenchConfiguration",
    "DataConfiguration",
    "EvalConfiguration",
    "ModelConfiguration",
    "RunConfiguration",
    "SplitConfiguration",
    "SynthConfiguration",
    "TrainConfiguration",
    "SEED_ENVIRONMENT_VARIABLE",
    "InvalidConfiguration",
]
