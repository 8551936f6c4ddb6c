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
Small helpers shared by the modules.
"""
import json
import os
from pathlib import Path
from typing import Any, Union

from thermofuse.exceptions import IoError

PathLike = Union[str, os.PathLike]  #: Type for paths accepted by the library.


def dump_json(data: Any, path: PathLike) -> None:
    """
    Write data as indented JSON with sorted keys, so that reruns are byte-identical.

    Args:
        data (Any): JSON-serializable data.
        path (PathLike): output path.

    Raises:
        IoError: if the file cannot be written.
    """
    try:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8") as fd:
            json.dump(data, fd, indent=2, sort_keys=True)
            fd.write("\n")
    except OSError as exc:
        raise IoError(f"Cannot write {path}: {exc}") from exc


def load_json(path: PathLike) -> Any:
    """
    Read a JSON file.

    Args:
        path (PathLike): path of the file.

    Returns:
        Any: the decoded data.
    """
    with open(path, "r", encoding="utf-8") as fd:
        return json.load(fd)
