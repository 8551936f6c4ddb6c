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
Logging configuration for the command line tools.
"""
import logging
from typing import Optional

from thermofuse.utils import PathLike

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"

VERBOSITY_LEVELS = {
    0: logging.ERROR,
    1: logging.WARNING,
    2: logging.INFO,
    3: logging.DEBUG,
}


def verbosity_to_level(verbosity: int) -> int:
    """
    Convert a number of -v flags into a logging level.

    Args:
        verbosity (int): number of -v flags. Any value above 3 is treated as 3.

    Returns:
        int: the logging level for the console.
    """
    return VERBOSITY_LEVELS[max(0, min(verbosity, 3))]


def create_loggers(verbosity: int, log_file: Optional[PathLike] = None) -> None:
    """
    Create the console logger, and the file logger if a path is given.

    No -v prints errors and critical errors, -v adds warnings, -vv adds infos and -vvv
    prints every log. The file logger, if any, always records everything.

    Args:
        verbosity (int): number of -v flags given on the command line.
        log_file (Optional[PathLike], optional): path of the log file. Defaults to None.
    """
    root = logging.getLogger("thermofuse")
    root.setLevel(logging.DEBUG)
    for handler in list(root.handlers):
        root.removeHandler(handler)
        handler.close()

    formatter = logging.Formatter(LOG_FORMAT)

    console = logging.StreamHandler()
    console.setLevel(verbosity_to_level(verbosity))
    console.setFormatter(formatter)
    root.addHandler(console)

    if log_file:
        file_handler = logging.FileHandler(log_file, encoding="utf-8")
        file_handler.setLevel(logging.DEBUG)
        file_handler.setFormatter(formatter)
        root.addHandler(file_handler)
