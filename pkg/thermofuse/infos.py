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
Version information of thermofuse and of the libraries it relies on.
"""
import platform
import sys

import numpy as np
import PIL
import sklearn
import torch
import torchvision

from thermofuse import __version__


def get_script_infos() -> str:
    """
    Get a banner with the versions of the software stack.

    It is logged when the command line starts and saved as env.txt in every run
    directory.

    Returns:
        str: multi-line description of the environment.
    """
    cuda = torch.version.cuda if torch.cuda.is_available() else "unavailable"
    lines = [
        f"thermofuse: {__version__}",
        f"python: {sys.version.split()[0]}",
        f"platform: {platform.platform()}",
        f"numpy: {np.__version__}",
        f"torch: {torch.__version__}",
        f"torchvision: {torchvision.__version__}",
        f"scikit-learn: {sklearn.__version__}",
        f"pillow: {PIL.__version__}",
        f"cuda: {cuda}",
    ]
    return "\n".join(lines)
