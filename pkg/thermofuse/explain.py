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
Gradient-weighted class activation maps (Grad-CAM).
"""
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np
import torch
import torch.nn.functional as F
from matplotlib import colormaps
from PIL import Image

from thermofuse.dataset import FusedSample
from thermofuse.exceptions import IoError, NonSpatialLayer, ShapeMismatch, UnknownLayer
from thermofuse.model import FusionClassifier, get_backbone
from thermofuse.training import check_input
from thermofuse.utils import PathLike, dump_json

logger = logging.getLogger(__name__)

DEFAULT_ALPHA = 0.4  #: Opacity of the heatmap in the overlays.
DEFAULT_COLORMAP = "jet"


@dataclass(frozen=True)
class CamMap:
    """
    A class activation map.
    """

    heat: np.ndarray  #: Map at the resolution of the layer, in [0, 1].
    target_class: int  #: Explained grade.
    layer_id: str  #: Name of the layer in the model.
    upsampled: np.ndarray  #: Map resized to the input of the model, in [0, 1].

    @property
    def argmax_xy(self) -> Tuple[int, int]:
        """
        Position of the maximum of the upsampled map.

        Returns:
            Tuple[int, int]: (column, row).
        """
        index = int(np.argmax(self.upsampled))
        row, column = np.unravel_index(index, self.upsampled.shape)
        return int(column), int(row)


def default_layer(backbone_id: str) -> str:
    """
    Name of the default Grad-CAM layer of a backbone, its last convolutional block.

    Args:
        backbone_id (str): identifier of the backbone.

    Returns:
        str: name of the layer in the classifier.
    """
    return "backbone." + get_backbone(backbone_id).cam_layer


def grad_cam(
    model: FusionClassifier,
    sample: FusedSample,
    target_class: Optional[int] = None,
    layer_id: Optional[str] = None,
) -> CamMap:
    """
    Compute the Grad-CAM map of a sample.

    The weight of each feature map is the spatial mean of the gradient of the target
    logit. The map is the rectified weighted sum of the feature maps, divided by its
    maximum (a zero map stays zero) and resized bilinearly to the model input.

    Args:
        model (FusionClassifier): the model, set to inference mode.
        sample (FusedSample): the sample.
        target_class (Optional[int], optional): explained grade, the predicted one if None. Defaults to None.
        layer_id (Optional[str], optional): name of the layer, the default layer of the backbone if None. Defaults to None.

    Raises:
        UnknownLayer: if the model has no such layer.
        NonSpatialLayer: if the layer does not output a (B, C, H, W) tensor.

    Returns:
        CamMap: the map.
    """
    layer_id = layer_id or default_layer(model.backbone_id)
    modules = dict(model.named_modules())
    if layer_id not in modules:
        raise UnknownLayer(f"{model.backbone_id} has no layer named {layer_id}.")
    check_input(model, sample.tensor)

    captured = []
    handle = modules[layer_id].register_forward_hook(
        lambda _module, _inputs, output: captured.append(output)
    )
    model.eval()
    device = next(model.parameters()).device
    try:
        with torch.enable_grad():
            x = sample.tensor.unsqueeze(0).to(device).requires_grad_(True)
            logits = model(x)
            activations = captured[-1]
            if not isinstance(activations, torch.Tensor) or activations.ndim != 4:
                raise NonSpatialLayer(
                    f"Layer {layer_id} does not output a spatial feature map."
                )
            if target_class is None:
                target_class = int(logits[0].argmax())
            (gradients,) = torch.autograd.grad(
                logits[0, target_class], activations, allow_unused=True
            )
    finally:
        handle.remove()

    if gradients is None:
        gradients = torch.zeros_like(activations)
    weights = gradients.mean(dim=(2, 3), keepdim=True)
    cam = torch.relu((weights * activations).sum(dim=1, keepdim=True)).detach()
    peak = cam.max()
    if peak > 0:
        cam = cam / peak
    upsampled = F.interpolate(
        cam, size=tuple(sample.tensor.shape[-2:]), mode="bilinear", align_corners=False
    ).clamp(0.0, 1.0)
    logger.debug("Grad-CAM of grade %i on %s", target_class, layer_id)
    return CamMap(
        heat=cam[0, 0].cpu().double().numpy(),
        target_class=int(target_class),
        layer_id=layer_id,
        upsampled=upsampled[0, 0].cpu().double().numpy(),
    )


def cam_sidecar(cam: CamMap) -> dict:
    """
    Build the JSON diagnostics of a map.

    Args:
        cam (CamMap): the map.

    Returns:
        dict: {layer_id, target_class, heat_min, heat_max, argmax_xy}.
    """
    return {
        "layer_id": cam.layer_id,
        "target_class": cam.target_class,
        "heat_min": float(cam.heat.min()),
        "heat_max": float(cam.heat.max()),
        "argmax_xy": list(cam.argmax_xy),
    }


def overlay(
    cam: CamMap, sample: FusedSample, alpha: float = DEFAULT_ALPHA
) -> np.ndarray:
    """
    Blend the RGB channels of a sample with the color-mapped heatmap.

    Each pixel is rgb x (1 - alpha x heat) + alpha x heat x color(heat), so a zero map
    leaves the image unchanged.

    Args:
        cam (CamMap): the map.
        sample (FusedSample): the sample.
        alpha (float, optional): opacity of the heatmap. Defaults to 0.4.

    Raises:
        ShapeMismatch: if the map and the sample do not have the same size.

    Returns:
        np.ndarray: image of shape (S, S, 3) in [0, 1].
    """
    rgb = sample.tensor[:3].permute(1, 2, 0).cpu().double().numpy()
    if cam.upsampled.shape != rgb.shape[:2]:
        raise ShapeMismatch(
            f"Map of shape {cam.upsampled.shape} for an image of shape {rgb.shape[:2]}."
        )
    heat = cam.upsampled[..., None]
    colors = colormaps[DEFAULT_COLORMAP](cam.upsampled)[..., :3]
    return np.clip(rgb * (1 - alpha * heat) + alpha * heat * colors, 0.0, 1.0)


def render_overlay(
    cam: CamMap, sample: FusedSample, out_path: PathLike, alpha: float = DEFAULT_ALPHA
) -> Path:
    """
    Write the overlay of a map on a sample as an RGB PNG.

    Args:
        cam (CamMap): the map.
        sample (FusedSample): the sample.
        out_path (PathLike): output path.
        alpha (float, optional): opacity of the heatmap. Defaults to 0.4.

    Raises:
        IoError: if the file cannot be written.

    Returns:
        Path: the output path.
    """
    out_path = Path(out_path)
    image = np.rint(overlay(cam, sample, alpha) * 255).astype(np.uint8)
    try:
        out_path.parent.mkdir(parents=True, exist_ok=True)
        Image.fromarray(image, mode="RGB").save(out_path, format="PNG")
    except OSError as exc:
        raise IoError(f"Cannot write {out_path}: {exc}") from exc
    return out_path


def explain_samples(
    model: FusionClassifier,
    samples: Sequence[FusedSample],
    out_dir: PathLike,
    target_class: Optional[int] = None,
    layer_id: Optional[str] = None,
) -> List[Path]:
    """
    Write the overlays of several samples and a cam.json file with their diagnostics.

    The overlays are named <sample_id>_<class>_cam.png.

    Args:
        model (FusionClassifier): the model.
        samples (Sequence[FusedSample]): the samples.
        out_dir (PathLike): output directory.
        target_class (Optional[int], optional): explained grade, the predicted one if None. Defaults to None.
        layer_id (Optional[str], optional): name of the layer, the default one if None. Defaults to None.

    Returns:
        List[Path]: paths of the overlays.
    """
    out_dir = Path(out_dir)
    written = []
    sidecar = {}
    for sample in samples:
        cam = grad_cam(model, sample, target_class=target_class, layer_id=layer_id)
        name = f"{sample.sample_id}_{cam.target_class}_cam.png"
        written.append(render_overlay(cam, sample, out_dir / name))
        sidecar[sample.sample_id] = {**cam_sidecar(cam), "label": sample.label}
    dump_json(sidecar, out_dir / "cam.json")
    logger.info("%i Grad-CAM overlays written in %s", len(written), out_dir)
    return written
