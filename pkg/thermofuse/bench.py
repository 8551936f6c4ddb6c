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
Single-image inference latency and throughput.

Every pass is timed on its own with a monotonic clock, the device being synchronized
before each timestamp. The throughput is 1000 / mean latency.
"""
import logging
import time
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import List, Optional, Sequence, Union

import numpy as np
import torch
from torch import nn

from thermofuse.dataset import FusedSample, Modality
from thermofuse.model import build_model, count_params
from thermofuse.training import select_device
from thermofuse.utils import PathLike, dump_json

logger = logging.getLogger(__name__)

DEFAULT_N_WARMUP = 20
DEFAULT_N_ITER = 200

#: Published timings: (dataset, backbone, backbone M, head M, mean ms, max ms, min ms, fps).
#: The max and min columns are swapped in most published rows.
TABLE2_TIMINGS = [
    ("RGB", "DenseNet121", 6.95, 1.58, 6.43, 6.03, 7.41, 155.45),
    ("RGB", "EfficientNetV2S", 20.17, 1.84, 6.94, 6.44, 8.97, 144.07),
    ("RGB", "InceptionV3", 21.78, 5.58, 4.89, 4.69, 5.79, 204.32),
    ("RGB", "ResNet50", 23.50, 2.62, 3.29, 3.08, 3.81, 303.94),
    ("RGB", "VGG16", 134.26, 4.72, 6.02, 5.87, 6.72, 166.02),
    ("Thermal", "DenseNet121", 6.95, 1.58, 6.35, 6.03, 6.98, 157.45),
    ("Thermal", "EfficientNetV2S", 20.17, 1.84, 6.82, 6.44, 7.65, 146.61),
    ("Thermal", "InceptionV3", 21.78, 5.58, 4.89, 4.69, 5.56, 204.69),
    ("Thermal", "ResNet50", 23.50, 2.62, 3.20, 3.07, 3.81, 312.27),
    ("Thermal", "VGG16", 134.26, 4.72, 6.02, 5.87, 7.14, 166.07),
    ("RGB+Thermal", "DenseNet121", 6.95, 1.58, 6.34, 6.08, 10.41, 157.70),
    ("RGB+Thermal", "EfficientNetV2S", 20.17, 1.84, 6.96, 6.61, 8.54, 143.67),
    ("RGB+Thermal", "InceptionV3", 21.78, 5.58, 5.18, 4.70, 9.72, 192.92),
    ("RGB+Thermal", "ResNet50", 23.51, 2.62, 3.29, 3.12, 3.95, 304.34),
    ("RGB+Thermal", "VGG16", 134.28, 4.72, 6.01, 5.89, 6.75, 166.34),
]


# pylint: disable=too-many-instance-attributes
@dataclass(frozen=True)
class TimingReport:
    """
    Latency statistics of a model.
    """

    model_id: str  #: Identifier of the model.
    modality: str  #: Dataset of the model.
    mean_ms: float  #: Mean latency, in ms.
    min_ms: float  #: Minimal latency, in ms.
    max_ms: float  #: Maximal latency, in ms.
    fps: float  #: Images per second, 1000 / mean_ms.
    n_warmup: int  #: Untimed passes.
    n_iter: int  #: Timed passes.
    batch_size: int = 1  #: Images per pass.
    device: str = "cpu"  #: Device of the model.
    backbone_params: Optional[int] = None  #: Backbone parameters, if known.
    head_params: Optional[int] = None  #: Head parameters, if known.


def _synchronize(device: torch.device) -> None:
    if device.type == "cuda":
        torch.cuda.synchronize(device)


@torch.no_grad()
def time_inference(
    model: nn.Module,
    sample: Union[FusedSample, torch.Tensor],
    n_warmup: int = DEFAULT_N_WARMUP,
    n_iter: int = DEFAULT_N_ITER,
    device: Optional[torch.device] = None,
) -> TimingReport:
    """
    Time single-image inference passes.

    Args:
        model (nn.Module): the model, set to inference mode.
        sample (Union[FusedSample, torch.Tensor]): the input, of shape (C, S, S).
        n_warmup (int, optional): untimed passes. Defaults to 20.
        n_iter (int, optional): timed passes. Defaults to 200.
        device (Optional[torch.device], optional): device, the one of the model if None. Defaults to None.

    Returns:
        TimingReport: the statistics.
    """
    if n_iter < 1:
        raise ValueError("At least one timed pass is needed.")
    tensor = sample.tensor if isinstance(sample, FusedSample) else sample
    if device is None:
        parameter = next(model.parameters(), None)
        device = parameter.device if parameter is not None else torch.device("cpu")
    model.to(device).eval()
    x = tensor.unsqueeze(0).to(device)

    for _ in range(n_warmup):
        model(x)
    _synchronize(device)

    timings = np.empty(n_iter)
    for i in range(n_iter):
        _synchronize(device)
        start = time.perf_counter()
        model(x)
        _synchronize(device)
        timings[i] = (time.perf_counter() - start) * 1000.0

    mean_ms = float(timings.mean())
    backbone_params, head_params = None, None
    if hasattr(model, "backbone") and hasattr(model, "head"):
        backbone_params, head_params = count_params(model)
    modality = getattr(model, "modality", None)
    report = TimingReport(
        model_id=getattr(model, "backbone_id", type(model).__name__),
        modality=modality.value if isinstance(modality, Modality) else "",
        mean_ms=mean_ms,
        min_ms=float(timings.min()),
        max_ms=float(timings.max()),
        fps=1000.0 / mean_ms,
        n_warmup=n_warmup,
        n_iter=n_iter,
        device=str(device),
        backbone_params=backbone_params,
        head_params=head_params,
    )
    logger.info(
        "%s %s: mean %f ms, min %f ms, max %f ms, %f FPS",
        report.model_id,
        report.modality,
        report.mean_ms,
        report.min_ms,
        report.max_ms,
        report.fps,
    )
    return report


def run_bench(
    backbones: Sequence[str],
    modalities: Sequence[Union[Modality, str]],
    n_warmup: int = DEFAULT_N_WARMUP,
    n_iter: int = DEFAULT_N_ITER,
    device: str = "auto",
    seed: int = 0,
) -> List[TimingReport]:
    """
    Time every (backbone, modality) pair on a random input.

    The latency does not depend on the weights, so the models are randomly initialized.

    Args:
        backbones (Sequence[str]): identifiers of the backbones.
        modalities (Sequence[Union[Modality, str]]): modalities.
        n_warmup (int, optional): untimed passes. Defaults to 20.
        n_iter (int, optional): timed passes. Defaults to 200.
        device (str, optional): auto, cpu or cuda. Defaults to "auto".
        seed (int, optional): seed of the random input. Defaults to 0.

    Returns:
        List[TimingReport]: one report per pair, modality-major.
    """
    torch_device = select_device(device)
    generator = torch.Generator().manual_seed(seed)
    reports = []
    for modality in modalities:
        modality = Modality(modality)
        for backbone in backbones:
            model = build_model(backbone, modality=modality, pretrained=False)
            x = torch.rand(
                modality.channels,
                model.input_size,
                model.input_size,
                generator=generator,
            )
            reports.append(time_inference(model, x, n_warmup, n_iter, torch_device))
    return reports


def bench_table_markdown(reports: Sequence[TimingReport]) -> str:
    """
    Format timing reports as a markdown table.

    Args:
        reports (Sequence[TimingReport]): the reports.

    Returns:
        str: the table.
    """

    def millions(value: Optional[int]) -> str:
        return "-" if value is None else f"{value / 1e6:.2f}"

    lines = [
        "| Training Set | CNN Model | Backbone (M) | Head (M) | Mean (ms) | Max (ms) "
        "| Min (ms) | FPS |",
        "|---|---|---|---|---|---|---|---|",
    ]
    for report in reports:
        name = Modality(report.modality).display_name if report.modality else "-"
        lines.append(
            f"| {name} | {report.model_id} | {millions(report.backbone_params)} "
            f"| {millions(report.head_params)} | {report.mean_ms:.2f} | {report.max_ms:.2f} "
            f"| {report.min_ms:.2f} | {report.fps:.2f} |"
        )
    return "\n".join(lines) + "\n"


def save_bench(reports: Sequence[TimingReport], out_dir: PathLike) -> Path:
    """
    Write bench.json and bench.md.

    Args:
        reports (Sequence[TimingReport]): the reports.
        out_dir (PathLike): output directory.

    Returns:
        Path: path of bench.json.
    """
    out_dir = Path(out_dir)
    path = out_dir / "bench.json"
    dump_json([asdict(report) for report in reports], path)
    (out_dir / "bench.md").write_text(bench_table_markdown(reports), encoding="utf-8")
    return path


def table2_fps_deviations() -> List[float]:
    """
    Relative deviation between the published FPS and 1000 / published mean latency.

    Returns:
        List[float]: one deviation per published row.
    """
    return [abs(fps - 1000.0 / mean) / fps for *_, mean, _, _, fps in TABLE2_TIMINGS]
