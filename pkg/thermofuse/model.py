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
Classifiers: pretrained backbone, optional four-channel input layer and classification head.

The original classification layers of the torchvision networks are removed and
replaced by a head made of two fully connected layers (1024 and 512 neurons), each
followed by ReLU, batch normalization and dropout, and a final layer of six neurons.

For the fused modality, the first convolution is inflated from 3 to 4 input channels.
The kernels of the RGB channels are kept, the kernels of the thermal channel are the
mean of the RGB kernels or zeros.
"""
import copy
import logging
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Dict, Optional, Tuple, Union

import torch
from torch import nn
from torchvision import models

from thermofuse.dataset import Modality, NUM_CLASSES
from thermofuse.exceptions import WeightsUnavailable, WrongChannelCount

logger = logging.getLogger(__name__)

IMAGENET_MEAN = (0.485, 0.456, 0.406)
IMAGENET_STD = (0.229, 0.224, 0.225)

HEAD_CONSTANT = 531974  #: Parameters of the head that do not depend on the feature dimension.


class InflationMode(str, Enum):
    """
    Initialization of the kernels of the thermal input channel.
    """

    MEAN_RGB = "mean_rgb"
    ZEROS = "zeros"


class TinyVGG(nn.Module):
    """
    Small VGG-like network without pretrained weights, for fast runs on 64x64 inputs.
    """

    FEATURE_DIM = 256

    def __init__(self, in_channels: int = 3):
        super().__init__()

        def block(cin: int, cout: int) -> list:
            return [
                nn.Conv2d(cin, cout, kernel_size=3, padding=1),
                nn.BatchNorm2d(cout),
                nn.ReLU(inplace=True),
            ]

        self.features = nn.Sequential(
            *block(in_channels, 32),
            *block(32, 32),
            nn.MaxPool2d(2),
            *block(32, 64),
            *block(64, 64),
            nn.MaxPool2d(2),
            *block(64, 128),
            nn.MaxPool2d(2),
        )
        self.avgpool = nn.AdaptiveAvgPool2d(4)
        self.embedding = nn.Sequential(
            nn.Flatten(),
            nn.Linear(128 * 4 * 4, self.FEATURE_DIM),
            nn.ReLU(inplace=True),
        )

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.embedding(self.avgpool(self.features(x)))


def _load(
    builder: Callable, weights, backbone_id: str, pretrained: bool, **kwargs
) -> nn.Module:
    try:
        return builder(weights=weights if pretrained else None, **kwargs)
    except (OSError, RuntimeError, ValueError) as exc:
        raise WeightsUnavailable(
            f"Cannot load the ImageNet weights of {backbone_id}: {exc}"
        ) from exc


def _resnet50(pretrained: bool) -> nn.Module:
    net = _load(
        models.resnet50, models.ResNet50_Weights.IMAGENET1K_V2, "ResNet50", pretrained
    )
    net.fc = nn.Identity()
    return net


def _densenet121(pretrained: bool) -> nn.Module:
    net = _load(
        models.densenet121,
        models.DenseNet121_Weights.IMAGENET1K_V1,
        "DenseNet121",
        pretrained,
    )
    net.classifier = nn.Identity()
    return net


def _efficientnet_v2_s(pretrained: bool) -> nn.Module:
    net = _load(
        models.efficientnet_v2_s,
        models.EfficientNet_V2_S_Weights.IMAGENET1K_V1,
        "EfficientNetV2S",
        pretrained,
    )
    net.classifier = nn.Identity()
    return net


def _inception_v3(pretrained: bool) -> nn.Module:
    # The ImageNet weights ship with the auxiliary classifier, it is dropped after loading.
    kwargs = {"aux_logits": pretrained, "transform_input": False}
    if not pretrained:
        kwargs["init_weights"] = True
    net = _load(
        models.inception_v3,
        models.Inception_V3_Weights.IMAGENET1K_V1,
        "InceptionV3",
        pretrained,
        **kwargs,
    )
    net.aux_logits = False
    net.AuxLogits = None
    net.fc = nn.Identity()
    return net


def _vgg16(pretrained: bool) -> nn.Module:
    net = _load(models.vgg16, models.VGG16_Weights.IMAGENET1K_V1, "VGG16", pretrained)
    # Keep both 4096-unit layers, only the 1000-class output is removed.
    net.classifier = net.classifier[:-1]
    return net


def _tiny_vgg(_pretrained: bool) -> nn.Module:
    return TinyVGG()


@dataclass(frozen=True)
class BackboneSpec:
    """
    Description of a backbone.
    """

    id: str  #: Identifier of the backbone.
    feature_dim: int  #: Dimension of the representation the head is plugged on.
    input_size: int  #: Side of the square input, in pixels.
    backbone_params_expected: float  #: Published backbone parameters, in millions, 0 if none.
    first_conv: str  #: Path of the first convolution in the backbone.
    cam_layer: str  #: Path of the default Grad-CAM layer in the backbone.
    factory: Callable[[bool], nn.Module]  #: Builds the backbone without its classifier.
    has_pretrained_weights: bool = True  #: Whether ImageNet weights exist.


BACKBONES: Dict[str, BackboneSpec] = {
    "DenseNet121": BackboneSpec(
        id="DenseNet121",
        feature_dim=1024,
        input_size=224,
        backbone_params_expected=6.95,
        first_conv="features.conv0",
        cam_layer="features",
        factory=_densenet121,
    ),
    "EfficientNetV2S": BackboneSpec(
        id="EfficientNetV2S",
        feature_dim=1280,
        input_size=224,
        backbone_params_expected=20.17,
        first_conv="features.0.0",
        cam_layer="features",
        factory=_efficientnet_v2_s,
    ),
    "InceptionV3": BackboneSpec(
        id="InceptionV3",
        feature_dim=2048,
        input_size=299,
        backbone_params_expected=21.78,
        first_conv="Conv2d_1a_3x3.conv",
        cam_layer="Mixed_7c",
        factory=_inception_v3,
    ),
    "ResNet50": BackboneSpec(
        id="ResNet50",
        feature_dim=2048,
        input_size=224,
        backbone_params_expected=23.50,
        first_conv="conv1",
        cam_layer="layer4",
        factory=_resnet50,
    ),
    "VGG16": BackboneSpec(
        id="VGG16",
        feature_dim=4096,
        input_size=224,
        backbone_params_expected=134.26,
        first_conv="features.0",
        cam_layer="features.29",
        factory=_vgg16,
    ),
    "TinyVGG": BackboneSpec(
        id="TinyVGG",
        feature_dim=TinyVGG.FEATURE_DIM,
        input_size=64,
        backbone_params_expected=0.0,
        first_conv="features.0",
        cam_layer="features",
        factory=_tiny_vgg,
        has_pretrained_weights=False,
    ),
}


def get_backbone(backbone: Union[str, BackboneSpec]) -> BackboneSpec:
    """
    Get the description of a backbone.

    Args:
        backbone (Union[str, BackboneSpec]): identifier or description.

    Raises:
        KeyError: if the identifier is unknown.

    Returns:
        BackboneSpec: the description.
    """
    if isinstance(backbone, BackboneSpec):
        return backbone
    if backbone not in BACKBONES:
        raise KeyError(f"Unknown backbone {backbone}. Choose from {sorted(BACKBONES)}.")
    return BACKBONES[backbone]


@dataclass(frozen=True)
class HeadSpec:
    """
    Layout of the classification head.
    """

    hidden: Tuple[int, ...] = (1024, 512)  #: Sizes of the hidden layers.
    dropout: float = 0.5  #: Dropout rate after each hidden layer.
    num_classes: int = NUM_CLASSES  #: Number of outputs.

    def param_count(self, feature_dim: int) -> int:
        """
        Number of parameters of the head.

        Args:
            feature_dim (int): dimension of the input of the head.

        Returns:
            int: the number of parameters.
        """
        total = 0
        previous = feature_dim
        for size in self.hidden:
            total += previous * size + size + 2 * size
            previous = size
        return total + previous * self.num_classes + self.num_classes


def build_head(feature_dim: int, spec: Optional[HeadSpec] = None) -> nn.Sequential:
    """
    Build the classification head.

    Each hidden layer is Linear -> ReLU -> BatchNorm1d -> Dropout, in this order.

    Args:
        feature_dim (int): dimension of the backbone representation.
        spec (Optional[HeadSpec], optional): layout of the head. Defaults to None for the default layout.

    Returns:
        nn.Sequential: the head.
    """
    spec = spec or HeadSpec()
    layers = []
    previous = feature_dim
    for size in spec.hidden:
        layers += [
            nn.Linear(previous, size),
            nn.ReLU(inplace=True),
            nn.BatchNorm1d(size),
            nn.Dropout(spec.dropout),
        ]
        previous = size
    layers.append(nn.Linear(previous, spec.num_classes))
    return nn.Sequential(*layers)


def inflate_input_layer(
    weights3: torch.Tensor, mode: Union[InflationMode, str] = InflationMode.MEAN_RGB
) -> torch.Tensor:
    """
    Add the kernels of a fourth input channel to first-layer kernels.

    Args:
        weights3 (torch.Tensor): kernels of shape (out_channels, 3, kh, kw).
        mode (Union[InflationMode, str], optional): mean_rgb or zeros. Defaults to InflationMode.MEAN_RGB.

    Raises:
        WrongChannelCount: if the kernels do not have 3 input channels.

    Returns:
        torch.Tensor: kernels of shape (out_channels, 4, kh, kw), the first three channels unchanged.
    """
    mode = InflationMode(mode)
    if weights3.ndim != 4 or weights3.shape[1] != 3:
        raise WrongChannelCount(
            f"Expected kernels with 3 input channels, got shape {tuple(weights3.shape)}."
        )
    if mode is InflationMode.MEAN_RGB:
        extra = weights3.mean(dim=1, keepdim=True)
    else:
        extra = torch.zeros_like(weights3[:, :1])
    return torch.cat([weights3, extra], dim=1)


def inflate_conv(
    conv: nn.Conv2d, mode: Union[InflationMode, str] = InflationMode.MEAN_RGB
) -> nn.Conv2d:
    """
    Build a 4-channel copy of a 3-channel convolution.

    Args:
        conv (nn.Conv2d): the convolution.
        mode (Union[InflationMode, str], optional): mean_rgb or zeros. Defaults to InflationMode.MEAN_RGB.

    Raises:
        WrongChannelCount: if the convolution does not have 3 input channels.

    Returns:
        nn.Conv2d: the inflated convolution.
    """
    if conv.in_channels != 3:
        raise WrongChannelCount(
            f"Expected a convolution with 3 input channels, got {conv.in_channels}."
        )
    inflated = nn.Conv2d(
        4,
        conv.out_channels,
        kernel_size=conv.kernel_size,
        stride=conv.stride,
        padding=conv.padding,
        dilation=conv.dilation,
        groups=conv.groups,
        bias=conv.bias is not None,
        padding_mode=conv.padding_mode,
    ).to(device=conv.weight.device, dtype=conv.weight.dtype)
    with torch.no_grad():
        inflated.weight.copy_(inflate_input_layer(conv.weight, mode))
        if conv.bias is not None:
            inflated.bias.copy_(conv.bias)
    inflated.weight.requires_grad_(conv.weight.requires_grad)
    return inflated


def _replace_module(root: nn.Module, path: str, module: nn.Module) -> None:
    parent_path, _, name = path.rpartition(".")
    parent = root.get_submodule(parent_path) if parent_path else root
    setattr(parent, name, module)


class InputNormalization(nn.Module):
    """
    Per-channel standardization of the input.

    The RGB channels use the ImageNet statistics, the fourth channel is left unchanged.
    """

    def __init__(self, channels: int):
        super().__init__()
        mean = list(IMAGENET_MEAN) + [0.0] * (channels - 3)
        std = list(IMAGENET_STD) + [1.0] * (channels - 3)
        self.register_buffer("mean", torch.tensor(mean).view(1, -1, 1, 1))
        self.register_buffer("std", torch.tensor(std).view(1, -1, 1, 1))

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return (x - self.mean) / self.std


class FusionClassifier(nn.Module):
    """
    Backbone followed by the classification head.
    """

    # pylint: disable=too-many-arguments
    def __init__(
        self,
        spec: BackboneSpec,
        backbone: nn.Module,
        head: nn.Module,
        modality: Modality,
        inflation_mode: InflationMode = InflationMode.MEAN_RGB,
    ):
        super().__init__()
        self.spec = spec
        self.modality = modality
        self.inflation_mode = inflation_mode
        self.normalization = InputNormalization(modality.channels)
        self.backbone = backbone
        self.head = head

    @property
    def backbone_id(self) -> str:
        """
        Identifier of the backbone.

        Returns:
            str: the identifier.
        """
        return self.spec.id

    @property
    def input_size(self) -> int:
        """
        Side of the square input, in pixels.

        Returns:
            int: the side.
        """
        return self.spec.input_size

    @property
    def in_channels(self) -> int:
        """
        Number of input channels.

        Returns:
            int: 4 for the fused modality, 3 otherwise.
        """
        return self.modality.channels

    def features(self, x: torch.Tensor) -> torch.Tensor:
        """
        Compute the backbone representation.

        Args:
            x (torch.Tensor): batch of shape (B, C, S, S) in [0, 1].

        Returns:
            torch.Tensor: batch of shape (B, feature_dim).
        """
        return torch.flatten(self.backbone(self.normalization(x)), 1)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.head(self.features(x))


def build_model(
    backbone: Union[str, BackboneSpec],
    modality: Union[Modality, str] = Modality.FUSED,
    inflation_mode: Union[InflationMode, str] = InflationMode.MEAN_RGB,
    pretrained: bool = True,
    freeze_backbone: bool = False,
    head: Optional[HeadSpec] = None,
) -> FusionClassifier:
    """
    Build a classifier.

    The backbone keeps its pretrained weights, the head is freshly initialized. The
    thermal modality uses the unmodified 3-channel backbone with the thermal channel
    replicated three times.

    Args:
        backbone (Union[str, BackboneSpec]): identifier or description of the backbone.
        modality (Union[Modality, str], optional): rgb, thermal or fused. Defaults to Modality.FUSED.
        inflation_mode (Union[InflationMode, str], optional): kernels of the thermal channel. Defaults to InflationMode.MEAN_RGB.
        pretrained (bool, optional): load the ImageNet weights. Defaults to True.
        freeze_backbone (bool, optional): only the head is trainable. Defaults to False.
        head (Optional[HeadSpec], optional): layout of the head. Defaults to None.

    Raises:
        WeightsUnavailable: if the pretrained weights cannot be loaded.

    Returns:
        FusionClassifier: the classifier.
    """
    spec = get_backbone(backbone)
    modality = Modality(modality)
    inflation_mode = InflationMode(inflation_mode)

    logger.info(
        "Building %s for the %s dataset (pretrained=%s)",
        spec.id,
        modality.display_name,
        pretrained,
    )
    if pretrained and not spec.has_pretrained_weights:
        logger.warning(
            "%s has no pretrained weights, using a random initialization", spec.id
        )
    net = spec.factory(pretrained)
    if modality is Modality.FUSED:
        first_conv = inflate_conv(net.get_submodule(spec.first_conv), inflation_mode)
        _replace_module(net, spec.first_conv, first_conv)
    model = FusionClassifier(
        spec=spec,
        backbone=net,
        head=build_head(spec.feature_dim, head),
        modality=modality,
        inflation_mode=inflation_mode,
    )
    if freeze_backbone:
        set_backbone_trainable(model, False)
    return model


def set_backbone_trainable(model: FusionClassifier, trainable: bool) -> None:
    """
    Freeze or unfreeze the parameters of the backbone.

    Args:
        model (FusionClassifier): the classifier.
        trainable (bool): whether the backbone parameters receive gradients.
    """
    for parameter in model.backbone.parameters():
        parameter.requires_grad_(trainable)


def to_fused(
    model: FusionClassifier, mode: Union[InflationMode, str] = InflationMode.MEAN_RGB
) -> FusionClassifier:
    """
    Build the fused version of an RGB classifier, with identical weights.

    Args:
        model (FusionClassifier): the RGB classifier, left unchanged.
        mode (Union[InflationMode, str], optional): kernels of the thermal channel. Defaults to InflationMode.MEAN_RGB.

    Raises:
        WrongChannelCount: if the classifier does not take 3 channels.

    Returns:
        FusionClassifier: the fused classifier.
    """
    if model.in_channels != 3:
        raise WrongChannelCount(
            f"Expected a classifier with 3 input channels, got {model.in_channels}."
        )
    fused = copy.deepcopy(model)
    conv = fused.backbone.get_submodule(fused.spec.first_conv)
    _replace_module(fused.backbone, fused.spec.first_conv, inflate_conv(conv, mode))
    fused.modality = Modality.FUSED
    fused.inflation_mode = InflationMode(mode)
    fused.normalization = InputNormalization(4).to(conv.weight.device)
    return fused


def count_params(model: FusionClassifier) -> Tuple[int, int]:
    """
    Count the parameters of the backbone and of the head.

    Args:
        model (FusionClassifier): the classifier.

    Returns:
        Tuple[int, int]: (backbone parameters, head parameters).
    """
    backbone = sum(p.numel() for p in model.backbone.parameters())
    head = sum(p.numel() for p in model.head.parameters())
    return backbone, head


def head_params(feature_dim: int) -> int:
    """
    Closed form of the number of parameters of the default head.

    Args:
        feature_dim (int): dimension of the backbone representation.

    Returns:
        int: 1024 x feature_dim + 531974.
    """
    return 1024 * feature_dim + HEAD_CONSTANT
