"""Backbones and the classification head.

The head replaces a backbone's final layer with two fully-connected
layers: the first is dropout-regularized, the second produces the class
probabilities through a softmax. A small CNN backbone keeps tests fast;
an Inception-v3 backbone is available for fidelity runs. For large-input
training with mini-batch size 1, batch normalization can be swapped for
per-instance normalization so updates do not depend on batch grouping.
"""

from __future__ import annotations

import logging

import torch
from torch import nn

from .errors import IncompatibleBackbone, RangeError

log = logging.getLogger(__name__)

TINY_CNN = "tiny-cnn"
INCEPTION_V3 = "inception-v3"
BACKBONES = (TINY_CNN, INCEPTION_V3)


class TinyCnnBackbone(nn.Module):
    """Three strided conv blocks and a global average pool; feature_dim 64."""

    feature_dim = 64

    def __init__(self):
        super().__init__()
        channels = (16, 32, 64)
        layers = []
        previous = 3
        for width in channels:
            layers += [
                nn.Conv2d(previous, width, kernel_size=3, stride=2, padding=1),
                nn.BatchNorm2d(width),
                nn.ReLU(inplace=True),
            ]
            previous = width
        self.features = nn.Sequential(*layers)
        self.pool = nn.AdaptiveAvgPool2d(1)

    def forward(self, x):
        return self.pool(self.features(x)).flatten(1)


class _InceptionBackbone(nn.Module):
    feature_dim = 2048

    def __init__(self, pretrained: bool):
        super().__init__()
        from torchvision.models import inception_v3

        weights = None
        if pretrained:
            try:
                from torchvision.models import Inception_V3_Weights
                weights = Inception_V3_Weights.IMAGENET1K_V1
            except Exception:  # pragma: no cover - environment dependent
                log.warning("pretrained weights unavailable; using random init")
        try:
            net = inception_v3(weights=weights, aux_logits=True, init_weights=True)
        except Exception as exc:  # pragma: no cover - download failures
            log.warning("falling back to random init: %s", exc)
            net = inception_v3(weights=None, aux_logits=True, init_weights=True)
        net.aux_logits = False
        net.AuxLogits = None
        net.fc = nn.Identity()
        self.net = net

    def forward(self, x):
        return self.net(x)


def make_backbone(name: str, pretrained: bool = False) -> nn.Module:
    if name == TINY_CNN:
        return TinyCnnBackbone()
    if name == INCEPTION_V3:
        return _InceptionBackbone(pretrained)
    raise RangeError(f"unknown backbone {name!r}; expected one of {BACKBONES}")


class ClassifierHead(nn.Module):
    """Dropout-regularized fully-connected layer, then a softmax layer."""

    def __init__(self, feature_dim: int, hidden_dim: int, num_classes: int,
                 dropout: float):
        super().__init__()
        if not 0.0 <= dropout < 1.0:
            raise RangeError(f"dropout must lie in [0, 1), got {dropout}")
        self.fc1 = nn.Linear(feature_dim, hidden_dim)
        self.activation = nn.ReLU(inplace=True)
        self.dropout = nn.Dropout(dropout)
        self.fc2 = nn.Linear(hidden_dim, num_classes)

    def forward(self, features):
        hidden = self.dropout(self.activation(self.fc1(features)))
        return torch.softmax(self.fc2(hidden), dim=1)


class GradingModel(nn.Module):
    """Backbone plus head; forward yields class probabilities summing to 1."""

    def __init__(self, backbone: nn.Module, head: ClassifierHead):
        super().__init__()
        self.backbone = backbone
        self.head = head

    def forward(self, x):
        return self.head(self.backbone(x))


def build_head(backbone: nn.Module, num_classes: int, hidden_dim: int = 64,
               dropout: float = 0.5) -> GradingModel:
    """Attach the two-layer softmax head to a feature-vector backbone."""
    if num_classes < 2:
        raise RangeError(f"need at least two classes, got {num_classes}")
    feature_dim = getattr(backbone, "feature_dim", None)
    if not isinstance(feature_dim, int) or feature_dim < 1:
        raise IncompatibleBackbone(
            "backbone must expose an integer feature_dim attribute and emit "
            "(batch, feature_dim) tensors")
    head = ClassifierHead(feature_dim, hidden_dim, num_classes, dropout)
    return GradingModel(backbone, head)


def swap_batchnorm_to_instancenorm(module: nn.Module) -> nn.Module:
    """Recursively replace BatchNorm2d with affine per-instance normalization.

    Affine weights are copied from the batch-norm layers; running statistics
    are dropped (per-instance statistics are computed at every forward, in
    training and eval alike), so outputs are independent of batch grouping.
    """
    for name, child in module.named_children():
        if isinstance(child, nn.BatchNorm2d):
            replacement = nn.InstanceNorm2d(child.num_features, affine=True,
                                            track_running_stats=False,
                                            eps=child.eps)
            if child.affine:
                with torch.no_grad():
                    replacement.weight.copy_(child.weight)
                    replacement.bias.copy_(child.bias)
            setattr(module, name, replacement)
        else:
            swap_batchnorm_to_instancenorm(child)
    return module
