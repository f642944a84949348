"""Model loading and deterministic evaluation.

Tensors cross the package boundary as flat little-endian float32 vectors in
row-major, channel-last order (the bundle file format); evaluation reshapes
to NCHW for torch. Determinism: CPU, eval mode, no grad, single thread, and
seeded weight init for the synthetic model.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
import torch
from torch import nn

from .config import BridgeConfig, BridgeError

IMAGENET_MEAN = (0.485, 0.456, 0.406)
IMAGENET_STD = (0.229, 0.224, 0.225)


@dataclass(frozen=True, eq=False)
class LoadedModel:
    name: str
    net: nn.Module
    height: int
    width: int
    channels: int
    m: int
    label_names: tuple[str, ...]
    normalize: bool  # whether preprocessing applies the imagenet statistics

    @property
    def n(self) -> int:
        return self.height * self.width * self.channels

    @property
    def model_id(self) -> str:
        return f"bridge-{self.name}"


class _ToyCnn(nn.Module):
    """Small deterministic CNN standing in where pretrained weights are
    unavailable; weights come entirely from the seeded generator."""

    def __init__(self, m: int, seed: int):
        super().__init__()
        self.conv1 = nn.Conv2d(3, 8, 3, padding=1)
        self.conv2 = nn.Conv2d(8, 16, 3, padding=1)
        self.head = nn.Linear(16 * 4 * 4, m)
        gen = torch.Generator().manual_seed(seed)
        for p in self.parameters():
            with torch.no_grad():
                p.copy_(torch.empty_like(p).uniform_(-0.3, 0.3, generator=gen))

    def forward(self, x):
        x = torch.relu(self.conv1(x))
        x = torch.nn.functional.avg_pool2d(x, 4)
        x = torch.relu(self.conv2(x))
        x = torch.nn.functional.adaptive_avg_pool2d(x, 4)
        return self.head(x.flatten(1))


def load_model(config: BridgeConfig) -> LoadedModel:
    torch.set_num_threads(1)
    torch.manual_seed(config.seed)
    if config.model == "toy-cnn":
        m = 16
        net = _ToyCnn(m, config.seed).eval()
        names = tuple(f"class-{i}" for i in range(m))
        return LoadedModel("toy-cnn", net, 32, 32, 3, m, names, normalize=False)

    import torchvision.models as tvm

    table: dict[str, tuple[Callable, object, int]] = {
        "vgg16": (tvm.vgg16, tvm.VGG16_Weights.IMAGENET1K_V1, 224),
        "resnet50": (tvm.resnet50, tvm.ResNet50_Weights.IMAGENET1K_V1, 224),
        "inception_v3": (tvm.inception_v3, tvm.Inception_V3_Weights.IMAGENET1K_V1, 299),
    }
    ctor, weights, side = table[config.model]
    try:
        net = ctor(weights=weights).eval()
    except Exception as exc:  # noqa: BLE001 - weight download or cache failure
        raise BridgeError(
            f"cannot load pretrained weights for {config.model}: {exc}"
        ) from exc
    names = tuple(weights.meta["categories"])
    return LoadedModel(config.model, net, side, side, 3, len(names), names, normalize=True)


def to_nchw(loaded: LoadedModel, flat: np.ndarray) -> torch.Tensor:
    if flat.shape[0] != loaded.n:
        raise BridgeError(f"expected {loaded.n} values, got {flat.shape[0]}")
    hwc = torch.from_numpy(
        np.array(flat, dtype=np.float32, copy=True).reshape(
            loaded.height, loaded.width, loaded.channels
        )
    )
    return hwc.permute(2, 0, 1).unsqueeze(0)


def evaluate_flat(loaded: LoadedModel, flat: np.ndarray) -> np.ndarray:
    """Softmax over the classes for one flat channel-last tensor."""
    with torch.no_grad():
        logits = loaded.net(to_nchw(loaded, flat))
    return torch.softmax(logits[0].double(), dim=0).numpy()
