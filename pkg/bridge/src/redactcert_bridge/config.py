"""Bridge configuration."""

from __future__ import annotations

from dataclasses import dataclass, field

KNOWN_MODELS = ("toy-cnn", "vgg16", "resnet50", "inception_v3")
SEGMENTATION_BACKENDS = ("sam", "grid")


class BridgeError(RuntimeError):
    pass


@dataclass(frozen=True)
class BridgeConfig:
    """Everything that pins down a deterministic serving setup.

    The preprocessing tag recorded in bundle meta is exactly what evaluate
    applies; "resize" uses the standard resize+center-crop pipeline, "pad"
    scales the long side and zero-pads the short one before normalization.
    """

    model: str = "toy-cnn"
    device: str = "cpu"
    preprocessing: str = "resize"  # resize | pad
    ig_steps: int = 50
    segmentation: str = "grid"  # sam | grid
    grid_rows: int = 8
    grid_cols: int = 8
    sam_checkpoint: str | None = None
    sam_model_type: str = "vit_b"
    seed: int = 0
    host: str = "127.0.0.1"
    port: int = 7733

    def __post_init__(self):
        if self.model not in KNOWN_MODELS:
            raise BridgeError(f"unknown model {self.model!r}; known: {KNOWN_MODELS}")
        if self.segmentation not in SEGMENTATION_BACKENDS:
            raise BridgeError(f"unknown segmentation backend {self.segmentation!r}")
        if self.preprocessing not in ("resize", "pad"):
            raise BridgeError(f"unknown preprocessing {self.preprocessing!r}")
        if self.ig_steps < 1:
            raise BridgeError("ig_steps must be positive")
