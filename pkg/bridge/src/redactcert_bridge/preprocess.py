"""Image decoding and preprocessing into the served tensor.

The tensor written to a bundle is the exact tensor the endpoint evaluates;
redactions are applied to it directly, after this stage.
"""

from __future__ import annotations

import numpy as np
from PIL import Image

from .config import BridgeError
from .models import IMAGENET_MEAN, IMAGENET_STD, LoadedModel


def load_image(path) -> Image.Image:
    try:
        return Image.open(path).convert("RGB")
    except Exception as exc:  # noqa: BLE001
        raise BridgeError(f"cannot decode image {path}: {exc}") from exc


def preprocess(image: Image.Image, loaded: LoadedModel, mode: str) -> np.ndarray:
    """Image -> flat float32 channel-last tensor of the model's input shape."""
    h, w = loaded.height, loaded.width
    if mode == "resize":
        scale = max(h / image.height, w / image.width)
        resized = image.resize(
            (max(w, round(image.width * scale)), max(h, round(image.height * scale))),
            Image.BILINEAR,
        )
        left = (resized.width - w) // 2
        top = (resized.height - h) // 2
        canvas = resized.crop((left, top, left + w, top + h))
    elif mode == "pad":
        # scale the long side down to fit, zero-pad the rest (black border)
        scale = min(h / image.height, w / image.width, 1.0)
        resized = image.resize(
            (max(1, round(image.width * scale)), max(1, round(image.height * scale))),
            Image.BILINEAR,
        )
        canvas = Image.new("RGB", (w, h))
        canvas.paste(resized, ((w - resized.width) // 2, (h - resized.height) // 2))
    else:
        raise BridgeError(f"unknown preprocessing mode {mode!r}")

    arr = np.asarray(canvas, dtype=np.float32) / 255.0  # H x W x C
    if loaded.normalize:
        arr = (arr - np.asarray(IMAGENET_MEAN, dtype=np.float32)) / np.asarray(
            IMAGENET_STD, dtype=np.float32
        )
    return np.ascontiguousarray(arr.reshape(-1), dtype="<f4")
