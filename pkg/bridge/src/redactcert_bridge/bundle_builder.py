"""Builds case bundles in the engine's on-disk format.

Layout: meta.json plus little-endian binaries (input.f32 float32, one value
per dimension; segmentation.u32 uint32 per pixel; attr_<label>.f32 float32
per dimension), every binary digest-pinned in the meta.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np

from .attribution import integrated_gradients
from .config import BridgeConfig
from .models import LoadedModel, evaluate_flat, load_model
from .preprocess import load_image, preprocess
from .segmentation import segment_image

SCHEMA_VERSION = "1"


def _sha256(raw: bytes) -> str:
    return hashlib.sha256(raw).hexdigest()


def build_bundle(
    image_path,
    config: BridgeConfig,
    labels: list[int],
    out_dir,
    loaded: LoadedModel | None = None,
) -> Path:
    """Preprocess, segment, attribute, and write a digest-pinned bundle.

    labels are the pair (or more) of interest; each gets an attribution map
    and a recorded baseline. The endpoint descriptor points at the host and
    port this bridge will serve on.
    """
    loaded = loaded or load_model(config)
    image = load_image(image_path)
    flat = preprocess(image, loaded, config.preprocessing)
    seg_ids, seg_tag, warning = segment_image(image, config, loaded.height, loaded.width)
    probs = evaluate_flat(loaded, flat)

    for label in labels:
        if not (0 <= label < loaded.m):
            raise ValueError(f"label {label} outside [0, {loaded.m})")

    root = Path(out_dir)
    root.mkdir(parents=True, exist_ok=True)
    files: dict[str, dict] = {}

    def put(key: str, name: str, raw: bytes):
        (root / name).write_bytes(raw)
        files[key] = {"path": name, "sha256": _sha256(raw)}

    put("input", "input.f32", flat.tobytes())
    put("segmentation", "segmentation.u32", np.ascontiguousarray(seg_ids, dtype="<u4").tobytes())
    for label in labels:
        attr = integrated_gradients(loaded, flat, label, config.ig_steps)
        put(f"attribution_{label}", f"attr_{label}.f32", attr.tobytes())

    meta = {
        "schema_version": SCHEMA_VERSION,
        "model_id": loaded.model_id,
        "n": loaded.n,
        "m": loaded.m,
        "geometry": [loaded.height, loaded.width, loaded.channels],
        "preprocessing": f"{config.preprocessing}-{'imagenet' if loaded.normalize else 'unit'}",
        "files": files,
        "label_names": {str(i): loaded.label_names[i] for i in labels},
        "baselines": {str(i): float(probs[i]) for i in labels},
        "model": {
            "kind": "bridge",
            "transport": "tcp",
            "host": config.host,
            "port": config.port,
        },
        "bridge": {
            "model": loaded.name,
            "segmentation_backend": seg_tag,
            "ig_steps": config.ig_steps,
            "seed": config.seed,
            **({"warning": warning} if warning else {}),
        },
    }
    (root / "meta.json").write_text(json.dumps(meta, indent=2) + "\n", "utf-8")
    return root
