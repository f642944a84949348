"""Segmentation masks flattened into a total per-pixel partition.

Preferred backend is the promptable mask generator when its package and
checkpoint are available; otherwise a deterministic rectangular grid. Mask
output becomes a partition by letting smaller masks win overlaps and
sending unclaimed pixels to a background segment.
"""

from __future__ import annotations

import numpy as np

from .config import BridgeConfig, BridgeError


def grid_partition(height: int, width: int, rows: int, cols: int) -> np.ndarray:
    if rows < 1 or cols < 1 or rows > height or cols > width:
        raise BridgeError(f"cannot tile {height}x{width} into {rows}x{cols}")
    th, tw = height // rows, width // cols
    r_ids = np.minimum(np.arange(height) // th, rows - 1)
    c_ids = np.minimum(np.arange(width) // tw, cols - 1)
    return (r_ids[:, None] * cols + c_ids[None, :]).astype("<u4")


def masks_to_partition(masks: list[np.ndarray], height: int, width: int) -> np.ndarray:
    """Overlapping boolean masks -> total partition, smaller masks first;
    leftover pixels form one background segment."""
    owner = np.full((height, width), -1, dtype=np.int64)
    next_id = 0
    for mask in sorted(masks, key=lambda m: int(m.sum())):
        claim = mask & (owner == -1)
        if not claim.any():
            continue
        owner[claim] = next_id
        next_id += 1
    if (owner == -1).any():
        owner[owner == -1] = next_id
    return owner.astype("<u4")


def segment_image(image, config: BridgeConfig, height: int, width: int):
    """Returns (per-pixel ids, backend tag, warning-or-None)."""
    if config.segmentation == "sam":
        try:
            ids = _sam_partition(image, config, height, width)
            return ids, "sam", None
        except Exception as exc:  # noqa: BLE001 - fall back, record why
            warning = f"sam unavailable ({exc}); grid fallback used"
            ids = grid_partition(height, width, config.grid_rows, config.grid_cols)
            return ids, "grid-fallback", warning
    ids = grid_partition(height, width, config.grid_rows, config.grid_cols)
    return ids, "grid", None


def _sam_partition(image, config: BridgeConfig, height: int, width: int) -> np.ndarray:
    from segment_anything import SamAutomaticMaskGenerator, sam_model_registry

    if not config.sam_checkpoint:
        raise BridgeError("no sam checkpoint configured")
    sam = sam_model_registry[config.sam_model_type](checkpoint=config.sam_checkpoint)
    generator = SamAutomaticMaskGenerator(sam)
    arr = np.asarray(image.resize((width, height)).convert("RGB"))
    masks = [m["segmentation"].astype(bool) for m in generator.generate(arr)]
    if not masks:
        raise BridgeError("mask generator produced no masks")
    return masks_to_partition(masks, height, width)
