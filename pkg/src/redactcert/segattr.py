"""Segmentations, adjacency, and segment-level attribution scores.

A segmentation partitions the input dimensions into K segments; per-dimension
attribution maps are accumulated into per-segment means, ranked, and
normalized against the top score. A deterministic grid segmenter and an
occlusion attributor make the engine self-contained; production masks and
attribution maps arrive as opaque files from the serving side.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .core import (
    IndexSet,
    InputVector,
    LabelId,
    ModelHandle,
    grid_tile_ids,
    predict,
    redact,
)
from .errors import DimensionMismatchError, GeometryError


@dataclass(frozen=True, eq=False)
class Segmentation:
    """A total partition of {0..n-1} into K nonempty segments."""

    n: int
    segment_of: np.ndarray  # index -> segment id
    k: int
    geometry: Optional[tuple[int, int, int]] = None

    def __post_init__(self):
        seg = np.array(self.segment_of, dtype=np.int64, copy=True).reshape(-1)
        seg.flags.writeable = False
        object.__setattr__(self, "segment_of", seg)
        if seg.shape[0] != self.n:
            raise DimensionMismatchError("segment map must cover every index")
        if self.n == 0 or self.k <= 0:
            raise ValueError("empty segmentation")
        if seg.min() < 0 or seg.max() >= self.k:
            raise ValueError("segment ids must lie in [0, K)")
        present = np.bincount(seg, minlength=self.k)
        if np.any(present == 0):
            empty = int(np.nonzero(present == 0)[0][0])
            raise ValueError(f"segment {empty} is empty")
        if self.geometry is not None:
            h, w, c = self.geometry
            if h * w * c != self.n:
                raise GeometryError("geometry does not cover n")

    def indices_of(self, segment: int) -> IndexSet:
        return IndexSet(tuple(np.nonzero(self.segment_of == segment)[0].tolist()))

    def all_index_sets(self) -> list[IndexSet]:
        order = np.argsort(self.segment_of, kind="stable")
        bounds = np.searchsorted(self.segment_of[order], np.arange(self.k + 1))
        return [
            IndexSet(tuple(sorted(order[bounds[s]:bounds[s + 1]].tolist())))
            for s in range(self.k)
        ]

    def sizes(self) -> np.ndarray:
        return np.bincount(self.segment_of, minlength=self.k)


@dataclass(frozen=True)
class AdjacencyGraph:
    """Symmetric, irreflexive neighbor sets over segment ids."""

    neighbors: tuple[frozenset[int], ...]

    def __post_init__(self):
        for a, ns in enumerate(self.neighbors):
            if a in ns:
                raise ValueError(f"segment {a} adjacent to itself")
            for b in ns:
                if a not in self.neighbors[b]:
                    raise ValueError(f"adjacency not symmetric at ({a}, {b})")

    @property
    def k(self) -> int:
        return len(self.neighbors)

    def of(self, segment: int) -> frozenset[int]:
        return self.neighbors[segment]


@dataclass(frozen=True, eq=False)
class AttributionMap:
    """Per-dimension scores attributing one label's prediction to the input."""

    values: np.ndarray
    label: LabelId
    method_tag: str = "unknown"

    def __post_init__(self):
        arr = np.array(self.values, dtype=np.float64, copy=True).reshape(-1)
        arr.flags.writeable = False
        object.__setattr__(self, "values", arr)
        if not np.all(np.isfinite(arr)):
            raise ValueError("attribution values must be finite")

    @property
    def n(self) -> int:
        return int(self.values.shape[0])


@dataclass(frozen=True, eq=False)
class SegmentAttribution:
    """Per-segment mean scores with a deterministic ranking and normalization.

    ranking sorts scores descending, ties broken by ascending segment id.
    normalized is score divided by the maximum score, clamped into [0, 1];
    when no score is positive everything normalizes to zero.
    """

    scores: np.ndarray
    ranking: tuple[int, ...]
    normalized: np.ndarray

    @classmethod
    def from_scores(cls, scores: Sequence[float] | np.ndarray) -> "SegmentAttribution":
        sc = np.array(scores, dtype=np.float64, copy=True).reshape(-1)
        if sc.size == 0:
            raise ValueError("no segments")
        # argsort on (-score, id) gives descending score with ascending-id ties
        order = np.lexsort((np.arange(sc.size), -sc))
        top = float(sc.max())
        if top > 0:
            norm = np.clip(sc / top, 0.0, 1.0)
        else:
            norm = np.zeros_like(sc)
        sc.flags.writeable = False
        norm.flags.writeable = False
        return cls(sc, tuple(int(i) for i in order), norm)

    @property
    def k(self) -> int:
        return int(self.scores.shape[0])


def accumulate(attr: AttributionMap, seg: Segmentation) -> SegmentAttribution:
    """Mean the per-dimension scores within each segment and rank the results."""
    if attr.n != seg.n:
        raise DimensionMismatchError(
            f"attribution length {attr.n} != segmentation n {seg.n}"
        )
    sums = np.bincount(seg.segment_of, weights=attr.values, minlength=seg.k)
    means = sums / seg.sizes()
    return SegmentAttribution.from_scores(means)


def grid_segmenter(geometry: tuple[int, int, int], rows: int, cols: int) -> Segmentation:
    """Partition the pixel grid into rows x cols rectangular tiles.

    Remainder pixels join the last tile along each axis; all channels of a
    pixel share its tile.
    """
    tile_of = grid_tile_ids(geometry, rows, cols)
    return Segmentation(
        n=tile_of.shape[0], segment_of=tile_of, k=rows * cols, geometry=geometry
    )


def _pixel_segment_grid(seg: Segmentation) -> np.ndarray:
    """Segment id per pixel as an H x W array; requires channel-constant ids."""
    if seg.geometry is None:
        raise GeometryError("adjacency requires grid geometry")
    h, w, c = seg.geometry
    grid = seg.segment_of.reshape(h, w, c)
    if c > 1 and not np.all(grid == grid[:, :, :1]):
        raise ValueError("channels of one pixel must share a segment")
    return grid[:, :, 0]


def adjacency(seg: Segmentation, eight_connected: bool = False) -> AdjacencyGraph:
    """Neighbor segments: some pair of adjacent pixels straddles the two.

    Pixel adjacency is 4-connected by default; set eight_connected to also
    count diagonal contact.
    """
    grid = _pixel_segment_grid(seg)
    pairs = _straddling_pairs(grid, eight_connected)
    neigh: list[set[int]] = [set() for _ in range(seg.k)]
    for a, b in pairs:
        neigh[a].add(b)
        neigh[b].add(a)
    return AdjacencyGraph(tuple(frozenset(s) for s in neigh))


def _straddling_pairs(grid: np.ndarray, eight_connected: bool) -> set[tuple[int, int]]:
    pairs: set[tuple[int, int]] = set()

    def collect(a: np.ndarray, b: np.ndarray):
        mask = a != b
        for x, y in zip(a[mask].ravel(), b[mask].ravel()):
            lo, hi = (int(x), int(y)) if x < y else (int(y), int(x))
            pairs.add((lo, hi))

    collect(grid[:, :-1], grid[:, 1:])
    collect(grid[:-1, :], grid[1:, :])
    if eight_connected:
        collect(grid[:-1, :-1], grid[1:, 1:])
        collect(grid[:-1, 1:], grid[1:, :-1])
    return pairs


def adjacency_of_sets(
    sets: Sequence[IndexSet], geometry: tuple[int, int, int], eight_connected: bool = False
) -> AdjacencyGraph:
    """Adjacency among arbitrary disjoint index sets over a pixel grid.

    Used to verify certificates whose segment lists need not match any stored
    segmentation. Indices not covered by any set are ignored.
    """
    if geometry is None:
        raise GeometryError("adjacency requires grid geometry")
    h, w, c = geometry
    owner = np.full(h * w * c, -1, dtype=np.int64)
    for sid, s in enumerate(sets):
        idx = s.to_numpy()
        if len(idx) and idx[-1] >= owner.shape[0]:
            raise GeometryError("index set exceeds geometry")
        if np.any(owner[idx] != -1):
            raise ValueError("index sets must be disjoint")
        owner[idx] = sid
    pixel_owner = owner.reshape(h, w, c).max(axis=2)
    pairs = _straddling_pairs(pixel_owner, eight_connected)
    neigh: list[set[int]] = [set() for _ in range(len(sets))]
    for a, b in pairs:
        if a < 0:  # uncovered region is not a unit
            continue
        neigh[a].add(b)
        neigh[b].add(a)
    return AdjacencyGraph(tuple(frozenset(s) for s in neigh))


def occlusion_attribution(
    model: ModelHandle,
    input: InputVector,
    seg: Segmentation,
    label: LabelId,
    v: float = 0.0,
) -> AttributionMap:
    """Attribution by segment occlusion: K+1 model evaluations.

    The score of segment k is the label's baseline probability minus its
    probability after redacting segment k alone, broadcast over the
    segment's dimensions.
    """
    base = predict(model, input)[label]
    out = np.zeros(seg.n, dtype=np.float64)
    for k, idx in enumerate(seg.all_index_sets()):
        dropped = predict(model, redact(input, idx, v))[label]
        out[seg.segment_of == k] = base - dropped
    return AttributionMap(out, label, method_tag="occlusion")


# --- binary file formats -----------------------------------------------------
# Segmentation: little-endian uint32 per pixel, H*W entries, row-major.
# AttributionMap: little-endian float32, one entry per input dimension.


def segmentation_to_bytes(seg: Segmentation) -> bytes:
    grid = _pixel_segment_grid(seg)
    return np.ascontiguousarray(grid.reshape(-1), dtype="<u4").tobytes()


def segmentation_from_bytes(raw: bytes, geometry: tuple[int, int, int]) -> Segmentation:
    h, w, c = geometry
    per_pixel = np.frombuffer(raw, dtype="<u4")
    if per_pixel.shape[0] != h * w:
        raise ValueError(f"expected {h * w} per-pixel ids, got {per_pixel.shape[0]}")
    full = np.repeat(per_pixel.astype(np.int64), c)
    k = int(per_pixel.max()) + 1
    return Segmentation(n=h * w * c, segment_of=full, k=k, geometry=geometry)


def attribution_to_bytes(attr: AttributionMap) -> bytes:
    return np.ascontiguousarray(attr.values, dtype="<f4").tobytes()


def attribution_from_bytes(raw: bytes, label: LabelId, method_tag: str = "file") -> AttributionMap:
    return AttributionMap(np.frombuffer(raw, dtype="<f4").astype(np.float64), label, method_tag)
