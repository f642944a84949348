"""Fundamental types, redaction mechanics, and deterministic synthetic classifiers.

An input is a flat vector of float32 values, optionally carrying (H, W, C)
grid geometry. Redaction replaces the values at an index set with a fixed
value (default 0), producing a counterfactual input. Models are opaque
deterministic evaluators from inputs to softmax vectors.
"""

from __future__ import annotations

import hashlib
import threading
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from .errors import (
    DimensionMismatchError,
    EvaluationError,
    GeometryError,
    IndexOutOfRangeError,
)

# Comparisons against certificate bounds lean toward acceptance by this margin,
# so that printed 3-4 digit probabilities survive re-evaluation.
ACCEPT_EPS = 1e-7

# Softmax entries must sum to one within this tolerance.
SOFTMAX_SUM_TOL = 1e-5


def leq(value: float, bound: float) -> bool:
    """value <= bound, biased toward acceptance by ACCEPT_EPS."""
    return value <= bound + ACCEPT_EPS


def geq(value: float, bound: float) -> bool:
    """value >= bound, biased toward acceptance by ACCEPT_EPS."""
    return value >= bound - ACCEPT_EPS


def _as_f32(values: Sequence[float] | np.ndarray) -> np.ndarray:
    arr = np.array(values, dtype="<f4", copy=True).reshape(-1)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class InputVector:
    """An n-dimensional real input, stored as little-endian float32.

    The digest is the SHA-256 of the raw value bytes, so byte-identical
    values always hash identically regardless of how they were produced.
    """

    values: np.ndarray
    geometry: Optional[tuple[int, int, int]] = None

    def __post_init__(self):
        object.__setattr__(self, "values", _as_f32(self.values))
        if not np.all(np.isfinite(self.values)):
            raise ValueError("input values must be finite")
        if self.geometry is not None:
            h, w, c = self.geometry
            if h <= 0 or w <= 0 or c <= 0:
                raise GeometryError(f"degenerate geometry {self.geometry}")
            if h * w * c != self.n:
                raise GeometryError(
                    f"geometry {self.geometry} does not cover n={self.n}"
                )
            object.__setattr__(self, "geometry", (int(h), int(w), int(c)))

    @property
    def n(self) -> int:
        return int(self.values.shape[0])

    @property
    def digest(self) -> str:
        return hashlib.sha256(self.values.tobytes()).hexdigest()

    def tobytes(self) -> bytes:
        return self.values.tobytes()

    @classmethod
    def frombytes(cls, raw: bytes, geometry: Optional[tuple[int, int, int]] = None) -> "InputVector":
        return cls(np.frombuffer(raw, dtype="<f4"), geometry)


@dataclass(frozen=True, eq=False)
class SoftmaxVector:
    """Softmax output over m class labels; entries in [0,1] summing to 1."""

    probs: np.ndarray

    def __post_init__(self):
        arr = np.array(self.probs, dtype=np.float64, copy=True).reshape(-1)
        arr.flags.writeable = False
        object.__setattr__(self, "probs", arr)
        if arr.size == 0:
            raise ValueError("empty softmax vector")
        if np.any(arr < -ACCEPT_EPS) or np.any(arr > 1 + ACCEPT_EPS):
            raise ValueError("softmax entries must lie in [0, 1]")
        if abs(float(arr.sum()) - 1.0) > SOFTMAX_SUM_TOL:
            raise ValueError(f"softmax entries sum to {arr.sum()}, not 1")

    @property
    def m(self) -> int:
        return int(self.probs.shape[0])

    def __getitem__(self, label) -> float:
        idx = label.index if isinstance(label, LabelId) else int(label)
        return float(self.probs[idx])


@dataclass(frozen=True, order=True)
class LabelId:
    """A class label by position in the softmax vector, with optional name."""

    index: int
    name: Optional[str] = field(default=None, compare=False)

    def __post_init__(self):
        if self.index < 0:
            raise ValueError("label index must be nonnegative")


@dataclass(frozen=True)
class IndexSet:
    """A duplicate-free, sorted set of input-dimension indices.

    This is the universal currency of redactions and certificates. The
    canonical wire encoding is run-length pairs [start, length] sorted by
    start; see to_rle/from_rle.
    """

    indices: tuple[int, ...]

    def __post_init__(self):
        idx = tuple(int(i) for i in self.indices)
        if any(i < 0 for i in idx):
            raise IndexOutOfRangeError("negative index")
        if any(b <= a for a, b in zip(idx, idx[1:])):
            raise ValueError("indices must be strictly increasing")
        object.__setattr__(self, "indices", idx)

    @classmethod
    def of(cls, items: Iterable[int]) -> "IndexSet":
        return cls(tuple(sorted({int(i) for i in items})))

    def __len__(self) -> int:
        return len(self.indices)

    def __contains__(self, i: int) -> bool:
        return i in set(self.indices)

    def union(self, other: "IndexSet") -> "IndexSet":
        return IndexSet.of(set(self.indices) | set(other.indices))

    def intersect(self, other: "IndexSet") -> "IndexSet":
        return IndexSet.of(set(self.indices) & set(other.indices))

    def difference(self, other: "IndexSet") -> "IndexSet":
        return IndexSet.of(set(self.indices) - set(other.indices))

    def isdisjoint(self, other: "IndexSet") -> bool:
        return set(self.indices).isdisjoint(other.indices)

    def to_numpy(self) -> np.ndarray:
        return np.asarray(self.indices, dtype=np.int64)

    def to_rle(self) -> list[list[int]]:
        """Run-length pairs [start, length] over consecutive index runs."""
        runs: list[list[int]] = []
        for i in self.indices:
            if runs and runs[-1][0] + runs[-1][1] == i:
                runs[-1][1] += 1
            else:
                runs.append([i, 1])
        return runs

    @classmethod
    def from_rle(cls, runs: Sequence[Sequence[int]], max_total: int = 100_000_000) -> "IndexSet":
        """Decode [start, length] runs. Runs must be sorted, non-overlapping."""
        out: list[int] = []
        prev_end = -1
        total = 0
        for run in runs:
            if len(run) != 2:
                raise ValueError(f"malformed run {run!r}")
            start, length = int(run[0]), int(run[1])
            if start < 0 or length < 1:
                raise ValueError(f"invalid run [{start}, {length}]")
            if start <= prev_end:
                raise ValueError("runs overlap or are unsorted")
            total += length
            if total > max_total:
                raise OverflowError("run-length payload expands beyond limit")
            out.extend(range(start, start + length))
            prev_end = start + length - 1
        return cls(tuple(out))


EMPTY_INDEX_SET = IndexSet(())


def redact(input: InputVector, s: IndexSet, v: float = 0.0) -> InputVector:
    """Replace the values at positions in s with v; the input is not mutated."""
    if len(s) and s.indices[-1] >= input.n:
        raise IndexOutOfRangeError(
            f"index {s.indices[-1]} out of range for n={input.n}"
        )
    out = np.array(input.values, dtype="<f4", copy=True)
    if len(s):
        out[s.to_numpy()] = np.float32(v)
    return InputVector(out, input.geometry)


def expand_pixels_to_indices(
    pixels: Iterable[tuple[int, int]], geometry: tuple[int, int, int]
) -> IndexSet:
    """Map (row, col) pixels to the value indices of all their channels.

    Layout is row-major, channel-last: pixel (r, c) owns indices
    (r*W + c)*C .. (r*W + c)*C + C - 1.
    """
    if geometry is None:
        raise GeometryError("pixel expansion requires grid geometry")
    h, w, c = geometry
    out: list[int] = []
    for r, col in pixels:
        if not (0 <= r < h and 0 <= col < w):
            raise IndexOutOfRangeError(f"pixel ({r}, {col}) outside {h}x{w} grid")
        base = (r * w + col) * c
        out.extend(range(base, base + c))
    return IndexSet.of(out)


@dataclass(frozen=True)
class ModelHandle:
    """An opaque deterministic classifier: same input bytes, same softmax.

    Served (remote) evaluators must pin seeds / disable nondeterministic
    kernels; verification is meaningless otherwise. Evaluators must be safe
    to call concurrently; serial backends should serialize internally.
    """

    model_id: str
    n: int
    m: int
    evaluator: Callable[[InputVector], SoftmaxVector]

    def __repr__(self) -> str:  # avoid dumping the closure
        return f"ModelHandle({self.model_id!r}, n={self.n}, m={self.m})"


def predict(model: ModelHandle, input: InputVector) -> SoftmaxVector:
    """Evaluate the model. Raises typed errors on dimension or evaluator failure."""
    if input.n != model.n:
        raise DimensionMismatchError(
            f"input has n={input.n}, model {model.model_id!r} expects n={model.n}"
        )
    try:
        out = model.evaluator(input)
    except EvaluationError:
        raise
    except Exception as exc:  # noqa: BLE001 - surface with detail attached
        raise EvaluationError(f"evaluator failed: {exc}", detail=exc) from exc
    if out.m != model.m:
        raise EvaluationError(
            f"evaluator returned {out.m} entries, model declares m={model.m}"
        )
    return out


class CallCounter:
    """Wraps a model so tests and benchmarks can count evaluations."""

    def __init__(self, model: ModelHandle):
        self._inner = model
        self._lock = threading.Lock()
        self.calls = 0
        self.model = ModelHandle(model.model_id, model.n, model.m, self._eval)

    def _eval(self, x: InputVector) -> SoftmaxVector:
        with self._lock:
            self.calls += 1
        return self._inner.evaluator(x)


def grid_tile_ids(geometry: tuple[int, int, int], rows: int, cols: int) -> np.ndarray:
    """Per-value tile ids for a rows x cols tiling of the pixel grid.

    Tiles are H//rows by W//cols; remainder pixels join the last tile along
    each axis. All channels of a pixel share its tile. Returns an int array
    of length H*W*C with ids in [0, rows*cols).
    """
    if geometry is None:
        raise GeometryError("tiling requires grid geometry")
    h, w, c = geometry
    if rows < 1 or cols < 1 or rows > h or cols > w:
        raise GeometryError(f"cannot tile {h}x{w} grid into {rows}x{cols}")
    th, tw = h // rows, w // cols
    r_ids = np.minimum(np.arange(h) // th, rows - 1)
    c_ids = np.minimum(np.arange(w) // tw, cols - 1)
    pixel_ids = r_ids[:, None] * cols + c_ids[None, :]
    return np.repeat(pixel_ids.reshape(-1), c).astype(np.int64)


@dataclass(frozen=True, eq=False)
class PlantedModelSpec:
    """A synthetic linear-logit classifier over grid tiles, used as a test subject.

    The logit of label l is sum_k weights[l][k] * mean(values in tile k)
    divided by temperature; the output is the softmax of the logits. Means
    (not sums) keep redaction effects scale-free across tile sizes.
    """

    segment_grid: tuple[int, int]
    geometry: tuple[int, int, int]
    weights: np.ndarray  # m x K
    temperature: float = 1.0

    def __post_init__(self):
        w = np.array(self.weights, dtype=np.float64, copy=True)
        if w.ndim != 2:
            raise ValueError("weights must be an m x K matrix")
        w.flags.writeable = False
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "segment_grid", (int(self.segment_grid[0]), int(self.segment_grid[1])))
        object.__setattr__(
            self, "geometry",
            (int(self.geometry[0]), int(self.geometry[1]), int(self.geometry[2])),
        )
        if not np.all(np.isfinite(w)):
            raise ValueError("weights must be finite")
        if self.temperature <= 0:
            raise ValueError("temperature must be positive")
        rows, cols = self.segment_grid
        if rows * cols != self.k:
            raise ValueError("weight columns must equal rows*cols")

    @property
    def m(self) -> int:
        return int(self.weights.shape[0])

    @property
    def k(self) -> int:
        return int(self.weights.shape[1])

    @property
    def n(self) -> int:
        h, w, c = self.geometry
        return h * w * c

    def label_supports(self) -> list[frozenset[int]]:
        """For each label, the tile ids carrying nonzero weight."""
        return [
            frozenset(int(k) for k in np.nonzero(self.weights[l])[0])
            for l in range(self.m)
        ]

    def to_json(self) -> dict:
        return {
            "kind": "planted",
            "segment_grid": list(self.segment_grid),
            "geometry": list(self.geometry),
            "temperature": self.temperature,
            "weights": [[float(x) for x in row] for row in self.weights],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "PlantedModelSpec":
        return cls(
            segment_grid=tuple(obj["segment_grid"]),
            geometry=tuple(obj["geometry"]),
            weights=np.asarray(obj["weights"], dtype=np.float64),
            temperature=float(obj["temperature"]),
        )


def softmax(logits: np.ndarray) -> np.ndarray:
    """Numerically stable softmax in float64."""
    z = np.asarray(logits, dtype=np.float64)
    z = z - z.max()
    e = np.exp(z)
    return e / e.sum()


def make_planted_model(spec: PlantedModelSpec, model_id: str = "planted") -> ModelHandle:
    """Build the deterministic ModelHandle described by a PlantedModelSpec."""
    rows, cols = spec.segment_grid
    tile_of = grid_tile_ids(spec.geometry, rows, cols)
    if tile_of.shape[0] != spec.n:
        raise GeometryError("tile map does not cover the declared geometry")
    k = spec.k
    counts = np.bincount(tile_of, minlength=k).astype(np.float64)
    weights = spec.weights
    temperature = spec.temperature

    def evaluate(x: InputVector) -> SoftmaxVector:
        if x.n != spec.n:
            raise DimensionMismatchError(f"expected n={spec.n}, got {x.n}")
        sums = np.bincount(tile_of, weights=x.values.astype(np.float64), minlength=k)
        means = sums / counts
        logits = weights @ means / temperature
        return SoftmaxVector(softmax(logits))

    return ModelHandle(model_id, spec.n, spec.m, evaluate)
