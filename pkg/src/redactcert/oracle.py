"""Exhaustive ground truth on small instances, plus the planted-fixture generator.

The brute-force checks enumerate segment subsets, so they decide existence of
attribution, disjoint, and overlap witnesses exactly at segment granularity.
Sub-segment index subsets are deliberately out of scope: the searches operate
on segments, and every verdict records that granularity.

Planted fixtures are synthetic linear-logit classifiers whose label supports
are constructed so the ground truth is known; the generator proves its own
guarantee by running the oracle and resamples on failure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from .core import (
    IndexSet,
    InputVector,
    LabelId,
    ModelHandle,
    PlantedModelSpec,
    geq,
    leq,
    make_planted_model,
    predict,
    redact,
)
from .errors import FixtureError, OracleSizeError
from .segattr import Segmentation, adjacency, grid_segmenter

MAX_K_ATTRIBUTION = 16
MAX_K_PAIR = 12

Witness = Union[frozenset, tuple]


@dataclass(frozen=True)
class OracleVerdict:
    """Result of an exhaustive existence check.

    witnesses are the inclusion-minimal qualifying segment subsets (pairs of
    subsets for the disjoint predicate); evaluations counts model calls.
    """

    exists: bool
    witnesses: tuple[Witness, ...]
    evaluations: int
    granularity: str = "segments"

    def __post_init__(self):
        if self.exists != bool(self.witnesses):
            raise ValueError("witnesses must be nonempty exactly when exists")


def _mask_indices(mask: int, units: Sequence[IndexSet]) -> IndexSet:
    out: list[int] = []
    for k in range(len(units)):
        if mask >> k & 1:
            out.extend(units[k].indices)
    return IndexSet.of(out)


def _mask_set(mask: int, k: int) -> frozenset[int]:
    return frozenset(i for i in range(k) if mask >> i & 1)


def _minimal_masks(masks: Sequence[int]) -> list[int]:
    """Inclusion-minimal bitmasks, ascending popcount then value."""
    kept: list[int] = []
    for m in sorted(masks, key=lambda x: (bin(x).count("1"), x)):
        if not any(km & m == km for km in kept):
            kept.append(m)
    return kept


def _subset_probs(
    model: ModelHandle,
    input: InputVector,
    seg: Segmentation,
    labels: Sequence[LabelId],
    v: float,
) -> tuple[np.ndarray, int]:
    """Probabilities of the given labels under every segment-subset redaction.

    Returns an array of shape (2^K, len(labels)); row index is the subset
    bitmask. Row 0 is the unredacted baseline.
    """
    k = seg.k
    if k > MAX_K_PAIR and len(labels) > 1:
        raise OracleSizeError(f"K={k} exceeds exhaustive pair limit {MAX_K_PAIR}")
    if k > MAX_K_ATTRIBUTION:
        raise OracleSizeError(f"K={k} exceeds exhaustive limit {MAX_K_ATTRIBUTION}")
    units = seg.all_index_sets()
    out = np.empty((1 << k, len(labels)), dtype=np.float64)
    for mask in range(1 << k):
        probs = predict(model, redact(input, _mask_indices(mask, units), v))
        for j, label in enumerate(labels):
            out[mask, j] = probs[label]
    return out, 1 << k


def brute_attribution(
    model: ModelHandle,
    input: InputVector,
    seg: Segmentation,
    label: LabelId,
    delta: float,
    v: float = 0.0,
) -> OracleVerdict:
    """Does any segment subset's redaction drive the label to <= delta*p?"""
    if seg.k > MAX_K_ATTRIBUTION:
        raise OracleSizeError(f"K={seg.k} exceeds exhaustive limit {MAX_K_ATTRIBUTION}")
    table, evals = _subset_probs(model, input, seg, [label], v)
    p_base = float(table[0, 0])
    bound = delta * p_base
    qualifying = [m for m in range(1 << seg.k) if leq(float(table[m, 0]), bound)]
    minimal = _minimal_masks(qualifying)
    return OracleVerdict(
        exists=bool(minimal),
        witnesses=tuple(_mask_set(m, seg.k) for m in minimal),
        evaluations=evals,
    )


def _pair_tables(model, input, seg, l1, l2, delta, v):
    table, evals = _subset_probs(model, input, seg, [l1, l2], v)
    p1, p2 = float(table[0, 0]), float(table[0, 1])
    cond1 = [
        m for m in range(1 << seg.k)
        if leq(float(table[m, 0]), delta * p1) and geq(float(table[m, 1]), (1 - delta) * p2)
    ]
    cond2 = [
        m for m in range(1 << seg.k)
        if leq(float(table[m, 1]), delta * p2) and geq(float(table[m, 0]), (1 - delta) * p1)
    ]
    both_down = [
        m for m in range(1 << seg.k)
        if leq(float(table[m, 0]), delta * p1) and leq(float(table[m, 1]), delta * p2)
    ]
    return cond1, cond2, both_down, evals


def brute_disjoint(
    model: ModelHandle,
    input: InputVector,
    seg: Segmentation,
    l1: LabelId,
    l2: LabelId,
    delta: float,
    v: float = 0.0,
) -> OracleVerdict:
    """Does any disjoint subset pair satisfy the disjoint-claim conditions?

    Equivalent to scanning all 3^K (S1, S2, neither) assignments: the two
    conditions factor per side, so it suffices to cross the inclusion-minimal
    families and test disjointness.
    """
    cond1, cond2, _, evals = _pair_tables(model, input, seg, l1, l2, delta, v)
    min1, min2 = _minimal_masks(cond1), _minimal_masks(cond2)
    witnesses = [
        (_mask_set(a, seg.k), _mask_set(b, seg.k))
        for a in min1 for b in min2 if a & b == 0
    ]
    witnesses.sort(key=lambda pair: (sorted(pair[0]), sorted(pair[1])))
    return OracleVerdict(bool(witnesses), tuple(witnesses), evals)


def brute_overlap(
    model: ModelHandle,
    input: InputVector,
    seg: Segmentation,
    l1: LabelId,
    l2: LabelId,
    delta: float,
    v: float = 0.0,
) -> OracleVerdict:
    """Does a shared collapsing subset exist while no disjoint pair does?

    A disjoint witness preempts: the overlap predicate requires the pair not
    to be splittable.
    """
    cond1, cond2, both_down, evals = _pair_tables(model, input, seg, l1, l2, delta, v)
    min1, min2 = _minimal_masks(cond1), _minimal_masks(cond2)
    if any(a & b == 0 for a in min1 for b in min2):
        return OracleVerdict(False, (), evals)
    minimal = _minimal_masks(both_down)
    return OracleVerdict(
        bool(minimal), tuple(_mask_set(m, seg.k) for m in minimal), evals
    )


# --- planted fixtures ---------------------------------------------------------

PLANTED_DISJOINT = "planted-disjoint"
PLANTED_OVERLAP = "planted-overlap"
NOISE = "noise"

FIXTURE_LABELS = 16  # total classes; the two of interest sit at 0 and 1
SUPPORT_SIZE = 2
GUARANTEE_DELTA = 0.2
MAX_ATTEMPTS = 32


@dataclass(frozen=True)
class FixtureSpec:
    """Recipe for a synthetic test subject.

    margin scales the planted logit mass; at margin >= 1.0 the planted
    families carry their ground-truth guarantee at delta = 0.2.
    """

    kind: str
    k: int = 9
    geometry: Optional[tuple[int, int, int]] = None
    margin: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.kind not in (PLANTED_DISJOINT, PLANTED_OVERLAP, NOISE):
            raise ValueError(f"unknown fixture kind {self.kind!r}")
        if not (2 <= self.k <= MAX_K_ATTRIBUTION):
            raise ValueError(f"K must lie in [2, {MAX_K_ATTRIBUTION}]")


@dataclass(frozen=True)
class Fixture:
    model: ModelHandle
    input: InputVector
    seg: Segmentation
    l1: LabelId
    l2: LabelId
    model_spec: PlantedModelSpec
    spec: FixtureSpec


def _fixture_grid(spec: FixtureSpec) -> tuple[int, int, tuple[int, int, int]]:
    rows = int(math.isqrt(spec.k))
    while spec.k % rows:
        rows -= 1
    cols = spec.k // rows
    geometry = spec.geometry or (rows * 2, cols * 2, 1)
    return rows, cols, geometry


def _adjacent_pairs(seg: Segmentation) -> list[tuple[int, int]]:
    adj = adjacency(seg)
    return [(a, b) for a in range(seg.k) for b in sorted(adj.of(a)) if a < b]


def _pick_supports(rng: np.random.Generator, seg: Segmentation, kind: str):
    """Contiguous 2-segment supports; for the disjoint kind the second
    support avoids the first and its whole neighborhood (separated)."""
    pairs = _adjacent_pairs(seg)
    if not pairs:
        raise FixtureError("grid has no adjacent segment pairs")
    first = pairs[rng.integers(len(pairs))]
    if kind != PLANTED_DISJOINT:
        return set(first), set(first)
    adj = adjacency(seg)
    blocked = set(first) | {j for i in first for j in adj.of(i)}
    far_pairs = [p for p in pairs if not (set(p) & blocked)]
    if not far_pairs:
        raise FixtureError("no separated support available on this grid")
    second = far_pairs[rng.integers(len(far_pairs))]
    return set(first), set(second)


def _build_fixture(spec: FixtureSpec, rng: np.random.Generator) -> Fixture:
    rows, cols, geometry = _fixture_grid(spec)
    seg = grid_segmenter(geometry, rows, cols)
    n = geometry[0] * geometry[1] * geometry[2]
    values = rng.uniform(0.5, 1.5, n).astype("<f4")
    input = InputVector(values, geometry)

    weights = np.zeros((FIXTURE_LABELS, spec.k), dtype=np.float64)
    if spec.kind != NOISE:
        target = 2.0 + 1.5 * spec.margin
        seg_means = np.bincount(
            seg.segment_of, weights=input.values.astype(np.float64), minlength=seg.k
        ) / seg.sizes()
        support1, support2 = _pick_supports(rng, seg, spec.kind)
        shares = rng.uniform(0.8, 1.2, SUPPORT_SIZE)
        shares = shares / shares.sum()
        for i, k in enumerate(sorted(support1)):
            weights[0, k] = target * shares[i] / seg_means[k]
        if spec.kind == PLANTED_DISJOINT:
            shares2 = rng.uniform(0.8, 1.2, SUPPORT_SIZE)
            shares2 = shares2 / shares2.sum()
            for i, k in enumerate(sorted(support2)):
                weights[1, k] = target * shares2[i] / seg_means[k]
        else:
            # both labels lean on the identical support with identical weights
            weights[1] = weights[0]

    model_id = f"{spec.kind}-k{spec.k}-margin{spec.margin:g}-seed{spec.seed}"
    model_spec = PlantedModelSpec((rows, cols), geometry, weights, temperature=1.0)
    model = make_planted_model(model_spec, model_id)
    return Fixture(
        model, input, seg, LabelId(0, "alpha"), LabelId(1, "beta"), model_spec, spec
    )


def generate_fixture(spec: FixtureSpec) -> Fixture:
    """Deterministically generate a fixture, proving its guarantee by oracle.

    Resamples with a derived seed up to MAX_ATTEMPTS times, then errors.
    """
    salts = {PLANTED_DISJOINT: 1, PLANTED_OVERLAP: 2, NOISE: 3}
    last_reason = "unsatisfied guarantee"
    for attempt in range(MAX_ATTEMPTS):
        rng = np.random.default_rng([spec.seed, attempt, salts[spec.kind]])
        try:
            fixture = _build_fixture(spec, rng)
        except FixtureError as exc:
            last_reason = str(exc)
            continue
        if spec.kind == NOISE:
            return fixture
        if spec.kind == PLANTED_DISJOINT:
            verdict = brute_disjoint(
                fixture.model, fixture.input, fixture.seg,
                fixture.l1, fixture.l2, GUARANTEE_DELTA,
            )
        else:
            verdict = brute_overlap(
                fixture.model, fixture.input, fixture.seg,
                fixture.l1, fixture.l2, GUARANTEE_DELTA,
            )
        if verdict.exists:
            return fixture
        last_reason = f"oracle found no {spec.kind} witness"
    raise FixtureError(
        f"could not realize {spec.kind} (k={spec.k}, margin={spec.margin}, "
        f"seed={spec.seed}) in {MAX_ATTEMPTS} attempts: {last_reason}"
    )
