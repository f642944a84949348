"""Certificate-producing searches over segment subsets.

Four procedures classify a pair of predicted labels:

* ``alg1``: segregate segments between the labels by normalized attribution,
  then accumulate each side in rank order until one label collapses while
  the other stays afloat (disjoint claim).
* ``alg2``: accumulate each label's own ranking independently, then make the
  two sets disjoint by reassigning shared segments and extending whichever
  side came up short.
* ``alg3``: attribution-free region growth guided by differential percentage
  drops, used both as a search and as the anti-forgery core of the overlap
  verifier.
* ``overlap``: accumulate by absolute rank until both labels collapse
  together, then test the intersection of the two sweeps (overlapping claim).

Failure is a first-class ``undetermined`` outcome, never an error: the
underlying claims are existence statements and these searches are
incomplete heuristics.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Optional, Sequence

import numpy as np

from .certificates import Certificate, DisjointCertificate, OverlapCertificate
from .core import (
    EMPTY_INDEX_SET,
    IndexSet,
    InputVector,
    LabelId,
    ModelHandle,
    geq,
    leq,
    predict,
    redact,
)
from .errors import LowConfidenceError
from .segattr import (
    AdjacencyGraph,
    SegmentAttribution,
    Segmentation,
    adjacency,
    occlusion_attribution,
    accumulate,
)

DISJOINT = "disjoint"
OVERLAPPING = "overlapping"
UNDETERMINED = "undetermined"

DEFAULT_MIN_P = 0.01
DEFAULT_STRATEGY = ("alg1", "alg2", "overlap")


@dataclass(frozen=True, eq=False)
class PairCase:
    """Everything needed to classify one label pair on one input.

    p1 and p2 must be the model's actual predictions for l1 and l2 on the
    unredacted input; build_case computes them and the attributions.
    """

    model: ModelHandle
    input: InputVector
    seg: Segmentation
    l1: LabelId
    l2: LabelId
    p1: float
    p2: float
    delta: float
    attr1: SegmentAttribution
    attr2: SegmentAttribution
    v: float = 0.0
    # cap on how much of the ranking an accumulation sweep may redact,
    # as a fraction of K; 1.0 allows a full sweep, 0.25 reproduces
    # top-quartile-style sweeps
    max_fraction: float = 1.0

    def __post_init__(self):
        if not (0.0 < self.delta <= 0.5):
            raise ValueError(f"delta must lie in (0, 0.5], got {self.delta}")
        if self.p1 <= 0 or self.p2 <= 0:
            raise ValueError("baseline predictions must be positive")
        if self.attr1.k != self.seg.k or self.attr2.k != self.seg.k:
            raise ValueError("attribution segment count must match the segmentation")
        if not (0.0 < self.max_fraction <= 1.0):
            raise ValueError(f"max_fraction must lie in (0, 1], got {self.max_fraction}")

    @property
    def sweep_limit(self) -> int:
        """Most segments one accumulation sweep may redact."""
        return max(1, int(self.max_fraction * self.seg.k))


def build_case(
    model: ModelHandle,
    input: InputVector,
    seg: Segmentation,
    l1: LabelId,
    l2: LabelId,
    delta: float,
    v: float = 0.0,
    min_p: float = DEFAULT_MIN_P,
    attr1: Optional[SegmentAttribution] = None,
    attr2: Optional[SegmentAttribution] = None,
    max_fraction: float = 1.0,
) -> PairCase:
    """Assemble a PairCase, computing baselines and fallback attributions.

    Pairs whose baseline predictions fall below min_p are rejected: tiny
    softmax values are not tangibly tied to coherent segments and the
    searches behave poorly there.
    """
    base = predict(model, input)
    p1, p2 = base[l1], base[l2]
    if p1 < min_p or p2 < min_p:
        raise LowConfidenceError(
            f"baselines p1={p1:.6g}, p2={p2:.6g} below cutoff {min_p}"
        )
    if attr1 is None:
        attr1 = accumulate(occlusion_attribution(model, input, seg, l1, v), seg)
    if attr2 is None:
        attr2 = accumulate(occlusion_attribution(model, input, seg, l2, v), seg)
    return PairCase(
        model, input, seg, l1, l2, p1, p2, delta, attr1, attr2, v, max_fraction
    )


@dataclass(frozen=True)
class TraceStep:
    """One committed redaction step: the segment added and the resulting
    predictions for both case labels."""

    step: int
    segment: int
    p_l1: float
    p_l2: float
    phase: str = ""


@dataclass(frozen=True)
class SearchOutcome:
    kind: str
    certificate: Optional[Certificate] = None
    trace: tuple[TraceStep, ...] = ()
    algorithm: Optional[str] = None


def trace_table(trace: Sequence[TraceStep], p1: float, p2: float) -> str:
    """Tabular text of a redaction trace, one row per step.

    Columns: step index, segment id, p_l1, p_l2, and both predictions as a
    percentage of their baselines (the raw material of sweep plots).
    """
    lines = ["step\tsegment\tp_l1\tp_l2\tpct_l1\tpct_l2"]
    for t in trace:
        lines.append(
            f"{t.step}\t{t.segment}\t{t.p_l1:.12g}\t{t.p_l2:.12g}"
            f"\t{100.0 * t.p_l1 / p1:.6f}\t{100.0 * t.p_l2 / p2:.6f}"
        )
    return "\n".join(lines) + "\n"


class _Tracer:
    """Accumulates trace steps with a global 1-based step counter."""

    def __init__(self):
        self.steps: list[TraceStep] = []

    def add(self, segment: int, p_l1: float, p_l2: float, phase: str):
        self.steps.append(TraceStep(len(self.steps) + 1, segment, p_l1, p_l2, phase))

    def done(self) -> tuple[TraceStep, ...]:
        return tuple(self.steps)


def segregate_segments(case: PairCase) -> tuple[frozenset[int], frozenset[int]]:
    """Assign every segment to exactly one label by normalized attribution.

    Strictly higher normalized attribution wins. Ties fall back to the mean
    normalized-attribution difference over adjacent segments, then to the
    label with the larger baseline prediction, then to l1.
    """
    n1, n2 = case.attr1.normalized, case.attr2.normalized
    adj = adjacency(case.seg) if case.seg.geometry is not None else None
    side1: set[int] = set()
    side2: set[int] = set()
    for k in range(case.seg.k):
        if n1[k] > n2[k]:
            side1.add(k)
            continue
        if n2[k] > n1[k]:
            side2.add(k)
            continue
        diff = 0.0
        if adj is not None and adj.of(k):
            neigh = sorted(adj.of(k))
            diff = float(np.mean([n1[j] - n2[j] for j in neigh]))
        if diff > 0:
            side1.add(k)
        elif diff < 0:
            side2.add(k)
        elif case.p1 > case.p2:
            side1.add(k)
        elif case.p2 > case.p1:
            side2.add(k)
        else:
            side1.add(k)
    return frozenset(side1), frozenset(side2)


def _ranked(pool: frozenset[int] | set[int], ranking: Sequence[int]) -> list[int]:
    return [k for k in ranking if k in pool]


def _eval_union(case: PairCase, acc: IndexSet):
    probs = predict(case.model, redact(case.input, acc, case.v))
    return probs[case.l1], probs[case.l2]


def _sweep_drop_floor(
    case: PairCase,
    order: Sequence[int],
    units: Sequence[IndexSet],
    collapse_l1: bool,
    tracer: _Tracer,
    phase: str,
    start: Optional[list[int]] = None,
    start_set: IndexSet = EMPTY_INDEX_SET,
) -> Optional[list[int]]:
    """Accumulate segments in order until the collapsing label falls to
    delta*p while the companion stays at or above (1-delta)*p.

    Returns the taken segment ids, or None if the pool runs out or the
    companion floor is violated at the point the drop condition first holds.
    """
    drop_bound = case.delta * (case.p1 if collapse_l1 else case.p2)
    floor_bound = (1.0 - case.delta) * (case.p2 if collapse_l1 else case.p1)
    taken = list(start) if start else []
    acc = start_set
    for seg_id in order:
        if len(taken) >= case.sweep_limit:
            return None
        acc = acc.union(units[seg_id])
        taken.append(seg_id)
        p1r, p2r = _eval_union(case, acc)
        tracer.add(seg_id, p1r, p2r, phase)
        p_drop, p_floor = (p1r, p2r) if collapse_l1 else (p2r, p1r)
        if leq(p_drop, drop_bound):
            return taken if geq(p_floor, floor_bound) else None
    return None


def _sweep_both_down(
    case: PairCase,
    order: Sequence[int],
    units: Sequence[IndexSet],
    tracer: _Tracer,
    phase: str,
) -> Optional[list[int]]:
    """Accumulate segments in order until both labels are at or below
    delta times their baselines at the same step."""
    b1, b2 = case.delta * case.p1, case.delta * case.p2
    taken: list[int] = []
    acc = EMPTY_INDEX_SET
    for seg_id in order:
        if len(taken) >= case.sweep_limit:
            return None
        acc = acc.union(units[seg_id])
        taken.append(seg_id)
        p1r, p2r = _eval_union(case, acc)
        tracer.add(seg_id, p1r, p2r, phase)
        if leq(p1r, b1) and leq(p2r, b2):
            return taken
    return None


def _union_of(units: Sequence[IndexSet], ids: Sequence[int]) -> IndexSet:
    out: set[int] = set()
    for k in ids:
        out.update(units[k].indices)
    return IndexSet.of(out)


def _disjoint_certificate(
    case: PairCase, ids1: Sequence[int], ids2: Sequence[int], units: Sequence[IndexSet]
) -> DisjointCertificate:
    return DisjointCertificate(
        model_id=case.model.model_id,
        input_digest=case.input.digest,
        l1=case.l1, l2=case.l2, p1=case.p1, p2=case.p2,
        delta=case.delta, v=case.v,
        s1=_union_of(units, ids1), s2=_union_of(units, ids2),
        segments1=tuple(units[k] for k in sorted(ids1)),
        segments2=tuple(units[k] for k in sorted(ids2)),
    )


def find_disjoint_alg1(case: PairCase) -> SearchOutcome:
    """Segregation-based disjoint search (strategy name "alg1")."""
    units = case.seg.all_index_sets()
    pool1, pool2 = segregate_segments(case)
    tracer = _Tracer()
    ids1 = _sweep_drop_floor(
        case, _ranked(pool1, case.attr1.ranking), units, True, tracer, "s1"
    )
    if ids1 is None:
        return SearchOutcome(UNDETERMINED, trace=tracer.done(), algorithm="alg1")
    ids2 = _sweep_drop_floor(
        case, _ranked(pool2, case.attr2.ranking), units, False, tracer, "s2"
    )
    if ids2 is None:
        return SearchOutcome(UNDETERMINED, trace=tracer.done(), algorithm="alg1")
    cert = _disjoint_certificate(case, ids1, ids2, units)
    return SearchOutcome(DISJOINT, cert, tracer.done(), algorithm="alg1")


def find_overlap(case: PairCase) -> SearchOutcome:
    """Shared-region search (strategy name "overlap").

    Runs after the disjoint searches come up undetermined; the driver
    enforces that ordering. Sweeps each label's absolute ranking until both
    labels collapse, then tests the intersection of the two sweeps.
    """
    units = case.seg.all_index_sets()
    tracer = _Tracer()
    ids1 = _sweep_both_down(case, case.attr1.ranking, units, tracer, "s1")
    if ids1 is None:
        return SearchOutcome(UNDETERMINED, trace=tracer.done(), algorithm="overlap")
    ids2 = _sweep_both_down(case, case.attr2.ranking, units, tracer, "s2")
    if ids2 is None:
        return SearchOutcome(UNDETERMINED, trace=tracer.done(), algorithm="overlap")
    shared = sorted(set(ids1) & set(ids2))
    if not shared:
        return SearchOutcome(UNDETERMINED, trace=tracer.done(), algorithm="overlap")
    s = _union_of(units, shared)
    p1r, p2r = _eval_union(case, s)
    if leq(p1r, case.delta * case.p1) and leq(p2r, case.delta * case.p2):
        cert = OverlapCertificate(
            model_id=case.model.model_id,
            input_digest=case.input.digest,
            l1=case.l1, l2=case.l2, p1=case.p1, p2=case.p2,
            delta=case.delta, v=case.v,
            s=s, segments=tuple(units[k] for k in shared),
        )
        return SearchOutcome(OVERLAPPING, cert, tracer.done(), algorithm="overlap")
    return SearchOutcome(UNDETERMINED, trace=tracer.done(), algorithm="overlap")


def _higher_normalized_side(case: PairCase, k: int) -> int:
    """1 or 2: which label claims segment k during reassignment."""
    a, b = case.attr1.normalized[k], case.attr2.normalized[k]
    if a > b:
        return 1
    if b > a:
        return 2
    if case.p1 > case.p2:
        return 1
    if case.p2 > case.p1:
        return 2
    return 1


def find_disjoint_alg2(case: PairCase) -> SearchOutcome:
    """Overlap-then-repair disjoint search (strategy name "alg2").

    Builds each side by its own absolute ranking, reassigns every shared
    segment to the label with the higher normalized attribution, then
    extends any side whose collapse condition broke with its next-ranked
    unclaimed segments.
    """
    units = case.seg.all_index_sets()
    tracer = _Tracer()
    ids1 = _sweep_drop_floor(case, case.attr1.ranking, units, True, tracer, "s1")
    if ids1 is None:
        return SearchOutcome(UNDETERMINED, trace=tracer.done(), algorithm="alg2")
    ids2 = _sweep_drop_floor(case, case.attr2.ranking, units, False, tracer, "s2")
    if ids2 is None:
        return SearchOutcome(UNDETERMINED, trace=tracer.done(), algorithm="alg2")

    shared = set(ids1) & set(ids2)
    if shared:
        # most important first; importance = best normalized score either way
        order = sorted(
            shared,
            key=lambda k: (-max(case.attr1.normalized[k], case.attr2.normalized[k]), k),
        )
        keep1, keep2 = set(ids1), set(ids2)
        for k in order:
            if _higher_normalized_side(case, k) == 1:
                keep2.discard(k)
            else:
                keep1.discard(k)
        ids1 = [k for k in ids1 if k in keep1]
        ids2 = [k for k in ids2 if k in keep2]

    for collapse_l1 in (True, False):
        own = ids1 if collapse_l1 else ids2
        ranking = case.attr1.ranking if collapse_l1 else case.attr2.ranking
        drop_bound = case.delta * (case.p1 if collapse_l1 else case.p2)
        floor_bound = (1.0 - case.delta) * (case.p2 if collapse_l1 else case.p1)
        acc = _union_of(units, own)
        p1r, p2r = _eval_union(case, acc)
        p_drop, p_floor = (p1r, p2r) if collapse_l1 else (p2r, p1r)
        if leq(p_drop, drop_bound):
            if not geq(p_floor, floor_bound):
                return SearchOutcome(UNDETERMINED, trace=tracer.done(), algorithm="alg2")
            continue
        claimed = set(ids1) | set(ids2)
        extension = _sweep_drop_floor(
            case,
            [k for k in ranking if k not in claimed],
            units,
            collapse_l1,
            tracer,
            "s1-extend" if collapse_l1 else "s2-extend",
            start=own,
            start_set=acc,
        )
        if extension is None:
            return SearchOutcome(UNDETERMINED, trace=tracer.done(), algorithm="alg2")
        if collapse_l1:
            ids1 = extension
        else:
            ids2 = extension

    cert = _disjoint_certificate(case, ids1, ids2, units)
    return SearchOutcome(DISJOINT, cert, tracer.done(), algorithm="alg2")


# --- attribution-free region growth ------------------------------------------


def percentage_drop(p_from: float, p_to: float, p_base: float) -> float:
    """Drop of a label's prediction between two redactions, as a percentage
    of its unredacted baseline. Negative when the prediction rose."""
    return 100.0 * (p_from - p_to) / p_base


def grow_important_regions(
    evaluate: Callable[[IndexSet], tuple[float, float]],
    units: Sequence[IndexSet],
    adj: AdjacencyGraph,
    base_favored: float,
    base_other: float,
    tau: float = 0.0,
    tracer: Optional[_Tracer] = None,
    phase: str = "",
    favored_is_l1: bool = True,
) -> set[int]:
    """Greedy contiguous growth of the units important to the favored label.

    evaluate maps an index set to (p_favored, p_other) under its redaction.
    A unit's importance, given the accumulated redaction R, is the favored
    label's percentage drop minus the other label's percentage drop when the
    unit joins R (percentages relative to the unredacted baselines). Regions
    are seeded at the globally most important unit, grown along adjacency,
    and reseeded until no unit scores above tau.
    """
    remaining = set(range(len(units)))
    grown: set[int] = set()
    acc = EMPTY_INDEX_SET
    p_fav, p_oth = evaluate(acc)  # current probabilities at R

    def importance_of(candidate: int) -> tuple[float, tuple[float, float]]:
        probs = evaluate(acc.union(units[candidate]))
        drop_fav = percentage_drop(p_fav, probs[0], base_favored)
        drop_oth = percentage_drop(p_oth, probs[1], base_other)
        return drop_fav - drop_oth, probs

    def best_of(candidates: set[int]):
        best = None
        for k in sorted(candidates):
            score, probs = importance_of(k)
            if score > tau and (best is None or score > best[0]):
                best = (score, k, probs)
        return best

    while True:
        seed = best_of(remaining)
        if seed is None:
            return grown
        region = {seed[1]}
        while True:
            _, chosen, (p_fav, p_oth) = seed
            region.add(chosen)
            remaining.discard(chosen)
            grown.add(chosen)
            acc = acc.union(units[chosen])
            if tracer is not None:
                pl1, pl2 = (p_fav, p_oth) if favored_is_l1 else (p_oth, p_fav)
                tracer.add(chosen, pl1, pl2, phase)
            frontier = {
                k for k in remaining if any(k in adj.of(r) for r in region)
            }
            seed = best_of(frontier)
            if seed is None:
                break


def _alg3_unit_partition(
    model: ModelHandle,
    input: InputVector,
    units: Sequence[IndexSet],
    adj: AdjacencyGraph,
    l1: LabelId,
    l2: LabelId,
    delta: float,
    v: float,
    tau: float,
    tracer: Optional[_Tracer] = None,
) -> tuple[set[int], set[int], str]:
    """Region growth for both labels over arbitrary units, intersection
    discarded, then the disjoint-claim condition pair checked."""
    base = predict(model, input)
    p1, p2 = base[l1], base[l2]

    def eval_pair(acc: IndexSet, favored: LabelId, other: LabelId):
        probs = predict(model, redact(input, acc, v))
        return probs[favored], probs[other]

    cand1 = grow_important_regions(
        lambda acc: eval_pair(acc, l1, l2), units, adj, p1, p2, tau,
        tracer, "l1-grow", favored_is_l1=True,
    )
    cand2 = grow_important_regions(
        lambda acc: eval_pair(acc, l2, l1), units, adj, p2, p1, tau,
        tracer, "l2-grow", favored_is_l1=False,
    )
    shared = cand1 & cand2
    u1 = cand1 - shared
    u2 = cand2 - shared
    s1 = _union_of(units, sorted(u1))
    s2 = _union_of(units, sorted(u2))
    probs1 = predict(model, redact(input, s1, v))
    probs2 = predict(model, redact(input, s2, v))
    ok = (
        leq(probs1[l1], delta * p1)
        and geq(probs1[l2], (1.0 - delta) * p2)
        and leq(probs2[l2], delta * p2)
        and geq(probs2[l1], (1.0 - delta) * p1)
    )
    return u1, u2, (DISJOINT if ok else UNDETERMINED)


def alg3_partition(
    model: ModelHandle,
    input: InputVector,
    seg: Segmentation,
    adj: AdjacencyGraph,
    l1: LabelId,
    l2: LabelId,
    delta: float,
    v: float = 0.0,
    tau: float = 0.0,
) -> tuple[IndexSet, IndexSet, str]:
    """Attribution-free disjoint partition over a segmentation.

    Returns the two candidate index sets (intersection already discarded)
    and "disjoint" or "undetermined" depending on whether they satisfy the
    disjoint-claim condition pair. Needs no attribution maps.
    """
    units = seg.all_index_sets()
    u1, u2, outcome = _alg3_unit_partition(
        model, input, units, adj, l1, l2, delta, v, tau
    )
    return (
        _union_of(units, sorted(u1)),
        _union_of(units, sorted(u2)),
        outcome,
    )


def find_disjoint_alg3(case: PairCase, tau: float = 0.0) -> SearchOutcome:
    """Region-growth disjoint search (strategy name "alg3")."""
    units = case.seg.all_index_sets()
    adj = adjacency(case.seg)
    tracer = _Tracer()
    u1, u2, outcome = _alg3_unit_partition(
        case.model, case.input, units, adj, case.l1, case.l2,
        case.delta, case.v, tau, tracer,
    )
    if outcome != DISJOINT:
        return SearchOutcome(UNDETERMINED, trace=tracer.done(), algorithm="alg3")
    cert = _disjoint_certificate(case, sorted(u1), sorted(u2), units)
    return SearchOutcome(DISJOINT, cert, tracer.done(), algorithm="alg3")


STRATEGIES: dict[str, Callable[..., SearchOutcome]] = {
    "alg1": lambda case, tau: find_disjoint_alg1(case),
    "alg2": lambda case, tau: find_disjoint_alg2(case),
    "alg3": find_disjoint_alg3,
    "overlap": lambda case, tau: find_overlap(case),
}


def classify_pair(
    case: PairCase,
    strategy: Sequence[str] = DEFAULT_STRATEGY,
    tau: float = 0.0,
    min_p: float = DEFAULT_MIN_P,
) -> SearchOutcome:
    """Run the strategies in order and return the first decisive outcome.

    The default order tries the disjoint searches before the overlap search,
    so a genuinely disjoint pair is never reported as overlapping merely
    because a union redaction happens to collapse both labels.
    """
    if not strategy:
        raise ValueError("strategy list must be nonempty")
    unknown = [s for s in strategy if s not in STRATEGIES]
    if unknown:
        raise ValueError(f"unknown strategies: {unknown}")
    if case.p1 < min_p or case.p2 < min_p:
        raise LowConfidenceError(
            f"baselines p1={case.p1:.6g}, p2={case.p2:.6g} below cutoff {min_p}"
        )
    combined: list[TraceStep] = []
    for name in strategy:
        outcome = STRATEGIES[name](case, tau)
        if outcome.kind != UNDETERMINED:
            return outcome
        offset = len(combined)
        combined.extend(
            replace(t, step=offset + i + 1) for i, t in enumerate(outcome.trace)
        )
    return SearchOutcome(UNDETERMINED, trace=tuple(combined), algorithm=None)
