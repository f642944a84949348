"""Independent reference implementations used as test oracles.

Everything here is deliberately written as plain loops over plain floats,
separate from the package's vectorized paths, so tests compare two
independently derived answers.
"""

from __future__ import annotations

import math
from typing import Iterable, Sequence

from redactcert.core import InputVector, ModelHandle, geq, leq, predict, redact
from redactcert.core import IndexSet, PlantedModelSpec


def naive_tile_of(spec: PlantedModelSpec) -> list[int]:
    """Tile id per flat value index, re-derived with scalar arithmetic."""
    h, w, c = spec.geometry
    rows, cols = spec.segment_grid
    th, tw = h // rows, w // cols
    out = []
    for r in range(h):
        for col in range(w):
            tr = min(r // th, rows - 1)
            tc = min(col // tw, cols - 1)
            for _ in range(c):
                out.append(tr * cols + tc)
    return out


def naive_planted_probs(
    spec: PlantedModelSpec,
    values: Sequence[float],
    redacted: Iterable[int] = (),
    v: float = 0.0,
) -> list[float]:
    """Softmax of the planted model via straight-line recomputation."""
    redacted = set(redacted)
    vals = [v if i in redacted else float(values[i]) for i in range(len(values))]
    tile_of = naive_tile_of(spec)
    k = spec.k
    sums = [0.0] * k
    counts = [0] * k
    for i, t in enumerate(tile_of):
        sums[t] += vals[i]
        counts[t] += 1
    means = [sums[t] / counts[t] for t in range(k)]
    logits = []
    for label in range(spec.m):
        z = 0.0
        for t in range(k):
            z += float(spec.weights[label][t]) * means[t]
        logits.append(z / spec.temperature)
    top = max(logits)
    exps = [math.exp(z - top) for z in logits]
    total = sum(exps)
    return [e / total for e in exps]


def naive_planted_logits(
    spec: PlantedModelSpec, values: Sequence[float], redacted: Iterable[int] = (), v: float = 0.0
) -> list[float]:
    redacted = set(redacted)
    vals = [v if i in redacted else float(values[i]) for i in range(len(values))]
    tile_of = naive_tile_of(spec)
    sums = [0.0] * spec.k
    counts = [0] * spec.k
    for i, t in enumerate(tile_of):
        sums[t] += vals[i]
        counts[t] += 1
    return [
        sum(float(spec.weights[label][t]) * sums[t] / counts[t] for t in range(spec.k))
        / spec.temperature
        for label in range(spec.m)
    ]


def inline_attribution_holds(
    model: ModelHandle, input: InputVector, s: IndexSet, v: float,
    label, p: float, delta: float,
) -> bool:
    """Literal check of the attribution claim's inequality."""
    return leq(predict(model, redact(input, s, v))[label], delta * p)


def inline_disjoint_holds(
    model: ModelHandle, input: InputVector, s1: IndexSet, s2: IndexSet, v: float,
    l1, l2, p1: float, p2: float, delta: float,
) -> bool:
    """Literal check of the disjoint claim: structural disjointness plus the
    four inequalities, evaluated directly."""
    if not s1.isdisjoint(s2):
        return False
    under1 = predict(model, redact(input, s1, v))
    under2 = predict(model, redact(input, s2, v))
    return (
        leq(under1[l1], delta * p1)
        and geq(under1[l2], (1.0 - delta) * p2)
        and leq(under2[l2], delta * p2)
        and geq(under2[l1], (1.0 - delta) * p1)
    )


def segment_ids_of(cert_sets, units) -> set[int]:
    """Map certificate index sets back to segmentation unit ids."""
    table = {tuple(u.indices): i for i, u in enumerate(units)}
    out = set()
    for s in cert_sets:
        key = tuple(s.indices)
        if key not in table:
            raise AssertionError(f"certificate segment {key[:4]}... is not a unit")
        out.add(table[key])
    return out
