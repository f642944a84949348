"""Certificate verification against a (model, input) pair.

The attribution and disjoint verifiers are exact: they evaluate the claimed
redactions and check the defining inequalities, nothing else. The overlap
verifier's redaction condition is exact too; its "no disjoint split" clause
is checked heuristically by running attribution-free region growth over the
certificate's own segments, because the exact check would have to enumerate
exponentially many partitions.

Verification never consults attribution maps, search traces, or the
identity of the producing algorithm. Mismatched addressing (digest, model
id, stale baselines) raises; rejection is reserved for well-addressed
claims that fail their conditions.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .certificates import (
    AttributionCertificate,
    Certificate,
    DisjointCertificate,
    OverlapCertificate,
)
from .core import InputVector, ModelHandle, geq, leq, predict, redact
from .errors import CertificateMismatchError
from .search import DISJOINT, _alg3_unit_partition, _union_of
from .segattr import AdjacencyGraph

ACCEPTED = "accepted"
REJECTED = "rejected"
REJECTED_AS_DISJOINT = "rejected-as-disjoint"

# A pinned baseline must match a fresh evaluation this closely, so a
# certificate cannot silently be replayed against a different checkpoint.
BASELINE_TOL = 1e-4


@dataclass(frozen=True)
class ConditionCheck:
    condition: str
    measured: float
    bound: float
    passed: bool


@dataclass(frozen=True)
class VerificationReport:
    verdict: str
    checked_conditions: tuple[ConditionCheck, ...]
    counter_certificate: Optional[DisjointCertificate] = None

    @property
    def accepted(self) -> bool:
        return self.verdict == ACCEPTED


def format_report(report: VerificationReport) -> str:
    lines = []
    for c in report.checked_conditions:
        status = "pass" if c.passed else "FAIL"
        lines.append(f"[{status}] {c.condition}: measured {c.measured:.6g} vs bound {c.bound:.6g}")
    lines.append(f"verdict: {report.verdict}")
    return "\n".join(lines) + "\n"


def _check_addressing(cert: Certificate, model: ModelHandle, input: InputVector) -> None:
    if input.digest != cert.input_digest:
        raise CertificateMismatchError(
            f"certificate addresses input {cert.input_digest[:12]}..., "
            f"got {input.digest[:12]}..."
        )
    if model.model_id != cert.model_id:
        raise CertificateMismatchError(
            f"certificate addresses model {cert.model_id!r}, got {model.model_id!r}"
        )


def _check_baseline(name: str, pinned: float, fresh: float) -> None:
    if abs(pinned - fresh) > BASELINE_TOL:
        raise CertificateMismatchError(
            f"stale certificate: pinned {name}={pinned:.6g} but the model now "
            f"predicts {fresh:.6g}"
        )


def verify_attribution(
    cert: AttributionCertificate, model: ModelHandle, input: InputVector
) -> VerificationReport:
    """Accept iff redacting cert.s to cert.v drives the label to <= delta*p."""
    _check_addressing(cert, model, input)
    _check_baseline("p", cert.p, predict(model, input)[cert.label])
    measured = predict(model, redact(input, cert.s, cert.v))[cert.label]
    bound = cert.delta * cert.p
    ok = leq(measured, bound)
    row = ConditionCheck("p[label](S-redaction) <= delta*p", measured, bound, ok)
    return VerificationReport(ACCEPTED if ok else REJECTED, (row,))


def verify_disjoint(
    cert: DisjointCertificate, model: ModelHandle, input: InputVector
) -> VerificationReport:
    """Check set disjointness structurally, then the four bounds with
    exactly two redaction evaluations."""
    _check_addressing(cert, model, input)
    overlap = cert.s1.intersect(cert.s2)
    if len(overlap):
        row = ConditionCheck("s1 and s2 disjoint", float(len(overlap)), 0.0, False)
        return VerificationReport(REJECTED, (row,))
    base = predict(model, input)
    _check_baseline("p1", cert.p1, base[cert.l1])
    _check_baseline("p2", cert.p2, base[cert.l2])

    under1 = predict(model, redact(input, cert.s1, cert.v))
    under2 = predict(model, redact(input, cert.s2, cert.v))
    rows = (
        ConditionCheck("s1 and s2 disjoint", 0.0, 0.0, True),
        ConditionCheck(
            "p[l1](S1-redaction) <= delta*p1",
            under1[cert.l1], cert.delta * cert.p1,
            leq(under1[cert.l1], cert.delta * cert.p1),
        ),
        ConditionCheck(
            "p[l2](S1-redaction) >= (1-delta)*p2",
            under1[cert.l2], (1.0 - cert.delta) * cert.p2,
            geq(under1[cert.l2], (1.0 - cert.delta) * cert.p2),
        ),
        ConditionCheck(
            "p[l2](S2-redaction) <= delta*p2",
            under2[cert.l2], cert.delta * cert.p2,
            leq(under2[cert.l2], cert.delta * cert.p2),
        ),
        ConditionCheck(
            "p[l1](S2-redaction) >= (1-delta)*p1",
            under2[cert.l1], (1.0 - cert.delta) * cert.p1,
            geq(under2[cert.l1], (1.0 - cert.delta) * cert.p1),
        ),
    )
    ok = all(r.passed for r in rows)
    return VerificationReport(ACCEPTED if ok else REJECTED, rows)


def verify_overlap(
    cert: OverlapCertificate,
    model: ModelHandle,
    input: InputVector,
    adj: AdjacencyGraph,
    tau: float = 0.0,
) -> VerificationReport:
    """Two-step overlap verification.

    Step 1 (exact): the S-redaction must drive both labels to <= delta*p.
    Step 2 (heuristic): grow regions over the certificate's own segments;
    if a disjoint split satisfying the disjoint-claim conditions emerges,
    the certificate is rejected as disjoint and the split is attached as a
    counter-certificate. adj must describe adjacency among cert.segments.
    """
    _check_addressing(cert, model, input)
    if adj.k != len(cert.segments):
        raise ValueError(
            f"adjacency covers {adj.k} units but the certificate lists "
            f"{len(cert.segments)} segments"
        )
    base = predict(model, input)
    _check_baseline("p1", cert.p1, base[cert.l1])
    _check_baseline("p2", cert.p2, base[cert.l2])

    under = predict(model, redact(input, cert.s, cert.v))
    rows = [
        ConditionCheck(
            "p[l1](S-redaction) <= delta*p1",
            under[cert.l1], cert.delta * cert.p1,
            leq(under[cert.l1], cert.delta * cert.p1),
        ),
        ConditionCheck(
            "p[l2](S-redaction) <= delta*p2",
            under[cert.l2], cert.delta * cert.p2,
            leq(under[cert.l2], cert.delta * cert.p2),
        ),
    ]
    if not all(r.passed for r in rows):
        return VerificationReport(REJECTED, tuple(rows))

    units = list(cert.segments)
    u1, u2, outcome = _alg3_unit_partition(
        model, input, units, adj, cert.l1, cert.l2, cert.delta, cert.v, tau
    )
    split_found = outcome == DISJOINT
    rows.append(
        ConditionCheck(
            "no disjoint split among the claimed segments",
            1.0 if split_found else 0.0, 0.0, not split_found,
        )
    )
    if split_found:
        counter = DisjointCertificate(
            model_id=cert.model_id,
            input_digest=cert.input_digest,
            l1=cert.l1, l2=cert.l2, p1=cert.p1, p2=cert.p2,
            delta=cert.delta, v=cert.v,
            s1=_union_of(units, sorted(u1)),
            s2=_union_of(units, sorted(u2)),
            segments1=tuple(units[k] for k in sorted(u1)),
            segments2=tuple(units[k] for k in sorted(u2)),
        )
        return VerificationReport(REJECTED_AS_DISJOINT, tuple(rows), counter)
    return VerificationReport(ACCEPTED, tuple(rows))
