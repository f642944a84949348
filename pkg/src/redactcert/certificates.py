"""Certificate data model and canonical JSON serialization.

A certificate is a self-contained, machine-verifiable claim about one
(model, input) pair: it pins the model id, the input digest, the baseline
predictions, the redaction value, and the index sets. Anyone holding the
model and the input can check the claim by evaluating redactions only,
with no knowledge of the method that produced it.

Wire format: UTF-8 JSON, schema_version "1", index sets encoded as
run-length pairs [start, length] sorted by start, reals at full round-trip
precision, top-level "kind" in {"attribution", "disjoint", "overlap"}.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional, Sequence, Union

from .core import IndexSet, LabelId
from .errors import CertificateFormatError

SCHEMA_VERSION = "1"


def _check_scalar(name: str, value: float, lo: float, hi: float) -> float:
    value = float(value)
    if not (lo < value <= hi):
        raise ValueError(f"{name} must lie in ({lo}, {hi}], got {value}")
    return value


@dataclass(frozen=True)
class AttributionCertificate:
    """Claim: redacting s to v drives label's prediction to at most delta*p."""

    model_id: str
    input_digest: str
    label: LabelId
    p: float
    delta: float
    v: float
    s: IndexSet

    def __post_init__(self):
        object.__setattr__(self, "p", _check_scalar("p", self.p, 0.0, 1.0))
        object.__setattr__(self, "delta", _check_scalar("delta", self.delta, 0.0, 1.0))
        object.__setattr__(self, "v", float(self.v))


@dataclass(frozen=True)
class DisjointCertificate:
    """Claim: disjoint redactions s1, s2 each collapse their own label
    (<= delta*p) while preserving the other (>= (1-delta)*p).

    Set disjointness is part of the claim; the verifier checks it
    structurally, so a corrupted certificate is representable and gets
    rejected rather than erroring. segments1/segments2, when present,
    decompose s1/s2 into the searched units.
    """

    model_id: str
    input_digest: str
    l1: LabelId
    l2: LabelId
    p1: float
    p2: float
    delta: float
    v: float
    s1: IndexSet
    s2: IndexSet
    segments1: Optional[tuple[IndexSet, ...]] = None
    segments2: Optional[tuple[IndexSet, ...]] = None

    def __post_init__(self):
        object.__setattr__(self, "p1", _check_scalar("p1", self.p1, 0.0, 1.0))
        object.__setattr__(self, "p2", _check_scalar("p2", self.p2, 0.0, 1.0))
        object.__setattr__(self, "delta", _check_scalar("delta", self.delta, 0.0, 0.5))
        object.__setattr__(self, "v", float(self.v))
        for name, whole, parts in (("segments1", self.s1, self.segments1),
                                   ("segments2", self.s2, self.segments2)):
            if parts is None:
                continue
            parts = tuple(parts)
            object.__setattr__(self, name, parts)
            _check_partition(name, whole, parts)


@dataclass(frozen=True)
class OverlapCertificate:
    """Claim: one redaction s collapses both labels to <= delta*p each,
    and the pair does not admit a disjoint split.

    The segment decomposition of s is a required part of the claim format;
    the tractable verifier operates on those units.
    """

    model_id: str
    input_digest: str
    l1: LabelId
    l2: LabelId
    p1: float
    p2: float
    delta: float
    v: float
    s: IndexSet
    segments: tuple[IndexSet, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "p1", _check_scalar("p1", self.p1, 0.0, 1.0))
        object.__setattr__(self, "p2", _check_scalar("p2", self.p2, 0.0, 1.0))
        object.__setattr__(self, "delta", _check_scalar("delta", self.delta, 0.0, 0.5))
        object.__setattr__(self, "v", float(self.v))
        object.__setattr__(self, "segments", tuple(self.segments))
        _check_partition("segments", self.s, self.segments)


Certificate = Union[AttributionCertificate, DisjointCertificate, OverlapCertificate]


def _check_partition(name: str, whole: IndexSet, parts: Sequence[IndexSet]) -> None:
    seen: set[int] = set()
    for part in parts:
        if not seen.isdisjoint(part.indices):
            raise ValueError(f"{name} are not pairwise disjoint")
        seen.update(part.indices)
    if seen != set(whole.indices):
        raise ValueError(f"{name} do not union to the claimed set")


# --- JSON encoding ------------------------------------------------------------


def _label_json(label: LabelId) -> dict:
    return {"index": label.index, "name": label.name}


def _label_from(obj: dict) -> LabelId:
    return LabelId(int(obj["index"]), obj.get("name"))


def _set_json(s: IndexSet) -> dict:
    return {"rle": s.to_rle()}


def _set_from(obj: dict) -> IndexSet:
    try:
        return IndexSet.from_rle(obj["rle"])
    except OverflowError as exc:
        raise CertificateFormatError(str(exc)) from exc
    except (ValueError, TypeError, KeyError) as exc:
        raise CertificateFormatError(f"bad index set: {exc}") from exc


def certificate_kind(cert: Certificate) -> str:
    if isinstance(cert, AttributionCertificate):
        return "attribution"
    if isinstance(cert, DisjointCertificate):
        return "disjoint"
    if isinstance(cert, OverlapCertificate):
        return "overlap"
    raise TypeError(f"not a certificate: {type(cert).__name__}")


def certificate_to_json(cert: Certificate) -> dict:
    """Stable-field-order JSON object for a certificate."""
    out: dict = {
        "schema_version": SCHEMA_VERSION,
        "kind": certificate_kind(cert),
        "model_id": cert.model_id,
        "input_digest": cert.input_digest,
    }
    if isinstance(cert, AttributionCertificate):
        out.update(
            label=_label_json(cert.label), p=cert.p, delta=cert.delta, v=cert.v,
            s=_set_json(cert.s),
        )
    elif isinstance(cert, DisjointCertificate):
        out.update(
            l1=_label_json(cert.l1), l2=_label_json(cert.l2),
            p1=cert.p1, p2=cert.p2, delta=cert.delta, v=cert.v,
            s1=_set_json(cert.s1), s2=_set_json(cert.s2),
            segments1=None if cert.segments1 is None
            else [_set_json(x) for x in cert.segments1],
            segments2=None if cert.segments2 is None
            else [_set_json(x) for x in cert.segments2],
        )
    else:
        out.update(
            l1=_label_json(cert.l1), l2=_label_json(cert.l2),
            p1=cert.p1, p2=cert.p2, delta=cert.delta, v=cert.v,
            s=_set_json(cert.s), segments=[_set_json(x) for x in cert.segments],
        )
    return out


def encode_certificate(cert: Certificate) -> bytes:
    """Canonical UTF-8 JSON bytes; deterministic for equal certificates."""
    return (json.dumps(certificate_to_json(cert), indent=2, ensure_ascii=False) + "\n").encode("utf-8")


def decode_certificate(raw: bytes | str) -> Certificate:
    """Parse and validate a certificate payload."""
    if isinstance(raw, bytes):
        try:
            raw = raw.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise CertificateFormatError(f"not UTF-8: {exc}") from exc
    try:
        obj = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise CertificateFormatError(f"not JSON: {exc}") from exc
    if not isinstance(obj, dict):
        raise CertificateFormatError("certificate payload must be a JSON object")
    if obj.get("schema_version") != SCHEMA_VERSION:
        raise CertificateFormatError(
            f"unknown schema version {obj.get('schema_version')!r}"
        )
    kind = obj.get("kind")
    try:
        if kind == "attribution":
            return AttributionCertificate(
                model_id=str(obj["model_id"]),
                input_digest=str(obj["input_digest"]),
                label=_label_from(obj["label"]),
                p=float(obj["p"]), delta=float(obj["delta"]), v=float(obj["v"]),
                s=_set_from(obj["s"]),
            )
        if kind == "disjoint":
            return DisjointCertificate(
                model_id=str(obj["model_id"]),
                input_digest=str(obj["input_digest"]),
                l1=_label_from(obj["l1"]), l2=_label_from(obj["l2"]),
                p1=float(obj["p1"]), p2=float(obj["p2"]),
                delta=float(obj["delta"]), v=float(obj["v"]),
                s1=_set_from(obj["s1"]), s2=_set_from(obj["s2"]),
                segments1=None if obj.get("segments1") is None
                else tuple(_set_from(x) for x in obj["segments1"]),
                segments2=None if obj.get("segments2") is None
                else tuple(_set_from(x) for x in obj["segments2"]),
            )
        if kind == "overlap":
            return OverlapCertificate(
                model_id=str(obj["model_id"]),
                input_digest=str(obj["input_digest"]),
                l1=_label_from(obj["l1"]), l2=_label_from(obj["l2"]),
                p1=float(obj["p1"]), p2=float(obj["p2"]),
                delta=float(obj["delta"]), v=float(obj["v"]),
                s=_set_from(obj["s"]),
                segments=tuple(_set_from(x) for x in obj["segments"]),
            )
    except CertificateFormatError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise CertificateFormatError(f"invalid {kind!r} certificate: {exc}") from exc
    raise CertificateFormatError(f"unknown certificate kind {kind!r}")


def forge_overlap(cert: DisjointCertificate) -> OverlapCertificate:
    """Union a disjoint certificate's sets into a purported overlap claim.

    The result is deliberately invalid input used to harden the overlap
    verifier; a sound verifier splits it back apart and rejects it.
    """
    if cert.segments1 is None or cert.segments2 is None:
        raise CertificateFormatError(
            "forging requires the per-segment decompositions of s1 and s2"
        )
    return OverlapCertificate(
        model_id=cert.model_id,
        input_digest=cert.input_digest,
        l1=cert.l1, l2=cert.l2, p1=cert.p1, p2=cert.p2,
        delta=cert.delta, v=cert.v,
        s=cert.s1.union(cert.s2),
        segments=tuple(cert.segments1) + tuple(cert.segments2),
    )
