import json
from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from redactcert.certificates import (
    AttributionCertificate,
    DisjointCertificate,
    OverlapCertificate,
    certificate_to_json,
    decode_certificate,
    encode_certificate,
    forge_overlap,
)
from redactcert.core import IndexSet, LabelId
from redactcert.errors import CertificateFormatError

DATA = Path(__file__).parent / "data"

DIGEST_A = "1f" * 32
DIGEST_B = "2a" * 32
DIGEST_C = "3b" * 32
DIGEST_D = "4c" * 32


def attribution_cert(s=(0, 1, 2, 10)):
    return AttributionCertificate(
        model_id="golden-model", input_digest=DIGEST_A,
        label=LabelId(3, "label-three"), p=0.5, delta=0.2, v=0.0,
        s=IndexSet.of(s),
    )


def disjoint_cert():
    return DisjointCertificate(
        model_id="golden-model", input_digest=DIGEST_B,
        l1=LabelId(0, "alpha"), l2=LabelId(1, "beta"),
        p1=0.41, p2=0.37, delta=0.2, v=0.0,
        s1=IndexSet.of(range(0, 4)), s2=IndexSet.of(range(8, 12)),
        segments1=(IndexSet.of([0, 1]), IndexSet.of([2, 3])),
        segments2=(IndexSet.of([8, 9]), IndexSet.of([10, 11])),
    )


def overlap_cert():
    return OverlapCertificate(
        model_id="golden-model", input_digest=DIGEST_C,
        l1=LabelId(0, "alpha"), l2=LabelId(1, "beta"),
        p1=0.44, p2=0.29, delta=0.2, v=0.0,
        s=IndexSet.of([2, 3, 6]),
        segments=(IndexSet.of([2, 3]), IndexSet.of([6])),
    )


# --- run-length encoding ----------------------------------------------------


def test_rle_of_mixed_runs():
    assert IndexSet.of([0, 1, 2, 10]).to_rle() == [[0, 3], [10, 1]]


def test_rle_empty():
    assert IndexSet(()).to_rle() == []
    assert IndexSet.from_rle([]) == IndexSet(())


def test_rle_roundtrip_examples():
    for items in ([0], [5, 6, 7], [1, 3, 5], list(range(100))):
        s = IndexSet.of(items)
        assert IndexSet.from_rle(s.to_rle()) == s


def test_rle_rejects_overlap_and_disorder():
    with pytest.raises(ValueError):
        IndexSet.from_rle([[0, 3], [2, 2]])
    with pytest.raises(ValueError):
        IndexSet.from_rle([[5, 1], [0, 1]])
    with pytest.raises(ValueError):
        IndexSet.from_rle([[0, 0]])
    with pytest.raises(ValueError):
        IndexSet.from_rle([[-1, 2]])
    with pytest.raises(ValueError):
        IndexSet.from_rle([[0]])


def test_rle_decode_overflow_guard():
    with pytest.raises(OverflowError):
        IndexSet.from_rle([[0, 10**9]])


@settings(max_examples=200)
@given(st.sets(st.integers(0, 500)))
def test_rle_roundtrip_property(items):
    s = IndexSet.of(items)
    assert IndexSet.from_rle(s.to_rle()) == s


# --- canonical encoding -----------------------------------------------------


@pytest.mark.parametrize("make", [attribution_cert, disjoint_cert, overlap_cert])
def test_encode_decode_identity(make):
    cert = make()
    assert decode_certificate(encode_certificate(cert)) == cert


@pytest.mark.parametrize("make", [attribution_cert, disjoint_cert, overlap_cert])
def test_encode_deterministic(make):
    assert encode_certificate(make()) == encode_certificate(make())


def test_empty_set_certificate_roundtrip():
    cert = AttributionCertificate(
        model_id="golden-model", input_digest=DIGEST_D,
        label=LabelId(0), p=0.9, delta=0.3, v=1.5, s=IndexSet(()),
    )
    payload = encode_certificate(cert)
    assert b'"rle": []' in payload
    assert decode_certificate(payload) == cert


def test_disjoint_without_decompositions_roundtrips():
    cert = DisjointCertificate(
        model_id="m", input_digest=DIGEST_B,
        l1=LabelId(0), l2=LabelId(1), p1=0.4, p2=0.3, delta=0.25, v=0.0,
        s1=IndexSet.of([0]), s2=IndexSet.of([1]),
    )
    again = decode_certificate(encode_certificate(cert))
    assert again.segments1 is None and again.segments2 is None


@pytest.mark.parametrize(
    "name,make",
    [
        ("attribution", attribution_cert),
        ("disjoint", disjoint_cert),
        ("overlap", overlap_cert),
    ],
)
def test_golden_files(name, make):
    golden = (DATA / f"golden_{name}.json").read_bytes()
    assert encode_certificate(make()) == golden
    assert decode_certificate(golden) == make()


def test_golden_empty_attribution():
    golden = (DATA / "golden_attribution_empty.json").read_bytes()
    cert = decode_certificate(golden)
    assert cert.s == IndexSet(())
    assert encode_certificate(cert) == golden


# --- decode validation --------------------------------------------------------


def test_decode_rejects_unknown_schema():
    obj = certificate_to_json(attribution_cert())
    obj["schema_version"] = "99"
    with pytest.raises(CertificateFormatError):
        decode_certificate(json.dumps(obj))


def test_decode_rejects_unknown_kind():
    obj = certificate_to_json(attribution_cert())
    obj["kind"] = "mystery"
    with pytest.raises(CertificateFormatError):
        decode_certificate(json.dumps(obj))


def test_decode_rejects_garbage():
    with pytest.raises(CertificateFormatError):
        decode_certificate(b"not json at all")
    with pytest.raises(CertificateFormatError):
        decode_certificate(b"[1, 2, 3]")
    with pytest.raises(CertificateFormatError):
        decode_certificate(b"\xff\xfe")


def test_decode_rejects_missing_fields():
    obj = certificate_to_json(attribution_cert())
    del obj["p"]
    with pytest.raises(CertificateFormatError):
        decode_certificate(json.dumps(obj))


def test_decode_rejects_rle_overflow():
    obj = certificate_to_json(attribution_cert())
    obj["s"] = {"rle": [[0, 10**12]]}
    with pytest.raises(CertificateFormatError):
        decode_certificate(json.dumps(obj))


def test_decode_rejects_bad_delta():
    obj = certificate_to_json(disjoint_cert())
    obj["delta"] = 0.7  # outside (0, 0.5] for a disjoint claim
    with pytest.raises(CertificateFormatError):
        decode_certificate(json.dumps(obj))


# --- structural invariants ------------------------------------------------


def test_overlap_requires_partition():
    with pytest.raises(ValueError):
        OverlapCertificate(
            model_id="m", input_digest=DIGEST_C,
            l1=LabelId(0), l2=LabelId(1), p1=0.4, p2=0.3, delta=0.2, v=0.0,
            s=IndexSet.of([0, 1, 2]),
            segments=(IndexSet.of([0, 1]),),  # does not cover 2
        )
    with pytest.raises(ValueError):
        OverlapCertificate(
            model_id="m", input_digest=DIGEST_C,
            l1=LabelId(0), l2=LabelId(1), p1=0.4, p2=0.3, delta=0.2, v=0.0,
            s=IndexSet.of([0, 1]),
            segments=(IndexSet.of([0, 1]), IndexSet.of([1])),  # overlap
        )


def test_disjoint_decomposition_must_union():
    with pytest.raises(ValueError):
        DisjointCertificate(
            model_id="m", input_digest=DIGEST_B,
            l1=LabelId(0), l2=LabelId(1), p1=0.4, p2=0.3, delta=0.2, v=0.0,
            s1=IndexSet.of([0, 1]), s2=IndexSet.of([2]),
            segments1=(IndexSet.of([0]),), segments2=(IndexSet.of([2]),),
        )


def test_scalar_ranges_enforced():
    with pytest.raises(ValueError):
        attribution_cert().__class__(
            model_id="m", input_digest=DIGEST_A, label=LabelId(0),
            p=0.0, delta=0.2, v=0.0, s=IndexSet(()),
        )
    with pytest.raises(ValueError):
        DisjointCertificate(
            model_id="m", input_digest=DIGEST_B, l1=LabelId(0), l2=LabelId(1),
            p1=0.4, p2=0.3, delta=0.51, v=0.0,
            s1=IndexSet(()), s2=IndexSet(()),
        )


# --- forging ------------------------------------------------------------------


def test_forge_unions_sets_and_segments():
    forged = forge_overlap(disjoint_cert())
    assert forged.s == IndexSet.of(range(0, 4)).union(IndexSet.of(range(8, 12)))
    assert len(forged.segments) == 4
    assert forged.p1 == 0.41 and forged.p2 == 0.37


def test_forge_requires_decompositions():
    bare = DisjointCertificate(
        model_id="m", input_digest=DIGEST_B,
        l1=LabelId(0), l2=LabelId(1), p1=0.4, p2=0.3, delta=0.2, v=0.0,
        s1=IndexSet.of([0]), s2=IndexSet.of([1]),
    )
    with pytest.raises(CertificateFormatError):
        forge_overlap(bare)


def test_forge_with_empty_s2_degenerates_to_s1():
    cert = DisjointCertificate(
        model_id="m", input_digest=DIGEST_B,
        l1=LabelId(0), l2=LabelId(1), p1=0.4, p2=0.3, delta=0.2, v=0.0,
        s1=IndexSet.of([0, 1]), s2=IndexSet(()),
        segments1=(IndexSet.of([0, 1]),), segments2=(),
    )
    forged = forge_overlap(cert)
    assert forged.s == cert.s1
    assert forged.segments == cert.segments1


@settings(max_examples=100)
@given(st.data())
def test_roundtrip_random_disjoint_certs(data):
    a = data.draw(st.sets(st.integers(0, 80), max_size=12))
    b_pool = set(range(81, 160))
    b = data.draw(st.sets(st.sampled_from(sorted(b_pool)), max_size=12))
    cert = DisjointCertificate(
        model_id="m", input_digest=DIGEST_B,
        l1=LabelId(0), l2=LabelId(1),
        p1=data.draw(st.floats(0.01, 1.0)), p2=data.draw(st.floats(0.01, 1.0)),
        delta=data.draw(st.floats(0.01, 0.5)), v=data.draw(st.floats(-2, 2)),
        s1=IndexSet.of(a), s2=IndexSet.of(b),
    )
    assert decode_certificate(encode_certificate(cert)) == cert
