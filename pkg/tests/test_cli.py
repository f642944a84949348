import json
from pathlib import Path

import numpy as np
import pytest

from redactcert.bundle import load_bundle, make_case, write_fixture_bundle
from redactcert.certificates import decode_certificate
from redactcert.cli import main
from redactcert.errors import BundleError
from redactcert.oracle import FixtureSpec, generate_fixture


@pytest.fixture(scope="module")
def bundles(tmp_path_factory):
    root = tmp_path_factory.mktemp("bundles")
    out = {}
    for kind in ("planted-disjoint", "planted-overlap", "noise"):
        fx = generate_fixture(FixtureSpec(kind, seed=2))
        out[kind] = write_fixture_bundle(fx, root / kind)
    return out


# --- bundle round trip ------------------------------------------------------


def test_bundle_roundtrip(bundles):
    b = load_bundle(bundles["planted-disjoint"])
    assert b.n == 36
    assert b.m == 16
    assert b.geometry == (6, 6, 1)
    assert b.label("alpha").index == 0
    assert b.label("1").index == 1
    assert b.attribution(b.label(0)) is not None
    with b.open_model() as model:
        case = make_case(b, model, b.label(0), b.label(1), 0.2)
        assert case.p1 > 0.2


def test_bundle_digest_tamper_detected(tmp_path):
    fx = generate_fixture(FixtureSpec("noise", seed=0))
    path = write_fixture_bundle(fx, tmp_path / "b")
    raw = bytearray((path / "input.f32").read_bytes())
    raw[0] ^= 0xFF
    (path / "input.f32").write_bytes(bytes(raw))
    with pytest.raises(BundleError):
        load_bundle(path)


def test_bundle_missing_meta(tmp_path):
    with pytest.raises(BundleError):
        load_bundle(tmp_path)


def test_bundle_unknown_label(bundles):
    b = load_bundle(bundles["noise"])
    with pytest.raises(BundleError):
        b.label("nonexistent")
    with pytest.raises(BundleError):
        b.label(99)


# --- analyze ------------------------------------------------------------------


def test_analyze_disjoint(bundles, tmp_path, capsys):
    code = main([
        "analyze", str(bundles["planted-disjoint"]),
        "--labels", "0,1", "--delta", "0.2", "--out", str(tmp_path),
    ])
    out = capsys.readouterr().out
    assert code == 0
    assert out.strip().endswith("DISJOINT")
    cert = decode_certificate((tmp_path / "certificate.json").read_bytes())
    assert cert.delta == 0.2
    trace = (tmp_path / "trace.tsv").read_text().splitlines()
    assert trace[0].split("\t") == ["step", "segment", "p_l1", "p_l2", "pct_l1", "pct_l2"]
    assert len(trace) > 1


def test_analyze_overlapping(bundles, tmp_path, capsys):
    code = main([
        "analyze", str(bundles["planted-overlap"]),
        "--labels", "alpha,beta", "--out", str(tmp_path),
    ])
    assert code == 0
    assert capsys.readouterr().out.strip().endswith("OVERLAPPING")


def test_analyze_undetermined(bundles, tmp_path, capsys):
    code = main([
        "analyze", str(bundles["noise"]), "--labels", "0,1", "--out", str(tmp_path),
    ])
    assert code == 0
    assert capsys.readouterr().out.strip().endswith("UNDETERMINED")
    assert not (tmp_path / "certificate.json").exists()


def test_analyze_bad_delta(bundles, tmp_path):
    assert main([
        "analyze", str(bundles["noise"]), "--labels", "0,1",
        "--delta", "0.9", "--out", str(tmp_path),
    ]) == 2


def test_analyze_min_p_cutoff(bundles, tmp_path):
    assert main([
        "analyze", str(bundles["noise"]), "--labels", "0,1",
        "--min-p", "0.5", "--out", str(tmp_path),
    ]) == 2


def test_analyze_malformed_bundle(tmp_path):
    assert main(["analyze", str(tmp_path), "--labels", "0,1"]) == 2


def test_analyze_reproducible(bundles, tmp_path):
    args = ["analyze", str(bundles["planted-disjoint"]), "--labels", "0,1"]
    assert main(args + ["--out", str(tmp_path / "a")]) == 0
    assert main(args + ["--out", str(tmp_path / "b")]) == 0
    assert (tmp_path / "a/certificate.json").read_bytes() == (tmp_path / "b/certificate.json").read_bytes()
    assert (tmp_path / "a/trace.tsv").read_bytes() == (tmp_path / "b/trace.tsv").read_bytes()


# --- verify -------------------------------------------------------------------


@pytest.fixture(scope="module")
def disjoint_cert_path(bundles, tmp_path_factory):
    out = tmp_path_factory.mktemp("analyzed")
    assert main([
        "analyze", str(bundles["planted-disjoint"]), "--labels", "0,1",
        "--out", str(out),
    ]) == 0
    return out / "certificate.json"


def test_verify_accepts_valid_certificate(bundles, disjoint_cert_path, capsys):
    code = main(["verify", str(disjoint_cert_path), str(bundles["planted-disjoint"])])
    out = capsys.readouterr().out
    assert code == 0
    assert "verdict: accepted" in out
    assert out.count("[pass]") == 5


def test_verify_wrong_bundle_is_error(bundles, disjoint_cert_path):
    assert main(["verify", str(disjoint_cert_path), str(bundles["noise"])]) == 2


def test_verify_missing_certificate(bundles, tmp_path):
    assert main(["verify", str(tmp_path / "nope.json"), str(bundles["noise"])]) == 2


def test_forge_then_verify_rejected_as_disjoint(bundles, disjoint_cert_path, tmp_path, capsys):
    forged = tmp_path / "forged.json"
    assert main(["forge", str(disjoint_cert_path), "--out", str(forged)]) == 0
    capsys.readouterr()
    code = main(["verify", str(forged), str(bundles["planted-disjoint"])])
    out = capsys.readouterr().out
    assert code == 1
    assert "rejected-as-disjoint" in out
    counter_path = Path(str(forged) + ".counter.json")
    assert counter_path.exists()
    capsys.readouterr()
    assert main(["verify", str(counter_path), str(bundles["planted-disjoint"])]) == 0


def test_verify_overlap_certificate(bundles, tmp_path, capsys):
    out_dir = tmp_path / "ovl"
    assert main([
        "analyze", str(bundles["planted-overlap"]), "--labels", "0,1",
        "--out", str(out_dir),
    ]) == 0
    capsys.readouterr()
    code = main([
        "verify", str(out_dir / "certificate.json"), str(bundles["planted-overlap"]),
    ])
    assert code == 0
    assert "verdict: accepted" in capsys.readouterr().out


def test_forge_requires_disjoint_input(bundles, tmp_path, capsys):
    out_dir = tmp_path / "ovl2"
    assert main([
        "analyze", str(bundles["planted-overlap"]), "--labels", "0,1",
        "--out", str(out_dir),
    ]) == 0
    assert main(["forge", str(out_dir / "certificate.json")]) == 2


def test_forge_missing_decomposition(disjoint_cert_path, tmp_path):
    obj = json.loads(disjoint_cert_path.read_text())
    obj["segments1"] = None
    stripped = tmp_path / "stripped.json"
    stripped.write_text(json.dumps(obj))
    assert main(["forge", str(stripped)]) == 2


# --- fixture + bench -------------------------------------------------------


def test_fixture_command(tmp_path, capsys):
    code = main([
        "fixture", "--kind", "planted-overlap", "--seed", "5",
        "--out", str(tmp_path / "fx"),
    ])
    assert code == 0
    b = load_bundle(tmp_path / "fx")
    assert b.meta["model"]["kind"] == "planted"


def test_bench_writes_report(tmp_path, capsys):
    report = tmp_path / "report.json"
    code = main([
        "bench", "--kind", "planted-overlap", "--trials", "2",
        "--strategies", "alg1,overlap", "--report", str(report),
    ])
    assert code == 0
    data = json.loads(report.read_text())
    assert data["trials"] == 2
    assert data["algorithms"]["alg1"]["success_rate"] == 0.0
    assert data["algorithms"]["overlap"]["success_rate"] == 1.0
    assert data["algorithms"]["overlap"]["verified_rate"] == 1.0
    assert data["algorithms"]["overlap"]["avg_model_evals"] > 0


def test_bench_zero_trials(tmp_path):
    report = tmp_path / "empty.json"
    assert main(["bench", "--trials", "0", "--report", str(report)]) == 0
    data = json.loads(report.read_text())
    assert data["trials"] == 0
    assert all(entry == {"trials": 0} for entry in data["algorithms"].values())


def test_bench_disjoint_family(tmp_path):
    report = tmp_path / "dis.json"
    assert main([
        "bench", "--kind", "planted-disjoint", "--trials", "2",
        "--strategies", "alg1", "--report", str(report),
    ]) == 0
    data = json.loads(report.read_text())
    assert data["algorithms"]["alg1"]["success_rate"] == 1.0
    assert data["algorithms"]["alg1"]["verified_rate"] == 1.0
