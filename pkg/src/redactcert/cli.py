"""Command-line surface.

Exit codes are a stable scripting contract: 0 = clean verdict (whatever it
is), 1 = semantic rejection (verify only), 2 = operational error (malformed
bundle, digest mismatch, bad flags).
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path
from typing import Optional, Sequence

from . import bundle as bundle_mod
from .certificates import (
    AttributionCertificate,
    DisjointCertificate,
    OverlapCertificate,
    decode_certificate,
    encode_certificate,
    forge_overlap,
)
from .core import CallCounter
from .errors import CertEngineError, CertificateMismatchError
from .oracle import FixtureSpec, generate_fixture
from .search import (
    DISJOINT,
    OVERLAPPING,
    STRATEGIES,
    UNDETERMINED,
    classify_pair,
    trace_table,
)
from .segattr import adjacency_of_sets
from .verify import (
    REJECTED_AS_DISJOINT,
    format_report,
    verify_attribution,
    verify_disjoint,
    verify_overlap,
)

VERDICT_LINES = {DISJOINT: "DISJOINT", OVERLAPPING: "OVERLAPPING", UNDETERMINED: "UNDETERMINED"}


def _parse_labels(raw: str) -> tuple[str, str]:
    parts = [p.strip() for p in raw.split(",")]
    if len(parts) != 2 or not all(parts):
        raise argparse.ArgumentTypeError("expected --labels L1,L2")
    return parts[0], parts[1]


def _parse_strategy(raw: str) -> tuple[str, ...]:
    parts = tuple(p.strip() for p in raw.split(",") if p.strip())
    unknown = [p for p in parts if p not in STRATEGIES]
    if not parts or unknown:
        raise argparse.ArgumentTypeError(
            f"strategy must be a comma list from {sorted(STRATEGIES)}"
        )
    return parts


def cmd_analyze(args) -> int:
    b = bundle_mod.load_bundle(args.bundle)
    if not (0.0 < args.delta <= 0.5):
        print(f"error: delta must lie in (0, 0.5], got {args.delta}", file=sys.stderr)
        return 2
    l1 = b.label(args.labels[0])
    l2 = b.label(args.labels[1])
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    with b.open_model() as model:
        case = bundle_mod.make_case(
            b, model, l1, l2, args.delta, v=args.redaction_value,
            min_p=args.min_p, max_fraction=args.max_fraction,
        )
        outcome = classify_pair(case, strategy=args.strategy, tau=args.tau, min_p=args.min_p)
    (out_dir / "trace.tsv").write_text(trace_table(outcome.trace, case.p1, case.p2), "utf-8")
    if outcome.certificate is not None:
        cert_path = out_dir / "certificate.json"
        cert_path.write_bytes(encode_certificate(outcome.certificate))
        print(f"certificate: {cert_path}")
    print(f"trace: {out_dir / 'trace.tsv'}")
    print(VERDICT_LINES[outcome.kind])
    return 0


def cmd_verify(args) -> int:
    cert_path = Path(args.certificate)
    try:
        cert = decode_certificate(cert_path.read_bytes())
    except OSError as exc:
        print(f"error: cannot read certificate: {exc}", file=sys.stderr)
        return 2
    b = bundle_mod.load_bundle(args.bundle)
    with b.open_model() as model:
        if isinstance(cert, AttributionCertificate):
            report = verify_attribution(cert, model, b.input)
        elif isinstance(cert, DisjointCertificate):
            report = verify_disjoint(cert, model, b.input)
        elif isinstance(cert, OverlapCertificate):
            adj = adjacency_of_sets(cert.segments, b.geometry)
            report = verify_overlap(cert, model, b.input, adj, tau=args.tau)
        else:  # pragma: no cover - decode only returns the three kinds
            raise CertificateMismatchError("unknown certificate type")
    sys.stdout.write(format_report(report))
    if report.verdict == REJECTED_AS_DISJOINT and report.counter_certificate is not None:
        counter_path = cert_path.with_suffix(cert_path.suffix + ".counter.json")
        counter_path.write_bytes(encode_certificate(report.counter_certificate))
        print(f"counter-certificate: {counter_path}")
    return 0 if report.accepted else 1


def cmd_forge(args) -> int:
    cert_path = Path(args.certificate)
    cert = decode_certificate(cert_path.read_bytes())
    if not isinstance(cert, DisjointCertificate):
        print("error: forging starts from a disjoint certificate", file=sys.stderr)
        return 2
    forged = forge_overlap(cert)
    out = Path(args.out) if args.out else cert_path.with_suffix(cert_path.suffix + ".forged.json")
    out.write_bytes(encode_certificate(forged))
    print(f"forged overlap certificate: {out}")
    return 0


def cmd_fixture(args) -> int:
    fixture = generate_fixture(
        FixtureSpec(kind=args.kind, k=args.k, margin=args.margin, seed=args.seed)
    )
    path = bundle_mod.write_fixture_bundle(fixture, args.out)
    print(f"fixture bundle: {path}")
    return 0


def _bench_trial(kind: str, k: int, margin: float, delta: float, seed: int,
                 strategies: Sequence[str], tau: float) -> dict:
    from .search import build_case

    fixture = generate_fixture(FixtureSpec(kind=kind, k=k, margin=margin, seed=seed))
    results: dict[str, dict] = {}
    for name in strategies:
        counter = CallCounter(fixture.model)
        started = time.perf_counter()
        case = build_case(
            counter.model, fixture.input, fixture.seg, fixture.l1, fixture.l2, delta
        )
        outcome = STRATEGIES[name](case, tau)
        elapsed = time.perf_counter() - started
        target = OVERLAPPING if name == "overlap" else DISJOINT
        produced = outcome.kind == target and outcome.certificate is not None
        verified = False
        segments = 0
        if produced:
            cert = outcome.certificate
            if isinstance(cert, DisjointCertificate):
                report = verify_disjoint(cert, fixture.model, fixture.input)
                segments = len(cert.segments1 or ()) + len(cert.segments2 or ())
            else:
                adj = adjacency_of_sets(cert.segments, fixture.input.geometry)
                report = verify_overlap(cert, fixture.model, fixture.input, adj, tau=tau)
                segments = len(cert.segments)
            verified = report.accepted
        results[name] = {
            "success": produced,
            "verified": verified,
            "segments": segments,
            "model_evals": counter.calls,
            "wall_time_s": elapsed,
        }
    return results


def _bench_trial_star(packed) -> dict:
    return _bench_trial(*packed)


def cmd_bench(args) -> int:
    strategies = args.strategies
    trial_args = [
        (args.kind, args.k, args.margin, args.delta, args.seed + i, strategies, args.tau)
        for i in range(args.trials)
    ]
    if args.workers > 1 and trial_args:
        import concurrent.futures

        with concurrent.futures.ProcessPoolExecutor(max_workers=args.workers) as pool:
            trials = list(pool.map(_bench_trial_star, trial_args))
    else:
        trials = [_bench_trial(*t) for t in trial_args]
    per_alg: dict[str, list[dict]] = {name: [] for name in strategies}
    for trial in trials:
        for name, row in trial.items():
            per_alg[name].append(row)

    def summarize(rows: list[dict]) -> dict:
        if not rows:
            return {"trials": 0}
        produced = [r for r in rows if r["success"]]
        return {
            "trials": len(rows),
            "success_rate": len(produced) / len(rows),
            "verified_rate": (
                sum(1 for r in produced if r["verified"]) / len(produced)
                if produced else None
            ),
            "avg_certificate_segments": (
                sum(r["segments"] for r in produced) / len(produced) if produced else None
            ),
            "avg_model_evals": sum(r["model_evals"] for r in rows) / len(rows),
            "avg_wall_time_s": sum(r["wall_time_s"] for r in rows) / len(rows),
        }

    report = {
        "kind": args.kind,
        "trials": args.trials,
        "k": args.k,
        "margin": args.margin,
        "delta": args.delta,
        "seed": args.seed,
        "algorithms": {name: summarize(rows) for name, rows in per_alg.items()},
    }
    text = json.dumps(report, indent=2) + "\n"
    if args.report:
        Path(args.report).write_text(text, "utf-8")
        print(f"report: {args.report}")
    else:
        sys.stdout.write(text)
    for name, summary in report["algorithms"].items():
        rate = summary.get("success_rate")
        print(f"{name}: success {rate if rate is not None else 'n/a'}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="redactcert",
        description="Decide whether two predicted labels rest on disjoint or "
        "shared input regions, and emit or check the counterfactual certificates.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="classify a label pair and emit a certificate")
    p.add_argument("bundle")
    p.add_argument("--labels", type=_parse_labels, required=True, metavar="L1,L2")
    p.add_argument("--delta", type=float, default=0.2)
    p.add_argument("--strategy", type=_parse_strategy, default=("alg1", "alg2", "overlap"))
    p.add_argument("--tau", type=float, default=0.0)
    p.add_argument("--min-p", type=float, default=0.01, dest="min_p")
    p.add_argument("--redaction-value", type=float, default=0.0, dest="redaction_value")
    p.add_argument("--max-fraction", type=float, default=1.0, dest="max_fraction",
                   help="cap accumulation sweeps at this fraction of the segments")
    p.add_argument("--out", default=".")
    p.set_defaults(fn=cmd_analyze)

    p = sub.add_parser("verify", help="check a certificate against a bundle")
    p.add_argument("certificate")
    p.add_argument("bundle")
    p.add_argument("--tau", type=float, default=0.0)
    p.set_defaults(fn=cmd_verify)

    p = sub.add_parser("forge", help="union a disjoint certificate into a bogus overlap claim")
    p.add_argument("certificate")
    p.add_argument("--out", default=None)
    p.set_defaults(fn=cmd_forge)

    p = sub.add_parser("fixture", help="write a synthetic fixture bundle")
    p.add_argument("--kind", choices=["planted-disjoint", "planted-overlap", "noise"],
                   default="planted-disjoint")
    p.add_argument("--k", type=int, default=9)
    p.add_argument("--margin", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_fixture)

    p = sub.add_parser("bench", help="generate, classify, and verify over many seeds")
    p.add_argument("--kind", choices=["planted-disjoint", "planted-overlap", "noise"],
                   default="planted-disjoint")
    p.add_argument("--trials", type=int, default=10)
    p.add_argument("--k", type=int, default=9)
    p.add_argument("--margin", type=float, default=1.0)
    p.add_argument("--delta", type=float, default=0.2)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tau", type=float, default=0.0)
    p.add_argument("--strategies", type=_parse_strategy,
                   default=("alg1", "alg2", "alg3", "overlap"))
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--report", default=None)
    p.set_defaults(fn=cmd_bench)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except CertEngineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
