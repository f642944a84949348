"""Prediction endpoint speaking newline-delimited JSON frames.

Request:  {"id": 1, "case": "<input digest>", "redact": {"rle": [[s,l],...], "value": 0.0}}
Response: {"id": 1, "softmax": [...]} or {"id": 1, "error": {"code": "...", "msg": "..."}}

Every protocol violation is answered with a structured error frame and the
connection stays open; nothing is dropped silently. Evaluations are
serialized behind one lock because torch modules are not reentrant-safe.
"""

from __future__ import annotations

import hashlib
import json
import socketserver
import sys
import threading
from pathlib import Path

import numpy as np

from .config import BridgeConfig, BridgeError
from .models import LoadedModel, evaluate_flat, load_model

MAX_RLE_TOTAL = 100_000_000


class CaseRegistry:
    """Input digest -> (flat tensor, model). One model may serve many cases."""

    def __init__(self):
        self._cases: dict[str, tuple[np.ndarray, LoadedModel]] = {}
        self.eval_lock = threading.Lock()

    def register(self, flat: np.ndarray, loaded: LoadedModel) -> str:
        digest = hashlib.sha256(np.ascontiguousarray(flat, dtype="<f4").tobytes()).hexdigest()
        self._cases[digest] = (np.ascontiguousarray(flat, dtype="<f4"), loaded)
        return digest

    def register_bundle(self, bundle_dir, loaded: LoadedModel | None = None, config: BridgeConfig | None = None) -> str:
        root = Path(bundle_dir)
        meta = json.loads((root / "meta.json").read_text("utf-8"))
        raw = (root / meta["files"]["input"]["path"]).read_bytes()
        flat = np.frombuffer(raw, dtype="<f4")
        if loaded is None:
            loaded = load_model(config or BridgeConfig())
        if flat.shape[0] != loaded.n:
            raise BridgeError(
                f"bundle tensor has {flat.shape[0]} values, model expects {loaded.n}"
            )
        return self.register(flat, loaded)

    def lookup(self, digest: str):
        return self._cases.get(digest)


def decode_rle(runs, n: int) -> np.ndarray:
    """RLE pairs -> index array; validates shape, order, bounds, and size."""
    out: list[int] = []
    prev_end = -1
    total = 0
    for run in runs:
        if not isinstance(run, (list, tuple)) or len(run) != 2:
            raise ValueError(f"malformed run {run!r}")
        start, length = int(run[0]), int(run[1])
        if start < 0 or length < 1:
            raise ValueError(f"invalid run [{start}, {length}]")
        if start <= prev_end:
            raise ValueError("runs overlap or are unsorted")
        total += length
        if total > MAX_RLE_TOTAL:
            raise ValueError("redaction payload too large")
        end = start + length - 1
        if end >= n:
            raise ValueError(f"index {end} out of range for n={n}")
        out.extend(range(start, end + 1))
        prev_end = end
    return np.asarray(out, dtype=np.int64)


def handle_frame(registry: CaseRegistry, raw: bytes) -> dict:
    """One request frame -> one response frame (pure protocol logic)."""
    try:
        frame = json.loads(raw.decode("utf-8"))
        if not isinstance(frame, dict):
            raise ValueError("frame must be an object")
    except Exception as exc:  # noqa: BLE001
        return {"id": None, "error": {"code": "bad-request", "msg": f"unparseable frame: {exc}"}}
    req_id = frame.get("id")

    def err(code: str, msg: str) -> dict:
        return {"id": req_id, "error": {"code": code, "msg": msg}}

    try:
        digest = frame["case"]
        redact_spec = frame["redact"]
        runs = redact_spec["rle"]
        value = float(redact_spec["value"])
    except (KeyError, TypeError, ValueError) as exc:
        return err("bad-request", f"missing or malformed field: {exc}")

    entry = registry.lookup(digest)
    if entry is None:
        return err("unknown-case", f"no registered case {str(digest)[:12]}...")
    flat, loaded = entry
    try:
        idx = decode_rle(runs, flat.shape[0])
    except ValueError as exc:
        return err("bad-redaction", str(exc))

    redacted = np.array(flat, copy=True)
    if idx.size:
        redacted[idx] = np.float32(value)
    with registry.eval_lock:
        probs = evaluate_flat(loaded, redacted)
    return {"id": req_id, "softmax": [float(x) for x in probs]}


class _Handler(socketserver.StreamRequestHandler):
    def handle(self):
        while True:
            raw = self.rfile.readline()
            if not raw:
                return
            response = handle_frame(self.server.registry, raw)
            self.wfile.write(json.dumps(response).encode("utf-8") + b"\n")
            self.wfile.flush()


class BridgeServer(socketserver.ThreadingTCPServer):
    allow_reuse_address = True
    daemon_threads = True

    def __init__(self, registry: CaseRegistry, host: str, port: int):
        super().__init__((host, port), _Handler)
        self.registry = registry


def serve_tcp(registry: CaseRegistry, host: str, port: int) -> BridgeServer:
    """Bind and return the server; caller runs serve_forever (or a thread)."""
    return BridgeServer(registry, host, port)


def serve_stdio(registry: CaseRegistry, stdin=None, stdout=None) -> None:
    stdin = stdin or sys.stdin.buffer
    stdout = stdout or sys.stdout.buffer
    for raw in stdin:
        response = handle_frame(registry, raw)
        stdout.write(json.dumps(response).encode("utf-8") + b"\n")
        stdout.flush()
