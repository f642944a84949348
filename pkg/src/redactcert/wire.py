"""Client for models served over the newline-delimited JSON protocol.

One frame per line. Request:

    {"id": 1, "case": "<input digest>", "redact": {"rle": [[start, len], ...], "value": 0.0}}

Response: ``{"id": 1, "softmax": [...]}`` or ``{"id": 1, "error": {"code": "...", "msg": "..."}}``.

The server holds the case's base input; the client expresses every
evaluation as a redaction of that base. Calls are serialized behind a lock
because served backends need not be reentrant.
"""

from __future__ import annotations

import json
import socket
import subprocess
import threading
from typing import Optional, Sequence

import numpy as np

from .core import IndexSet, InputVector, ModelHandle, SoftmaxVector
from .errors import EvaluationError


class WireClient:
    """Blocking NDJSON client over a TCP socket or a child process's stdio."""

    def __init__(self, reader, writer, closer):
        self._reader = reader
        self._writer = writer
        self._closer = closer
        self._lock = threading.Lock()
        self._next_id = 1

    @classmethod
    def connect_tcp(cls, host: str, port: int, timeout: float = 30.0) -> "WireClient":
        try:
            sock = socket.create_connection((host, port), timeout=timeout)
        except OSError as exc:
            raise EvaluationError(f"cannot reach endpoint {host}:{port}: {exc}", detail=exc) from exc
        stream = sock.makefile("rwb")
        return cls(stream, stream, lambda: (stream.close(), sock.close()))

    @classmethod
    def spawn_stdio(cls, argv: Sequence[str]) -> "WireClient":
        try:
            proc = subprocess.Popen(
                list(argv), stdin=subprocess.PIPE, stdout=subprocess.PIPE
            )
        except OSError as exc:
            raise EvaluationError(f"cannot spawn {argv[0]!r}: {exc}", detail=exc) from exc
        return cls(proc.stdout, proc.stdin, lambda: _stop(proc))

    def close(self) -> None:
        try:
            self._closer()
        except Exception:  # noqa: BLE001 - closing is best effort
            pass

    def __enter__(self) -> "WireClient":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    def request(self, payload: dict) -> dict:
        """Send one frame and read one frame; serialized across threads."""
        with self._lock:
            req_id = self._next_id
            self._next_id += 1
            payload = {"id": req_id, **payload}
            line = json.dumps(payload, separators=(",", ":")) + "\n"
            try:
                self._writer.write(line.encode("utf-8"))
                self._writer.flush()
                raw = self._reader.readline()
            except OSError as exc:
                raise EvaluationError(f"transport failure: {exc}", detail=exc) from exc
            if not raw:
                raise EvaluationError("endpoint closed the connection")
            try:
                frame = json.loads(raw.decode("utf-8"))
            except (UnicodeDecodeError, json.JSONDecodeError) as exc:
                raise EvaluationError(f"unparseable response frame: {exc}", detail=raw) from exc
        if frame.get("id") != req_id:
            raise EvaluationError(
                f"response id {frame.get('id')} does not match request {req_id}",
                detail=frame,
            )
        if "error" in frame:
            err = frame["error"]
            raise EvaluationError(
                f"endpoint error {err.get('code')}: {err.get('msg')}", detail=err
            )
        return frame

    def evaluate(self, case_digest: str, rle: list[list[int]], value: float) -> list[float]:
        frame = self.request(
            {"case": case_digest, "redact": {"rle": rle, "value": float(value)}}
        )
        softmax = frame.get("softmax")
        if not isinstance(softmax, list):
            raise EvaluationError("response frame lacks a softmax array", detail=frame)
        return [float(x) for x in softmax]


def _stop(proc: subprocess.Popen) -> None:
    for stream in (proc.stdin, proc.stdout):
        try:
            stream.close()
        except Exception:  # noqa: BLE001
            pass
    try:
        proc.terminate()
        proc.wait(timeout=5)
    except Exception:  # noqa: BLE001
        proc.kill()


def wire_model(
    client: WireClient, model_id: str, n: int, m: int, base_input: InputVector
) -> ModelHandle:
    """A ModelHandle whose evaluator speaks the wire protocol.

    Served models evaluate redactions of one registered case input; the
    evaluator reconstructs (index set, value) by diffing against that base
    and refuses inputs that are not single-value redactions of it.
    """
    base = base_input.values
    digest = base_input.digest

    def evaluate(x: InputVector) -> SoftmaxVector:
        if x.n != n:
            raise EvaluationError(f"expected n={n}, got {x.n}")
        changed = np.nonzero(x.values != base)[0]
        if changed.size == 0:
            rle: list[list[int]] = []
            value = 0.0
        else:
            replaced = np.unique(x.values[changed])
            if replaced.size != 1:
                raise EvaluationError(
                    "served models only evaluate single-value redactions of "
                    "the case input"
                )
            value = float(replaced[0])
            rle = IndexSet(tuple(int(i) for i in changed)).to_rle()
        probs = client.evaluate(digest, rle, value)
        if len(probs) != m:
            raise EvaluationError(f"endpoint returned {len(probs)} probabilities, expected {m}")
        return SoftmaxVector(np.asarray(probs, dtype=np.float64))

    return ModelHandle(model_id, n, m, evaluate)
