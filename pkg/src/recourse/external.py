"""External model processes speaking newline-delimited JSON over stdio.

Wire protocol (one JSON object per line, UTF-8):

  engine -> child   {"type": "handshake", "features": [...], "task": "classification"|"regression"}
  child  -> engine  {"type": "ready", "classes": [...]}        (classes only for classification)
  engine -> child   {"type": "predict", "id": k, "instances": [[v, ...], ...]}
  child  -> engine  {"type": "scores", "id": k, "scores": [[s, ...], ...]}

Numeric feature values travel as JSON numbers, categorical values as strings.
Anything else on the wire is a protocol error with a stable code.
"""

from __future__ import annotations

import json
import os
import select
import shlex
import subprocess
import threading
import time
from typing import Sequence

import numpy as np

from .errors import ProtocolError
from .predict import CLASSIFICATION, REGRESSION, PredictionFunction
from .schema import FeatureSchema, Instance

DEFAULT_BATCH_CAP = 1024


class ExternalPredictor(PredictionFunction):
    """Prediction function backed by a single child process.

    Requests are serialized behind a lock, so the object is safe to call from
    multiple threads; the child only ever sees whole, ordered requests.
    """

    def __init__(
        self,
        command: str | Sequence[str],
        schema: FeatureSchema,
        task: str,
        timeout: float = 30.0,
        batch_cap: int = DEFAULT_BATCH_CAP,
    ):
        argv = shlex.split(command) if isinstance(command, str) else list(command)
        self._timeout = timeout
        self._batch_cap = batch_cap
        self._schema = schema
        self._lock = threading.Lock()
        self._buffer = b""
        self._request_id = 0
        try:
            self._proc = subprocess.Popen(
                argv,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                stderr=subprocess.DEVNULL,
                text=False,
            )
        except OSError as exc:
            raise ProtocolError(f"cannot launch predictor {argv!r}: {exc}", code="protocol-exit")

        classes = self._handshake(task)
        super().__init__(
            self._roundtrip,
            task,
            classes,
            name=f"exec:{' '.join(argv)}",
        )

    # -- wire helpers -----------------------------------------------------

    def _send(self, obj: dict) -> None:
        line = json.dumps(obj, separators=(",", ":")) + "\n"
        try:
            assert self._proc.stdin is not None
            self._proc.stdin.write(line.encode("utf-8"))
            self._proc.stdin.flush()
        except (BrokenPipeError, ValueError, OSError):
            raise ProtocolError("predictor process is gone", code="protocol-exit") from None

    def _read_line(self) -> bytes:
        assert self._proc.stdout is not None
        fd = self._proc.stdout.fileno()
        deadline = time.monotonic() + self._timeout
        while b"\n" not in self._buffer:
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                raise ProtocolError("predictor response timed out", code="protocol-timeout")
            ready, _, _ = select.select([fd], [], [], remaining)
            if not ready:
                raise ProtocolError("predictor response timed out", code="protocol-timeout")
            chunk = os.read(fd, 65536)
            if not chunk:
                raise ProtocolError("predictor process exited mid-protocol", code="protocol-exit")
            self._buffer += chunk
        line, self._buffer = self._buffer.split(b"\n", 1)
        return line

    def _read_message(self) -> dict:
        line = self._read_line()
        try:
            msg = json.loads(line.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError):
            raise ProtocolError(
                f"malformed predictor line: {line[:200]!r}", code="protocol-malformed-line"
            ) from None
        if not isinstance(msg, dict):
            raise ProtocolError("predictor line is not a JSON object", code="protocol-malformed-line")
        return msg

    def _handshake(self, task: str) -> tuple[str, ...] | None:
        self._send({"type": "handshake", "features": list(self._schema.names), "task": task})
        msg = self._read_message()
        if msg.get("type") != "ready":
            raise ProtocolError(
                f"expected ready message, got {msg.get('type')!r}", code="protocol-handshake"
            )
        classes = msg.get("classes")
        if task == CLASSIFICATION:
            if not isinstance(classes, list) or len(classes) < 2:
                raise ProtocolError(
                    "classification predictor must announce >= 2 classes",
                    code="protocol-handshake",
                )
            return tuple(str(c) for c in classes)
        if task == REGRESSION and classes:
            raise ProtocolError(
                "regression predictor must not announce classes", code="protocol-handshake"
            )
        return None

    # -- prediction -------------------------------------------------------

    def _roundtrip(self, batch: Sequence[Instance]) -> np.ndarray:
        chunks: list[np.ndarray] = []
        with self._lock:
            for start in range(0, len(batch), self._batch_cap):
                chunks.append(self._request(batch[start : start + self._batch_cap]))
        return np.vstack(chunks)

    def _request(self, chunk: Sequence[Instance]) -> np.ndarray:
        self._request_id += 1
        rid = self._request_id
        self._send(
            {"type": "predict", "id": rid, "instances": [list(inst) for inst in chunk]}
        )
        msg = self._read_message()
        if msg.get("type") != "scores" or msg.get("id") != rid:
            raise ProtocolError(
                f"unexpected predictor message {msg.get('type')!r}",
                code="protocol-unexpected-message",
            )
        scores = msg.get("scores")
        if not isinstance(scores, list) or len(scores) != len(chunk):
            got = len(scores) if isinstance(scores, list) else "none"
            raise ProtocolError(
                f"predictor returned {got} score rows for {len(chunk)} instances",
                code="protocol-wrong-length",
            )
        width = None
        for row in scores:
            if not isinstance(row, list) or not row:
                raise ProtocolError("score rows must be non-empty arrays", code="protocol-wrong-length")
            if width is None:
                width = len(row)
            elif len(row) != width:
                raise ProtocolError("ragged score rows", code="protocol-wrong-length")
            for s in row:
                if isinstance(s, bool) or not isinstance(s, (int, float)):
                    raise ProtocolError(
                        f"non-numeric score {s!r}", code="protocol-nonnumeric-score"
                    )
        return np.asarray(scores, dtype=np.float64)

    # -- lifecycle ----------------------------------------------------------

    def close(self) -> None:
        if self._proc.poll() is None:
            try:
                if self._proc.stdin:
                    self._proc.stdin.close()
                self._proc.wait(timeout=2.0)
            except (OSError, subprocess.TimeoutExpired):
                self._proc.kill()
                self._proc.wait()

    def __enter__(self) -> "ExternalPredictor":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    def __del__(self):
        try:
            self.close()
        except Exception:
            pass


def spawn_external_predictor(
    command: str | Sequence[str],
    schema: FeatureSchema,
    task: str = CLASSIFICATION,
    timeout: float = 30.0,
    batch_cap: int = DEFAULT_BATCH_CAP,
) -> ExternalPredictor:
    """Launch *command* and complete the handshake, or raise a protocol error."""
    return ExternalPredictor(command, schema, task, timeout=timeout, batch_cap=batch_cap)
