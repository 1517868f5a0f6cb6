"""Subprocess client for external restoration/detection workers.

A worker is any spawnable command that speaks a line-JSON protocol:

* on start it prints a handshake line ``{"protocol": 1, "capacity": n}``;
* the client writes one job per line to its stdin:
  ``{"task": ..., "params": {...}, "input": "in.png", "output": "out"}``;
* the worker writes its result to the output path — a PNG for
  restoration tasks, a JSON record ``{"id": ..., "score": ...}`` for
  detection tasks — and echoes a status line ``{"status": "ok"}`` (or
  ``{"status": "error", "message": ...}``) on stdout.

Payloads travel through files, control through pipes, so a conforming
worker can be written in any ecosystem.  The client never looks inside
the models; it enforces only the protocol and the per-task result
contracts (dimension preservation, doubled dimensions for the x2
upscaler, scores within [0, 1]).
"""

from __future__ import annotations

import json
import queue
import shlex
import subprocess
import threading
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

from PIL import Image

from .errors import (
    WorkerContractError,
    WorkerError,
    WorkerExitError,
    WorkerProtocolError,
    WorkerTimeoutError,
)

__all__ = [
    "RESTORE_TASKS",
    "DETECT_TASKS",
    "TASKS",
    "WorkerRequest",
    "WorkerClient",
    "call_worker",
]

RESTORE_TASKS = ("fbcnn", "restormer-denoise", "swinfir-x2")
DETECT_TASKS = ("detect-trufor", "detect-earlyfusion")
TASKS = RESTORE_TASKS + DETECT_TASKS

# which params each task accepts; restormer additionally *requires* sigma
_ALLOWED_PARAMS = {
    "fbcnn": {"quality"},
    "restormer-denoise": {"sigma"},
    "swinfir-x2": set(),
    "detect-trufor": set(),
    "detect-earlyfusion": set(),
}


@dataclass(frozen=True)
class WorkerRequest:
    """One job for a worker: a task name, its params, and the payload paths."""

    task: str
    input_path: Path
    output_path: Path
    params: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.task not in TASKS:
            raise ValueError(f"unknown task {self.task!r}; expected one of {TASKS}")
        allowed = _ALLOWED_PARAMS[self.task]
        unknown = set(self.params) - allowed
        if unknown:
            raise ValueError(
                f"params {sorted(unknown)} not valid for task {self.task!r}"
            )
        if self.task == "restormer-denoise":
            sigma = self.params.get("sigma")
            if sigma is None or not float(sigma) >= 0:
                raise ValueError("restormer-denoise requires params['sigma'] >= 0")
        object.__setattr__(self, "input_path", Path(self.input_path))
        object.__setattr__(self, "output_path", Path(self.output_path))

    @property
    def is_detection(self) -> bool:
        return self.task in DETECT_TASKS

    def job_line(self) -> str:
        return json.dumps(
            {
                "task": self.task,
                "params": dict(self.params),
                "input": str(self.input_path),
                "output": str(self.output_path),
            }
        )


def _png_size(path: Path):
    with Image.open(path) as im:
        return im.size  # (width, height)


class WorkerClient:
    """Spawns a worker command and issues jobs over the line protocol.

    The client is thread-safe: concurrent callers are serialized (the
    default worker capacity is 1).  ``submit_many`` pipelines up to the
    worker's declared capacity.  Use as a context manager or call
    :meth:`close`.
    """

    def __init__(self, command, *, timeout: float = 120.0):
        if isinstance(command, str):
            command = shlex.split(command)
        if not command:
            raise ValueError("worker command is empty")
        self._command = list(command)
        self._timeout = float(timeout)
        self._proc = None
        self._lines: queue.Queue = queue.Queue()
        self._stderr: deque = deque(maxlen=200)
        self._lock = threading.Lock()
        self._capacity = 1

    # -- lifecycle ---------------------------------------------------------

    @property
    def capacity(self) -> int:
        return self._capacity

    @property
    def started(self) -> bool:
        return self._proc is not None

    def start(self) -> dict:
        """Spawn the worker and validate its handshake line."""
        if self._proc is not None:
            raise RuntimeError("worker already started")
        try:
            self._proc = subprocess.Popen(
                self._command,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                stderr=subprocess.PIPE,
                text=True,
                bufsize=1,
            )
        except OSError as exc:
            raise WorkerExitError(f"could not spawn worker {self._command!r}: {exc}") from exc
        threading.Thread(target=self._drain_stdout, daemon=True).start()
        threading.Thread(target=self._drain_stderr, daemon=True).start()
        line = self._next_line("handshake")
        try:
            handshake = json.loads(line)
        except json.JSONDecodeError:
            self.close()
            raise WorkerProtocolError(f"unparseable handshake line: {line!r}") from None
        if handshake.get("protocol") != 1:
            self.close()
            raise WorkerProtocolError(
                f"unsupported protocol {handshake.get('protocol')!r} (need 1)"
            )
        capacity = handshake.get("capacity", 1)
        if not isinstance(capacity, int) or capacity < 1:
            self.close()
            raise WorkerProtocolError(f"bad capacity {capacity!r}")
        self._capacity = capacity
        return handshake

    def close(self) -> None:
        proc, self._proc = self._proc, None
        if proc is None:
            return
        try:
            if proc.stdin:
                proc.stdin.close()
            proc.wait(timeout=5.0)
        except (OSError, subprocess.TimeoutExpired):
            proc.kill()
            proc.wait()

    def __enter__(self) -> "WorkerClient":
        self.start()
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    # -- plumbing ----------------------------------------------------------

    def _drain_stdout(self) -> None:
        proc = self._proc
        for line in proc.stdout:
            self._lines.put(line)
        self._lines.put(None)  # EOF sentinel

    def _drain_stderr(self) -> None:
        proc = self._proc
        for line in proc.stderr:
            self._stderr.append(line.rstrip("\n"))

    def _stderr_tail(self) -> str:
        return "\n".join(self._stderr) or "<no stderr output>"

    def _next_line(self, what: str) -> str:
        try:
            line = self._lines.get(timeout=self._timeout)
        except queue.Empty:
            self.close()
            raise WorkerTimeoutError(
                f"no {what} from worker within {self._timeout:.0f}s; stderr:\n"
                + self._stderr_tail()
            ) from None
        if line is None:
            proc = self._proc
            code = proc.poll() if proc else None
            self.close()
            raise WorkerExitError(
                f"worker exited (code {code}) before sending {what}; stderr:\n"
                + self._stderr_tail()
            )
        return line.strip()

    def _send(self, req: WorkerRequest) -> None:
        try:
            self._proc.stdin.write(req.job_line() + "\n")
            self._proc.stdin.flush()
        except (OSError, ValueError, AttributeError):
            code = self._proc.poll() if self._proc else None
            self.close()
            raise WorkerExitError(
                f"worker pipe closed (exit code {code}); stderr:\n" + self._stderr_tail()
            ) from None

    def _read_status(self) -> dict:
        line = self._next_line("status")
        try:
            status = json.loads(line)
        except json.JSONDecodeError:
            self.close()
            raise WorkerProtocolError(f"unparseable status line: {line!r}") from None
        if not isinstance(status, dict) or "status" not in status:
            self.close()
            raise WorkerProtocolError(f"status line missing 'status' field: {line!r}")
        return status

    def _check_result(self, req: WorkerRequest, status: dict):
        if status["status"] != "ok":
            raise WorkerError(
                f"worker reported failure for {req.task}: "
                f"{status.get('message', '<no message>')}; stderr:\n" + self._stderr_tail()
            )
        if not req.output_path.exists():
            raise WorkerProtocolError(
                f"worker claimed success but {req.output_path} does not exist"
            )
        if req.is_detection:
            try:
                record = json.loads(req.output_path.read_text())
            except (json.JSONDecodeError, UnicodeDecodeError):
                raise WorkerProtocolError(
                    f"detection output {req.output_path} is not a JSON record"
                ) from None
            score = record.get("score")
            if not isinstance(score, (int, float)) or not 0.0 <= float(score) <= 1.0:
                raise WorkerContractError(f"detection score out of [0, 1]: {score!r}")
            return record
        in_w, in_h = _png_size(req.input_path)
        out_w, out_h = _png_size(req.output_path)
        if req.task == "swinfir-x2":
            want = (2 * in_w, 2 * in_h)
        else:
            want = (in_w, in_h)
        if (out_w, out_h) != want:
            raise WorkerContractError(
                f"{req.task} output is {out_w}x{out_h}, contract requires "
                f"{want[0]}x{want[1]} for {in_w}x{in_h} input"
            )
        return req.output_path

    # -- public API --------------------------------------------------------

    def call(self, req: WorkerRequest):
        """Run one job; returns the output path (restoration) or the parsed
        score record (detection)."""
        with self._lock:
            if self._proc is None:
                self.start()
            self._send(req)
            status = self._read_status()
            return self._check_result(req, status)

    def submit_many(self, reqs):
        """Run a batch of jobs, pipelining up to the worker's capacity.

        Results come back in request order.  The first failure aborts the
        remaining jobs and propagates.
        """
        reqs = list(reqs)
        results = []
        with self._lock:
            if self._proc is None:
                self.start()
            inflight: deque = deque()
            pending = iter(reqs)
            sent = 0
            while len(results) < len(reqs):
                while len(inflight) < self._capacity and sent < len(reqs):
                    req = next(pending)
                    self._send(req)
                    inflight.append(req)
                    sent += 1
                req = inflight.popleft()
                status = self._read_status()
                results.append(self._check_result(req, status))
        return results


def call_worker(endpoint, req: WorkerRequest, timeout: float = 120.0):
    """One-shot convenience: spawn ``endpoint``, run one job, shut down."""
    with WorkerClient(endpoint, timeout=timeout) as client:
        return client.call(req)
