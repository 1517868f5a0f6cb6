"""The protocol loop: handshake, then one JSON job per stdin line.

Every job line gets exactly one status line back — ``{"status": "ok"}``
after the output file is in place, or ``{"status": "error", "message"}``
with the traceback on stderr. The loop never dies on a bad job; only
EOF (client closed stdin) ends it. Capacity is 1: jobs run strictly in
arrival order, which is the honest number for GPU-bound inference.
"""

from __future__ import annotations

import json
import sys
import traceback

from .registry import ModelRegistry

PROTOCOL_VERSION = 1
CAPACITY = 1


def _status_ok(stdout) -> None:
    print(json.dumps({"status": "ok"}), file=stdout, flush=True)


def _status_error(stdout, message: str) -> None:
    print(json.dumps({"status": "error", "message": message}), file=stdout, flush=True)


def _parse_job(line: str) -> tuple:
    job = json.loads(line)
    if not isinstance(job, dict):
        raise ValueError("job line must be a JSON object")
    for key in ("task", "input", "output"):
        if not isinstance(job.get(key), str):
            raise ValueError(f"job needs string field {key!r}")
    params = job.get("params", {})
    if not isinstance(params, dict):
        raise ValueError("params must be an object")
    return job["task"], job["input"], job["output"], params


def serve(registry: ModelRegistry, stdin=None, stdout=None) -> int:
    """Validate the registry, emit the handshake, then serve until EOF."""
    stdin = stdin if stdin is not None else sys.stdin
    stdout = stdout if stdout is not None else sys.stdout

    registry.validate()  # advertise nothing we cannot serve
    print(
        json.dumps({"protocol": PROTOCOL_VERSION, "capacity": CAPACITY}),
        file=stdout,
        flush=True,
    )
    for line in stdin:
        line = line.strip()
        if not line:
            continue
        try:
            task, input_path, output_path, params = _parse_job(line)
        except (json.JSONDecodeError, ValueError) as exc:
            _status_error(stdout, f"bad job line: {exc}")
            continue
        try:
            adapter = registry.adapter_for(task)
        except KeyError as exc:
            _status_error(stdout, str(exc.args[0]))
            continue
        try:
            adapter.ensure_loaded()
            adapter.run(input_path, output_path, params)
        except Exception as exc:
            traceback.print_exc(file=sys.stderr)
            sys.stderr.flush()
            _status_error(stdout, f"{type(exc).__name__}: {exc}")
            continue
        _status_ok(stdout)
    return 0
