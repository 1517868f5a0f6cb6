"""A scripted stand-in worker for tests and dry runs.

Implements the full worker protocol with deterministic, model-free
behavior: restoration tasks copy pixels through unchanged (the x2
upscaler doubles them with nearest-neighbour), detection tasks hash the
payload bytes into a stable score.  Useful for exercising pipelines and
the protocol client without any pretrained weights.

Run with ``python3 -m antiforensics.workerstub``.  The failure-injection
flags exist so client error paths can be tested against a real
subprocess.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from pathlib import Path

import numpy as np

from .image import ImageBuffer, load_png, save_png


def _detect_score(path: Path) -> float:
    digest = hashlib.blake2b(path.read_bytes()).digest()
    return int.from_bytes(digest[:8], "little") / 2**64


def _handle(job: dict, args) -> dict:
    task = job["task"]
    src = Path(job["input"])
    dst = Path(job["output"])
    if args.fail_task and task == args.fail_task:
        return {"status": "error", "message": f"injected failure for {task}"}
    if task in ("fbcnn", "restormer-denoise"):
        save_png(load_png(src), dst)
    elif task == "swinfir-x2":
        arr = load_png(src).data
        if args.break_dims:
            up = arr
        else:
            up = np.repeat(np.repeat(arr, 2, axis=0), 2, axis=1)
        save_png(ImageBuffer(up), dst)
    elif task in ("detect-trufor", "detect-earlyfusion"):
        record = {"id": src.stem, "score": _detect_score(src)}
        dst.write_text(json.dumps(record))
    else:
        return {"status": "error", "message": f"unknown task {task!r}"}
    return {"status": "ok", "output": str(dst)}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--capacity", type=int, default=1)
    parser.add_argument("--sleep", type=float, default=0.0, help="seconds per job")
    parser.add_argument("--protocol-version", type=int, default=1)
    parser.add_argument("--bad-handshake", action="store_true", help="emit garbage instead of JSON")
    parser.add_argument("--garbage-status", action="store_true", help="answer jobs with non-JSON")
    parser.add_argument("--break-dims", action="store_true", help="violate the x2 contract")
    parser.add_argument("--fail-task", default=None, help="report error status for this task")
    parser.add_argument("--exit-after", type=int, default=None, help="die after N jobs")
    args = parser.parse_args(argv)

    if args.bad_handshake:
        print("hello there")
    else:
        print(json.dumps({"protocol": args.protocol_version, "capacity": args.capacity}))
    sys.stdout.flush()

    handled = 0
    for line in sys.stdin:
        line = line.strip()
        if not line:
            continue
        if args.sleep:
            time.sleep(args.sleep)
        if args.exit_after is not None and handled >= args.exit_after:
            print("stub worker: giving up", file=sys.stderr)
            return 17
        try:
            job = json.loads(line)
            status = _handle(job, args)
        except Exception as exc:  # noqa: BLE001 - report, keep serving
            status = {"status": "error", "message": f"{type(exc).__name__}: {exc}"}
        handled += 1
        if args.garbage_status:
            print("not json at all")
        else:
            print(json.dumps(status))
        sys.stdout.flush()
    return 0


if __name__ == "__main__":
    sys.exit(main())
