"""Task registry: which model serves which protocol task.

A registry maps protocol task names (``fbcnn``, ``restormer-denoise``,
``swinfir-x2``, ``detect-trufor``, ``detect-earlyfusion``, or the
scripted stand-ins) to a model entry: adapter family, checkpoint
path(s), device, and family-specific preprocessing knobs.

``validate()`` runs before the protocol handshake so a worker never
advertises a task it cannot serve: unknown families and missing
checkpoint files are reported up front with the task name attached.
Model tensors themselves load lazily on the first job for a task — one
process multiplexes all registered tasks, and loading everything up
front would defeat the point of sharing it.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path


class RegistryError(Exception):
    """The registry cannot serve what it advertises."""


# The protocol's canonical tasks and the adapter kind each one requires.
# Extra task names may be registered freely (useful for scripted tests);
# these five are what the toolkit's pipelines actually request.
_CANONICAL_KINDS = {
    "fbcnn": "restore",
    "restormer-denoise": "restore",
    "swinfir-x2": "restore",
    "detect-trufor": "detect",
    "detect-earlyfusion": "detect",
}


@dataclass(frozen=True)
class ModelEntry:
    """One task binding: family picks the adapter, weights its checkpoint(s).

    ``weights`` is a single path for most families; the denoiser families
    take a mapping of training-sigma name to path (``{"15": ..., "25": ...}``).
    ``preprocess`` carries family-specific knobs (padding multiple, etc.).
    """

    task: str
    family: str
    weights: object
    device: str = "cpu"
    preprocess: dict = field(default_factory=dict)


class ModelRegistry:
    def __init__(self, entries):
        entries = list(entries)
        seen = set()
        for e in entries:
            if e.task in seen:
                raise RegistryError(f"task {e.task!r} registered twice")
            seen.add(e.task)
        if not entries:
            raise RegistryError("registry has no tasks")
        self._entries = {e.task: e for e in entries}
        self._adapters = {}

    @property
    def tasks(self):
        return tuple(self._entries)

    def entry(self, task: str) -> ModelEntry:
        if task not in self._entries:
            raise KeyError(f"unknown task {task!r}; serving: {', '.join(self.tasks)}")
        return self._entries[task]

    def validate(self) -> None:
        """Check every advertised task is resolvable. Run before the handshake."""
        from .adapters import FAMILIES

        problems = []
        for e in self._entries.values():
            if e.family not in FAMILIES:
                problems.append(
                    f"task {e.task!r}: unknown family {e.family!r} "
                    f"(known: {', '.join(sorted(FAMILIES))})"
                )
                continue
            expected_kind = _CANONICAL_KINDS.get(e.task)
            if expected_kind and FAMILIES[e.family].kind != expected_kind:
                problems.append(
                    f"task {e.task!r} needs a {expected_kind} adapter, "
                    f"family {e.family!r} is {FAMILIES[e.family].kind}"
                )
                continue
            try:
                FAMILIES[e.family].check_entry(e)
            except (RegistryError, ValueError) as exc:
                problems.append(f"task {e.task!r}: {exc}")
        if problems:
            raise RegistryError("; ".join(problems))

    def adapter_for(self, task: str):
        """Instantiated (but possibly not yet loaded) adapter for a task."""
        if task not in self._adapters:
            from .adapters import FAMILIES

            e = self.entry(task)
            self._adapters[task] = FAMILIES[e.family](e)
        return self._adapters[task]


def _require_file(path, what: str) -> None:
    if not Path(path).is_file():
        raise RegistryError(f"{what} checkpoint not found: {path}")


def load_config(path) -> ModelRegistry:
    """Build a registry from a JSON config file.

    Layout::

        {
          "device": "cpu",                      # default for all tasks
          "tasks": {
            "fbcnn": {"family": "fbcnn", "weights": "/w/fbcnn.pt"},
            "restormer-denoise": {
              "family": "restormer",
              "weights": {"15": "/w/r15.pt", "25": "/w/r25.pt"}
            },
            ...
          }
        }

    Per-task ``device``/``preprocess`` override the defaults.
    """
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise RegistryError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise RegistryError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict) or not isinstance(raw.get("tasks"), dict):
        raise RegistryError(f"config {path} needs a top-level 'tasks' object")
    default_device = raw.get("device", "cpu")
    entries = []
    for task, body in raw["tasks"].items():
        if not isinstance(body, dict) or "family" not in body or "weights" not in body:
            raise RegistryError(f"task {task!r} needs 'family' and 'weights'")
        entries.append(
            ModelEntry(
                task=task,
                family=body["family"],
                weights=body["weights"],
                device=body.get("device", default_device),
                preprocess=body.get("preprocess", {}),
            )
        )
    return ModelRegistry(entries)
