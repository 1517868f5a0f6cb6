"""Detection metrics, dataset manifests, and report/plot-data emission.

The detection side consumes two tiny CSV contracts — a manifest
(``id,path,label``) and a predictions file (``id,score``) — so that
metric computation never depends on how scores were produced.  The
reporting side turns per-method aggregates into aligned text tables,
CSV, and plot-ready rank/bar series.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

from .errors import SchemaError
from .iqa import QualityRecord

__all__ = [
    "DatasetManifest",
    "ConfusionCounts",
    "DetectionMetrics",
    "confusion",
    "metrics",
    "load_manifest",
    "load_predictions",
    "load_quality_rows",
    "load_detection_rows",
    "quality_table",
    "detection_table",
    "plot_data",
    "parse_table_csv",
]

_LABELS = ("forged", "authentic")


@dataclass(frozen=True)
class DatasetManifest:
    """A named list of (image-id, path, label) entries with unique ids."""

    name: str
    entries: tuple

    def __post_init__(self) -> None:
        seen = set()
        for entry in self.entries:
            image_id, _path, label = entry
            if label not in _LABELS:
                raise ValueError(f"label must be one of {_LABELS}, got {label!r}")
            if image_id in seen:
                raise ValueError(f"duplicate image id {image_id!r}")
            seen.add(image_id)
        object.__setattr__(self, "entries", tuple(tuple(e) for e in self.entries))

    def labels(self) -> dict:
        return {image_id: label for image_id, _path, label in self.entries}


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    tn: int
    fp: int
    fn: int

    def __post_init__(self) -> None:
        for field in ("tp", "tn", "fp", "fn"):
            if getattr(self, field) < 0:
                raise ValueError(f"{field} must be non-negative")

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn


@dataclass(frozen=True)
class DetectionMetrics:
    """Accuracy and recall; recall is None when there are no positives."""

    accuracy: float
    recall: float | None

    def __post_init__(self) -> None:
        if not 0.0 <= self.accuracy <= 1.0:
            raise ValueError(f"accuracy out of [0, 1]: {self.accuracy}")
        if self.recall is not None and not 0.0 <= self.recall <= 1.0:
            raise ValueError(f"recall out of [0, 1]: {self.recall}")


def confusion(predictions: dict, manifest: DatasetManifest, threshold: float = 0.5) -> ConfusionCounts:
    """Count TP/TN/FP/FN; forged is the positive class, positive iff score >= threshold."""
    missing = [image_id for image_id, _p, _l in manifest.entries if image_id not in predictions]
    if missing:
        raise ValueError(f"missing predictions for: {', '.join(sorted(missing))}")
    tp = tn = fp = fn = 0
    for image_id, _path, label in manifest.entries:
        positive = predictions[image_id] >= threshold
        if label == "forged":
            if positive:
                tp += 1
            else:
                fn += 1
        else:
            if positive:
                fp += 1
            else:
                tn += 1
    return ConfusionCounts(tp=tp, tn=tn, fp=fp, fn=fn)


def metrics(c: ConfusionCounts) -> DetectionMetrics:
    """Accuracy (TP+TN)/total and recall TP/(TP+FN); no positives -> recall None."""
    if c.total == 0:
        raise ValueError("empty confusion counts")
    accuracy = (c.tp + c.tn) / c.total
    recall = None if c.tp + c.fn == 0 else c.tp / (c.tp + c.fn)
    return DetectionMetrics(accuracy=accuracy, recall=recall)


# --------------------------------------------------------------------------
# CSV contracts
# --------------------------------------------------------------------------


def _read_csv_rows(text: str, expected_header: tuple, what: str):
    reader = csv.reader(io.StringIO(text))
    rows = list(reader)
    if not rows:
        raise SchemaError(f"empty {what} file", 1)
    if tuple(h.strip() for h in rows[0]) != expected_header:
        raise SchemaError(
            f"{what} header must be {','.join(expected_header)!r}, got {rows[0]!r}", 1
        )
    body = []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) != len(expected_header):
            raise SchemaError(
                f"{what} row needs {len(expected_header)} fields, got {len(row)}", lineno
            )
        body.append((lineno, [cell.strip() for cell in row]))
    if not body:
        raise SchemaError(f"{what} file has a header but no rows", 1)
    return body


def load_manifest(path, name: str | None = None) -> DatasetManifest:
    """Read a manifest CSV with header ``id,path,label``."""
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    entries = []
    for lineno, (image_id, img_path, label) in _read_csv_rows(text, ("id", "path", "label"), "manifest"):
        if label not in _LABELS:
            raise SchemaError(f"label must be one of {_LABELS}, got {label!r}", lineno)
        entries.append((image_id, img_path, label))
    try:
        return DatasetManifest(name=name or str(path), entries=tuple(entries))
    except ValueError as exc:
        raise SchemaError(str(exc), 1) from exc


def load_predictions(path) -> dict:
    """Read a predictions CSV with header ``id,score``; scores must be in [0, 1]."""
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    out = {}
    for lineno, (image_id, score_text) in _read_csv_rows(text, ("id", "score"), "predictions"):
        try:
            score = float(score_text)
        except ValueError:
            raise SchemaError(f"bad score {score_text!r}", lineno) from None
        if not 0.0 <= score <= 1.0:
            raise SchemaError(f"score out of [0, 1]: {score}", lineno)
        if image_id in out:
            raise SchemaError(f"duplicate prediction for {image_id!r}", lineno)
        out[image_id] = score
    return out


def _parse_float(text: str, lineno: int, what: str, allow_na: bool = False):
    if allow_na and text == "n/a":
        return None
    if text == "inf":
        return math.inf
    try:
        return float(text)
    except ValueError:
        raise SchemaError(f"bad {what} value {text!r}", lineno) from None


def load_quality_rows(path):
    """Read per-method quality aggregates: ``dataset,method,psnr,ssim,brisque``."""
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    rows = []
    for lineno, (dataset, method, psnr_t, ssim_t, brisque_t) in _read_csv_rows(
        text, ("dataset", "method", "psnr", "ssim", "brisque"), "quality"
    ):
        rows.append(
            {
                "dataset": dataset,
                "method": method,
                "psnr": _parse_float(psnr_t, lineno, "psnr"),
                "ssim": _parse_float(ssim_t, lineno, "ssim"),
                "brisque": _parse_float(brisque_t, lineno, "brisque"),
            }
        )
    return rows


def load_detection_rows(path):
    """Read detection aggregates: ``dataset,detector,method,accuracy,recall``."""
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    rows = []
    for lineno, (dataset, detector, method, acc_t, rec_t) in _read_csv_rows(
        text, _DETECTION_HEADER, "detection"
    ):
        rows.append(
            {
                "dataset": dataset,
                "detector": detector,
                "method": method,
                "accuracy": _parse_float(acc_t, lineno, "accuracy"),
                "recall": _parse_float(rec_t, lineno, "recall", allow_na=True),
            }
        )
    return rows


# --------------------------------------------------------------------------
# tables
# --------------------------------------------------------------------------

_QUALITY_HEADER = ("dataset", "method", "psnr", "ssim", "brisque")
_DETECTION_HEADER = ("dataset", "detector", "method", "accuracy", "recall")


@dataclass(frozen=True)
class TableArtifact:
    """A rendered table: machine CSV plus aligned human-readable text."""

    csv_text: str
    text: str
    rows: tuple


def _fmt(value) -> str:
    if value is None:
        return "n/a"
    if isinstance(value, float):
        if math.isinf(value):
            return "inf"
        return f"{value:.4f}".rstrip("0").rstrip(".") if value != int(value) else f"{value:.1f}"
    return str(value)


def _aligned(header, rows) -> str:
    table = [list(header)] + [[_fmt(v) for v in row] for row in rows]
    widths = [max(len(r[i]) for r in table) for i in range(len(header))]
    lines = []
    for i, row in enumerate(table):
        lines.append("  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip())
        if i == 0:
            lines.append("  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def _best_two_marks(values, higher_better: bool):
    """Rank marks '1'/'2' for the best two distinct-or-tied values, '' otherwise.

    Ties share the better rank: {37.1, 37.1, 34.0} marks both 37.1 as rank 1
    and 34.0 as rank 2.
    """
    order = sorted(set(v for v in values if v is not None), reverse=higher_better)
    marks = []
    for v in values:
        if v is None:
            marks.append("")
        elif v == order[0]:
            marks.append("1")
        elif len(order) > 1 and v == order[1]:
            marks.append("2")
        else:
            marks.append("")
    return marks


def quality_table(rows) -> TableArtifact:
    """Render per-method quality aggregates with best-two rank markers.

    ``rows`` is a sequence of mappings or records with dataset, method and
    mean psnr/ssim/brisque values (``QualityRecord`` works for the metric
    part).  Markers are computed within each dataset: higher is better for
    PSNR/SSIM, lower for BRISQUE.
    """
    normalised = []
    for row in rows:
        if isinstance(row, dict):
            rec = row
        else:
            raise TypeError(f"expected mapping rows, got {type(row).__name__}")
        quality = rec.get("quality")
        if isinstance(quality, QualityRecord):
            psnr_v, ssim_v, brisque_v = quality.psnr, quality.ssim, quality.brisque
        else:
            psnr_v, ssim_v, brisque_v = rec["psnr"], rec["ssim"], rec["brisque"]
        normalised.append([rec["dataset"], rec["method"], psnr_v, ssim_v, brisque_v])
    if not normalised:
        raise ValueError("quality table needs at least one row")

    out_rows = []
    datasets = []
    for ds in [r[0] for r in normalised]:
        if ds not in datasets:
            datasets.append(ds)
    for ds in datasets:
        group = [r for r in normalised if r[0] == ds]
        marks = [
            _best_two_marks([r[col] for r in group], higher_better=(col != 4))
            for col in (2, 3, 4)
        ]
        for i, r in enumerate(group):
            out_rows.append(tuple(r) + (marks[0][i], marks[1][i], marks[2][i]))
    header = _QUALITY_HEADER + ("psnr_rank", "ssim_rank", "brisque_rank")
    return TableArtifact(
        csv_text=_csv_text(header, out_rows),
        text=_aligned(header, out_rows),
        rows=tuple(out_rows),
    )


def detection_table(rows) -> TableArtifact:
    """Render detection aggregates (accuracy/recall) with best-two markers.

    Detection ranking is inverted relative to quality: an anti-forensics
    method is better when the detector does worse, so the best-two marks
    go to the lowest accuracy/recall within each (dataset, detector)
    group.
    """
    normalised = []
    for rec in rows:
        normalised.append(
            [rec["dataset"], rec["detector"], rec["method"], rec["accuracy"], rec["recall"]]
        )
    if not normalised:
        raise ValueError("detection table needs at least one row")
    out_rows = []
    groups = []
    for key in [(r[0], r[1]) for r in normalised]:
        if key not in groups:
            groups.append(key)
    for key in groups:
        group = [r for r in normalised if (r[0], r[1]) == key]
        acc_marks = _best_two_marks([r[3] for r in group], higher_better=False)
        rec_marks = _best_two_marks([r[4] for r in group], higher_better=False)
        for i, r in enumerate(group):
            out_rows.append(tuple(r) + (acc_marks[i], rec_marks[i]))
    header = _DETECTION_HEADER + ("accuracy_rank", "recall_rank")
    return TableArtifact(
        csv_text=_csv_text(header, out_rows),
        text=_aligned(header, out_rows),
        rows=tuple(out_rows),
    )


def parse_table_csv(text: str):
    """Parse a table CSV produced here back into header + typed rows."""
    reader = csv.reader(io.StringIO(text))
    rows = list(reader)
    if not rows:
        raise SchemaError("empty table", 1)
    header = tuple(rows[0])
    parsed = []
    for row in rows[1:]:
        if not row:
            continue
        typed = []
        for cell in row:
            if cell == "n/a":
                typed.append(None)
            elif cell == "inf":
                typed.append(math.inf)
            else:
                try:
                    typed.append(float(cell) if "." in cell or "e" in cell else cell)
                except ValueError:
                    typed.append(cell)
        parsed.append(tuple(typed))
    return header, parsed


# --------------------------------------------------------------------------
# plot data
# --------------------------------------------------------------------------


def _ranks(values, higher_better: bool):
    """Competition ranks, 1 = best; ties share the better rank."""
    order = sorted(set(values), reverse=higher_better)
    position = {}
    rank = 1
    for v in order:
        position[v] = rank
        rank += values.count(v)
    return [position[v] for v in values]


def plot_data(quality_rows, detection_rows=()) -> dict:
    """Emit plot-ready CSV bundles.

    ``radar.csv`` holds per-(dataset, metric) rank series over methods:
    rank 1 is the best method and ``radius`` maps it furthest from the
    centre ((n - rank + 1) / n).  ``bars.csv`` holds grouped
    accuracy/recall series per detector.  Rendering is left to external
    tools.
    """
    radar_rows = []
    quality_rows = list(quality_rows)
    datasets = []
    for r in quality_rows:
        if r["dataset"] not in datasets:
            datasets.append(r["dataset"])
    for ds in datasets:
        group = [r for r in quality_rows if r["dataset"] == ds]
        n = len(group)
        for metric, higher in (("psnr", True), ("ssim", True), ("brisque", False)):
            ranks = _ranks([r[metric] for r in group], higher)
            for r, rank in zip(group, ranks):
                radius = (n - rank + 1) / n
                radar_rows.append((ds, metric, r["method"], rank, radius))
    bundles = {
        "radar.csv": _csv_text(("dataset", "metric", "method", "rank", "radius"), radar_rows)
    }
    detection_rows = list(detection_rows)
    if detection_rows:
        bar_rows = [
            (r["dataset"], r["detector"], r["method"], r["accuracy"], r["recall"])
            for r in detection_rows
        ]
        bundles["bars.csv"] = _csv_text(_DETECTION_HEADER, bar_rows)
    return bundles
