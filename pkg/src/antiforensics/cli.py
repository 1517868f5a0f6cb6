"""Command-line interface.

Four subcommands bind the library into reproducible batch runs:

* ``transform`` - run one anti-forensics method over a directory
* ``metrics``   - PSNR/SSIM/BRISQUE for ref/dist directory pairs
* ``evaluate``  - confusion counts + accuracy/recall from manifest and
  prediction CSVs
* ``report``    - merge metric CSVs into tables and plot-data bundles

Exit codes: 0 success, 2 usage or schema problem, 3 partial batch
failure, 4 worker failure.  Every flag can also be supplied from a
config file (flat ``key = value`` lines, a small TOML subset) passed
with ``--config``; explicit flags win over config values.
"""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

from .errors import AntiforensicsError, ConfigError, SchemaError, WorkerError
from .evalreport import (
    confusion,
    detection_table,
    load_detection_rows,
    load_manifest,
    load_predictions,
    load_quality_rows,
    metrics as detection_metrics,
    plot_data,
    quality_table,
)
from .image import load_png
from .iqa import BrisqueModel, load_default_model, quality_record
from .pipelines import (
    CORRUPTION_ONLY_SUFFIX,
    METHODS,
    PipelineSpec,
    run_batch,
    write_report,
)

__all__ = ["main", "parse_config"]

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_PARTIAL = 3
EXIT_WORKER = 4

# config keys mirror argparse dest names; values are coercion targets
_CONFIG_KEYS = {
    "method": str,
    "input_dir": str,
    "output_dir": str,
    "quality": int,
    "sigma": float,
    "seed": int,
    "jobs": int,
    "worker": str,
    "ref_dir": str,
    "dist_dir": str,
    "out_csv": str,
    "brisque_model": str,
    "luma": bool,
    "manifest": str,
    "predictions": str,
    "threshold": float,
    "name": str,
    "out_dir": str,
}


def parse_config(path) -> dict:
    """Parse a flat ``key = value`` config file (TOML subset).

    Supported values: double-quoted strings, integers, floats, and
    ``true``/``false``.  ``#`` starts a comment.  Unknown or ill-typed
    keys raise :class:`ConfigError`.
    """
    values: dict = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, _, value_text = line.partition("=")
        key = key.strip()
        value_text = value_text.strip()
        if key not in _CONFIG_KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        target = _CONFIG_KEYS[key]
        try:
            if value_text.startswith('"'):
                if not value_text.endswith('"') or len(value_text) < 2:
                    raise ValueError("unterminated string")
                value = value_text[1:-1]
                if target is not str:
                    raise ValueError(f"{key} expects {target.__name__}")
            elif value_text in ("true", "false"):
                value = value_text == "true"
                if target is not bool:
                    raise ValueError(f"{key} expects {target.__name__}")
            else:
                if target is bool:
                    raise ValueError(f"{key} expects true/false")
                value = target(value_text)
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: {exc}") from None
        values[key] = value
    return values


def _apply_config(args: argparse.Namespace) -> None:
    """Fill unset (None/False) options from the config file; flags win."""
    if not getattr(args, "config", None):
        return
    config = parse_config(args.config)
    for key, value in config.items():
        if not hasattr(args, key):
            continue  # key belongs to a different subcommand
        current = getattr(args, key)
        if current is None or current is False:
            setattr(args, key, value)


# --------------------------------------------------------------------------
# transform
# --------------------------------------------------------------------------


def cmd_transform(args) -> int:
    _apply_config(args)
    if args.method is None:
        raise SchemaError("transform requires --method (flag or config)")
    if args.input_dir is None or args.output_dir is None:
        raise SchemaError("transform requires --in and --out")
    try:
        spec = PipelineSpec(
            method=args.method,
            quality=args.quality,
            sigma=args.sigma,
            seed=args.seed if args.seed is not None else 0,
            worker=args.worker,
        )
    except ValueError as exc:
        raise SchemaError(str(exc)) from exc
    jobs = args.jobs if args.jobs is not None else 1
    report = run_batch(args.input_dir, args.output_dir, spec, parallelism=jobs)
    write_report(report, Path(args.output_dir) / "batch_report.json")
    failed = report["counts"]["failed"]
    total = report["counts"]["ok"] + failed
    print(f"{args.method}: {report['counts']['ok']}/{total} images ok")
    if failed:
        for row in report["results"]:
            if row["status"] == "error":
                print(f"  {row['name']}: {row['error']}", file=sys.stderr)
        return EXIT_PARTIAL
    return EXIT_OK


# --------------------------------------------------------------------------
# metrics
# --------------------------------------------------------------------------

_IMAGE_SUFFIXES = {".png", ".jpg", ".jpeg"}


def _image_files(directory: Path):
    return sorted(p for p in directory.iterdir() if p.suffix.lower() in _IMAGE_SUFFIXES)


def _strip_mode_suffix(stem: str) -> str:
    if stem.endswith(CORRUPTION_ONLY_SUFFIX):
        return stem[: -len(CORRUPTION_ONLY_SUFFIX)]
    return stem


def _pair_directories(ref_dir: Path, dist_dir: Path):
    """Match ref and dist files by stem (mode suffixes stripped on dist)."""
    refs = {p.stem: p for p in _image_files(ref_dir)}
    dists = {}
    for p in _image_files(dist_dir):
        base = _strip_mode_suffix(p.stem)
        if base in dists:
            raise SchemaError(
                f"distorted dir has multiple files for {base!r}: "
                f"{dists[base].name} and {p.name}"
            )
        dists[base] = p
    missing = sorted(set(refs) - set(dists))
    extra = sorted(set(dists) - set(refs))
    if missing or extra:
        parts = []
        if missing:
            parts.append(f"no distorted file for: {', '.join(missing)}")
        if extra:
            parts.append(f"no reference for: {', '.join(extra)}")
        raise SchemaError("; ".join(parts))
    return [(stem, refs[stem], dists[stem]) for stem in sorted(refs)]


def _load_image(path: Path):
    if path.suffix.lower() in (".jpg", ".jpeg"):
        from .jpegcodec import decode_jpeg

        return decode_jpeg(path.read_bytes())
    return load_png(path)


def _fmt_metric(value) -> str:
    if value is None:
        return "n/a"
    if math.isinf(value):
        return "inf"
    return f"{value:.6f}"


def cmd_metrics(args) -> int:
    _apply_config(args)
    for field, flag in (("ref_dir", "--ref"), ("dist_dir", "--dist"), ("out_csv", "--out")):
        if getattr(args, field) is None:
            raise SchemaError(f"metrics requires {flag}")
    ref_dir = Path(args.ref_dir)
    dist_dir = Path(args.dist_dir)
    for d in (ref_dir, dist_dir):
        if not d.is_dir():
            raise SchemaError(f"not a directory: {d}")
    pairs = _pair_directories(ref_dir, dist_dir)
    model = (
        BrisqueModel.load(args.brisque_model) if args.brisque_model else load_default_model()
    )

    lines = ["name,psnr,ssim,brisque"]
    sums = {"psnr": [], "ssim": [], "brisque": []}
    for stem, ref_path, dist_path in pairs:
        rec = quality_record(
            _load_image(dist_path), ref=_load_image(ref_path), model=model, use_luma=args.luma
        )
        cells = [_fmt_metric(rec.psnr), _fmt_metric(rec.ssim), _fmt_metric(rec.brisque)]
        lines.append(f"{stem},{cells[0]},{cells[1]},{cells[2]}")
        # accumulate what was printed so the mean row is recomputable from rows
        sums["psnr"].append(float(cells[0]))
        sums["ssim"].append(float(cells[1]))
        sums["brisque"].append(float(cells[2]))
    if pairs:
        means = [
            _fmt_metric(sum(sums[k]) / len(sums[k])) for k in ("psnr", "ssim", "brisque")
        ]
        lines.append(f"mean,{means[0]},{means[1]},{means[2]}")
    Path(args.out_csv).write_text("\n".join(lines) + "\n")
    print(f"wrote {args.out_csv} ({len(pairs)} pairs)")
    return EXIT_OK


# --------------------------------------------------------------------------
# evaluate / report
# --------------------------------------------------------------------------


def cmd_evaluate(args) -> int:
    _apply_config(args)
    for field, flag in (
        ("manifest", "--manifest"),
        ("predictions", "--predictions"),
        ("out_csv", "--out"),
    ):
        if getattr(args, field) is None:
            raise SchemaError(f"evaluate requires {flag}")
    manifest = load_manifest(args.manifest, name=args.name or Path(args.manifest).stem)
    predictions = load_predictions(args.predictions)
    threshold = args.threshold if args.threshold is not None else 0.5
    try:
        counts = confusion(predictions, manifest, threshold)
    except ValueError as exc:
        raise SchemaError(str(exc)) from exc
    result = detection_metrics(counts)
    recall_text = "n/a" if result.recall is None else f"{result.recall:.6f}"
    lines = [
        "dataset,tp,tn,fp,fn,accuracy,recall",
        f"{manifest.name},{counts.tp},{counts.tn},{counts.fp},{counts.fn},"
        f"{result.accuracy:.6f},{recall_text}",
    ]
    Path(args.out_csv).write_text("\n".join(lines) + "\n")
    print(
        f"{manifest.name}: accuracy {result.accuracy:.3f}, recall {recall_text} "
        f"(tp={counts.tp} tn={counts.tn} fp={counts.fp} fn={counts.fn})"
    )
    return EXIT_OK


def cmd_report(args) -> int:
    _apply_config(args)
    if not args.quality:
        raise SchemaError("report requires at least one --quality CSV")
    if args.out_dir is None:
        raise SchemaError("report requires --out-dir")
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    quality_rows = []
    for path in args.quality:
        quality_rows.extend(load_quality_rows(path))
    detection_rows = []
    for path in args.detection or []:
        detection_rows.extend(load_detection_rows(path))

    artifacts = {}
    q_table = quality_table(quality_rows)
    artifacts["quality_table.csv"] = q_table.csv_text
    artifacts["quality_table.txt"] = q_table.text
    if detection_rows:
        d_table = detection_table(detection_rows)
        artifacts["detection_table.csv"] = d_table.csv_text
        artifacts["detection_table.txt"] = d_table.text
    artifacts.update(plot_data(quality_rows, detection_rows))

    for name, text in artifacts.items():
        (out_dir / name).write_text(text)
    print(f"wrote {len(artifacts)} artifacts to {out_dir}")
    return EXIT_OK


# --------------------------------------------------------------------------
# parser
# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="antiforensics",
        description="Corruption/restoration anti-forensics pipelines and evaluation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("transform", help="run one method over an image directory")
    p.add_argument("--method", choices=METHODS, default=None)
    p.add_argument("--in", dest="input_dir", default=None, metavar="DIR")
    p.add_argument("--out", dest="output_dir", default=None, metavar="DIR")
    p.add_argument("--quality", type=int, default=None)
    p.add_argument("--sigma", type=float, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--jobs", type=int, default=None)
    p.add_argument("--worker", default=None, help="spawnable worker command")
    p.add_argument("--config", default=None)
    p.set_defaults(func=cmd_transform)

    p = sub.add_parser("metrics", help="PSNR/SSIM/BRISQUE over paired directories")
    p.add_argument("--ref", dest="ref_dir", default=None, metavar="DIR")
    p.add_argument("--dist", dest="dist_dir", default=None, metavar="DIR")
    p.add_argument("--out", dest="out_csv", default=None, metavar="CSV")
    p.add_argument("--brisque-model", dest="brisque_model", default=None)
    p.add_argument("--luma", action="store_true", help="PSNR/SSIM on the luma plane")
    p.add_argument("--config", default=None)
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("evaluate", help="detection metrics from manifest + predictions")
    p.add_argument("--manifest", default=None, metavar="CSV")
    p.add_argument("--predictions", default=None, metavar="CSV")
    p.add_argument("--threshold", type=float, default=None)
    p.add_argument("--name", default=None, help="dataset name for the output row")
    p.add_argument("--out", dest="out_csv", default=None, metavar="CSV")
    p.add_argument("--config", default=None)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("report", help="merge metric CSVs into tables and plot data")
    p.add_argument("--quality", nargs="+", default=None, metavar="CSV")
    p.add_argument("--detection", nargs="*", default=None, metavar="CSV")
    p.add_argument("--out-dir", dest="out_dir", default=None, metavar="DIR")
    p.add_argument("--config", default=None)
    p.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (SchemaError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except WorkerError as exc:
        print(f"worker error: {exc}", file=sys.stderr)
        return EXIT_WORKER
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except AntiforensicsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
