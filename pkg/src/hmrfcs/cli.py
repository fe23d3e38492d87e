"""Command-line front end: segment | evaluate | phantom | bench.

Settings resolve in three layers: built-in defaults, then a key=value
config file (--config), then explicit command-line flags. Exit codes are
fixed: 0 success, 1 usage error, 2 data error. The HMRF_CS_THREADS
environment variable caps worker concurrency (0 or unset = auto); results
are identical for any thread count.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .cuckoo import VARIANTS, CsConfig, optimize
from .energy import EnergyParams, SegmentationObjective, classify
from .evaluation import DiceReport, align_labels, evaluate
from .images import (
    ImageFormatError,
    PhantomSpec,
    generate_phantom,
    load_gray_image,
    load_label_map,
    save_gray_image,
    save_label_map,
)

__all__ = ["main"]


class UsageError(Exception):
    """Bad invocation: missing/invalid flags or config entries (exit 1)."""


class DataError(Exception):
    """Bad input data: unreadable/mismatched images or datasets (exit 2)."""


# one entry per config-file/flag key; None defaults mean "not set"
_KEY_TYPES = {
    "input": str,
    "truth": str,
    "pred": str,
    "out": str,
    "report": str,
    "classes": int,
    "variant": str,
    "seed": int,
    "n": int,
    "temperature": float,
    "coupling": float,
    "neighborhood": int,
    "max_generations": int,
    "pa": float,
    "pa_min": float,
    "pa_max": float,
    "alpha": float,
    "alpha_min": float,
    "alpha_max": float,
    "levy_beta": float,
    "runs": int,
    "exclude_background": bool,
    "jaccard_denominator": bool,
    "width": int,
    "height": int,
    "means": str,
    "noise": float,
    "layout": str,
}

_OPTIMIZER_DEFAULTS = {
    "classes": 4,
    "seed": 0,
    "n": 30,
    "temperature": 4.0,
    "coupling": 1.0,
    "neighborhood": 8,
    "max_generations": 100,
    "pa": 0.25,
    "pa_min": 0.05,
    "pa_max": 0.5,
    "alpha": 1.0,
    "alpha_min": 0.01,
    "alpha_max": 0.5,
    "levy_beta": 1.5,
}

SEGMENT_DEFAULTS = {
    "input": None,
    "truth": None,
    "out": "segmentation.pgm",
    "report": None,
    "variant": "improved",
    "exclude_background": False,
    "jaccard_denominator": False,
    **_OPTIMIZER_DEFAULTS,
}

EVALUATE_DEFAULTS = {
    "pred": None,
    "truth": None,
    "classes": None,
    "exclude_background": False,
    "jaccard_denominator": False,
}

PHANTOM_DEFAULTS = {
    "width": 128,
    "height": 128,
    "means": "30,90,150,210",
    "noise": 10.0,
    "seed": 0,
    "layout": "horizontal-bands",
    "out": "phantom.pgm",
    "truth": None,
}

BENCH_DEFAULTS = {
    "input": None,
    "runs": 10,
    "out": "bench_report.csv",
    "report": "bench_report.json",
    "exclude_background": False,
    "jaccard_denominator": False,
    **_OPTIMIZER_DEFAULTS,
}


def thread_count() -> int:
    """Worker cap from HMRF_CS_THREADS; 0, empty, or unset means auto."""
    raw = os.environ.get("HMRF_CS_THREADS", "").strip()
    if not raw:
        return os.cpu_count() or 1
    try:
        value = int(raw)
    except ValueError:
        raise UsageError(f"HMRF_CS_THREADS must be an integer, got {raw!r}") from None
    if value < 0:
        raise UsageError("HMRF_CS_THREADS must be >= 0")
    return value if value > 0 else (os.cpu_count() or 1)


def _coerce(key: str, raw: str):
    kind = _KEY_TYPES[key]
    if kind is bool:
        lowered = raw.strip().lower()
        if lowered in ("1", "true", "yes", "on"):
            return True
        if lowered in ("0", "false", "no", "off"):
            return False
        raise UsageError(f"config key {key}: expected a boolean, got {raw!r}")
    try:
        return kind(raw.strip())
    except ValueError:
        raise UsageError(
            f"config key {key}: expected {kind.__name__}, got {raw!r}"
        ) from None


def _read_config_file(path: str) -> dict:
    """Flat key=value file; blank lines and # comments allowed."""
    entries = {}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise UsageError(f"cannot read config file {path}: {exc}") from None
    for lineno, line in enumerate(lines, start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise UsageError(f"{path}:{lineno}: expected key=value, got {stripped!r}")
        key, raw = stripped.split("=", 1)
        key = key.strip()
        if key not in _KEY_TYPES:
            raise UsageError(f"{path}:{lineno}: unknown config key {key!r}")
        entries[key] = _coerce(key, raw)
    return entries


def _merge_settings(defaults: dict, args: argparse.Namespace) -> dict:
    """defaults < config file < explicit flags (None = flag not given)."""
    settings = dict(defaults)
    config_path = getattr(args, "config", None)
    if config_path is not None:
        for key, value in _read_config_file(config_path).items():
            if key in settings:
                settings[key] = value
    for key in settings:
        value = getattr(args, key, None)
        if value is not None:
            settings[key] = value
    return settings


def _parse_means(raw: str) -> tuple[float, ...]:
    try:
        return tuple(float(tok) for tok in raw.replace(" ", "").split(",") if tok)
    except ValueError:
        raise UsageError(f"cannot parse class means from {raw!r}") from None


def _require(settings: dict, key: str, flag: str):
    if settings.get(key) is None:
        raise UsageError(f"missing required option {flag}")
    return settings[key]


def _load_truth_map(path: str, num_classes: int | None):
    """Label map from PGM + sidecar, or via an explicit class count."""
    if Path(f"{path}.meta").exists():
        return load_label_map(path)
    if num_classes is None:
        raise DataError(f"{path}: no .meta sidecar; pass --classes to interpret it")
    return load_label_map(path, num_classes=num_classes)


def _build_cs_config(settings: dict, variant: str) -> CsConfig:
    return CsConfig(
        dim=settings["classes"],
        variant=variant,
        n=settings["n"],
        max_generations=settings["max_generations"],
        p_a=settings["pa"],
        p_a_min=settings["pa_min"],
        p_a_max=settings["pa_max"],
        alpha=settings["alpha"],
        alpha_min=settings["alpha_min"],
        alpha_max=settings["alpha_max"],
        levy_beta=settings["levy_beta"],
        seed=settings["seed"],
    )


def _config_snapshot(settings: dict, variant: str) -> dict:
    if variant == "standard":
        p_a = settings["pa"]
        alpha = settings["alpha"]
    else:
        p_a = [settings["pa_min"], settings["pa_max"]]
        alpha = [settings["alpha_min"], settings["alpha_max"]]
    return {
        "n": settings["n"],
        "T": settings["temperature"],
        "B": settings["coupling"],
        "max_generations": settings["max_generations"],
        "p_a": p_a,
        "alpha": alpha,
        "neighborhood": settings["neighborhood"],
        "K": settings["classes"],
    }


def _dice_dict(report: DiceReport | None):
    if report is None:
        return None
    return {
        "per_class": list(report.per_class),
        "mean": report.mean,
        "class_names": list(report.class_names) if report.class_names else None,
    }


def _segment_one(image, settings: dict, variant: str, seed: int, workers: int):
    """Optimize one image; returns (aligned LabelMap, run-report dict)."""
    params = EnergyParams(
        B=settings["coupling"],
        T=settings["temperature"],
        neighborhood=settings["neighborhood"],
    )
    config = _build_cs_config({**settings, "seed": seed}, variant)
    objective = SegmentationObjective(image, params)
    mu_star, trace = optimize(objective, config, workers=workers)
    labels = classify(image, np.clip(mu_star, 0.0, 255.0))
    aligned = align_labels(labels, mu_star)
    report = {
        "variant": variant,
        "seed": seed,
        "config": _config_snapshot(settings, variant),
        "mu_star": [float(v) for v in np.sort(mu_star)],
        "final_energy": trace.best_energy_per_generation[-1],
        "energy_trace": trace.best_energy_per_generation,
        "dice": None,
        "wall_time_seconds": trace.wall_time,
    }
    return aligned, report


def cmd_segment(args: argparse.Namespace) -> int:
    settings = _merge_settings(SEGMENT_DEFAULTS, args)
    image = load_gray_image(_require(settings, "input", "--input"))
    aligned, report = _segment_one(
        image, settings, settings["variant"], settings["seed"], thread_count()
    )
    if settings["truth"] is not None:
        truth = _load_truth_map(settings["truth"], settings["classes"])
        dice_report = evaluate(
            aligned,
            truth,
            exclude_background=settings["exclude_background"],
            jaccard_denominator=settings["jaccard_denominator"],
        )
        report["dice"] = _dice_dict(dice_report)
    save_label_map(aligned, settings["out"])
    if settings["report"] is not None:
        with open(settings["report"], "w", encoding="utf-8") as fh:
            json.dump(report, fh, indent=2)
            fh.write("\n")
    print(
        f"{settings['variant']}: energy {report['final_energy']:.4f} "
        f"in {report['wall_time_seconds']:.2f}s -> {settings['out']}"
    )
    return 0


def cmd_evaluate(args: argparse.Namespace) -> int:
    settings = _merge_settings(EVALUATE_DEFAULTS, args)
    pred = _load_truth_map(_require(settings, "pred", "--pred"), settings["classes"])
    truth = _load_truth_map(_require(settings, "truth", "--truth"), settings["classes"])
    report = evaluate(
        pred,
        truth,
        exclude_background=settings["exclude_background"],
        jaccard_denominator=settings["jaccard_denominator"],
    )
    json.dump(_dice_dict(report), sys.stdout, indent=2)
    sys.stdout.write("\n")
    return 0


def cmd_phantom(args: argparse.Namespace) -> int:
    settings = _merge_settings(PHANTOM_DEFAULTS, args)
    means = _parse_means(settings["means"])
    try:
        spec = PhantomSpec(
            width=settings["width"],
            height=settings["height"],
            class_means=means,
            region_layout=settings["layout"],
            noise_sigma=settings["noise"],
            seed=settings["seed"],
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    image, truth = generate_phantom(spec)
    out = settings["out"]
    truth_path = settings["truth"]
    if truth_path is None:
        p = Path(out)
        truth_path = str(p.with_name(p.stem + "_truth.pgm"))
    save_gray_image(image, out)
    save_label_map(truth, truth_path)
    print(f"wrote {out} and {truth_path} (K={truth.num_classes})")
    return 0


def _bench_jobs(images, settings, runs):
    jobs = []
    for name, image, truth in images:
        for variant in VARIANTS:
            for run_index in range(runs):
                jobs.append((name, image, truth, variant, run_index))
    return jobs


def _run_bench_job(job, settings):
    name, image, truth, variant, run_index = job
    seed = settings["seed"] + run_index
    per_image = {**settings, "classes": truth.num_classes}
    aligned, report = _segment_one(image, per_image, variant, seed, workers=1)
    dice_report = evaluate(
        aligned,
        truth,
        exclude_background=settings["exclude_background"],
        jaccard_denominator=settings["jaccard_denominator"],
    )
    return {
        "run_index": run_index,
        "seed": seed,
        "mean_dice": dice_report.mean,
        "per_class": list(dice_report.per_class),
        "final_energy": report["final_energy"],
        "wall_time_seconds": report["wall_time_seconds"],
    }


def _collect_dataset(root: Path):
    if not root.is_dir():
        raise DataError(f"{root}: not a directory")
    images = []
    for path in sorted(root.iterdir()):
        if path.suffix.lower() not in (".pgm", ".png"):
            continue
        if path.name.endswith("_truth.pgm") or path.name.endswith("_truth.png"):
            continue
        truth_path = path.with_name(path.stem + "_truth.pgm")
        if not truth_path.exists():
            raise DataError(f"missing truth file {truth_path} for {path.name}")
        images.append((path.name, path, truth_path))
    if not images:
        raise DataError(f"{root}: no (image, truth) pairs found")
    return images


def cmd_bench(args: argparse.Namespace) -> int:
    settings = _merge_settings(BENCH_DEFAULTS, args)
    root = Path(_require(settings, "input", "--input"))
    runs = settings["runs"]
    if runs < 1:
        raise UsageError("--runs must be >= 1")

    loaded = []
    for name, image_path, truth_path in _collect_dataset(root):
        image = load_gray_image(image_path)
        truth = _load_truth_map(str(truth_path), settings["classes"])
        loaded.append((name, image, truth))

    jobs = _bench_jobs(loaded, settings, runs)
    workers = min(thread_count(), len(jobs))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda j: _run_bench_job(j, settings), jobs))
    else:
        results = [_run_bench_job(j, settings) for j in jobs]

    grouped: dict[tuple[str, str], list[dict]] = {}
    for job, result in zip(jobs, results):
        grouped.setdefault((job[0], job[3]), []).append(result)

    table = []
    for (name, variant), rows in grouped.items():
        ranked = sorted(rows, key=lambda r: (-r["mean_dice"], r["run_index"]))
        times = [r["wall_time_seconds"] for r in rows]
        table.append(
            {
                "image": name,
                "variant": variant,
                "runs": rows,
                "best3": ranked[:3],
                "time_min_s": min(times),
                "time_max_s": max(times),
            }
        )

    with open(settings["report"], "w", encoding="utf-8") as fh:
        json.dump(
            {"runs_per_variant": runs, "seed_base": settings["seed"], "results": table},
            fh,
            indent=2,
        )
        fh.write("\n")

    with open(settings["out"], "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            [
                "image",
                "variant",
                "best1_mean_dice",
                "best2_mean_dice",
                "best3_mean_dice",
                "time_min_s",
                "time_max_s",
            ]
        )
        for entry in table:
            best = [f"{r['mean_dice']:.4f}" for r in entry["best3"]]
            best += [""] * (3 - len(best))
            writer.writerow(
                [entry["image"], entry["variant"], *best,
                 f"{entry['time_min_s']:.3f}", f"{entry['time_max_s']:.3f}"]
            )

    for entry in table:
        best = ", ".join(f"{r['mean_dice']:.4f}" for r in entry["best3"])
        print(
            f"{entry['image']} {entry['variant']}: best dice [{best}] "
            f"time {entry['time_min_s']:.2f}-{entry['time_max_s']:.2f}s"
        )
    return 0


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on usage problems; the CLI contract wants 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _add_common_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", help="key=value settings file")


def _add_optimizer_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--classes", type=int, help="number of classes K")
    sub.add_argument("--seed", type=int, help="base RNG seed")
    sub.add_argument("--n", type=int, help="number of host nests")
    sub.add_argument("--temperature", type=float, help="clique temperature T")
    sub.add_argument("--coupling", type=float, help="clique coupling B")
    sub.add_argument("--neighborhood", type=int, choices=(4, 8))
    sub.add_argument("--max-generations", type=int, dest="max_generations")
    sub.add_argument("--pa", type=float, help="abandonment probability (standard)")
    sub.add_argument("--pa-min", type=float, dest="pa_min")
    sub.add_argument("--pa-max", type=float, dest="pa_max")
    sub.add_argument("--alpha", type=float, help="step scale (standard)")
    sub.add_argument("--alpha-min", type=float, dest="alpha_min")
    sub.add_argument("--alpha-max", type=float, dest="alpha_max")
    sub.add_argument("--levy-beta", type=float, dest="levy_beta")


def _add_scoring_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument(
        "--exclude-background",
        action="store_true",
        default=None,
        dest="exclude_background",
        help="drop class 1 (darkest) from the Dice mean",
    )
    sub.add_argument(
        "--jaccard-denominator",
        action="store_true",
        default=None,
        dest="jaccard_denominator",
        help="use |A u B| in the Dice denominator (compatibility mode)",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="hmrfcs", description=__doc__)
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    seg = sub.add_parser("segment", help="segment one image")
    seg.add_argument("--input", help="grayscale image (PGM P5 or 8-bit PNG)")
    seg.add_argument("--truth", help="optional ground-truth label map")
    seg.add_argument("--out", help="output label map path (PGM + .meta)")
    seg.add_argument("--report", help="write a JSON run report here")
    seg.add_argument("--variant", choices=VARIANTS)
    _add_optimizer_flags(seg)
    _add_scoring_flags(seg)
    _add_common_flags(seg)
    seg.set_defaults(func=cmd_segment)

    ev = sub.add_parser(
        "evaluate", help="score a prediction against truth"
    )
    ev.add_argument("--pred", help="predicted label map")
    ev.add_argument("--truth", help="ground-truth label map")
    ev.add_argument("--classes", type=int, help="class count for sidecar-less maps")
    _add_scoring_flags(ev)
    _add_common_flags(ev)
    ev.set_defaults(func=cmd_evaluate)

    ph = sub.add_parser(
        "phantom", help="generate a synthetic test pair"
    )
    ph.add_argument("--width", type=int)
    ph.add_argument("--height", type=int)
    ph.add_argument("--means", help="comma-separated ascending class means")
    ph.add_argument("--noise", type=float, help="Gaussian noise sigma")
    ph.add_argument("--seed", type=int)
    ph.add_argument("--layout", choices=("horizontal-bands", "concentric-disks"))
    ph.add_argument("--out", help="image output path")
    ph.add_argument("--truth", help="truth output path (default <out>_truth.pgm)")
    _add_common_flags(ph)
    ph.set_defaults(func=cmd_phantom)

    be = sub.add_parser(
        "bench", help="run all variants over a dataset"
    )
    be.add_argument("--input", help="directory of image/_truth pairs")
    be.add_argument("--runs", type=int, help="runs per variant per image")
    be.add_argument("--out", help="CSV table output path")
    be.add_argument("--report", help="JSON report output path")
    _add_optimizer_flags(be)
    _add_scoring_flags(be)
    _add_common_flags(be)
    be.set_defaults(func=cmd_bench)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if getattr(args, "func", None) is None:
        parser.print_usage(sys.stderr)
        return 1
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"hmrfcs: error: {exc}", file=sys.stderr)
        return 1
    except (DataError, ImageFormatError, FileNotFoundError, ValueError) as exc:
        print(f"hmrfcs: data error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
