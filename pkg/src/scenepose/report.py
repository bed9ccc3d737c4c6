"""Aggregate segmentation scores over several pipeline runs."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import ValidationError

METRICS = ("ari_fg", "msc_fg", "miou_bg")


def _scene_means(run_dir: Path) -> dict:
    path = Path(run_dir) / "summary.json"
    try:
        summary = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as e:
        raise ValidationError(f"cannot read {path}: {e}") from None
    scored = [f["metrics"] for f in summary.get("per_frame", []) if f.get("metrics")]
    if not scored:
        raise ValidationError(f"{path} has no scored frames")
    return {m: float(np.mean([s[m] for s in scored])) for m in METRICS}


def aggregate(per_scene: list[dict]) -> dict:
    """Mean and population std of each metric across scenes."""
    if not per_scene:
        raise ValidationError("need at least one run")
    out = {}
    for m in METRICS:
        v = np.array([s[m] for s in per_scene], dtype=np.float64)
        out[m] = {"mean": float(v.mean()), "std": float(v.std())}
    return out


def report_metrics(run_dirs) -> dict:
    scenes = [_scene_means(d) for d in run_dirs]
    return {"scenes": len(scenes), "per_scene": scenes, "aggregate": aggregate(scenes)}


def format_table(report: dict) -> str:
    agg = report["aggregate"]
    head = " | ".join(f"{m:>13}" for m in METRICS)
    row = " | ".join(f"{agg[m]['mean']:.2f} ± {agg[m]['std']:.2f}".rjust(13) for m in METRICS)
    return f"{head}\n{row}"
