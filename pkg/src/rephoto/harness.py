"""End-to-end evaluation: fold splitting, rephoto scoring, aggregation, stats.

The report is a plain JSON-ready dict so that golden-file comparisons and
byte-identical reruns are trivial.
"""

from __future__ import annotations

import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from rephoto.geometry import PointCloud, TriMesh
from rephoto.metrics import MetricConfig, METRIC_IDS, completeness, compute_metric, mean_error
from rephoto.rasterizer import RenderOptions, render_mesh, render_pointcloud
from rephoto.scene import (
    ValidationError,
    ViewManifest,
    load_image,
    load_mask,
    quantize8,
    save_image,
    save_mask,
    write_pfm,
)

MODES = ("internal-mesh", "internal-pointcloud", "external")


@dataclass(frozen=True)
class SplitPlan:
    """Cross-validation folds: (train_ids, eval_ids) per fold."""

    folds: tuple[tuple[tuple[str, ...], tuple[str, ...]], ...]
    n_folds: int
    seed: int


def split(manifest: ViewManifest, n_folds: int, seed: int) -> SplitPlan:
    """Seeded shuffle, then round-robin assignment of eval folds."""
    ids = manifest.ids
    if not 2 <= n_folds <= len(ids):
        raise ValidationError(f"n_folds must be in [2, {len(ids)}]")
    rng = np.random.default_rng(seed)
    shuffled = [ids[i] for i in rng.permutation(len(ids))]
    folds = []
    for k in range(n_folds):
        eval_ids = shuffled[k::n_folds]
        eval_set = set(eval_ids)
        train_ids = tuple(i for i in ids if i not in eval_set)
        folds.append((train_ids, tuple(eval_ids)))
    return SplitPlan(folds=tuple(folds), n_folds=n_folds, seed=seed)


def boxplot_stats(values) -> dict:
    """Min, lower quartile, median, upper quartile, max (inclusive quantiles)."""
    arr = np.asarray(list(values), dtype=np.float64)
    if arr.size == 0:
        raise ValidationError("boxplot_stats needs at least one value")
    q = np.quantile(arr, [0.0, 0.25, 0.5, 0.75, 1.0], method="linear")
    return {"min": float(q[0]), "q1": float(q[1]), "median": float(q[2]),
            "q3": float(q[3]), "max": float(q[4])}


def pearson(xs, ys) -> float:
    """Sample Pearson correlation of two equal-length sequences."""
    x = np.asarray(list(xs), dtype=np.float64)
    y = np.asarray(list(ys), dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ValidationError("pearson needs two equal-length 1D sequences")
    if x.size < 2:
        raise ValidationError("pearson needs at least two points")
    dx = x - x.mean()
    dy = y - y.mean()
    vx = np.dot(dx, dx)
    vy = np.dot(dy, dy)
    if vx == 0.0 or vy == 0.0:
        raise ValidationError("pearson is undefined for zero-variance input")
    return float(np.dot(dx, dy) / np.sqrt(vx * vy))


def _obtain_rephoto(view, mode, model, rephoto_dir, render_opts, knn_k, splat_scale):
    """Render or load the rephoto and completeness mask for one view.

    Internally rendered colors are snapped to the 8-bit grid so scores match
    the PNG rephotos the harness writes (external re-scoring is bit-exact).
    """
    if mode == "internal-mesh":
        out = render_mesh(model, view.camera, render_opts)
        return quantize8(out.color), out.mask
    if mode == "internal-pointcloud":
        out = render_pointcloud(model, view.camera, k=knn_k, scale=splat_scale)
        return quantize8(out.color), out.mask
    rp = Path(rephoto_dir) / f"{view.id}.png"
    mp = Path(rephoto_dir) / f"{view.id}.mask.png"
    if not rp.exists() or not mp.exists():
        raise ValidationError(f"external mode: missing {rp.name} or {mp.name} "
                              f"in {rephoto_dir}")
    return load_image(rp), load_mask(mp)


def evaluate(manifest: ViewManifest, *, mode: str,
             model: TriMesh | PointCloud | None = None,
             rephoto_dir=None,
             metric_ids=("ncc", "cbcr"),
             cfg: MetricConfig | None = None,
             plan: SplitPlan | None = None,
             seed: int = 0,
             out_dir=None,
             threads: int = 1,
             render_opts: RenderOptions | None = None,
             knn_k: int = 6,
             splat_scale: float = 1.0,
             progress=None) -> dict:
    """Score every eval view and aggregate per fold and overall.

    With plan=None all views form a single eval fold and the report is
    labeled as evaluated without cross-validation.
    """
    if mode not in MODES:
        raise ValidationError(f"unknown mode {mode!r}; choose from {MODES}")
    if mode.startswith("internal") and model is None:
        raise ValidationError(f"mode {mode} requires a model")
    if mode == "internal-mesh" and not isinstance(model, TriMesh):
        raise ValidationError("internal-mesh mode requires a triangle mesh model")
    if mode == "internal-pointcloud" and not isinstance(model, PointCloud):
        raise ValidationError("internal-pointcloud mode requires a point cloud model")
    if mode == "external" and rephoto_dir is None:
        raise ValidationError("external mode requires a rephoto directory")
    cfg = cfg or MetricConfig()
    for m in metric_ids:
        if m not in METRIC_IDS:
            raise ValidationError(f"unknown metric {m!r}")

    cross_validation = plan is not None
    if plan is None:
        folds = [((), tuple(manifest.ids))]
    else:
        folds = list(plan.folds)
    fold_of = {}
    for k, (_, eval_ids) in enumerate(folds):
        for vid in eval_ids:
            if vid in fold_of:
                raise ValidationError(f"view {vid} appears in multiple eval folds")
            fold_of[vid] = k
    eval_views = [v for v in manifest if v.id in fold_of]
    if not eval_views:
        raise ValidationError("no views to evaluate")

    if out_dir is not None:
        out_dir = Path(out_dir)
        (out_dir / "errors").mkdir(parents=True, exist_ok=True)
        if mode != "external":
            (out_dir / "rephotos").mkdir(parents=True, exist_ok=True)

    def score_view(view):
        photo = load_image(view.photo_path)
        h, w = photo.shape[:2]
        if (w, h) != (view.camera.width, view.camera.height):
            raise ValidationError(
                f"view {view.id}: photo is {w}x{h} but camera says "
                f"{view.camera.width}x{view.camera.height}")
        rephoto, mask = _obtain_rephoto(view, mode, model, rephoto_dir,
                                        render_opts, knn_k, splat_scale)
        if rephoto.shape != photo.shape:
            raise ValidationError(f"view {view.id}: rephoto dimensions differ from photo")
        errors = {}
        error_images = {}
        for m in metric_ids:
            err = compute_metric(m, photo, rephoto, mask, cfg)
            errors[m] = mean_error(err)
            error_images[m] = err
        if out_dir is not None:
            if mode != "external":
                save_image(rephoto, out_dir / "rephotos" / f"{view.id}.png")
                save_mask(mask, out_dir / "rephotos" / f"{view.id}.mask.png")
            for m, err in error_images.items():
                pfm = np.where(err.defined, err.value, np.nan)
                write_pfm(out_dir / "errors" / f"{view.id}.{m}.pfm", pfm)
        if progress is not None:
            progress(view.id)
        return {"view_id": view.id, "fold": fold_of[view.id],
                "completeness": completeness(mask), "errors": errors}

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            per_view = list(pool.map(score_view, eval_views))
    else:
        per_view = [score_view(v) for v in eval_views]

    def aggregate(rows):
        comp = float(np.mean([r["completeness"] for r in rows]))
        errs = {}
        undefined = {}
        for m in metric_ids:
            vals = [r["errors"][m] for r in rows if r["errors"][m] is not None]
            errs[m] = float(np.mean(vals)) if vals else None
            undefined[m] = sum(1 for r in rows if r["errors"][m] is None)
        return comp, errs, undefined

    per_fold = []
    for k, (_, eval_ids) in enumerate(folds):
        rows = [r for r in per_view if r["fold"] == k]
        comp, errs, undef = aggregate(rows)
        per_fold.append({"fold": k, "eval_views": list(eval_ids),
                         "completeness": comp, "errors": errs,
                         "undefined_error_views": undef})

    comp, errs, undef = aggregate(per_view)
    box = {"completeness": boxplot_stats([f["completeness"] for f in per_fold])}
    for m in metric_ids:
        vals = [f["errors"][m] for f in per_fold if f["errors"][m] is not None]
        box[m] = boxplot_stats(vals) if vals else None

    return {
        "config": {
            "mode": mode,
            "metrics": list(metric_ids),
            "patch_size": cfg.patch,
            "min_valid_fraction": cfg.min_valid_fraction,
            "seed": plan.seed if plan is not None else seed,
            "n_folds": len(folds),
            "cross_validation": cross_validation,
        },
        "per_view": per_view,
        "per_fold": per_fold,
        "aggregate": {"completeness": comp, "errors": errs,
                      "undefined_error_views": undef},
        "boxplot": box,
    }


def _atomic_write(path: Path, data: bytes) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(data)
    os.replace(tmp, path)


def write_report_json(report: dict, path) -> None:
    path = Path(path)
    _atomic_write(path, (json.dumps(report, indent=2) + "\n").encode("ascii"))


def write_report_csv(report: dict, path) -> None:
    """One row per view; undefined metric means are left empty."""
    path = Path(path)
    metrics = report["config"]["metrics"]
    lines = ["view_id,fold,completeness," + ",".join(metrics)]
    for row in report["per_view"]:
        cells = [row["view_id"], str(row["fold"]), repr(row["completeness"])]
        for m in metrics:
            v = row["errors"][m]
            cells.append("" if v is None else repr(v))
        lines.append(",".join(cells))
    _atomic_write(path, ("\n".join(lines) + "\n").encode("ascii"))
