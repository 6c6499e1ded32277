"""Command-line entry point.

Subcommands: split, rephoto, score, evaluate, degrade, project, stats,
correlate. Data goes to files, progress goes to stderr, and primary outputs
are written atomically (temp file + rename).

Exit codes: 0 success, 2 input validation, 3 I/O failure, 4 internal error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from rephoto import errorproj
from rephoto.degrade import DegradationParams, geometry_noise, texture_noise
from rephoto.figures import render_boxplot_figure, render_report_figure
from rephoto.geometry import PointCloud, TriMesh, load_obj, load_ply, save_ply
from rephoto.harness import (
    SplitPlan,
    boxplot_stats,
    evaluate,
    pearson,
    split,
    write_report_csv,
    write_report_json,
)
from rephoto.metrics import METRIC_IDS, MetricConfig, completeness, compute_metric, mean_error
from rephoto.rasterizer import RenderOptions, estimate_splat_radii, render_mesh, render_pointcloud
from rephoto.scene import (
    ValidationError,
    load_image,
    load_manifest,
    load_mask,
    quantize8,
    read_pfm,
    save_image,
    save_mask,
)
from rephoto.simplify import simplify


def _progress(msg: str) -> None:
    print(msg, file=sys.stderr)


def _atomic(path: Path, writer) -> None:
    # keep the real extension so format-sniffing writers still work
    tmp = path.with_name(f".tmp.{path.name}")
    writer(tmp)
    os.replace(tmp, path)


def _load_model(path: str):
    path = Path(path)
    if path.suffix.lower() == ".obj":
        return load_obj(path)
    return load_ply(path)


def _parse_metrics(spec: str) -> list[str]:
    metrics = [m.strip() for m in spec.split(",") if m.strip()]
    for m in metrics:
        if m not in METRIC_IDS:
            raise ValidationError(f"unknown metric {m!r}; choose from {', '.join(METRIC_IDS)}")
    if not metrics:
        raise ValidationError("no metrics selected")
    return metrics


def _read_numbers(path: str) -> list[float]:
    vals = []
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if line:
            vals.append(float(line))
    return vals


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rephoto",
        description="Evaluate 3D reconstructions by scoring rendered rephotos "
                    "against held-out photos.")
    parser.add_argument("--config", help="JSON file of flag defaults (flags override)")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_metric_flags(p):
        p.add_argument("--metrics", default="ncc,cbcr",
                       help="comma-separated metric ids (default: ncc,cbcr)")
        p.add_argument("--patch-size", type=int, default=15,
                       help="odd patch side for patch metrics (default: 15)")
        p.add_argument("--min-valid-fraction", type=float, default=0.5,
                       help="minimum valid fraction of a patch (default: 0.5)")

    def add_render_flags(p):
        p.add_argument("--texture-filter", choices=("nearest", "bilinear"),
                       default="bilinear", help="texture sampling (default: bilinear)")
        p.add_argument("--backface-culling", action="store_true",
                       help="cull faces pointing away from the camera")
        p.add_argument("--knn-k", type=int, default=6,
                       help="neighbors for splat radius estimation (default: 6)")
        p.add_argument("--splat-scale", type=float, default=1.0,
                       help="splat radius scale factor (default: 1.0)")

    p = sub.add_parser("split", help="compute a cross-validation split plan")
    p.add_argument("--manifest", required=True)
    p.add_argument("--folds", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output JSON path")

    p = sub.add_parser("rephoto", help="render rephotos and masks for manifest views")
    p.add_argument("--manifest", required=True)
    p.add_argument("--model", required=True, help="PLY or OBJ reconstruction")
    p.add_argument("--mode", choices=("internal-mesh", "internal-pointcloud"),
                   help="default: inferred from the model file")
    p.add_argument("--views", help="comma-separated view ids (default: all)")
    p.add_argument("--out", required=True, help="output directory")
    add_render_flags(p)

    p = sub.add_parser("score", help="score one rephoto against one photo")
    p.add_argument("--photo", required=True)
    p.add_argument("--rephoto", required=True)
    p.add_argument("--mask", required=True)
    p.add_argument("--out", help="directory for per-metric PFM error images")
    add_metric_flags(p)

    p = sub.add_parser("evaluate", help="full evaluation: render/ingest, score, aggregate")
    p.add_argument("--manifest", required=True)
    p.add_argument("--model", help="PLY/OBJ model (internal modes)")
    p.add_argument("--rephoto-dir", help="directory of <id>.png + <id>.mask.png (external mode)")
    p.add_argument("--mode", required=True,
                   choices=("internal-mesh", "internal-pointcloud", "external"))
    p.add_argument("--folds", type=int, help="cross-validation folds (omit: no cross-validation)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=0,
                   help="worker threads, 0 = auto (default: 0)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--timings", action="store_true",
                   help="include wall-clock timings in the report")
    add_metric_flags(p)
    add_render_flags(p)

    p = sub.add_parser("degrade", help="apply synthetic degradation to a model")
    p.add_argument("input", help="input PLY")
    p.add_argument("output", help="output PLY")
    p.add_argument("--tex", type=float, default=0.0, help="max per-channel color offset")
    p.add_argument("--geom", type=float, default=0.0,
                   help="max normal displacement as a fraction of scene extent")
    p.add_argument("--simp", type=float, default=0.0, help="fraction of vertices to remove")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--freq", type=float, default=8.0,
                   help="noise cycles per bounding-box diagonal (default: 8)")

    p = sub.add_parser("project", help="project error images onto the model")
    p.add_argument("--model", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--errors", required=True,
                   help="directory of <view>.<metric>.pfm error images")
    p.add_argument("--metric", default="ncc")
    p.add_argument("--out", required=True, help="output colored PLY")
    add_render_flags(p)

    p = sub.add_parser("stats", help="five-number boxplot statistics")
    p.add_argument("--values-file", help="file with one number per line")
    p.add_argument("--report", help="report.json; uses per-fold aggregates")
    p.add_argument("--metric", default="ncc", help="metric to pull from the report")
    p.add_argument("--out", help="directory for the boxplot figure")

    p = sub.add_parser("correlate", help="Pearson correlation of two value lists")
    p.add_argument("--x-file", required=True, help="file with one number per line")
    p.add_argument("--y-file", required=True, help="file with one number per line")

    return parser


def _apply_config(args: argparse.Namespace, argv: list[str]) -> None:
    if not args.config:
        return
    try:
        conf = json.loads(Path(args.config).read_text())
    except json.JSONDecodeError as e:
        raise ValidationError(f"malformed config file {args.config}: {e}") from e
    if not isinstance(conf, dict):
        raise ValidationError("config file must contain a JSON object")
    for key, value in conf.items():
        attr = key.replace("-", "_")
        flag = "--" + key.replace("_", "-")
        if hasattr(args, attr) and flag not in argv:
            setattr(args, attr, value)


def _render_opts(args) -> RenderOptions:
    return RenderOptions(texture_filter=args.texture_filter,
                         backface_culling=args.backface_culling)


def _cmd_split(args) -> int:
    manifest = load_manifest(args.manifest)
    plan = split(manifest, args.folds, args.seed)
    payload = {
        "n_folds": plan.n_folds,
        "seed": plan.seed,
        "folds": [{"train": list(t), "eval": list(e)} for t, e in plan.folds],
    }
    out = Path(args.out)
    _atomic(out, lambda p: p.write_text(json.dumps(payload, indent=2) + "\n"))
    _progress(f"wrote {plan.n_folds}-fold split to {out}")
    return 0


def _cmd_rephoto(args) -> int:
    manifest = load_manifest(args.manifest)
    model = _load_model(args.model)
    mode = args.mode
    if mode is None:
        mode = "internal-mesh" if isinstance(model, TriMesh) else "internal-pointcloud"
    if mode == "internal-mesh" and not isinstance(model, TriMesh):
        raise ValidationError("model has no faces; use internal-pointcloud")
    if mode == "internal-pointcloud" and isinstance(model, TriMesh):
        model = PointCloud(points=model.vertices, colors=model.colors,
                           normals=model.normals)
    if isinstance(model, PointCloud) and model.radii is None:
        model = estimate_splat_radii(model, k=args.knn_k, scale=args.splat_scale)
    wanted = None
    if args.views:
        wanted = {v.strip() for v in args.views.split(",") if v.strip()}
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    opts = _render_opts(args)
    for view in manifest:
        if wanted is not None and view.id not in wanted:
            continue
        if isinstance(model, TriMesh):
            result = render_mesh(model, view.camera, opts)
        else:
            result = render_pointcloud(model, view.camera)
        _atomic(out / f"{view.id}.png",
                lambda p, img=quantize8(result.color): save_image(img, p))
        _atomic(out / f"{view.id}.mask.png",
                lambda p, m=result.mask: save_mask(m, p))
        _progress(f"{view.id}: completeness {completeness(result.mask):.4f}")
    return 0


def _cmd_score(args) -> int:
    photo = load_image(args.photo)
    rephoto_img = load_image(args.rephoto)
    mask = load_mask(args.mask)
    metrics = _parse_metrics(args.metrics)
    cfg = MetricConfig(patch=args.patch_size, min_valid_fraction=args.min_valid_fraction)
    out = Path(args.out) if args.out else None
    if out:
        out.mkdir(parents=True, exist_ok=True)
    print(f"completeness {completeness(mask):.6g}")
    for m in metrics:
        err = compute_metric(m, photo, rephoto_img, mask, cfg)
        mean = mean_error(err)
        print(f"{m} {'null' if mean is None else format(mean, '.6g')}")
        if out:
            from rephoto.scene import write_pfm
            pfm = np.where(err.defined, err.value, np.nan)
            name = Path(args.rephoto).stem
            _atomic(out / f"{name}.{m}.pfm", lambda p, v=pfm: write_pfm(p, v))
    return 0


def _cmd_evaluate(args) -> int:
    started = time.time()
    manifest = load_manifest(args.manifest)
    metrics = _parse_metrics(args.metrics)
    cfg = MetricConfig(patch=args.patch_size, min_valid_fraction=args.min_valid_fraction)
    model = _load_model(args.model) if args.model else None
    if args.mode == "internal-pointcloud" and isinstance(model, TriMesh):
        model = PointCloud(points=model.vertices, colors=model.colors,
                           normals=model.normals)
    plan = split(manifest, args.folds, args.seed) if args.folds else None
    threads = args.threads if args.threads > 0 else min(8, os.cpu_count() or 1)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    report = evaluate(
        manifest, mode=args.mode, model=model, rephoto_dir=args.rephoto_dir,
        metric_ids=metrics, cfg=cfg, plan=plan, seed=args.seed, out_dir=out,
        threads=threads, render_opts=_render_opts(args),
        knn_k=args.knn_k, splat_scale=args.splat_scale,
        progress=lambda vid: _progress(f"scored {vid}"))
    if args.timings:
        report["timings"] = {"wall_seconds": time.time() - started}
    write_report_json(report, out / "report.json")
    write_report_csv(report, out / "report.csv")
    render_report_figure(report, out / "report_boxplot.png")

    agg = report["aggregate"]
    print(f"{'view':<12} {'completeness':>12} " + " ".join(f"{m:>10}" for m in metrics))
    for row in report["per_view"]:
        cells = " ".join(
            f"{row['errors'][m]:>10.5f}" if row["errors"][m] is not None else f"{'null':>10}"
            for m in metrics)
        print(f"{row['view_id']:<12} {row['completeness']:>12.5f} {cells}")
    cells = " ".join(
        f"{agg['errors'][m]:>10.5f}" if agg["errors"][m] is not None else f"{'null':>10}"
        for m in metrics)
    print(f"{'aggregate':<12} {agg['completeness']:>12.5f} {cells}")
    if not report["config"]["cross_validation"]:
        _progress("note: evaluated without cross-validation")
    return 0


def _cmd_degrade(args) -> int:
    model = load_ply(args.input)
    if not isinstance(model, TriMesh):
        raise ValidationError("degradation operators require a triangle mesh")
    params = DegradationParams(n_tex=args.tex, n_geom=args.geom, n_simp=args.simp,
                               seed=args.seed, frequency=args.freq)
    if params.n_tex > 0:
        model = texture_noise(model, params)
    if params.n_geom > 0:
        model = geometry_noise(model, params)
    if params.n_simp > 0:
        model = simplify(model, params.n_simp, params.seed)
    _atomic(Path(args.output), lambda p: save_ply(model, p))
    _progress(f"wrote degraded model to {args.output}")
    return 0


def _cmd_project(args) -> int:
    model = _load_model(args.model)
    manifest = load_manifest(args.manifest)
    errors_dir = Path(args.errors)
    n = model.num_vertices if isinstance(model, TriMesh) else len(model.points)
    field = errorproj.VertexErrorField.zeros(n)
    if isinstance(model, PointCloud) and model.radii is None:
        model = estimate_splat_radii(model, k=args.knn_k, scale=args.splat_scale)
    opts = _render_opts(args)
    used = 0
    for view in manifest:
        pfm_path = errors_dir / f"{view.id}.{args.metric}.pfm"
        if not pfm_path.exists():
            continue
        values = read_pfm(pfm_path)
        defined = np.isfinite(values)
        if isinstance(model, TriMesh):
            result = render_mesh(model, view.camera, opts)
        else:
            result = render_pointcloud(model, view.camera)
        from rephoto.metrics import ErrorImage
        err = ErrorImage(value=np.where(defined, values, 0.0), defined=defined)
        errorproj.accumulate(field, model, result, err)
        used += 1
        _progress(f"projected {view.id}")
    if used == 0:
        raise ValidationError(f"no error images for metric {args.metric!r} in {errors_dir}")
    _atomic(Path(args.out), lambda p: errorproj.export_error_mesh(model, field, p))
    _progress(f"wrote error-colored model to {args.out} ({used} views)")
    return 0


def _cmd_stats(args) -> int:
    if args.values_file:
        values = _read_numbers(args.values_file)
        label = Path(args.values_file).stem
    elif args.report:
        report = json.loads(Path(args.report).read_text())
        values = [f["errors"][args.metric] for f in report["per_fold"]
                  if f["errors"].get(args.metric) is not None]
        label = args.metric
    else:
        raise ValidationError("stats needs --values-file or --report")
    stats = boxplot_stats(values)
    print(json.dumps(stats, indent=2))
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        render_boxplot_figure(stats, out / f"boxplot_{label}.png", label=label)
    return 0


def _cmd_correlate(args) -> int:
    r = pearson(_read_numbers(args.x_file), _read_numbers(args.y_file))
    print(f"{r:.6g}")
    return 0


_COMMANDS = {
    "split": _cmd_split,
    "rephoto": _cmd_rephoto,
    "score": _cmd_score,
    "evaluate": _cmd_evaluate,
    "degrade": _cmd_degrade,
    "project": _cmd_project,
    "stats": _cmd_stats,
    "correlate": _cmd_correlate,
}


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        _apply_config(args, argv)
        return _COMMANDS[args.command](args)
    except ValidationError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except (FileNotFoundError, PermissionError, IsADirectoryError) as e:
        print(f"I/O error: {e}", file=sys.stderr)
        return 3
    except OSError as e:
        print(f"I/O error: {e}", file=sys.stderr)
        return 3
    except KeyboardInterrupt:
        return 130
    except Exception as e:  # invariant violation or bug
        print(f"internal error: {type(e).__name__}: {e}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
