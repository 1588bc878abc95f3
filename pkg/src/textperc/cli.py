"""Umbrella command line: label generation, fiducials, rectification,
detection, the end-to-end demo and rendering.

Exit codes: 0 ok, 1 input error, 2 internal error.  All JSON outputs
carry a schema_version field.
"""

from __future__ import annotations

import json
import logging
import sys
from pathlib import Path

import click
import numpy as np

from . import annotations as ann_io
from .annotations import AnnotationFormatError, render_overlay
from .demo import DemoConfig, eval_ablation, pretrain_recognizer, train_demo
from .detect import overlay_classes
from .fiducials import FiducialConfig, FiducialError, FiducialSet, PointProvenance
from .geom import PolygonError
from .labels import (
    BandWidthConfig,
    GeometryMaps,
    RegionClass,
    ScoreMaps,
    deserialize_labels,
    gen_labels,
    serialize_labels,
)
from .pipeline import attach_fiducials, detect_instances
from .recognizer import ToyRecognizer
from .synth import SceneConfig, synth_scene
from .tensorio import TensorFormatError, read_tensor, write_tensor
from .tps import (
    DestLayout,
    RegionGrid,
    TpsError,
    dest_points,
    scatter_point_grads,
    tps_fit,
    warp,
    warp_backward,
)

SCHEMA_VERSION = 1
_INPUT_ERRORS = (
    AnnotationFormatError,
    TensorFormatError,
    PolygonError,
    FiducialError,
    TpsError,
    FileNotFoundError,
    NotADirectoryError,
    ValueError,
    json.JSONDecodeError,
)

log = logging.getLogger("textperc")


@click.group()
@click.option("--seed", type=int, default=0, show_default=True, help="Global RNG seed.")
@click.option("--threads", type=int, default=1, show_default=True, help="Worker threads (advisory).")
@click.option("--log-level", default="warning", show_default=True,
              type=click.Choice(["debug", "info", "warning", "error"]))
@click.pass_context
def cli(ctx, seed, threads, log_level):
    logging.basicConfig(level=getattr(logging, log_level.upper()))
    ctx.obj = {"seed": seed, "threads": threads}


@cli.command("gen-labels")
@click.option("--annotations", "ann_path", required=True, type=click.Path())
@click.option("--width", required=True, type=int)
@click.option("--height", required=True, type=int)
@click.option("--out", required=True, type=click.Path())
@click.option("--delta-topbottom", type=float, default=0.2, show_default=True)
@click.option("--delta-headtail", type=float, default=0.3, show_default=True)
@click.option("--boundary-target", type=click.Choice(["chain", "band_inner_edge"]), default="chain")
@click.option("--line-format", is_flag=True, help="Parse a comma-separated line file instead of JSON.")
@click.option("--points-per-line", type=int, default=None)
def gen_labels_cmd(ann_path, width, height, out, delta_topbottom, delta_headtail,
                   boundary_target, line_format, points_per_line):
    """Generate a ground-truth label bundle from annotations."""
    if line_format:
        ann = ann_io.import_line_format(ann_path, points_per_line)
    else:
        ann = ann_io.parse_canonical(ann_path)
    cfg = BandWidthConfig(delta_topbottom, delta_headtail)
    score, geo = gen_labels(ann.to_polygons(), (height, width), cfg, boundary_target)
    serialize_labels(score, geo, out)
    click.echo(f"wrote label bundle to {out}")


def _fiducial_json(instances, with_provenance: bool) -> dict:
    out = {"schema_version": SCHEMA_VERSION, "instances": []}
    for inst in instances:
        rec = {
            "filtered": inst.filtered,
            "filter_reason": inst.filter_reason,
            "points": None,
        }
        if inst.fiducials is not None:
            rec["points"] = np.asarray(inst.fiducials.points).tolist()
            if with_provenance:
                rec["provenance"] = [
                    None if p is None or p.pixels is None
                    else {"channels": list(p.channels), "pixels": p.pixels.tolist()}
                    for p in inst.fiducials.provenance
                ]
        out["instances"].append(rec)
    return out


@cli.command("fiducials")
@click.option("--labels", "labels_dir", required=True, type=click.Path())
@click.option("--n", required=True, type=int, help="Fiducial points per side (N).")
@click.option("--delta-ep", type=float, default=3.0, show_default=True)
@click.option("--out", required=True, type=click.Path())
@click.option("--provenance", is_flag=True, help="Include originating pixels per point.")
def fiducials_cmd(labels_dir, n, delta_ep, out, provenance):
    """Generate per-instance fiducial points from a label bundle."""
    score, geo = deserialize_labels(labels_dir)
    instances, comps = detect_instances(score.labels)
    attach_fiducials(instances, comps, geo, FiducialConfig(n=n, delta_ep=delta_ep))
    Path(out).write_text(json.dumps(_fiducial_json(instances, provenance), indent=2))
    click.echo(f"wrote {len(instances)} instances to {out}")


def _load_points(path, instance: int) -> np.ndarray:
    doc = json.loads(Path(path).read_text())
    if isinstance(doc, list):
        return np.asarray(doc, dtype=float)
    recs = [r for r in doc.get("instances", []) if r.get("points")]
    if not recs:
        raise ValueError("points file contains no usable instances")
    if not 0 <= instance < len(recs):
        raise ValueError(f"instance index {instance} out of range")
    return np.asarray(recs[instance]["points"], dtype=float)


def _read_grid(path) -> np.ndarray:
    p = Path(path)
    if p.suffix == ".tpt":
        return read_tensor(p).astype(float)
    from PIL import Image

    return np.asarray(Image.open(p).convert("L"), dtype=float) / 255.0


def _write_grid(path, values: np.ndarray) -> None:
    p = Path(path)
    if p.suffix == ".tpt":
        write_tensor(p, values.astype(np.float32))
    else:
        from PIL import Image

        v = values[:, :, 0] if values.ndim == 3 else values
        Image.fromarray((np.clip(v, 0, 1) * 255).astype(np.uint8)).save(p)


@cli.command("rectify")
@click.option("--image", "image_path", required=True, type=click.Path())
@click.option("--points", "points_path", required=True, type=click.Path())
@click.option("--instance", type=int, default=0, show_default=True)
@click.option("--out", required=True, type=click.Path())
@click.option("--width", required=True, type=int)
@click.option("--height", required=True, type=int)
@click.option("--lambda-tps", type=float, default=1e-6, show_default=True)
def rectify_cmd(image_path, points_path, instance, out, width, height, lambda_tps):
    """Fit a TPS to fiducial points and warp the image region."""
    pts = _load_points(points_path, instance)
    if len(pts) % 2 or len(pts) < 4:
        raise ValueError("need an even number (>= 4) of fiducial points")
    layout = DestLayout(width, height, n=len(pts) // 2)
    t = tps_fit(pts, dest_points(layout), lambda_tps)
    rect = warp(RegionGrid(_read_grid(image_path)), t, layout)
    _write_grid(out, rect.values)
    click.echo(f"wrote rectified region to {out}")


@cli.command("warp-backward")
@click.option("--region", "region_path", required=True, type=click.Path())
@click.option("--points", "points_path", required=True, type=click.Path())
@click.option("--instance", type=int, default=0, show_default=True)
@click.option("--d-output", "d_output_path", required=True, type=click.Path())
@click.option("--width", required=True, type=int)
@click.option("--height", required=True, type=int)
@click.option("--lambda-tps", type=float, default=1e-6, show_default=True)
@click.option("--out-d-input", required=True, type=click.Path())
@click.option("--out-d-fiducials", required=True, type=click.Path())
def warp_backward_cmd(region_path, points_path, instance, d_output_path, width, height,
                      lambda_tps, out_d_input, out_d_fiducials):
    """Backward pass of the rectifying warp (gradients as tensors/JSON)."""
    pts = _load_points(points_path, instance)
    layout = DestLayout(width, height, n=len(pts) // 2)
    t = tps_fit(pts, dest_points(layout), lambda_tps)
    region = RegionGrid(_read_grid(region_path))
    d_out = read_tensor(d_output_path).astype(float)
    grads = warp_backward(d_out, region, t, layout)
    write_tensor(out_d_input, grads.d_input.astype(np.float32))
    Path(out_d_fiducials).write_text(json.dumps(
        {"schema_version": SCHEMA_VERSION, "d_fiducials": grads.d_fiducials.tolist()}, indent=2))
    click.echo(f"wrote gradients to {out_d_input} / {out_d_fiducials}")


@cli.command("scatter-grads")
@click.option("--d-fiducials", "d_fid_path", required=True, type=click.Path())
@click.option("--points", "points_path", required=True, type=click.Path(),
              help="Fiducial JSON written with --provenance.")
@click.option("--instance", type=int, default=0, show_default=True)
@click.option("--width", required=True, type=int)
@click.option("--height", required=True, type=int)
@click.option("--out", required=True, type=click.Path())
def scatter_grads_cmd(d_fid_path, points_path, instance, width, height, out):
    """Scatter per-point gradients back onto geometry-map channels."""
    doc = json.loads(Path(d_fid_path).read_text())
    d_fid = np.asarray(doc["d_fiducials"] if isinstance(doc, dict) else doc, dtype=float)
    pdoc = json.loads(Path(points_path).read_text())
    recs = [r for r in pdoc.get("instances", []) if r.get("points")]
    if not 0 <= instance < len(recs):
        raise ValueError(f"instance index {instance} out of range")
    prov_raw = recs[instance].get("provenance")
    if prov_raw is None:
        raise ValueError("points file lacks provenance; rerun fiducials with --provenance")
    provenance = [
        None if p is None
        else PointProvenance(np.asarray(p["pixels"], dtype=int), tuple(p["channels"]))
        for p in prov_raw
    ]
    d_geo = scatter_point_grads(d_fid, provenance, (height, width))
    write_tensor(out, d_geo.astype(np.float32))
    click.echo(f"wrote geometry gradients to {out}")


@cli.command("detect")
@click.option("--scores", "scores_path", required=True, type=click.Path(),
              help="(H, W, 5) per-class score tensor.")
@click.option("--geometry", "geometry_path", required=True, type=click.Path(),
              help="(H, W, 12) offset tensor (8 corner + 4 boundary).")
@click.option("--n", required=True, type=int)
@click.option("--threshold", type=float, default=0.5, show_default=True)
@click.option("--out", required=True, type=click.Path())
def detect_cmd(scores_path, geometry_path, n, threshold, out):
    """Full detection post-processing to polygons."""
    scores = read_tensor(scores_path).astype(float)
    geo12 = read_tensor(geometry_path).astype(float)
    if geo12.ndim != 3 or geo12.shape[2] != 12:
        raise ValueError("geometry tensor must be (H, W, 12)")
    labels = overlay_classes(scores, {c: threshold for c in RegionClass if c != 0})
    geo = GeometryMaps(geo12[:, :, :8], geo12[:, :, 8:], np.ones_like(geo12))
    instances, comps = detect_instances(labels)
    attach_fiducials(instances, comps, geo, FiducialConfig(n=n))
    doc = {"schema_version": SCHEMA_VERSION, "instances": []}
    for inst in instances:
        doc["instances"].append({
            "filtered": inst.filtered,
            "filter_reason": inst.filter_reason,
            "self_intersecting": inst.self_intersecting,
            "center_area": int(comps.center.component_area[inst.center_component - 1]),
            "head_area": None if inst.head_component is None
            else int(comps.head.component_area[inst.head_component - 1]),
            "tail_area": None if inst.tail_component is None
            else int(comps.tail.component_area[inst.tail_component - 1]),
            "fiducials": None if inst.fiducials is None else inst.fiducials.points.tolist(),
            "polygon": None if inst.polygon is None else np.asarray(inst.polygon).tolist(),
        })
    Path(out).write_text(json.dumps(doc, indent=2))
    click.echo(f"wrote {len(instances)} detections to {out}")


@cli.command("demo-e2e")
@click.option("--seed", type=int, default=None, help="Overrides the global seed.")
@click.option("--epochs", "steps", type=int, default=200, show_default=True)
@click.option("--mode", type=click.Choice(["perturbed-gt"]), default="perturbed-gt")
@click.option("--lr", type=float, default=None, help="Geometry step size (defaults to the built-in).")
@click.option("--report", "report_path", required=True, type=click.Path())
@click.pass_context
def demo_cmd(ctx, seed, steps, mode, lr, report_path):
    """Run the recognition-gradient finetuning demonstration."""
    seed = ctx.obj["seed"] if seed is None else seed
    cfg = DemoConfig(steps=steps) if lr is None else DemoConfig(steps=steps, lr=lr)
    report = train_demo(seed, cfg)
    Path(report_path).write_text(json.dumps(report.to_dict(), indent=2))
    first, last = report.loss_curve[0], report.loss_curve[-1]
    click.echo(f"loss {first:.4f} -> {last:.4f}; drift {report.drift_curve[0]:.3f} -> "
               f"{report.drift_curve[-1]:.3f}; report at {report_path}")


@cli.command("eval")
@click.option("--points", default="4,6,8,10,12,14", show_default=True,
              help="Comma-separated total fiducial counts (2N).")
@click.option("--scenes", "n_scenes", type=int, default=50, show_default=True)
@click.option("--straight", is_flag=True, help="Use straight instead of curved scenes.")
@click.option("--report", "report_path", required=True, type=click.Path())
@click.pass_context
def eval_cmd(ctx, points, n_scenes, straight, report_path):
    """Fiducial-count ablation on synthetic scenes."""
    counts = [int(p) for p in points.split(",")]
    curvature = (0.0, 0.0) if straight else (0.08, 0.18)
    scene_cfg = SceneConfig(n_instances=2, curvature=curvature)
    scenes = [synth_scene(ctx.obj["seed"] * 100000 + i, scene_cfg) for i in range(n_scenes)]
    rows = eval_ablation(counts, scenes)
    doc = {
        "schema_version": SCHEMA_VERSION,
        "curved": not straight,
        "rows": [
            {"two_n": r.two_n, "mean_iou": r.mean_iou,
             "mean_column_accuracy": r.mean_column_accuracy}
            for r in rows
        ],
    }
    Path(report_path).write_text(json.dumps(doc, indent=2))
    for r in rows:
        click.echo(f"2N={r.two_n:3d}  mean IoU {r.mean_iou:.4f}")


@cli.command("render")
@click.option("--image", "image_path", type=click.Path(), default=None)
@click.option("--labels", "labels_dir", type=click.Path(), default=None)
@click.option("--points", "points_path", type=click.Path(), default=None)
@click.option("--width", type=int, default=None)
@click.option("--height", type=int, default=None)
@click.option("--out", required=True, type=click.Path())
def render_cmd(image_path, labels_dir, points_path, width, height, out):
    """Render a class overlay and/or fiducial points to PNG."""
    score = None
    if labels_dir is not None:
        score, _ = deserialize_labels(labels_dir)
    if image_path is not None:
        image = _read_grid(image_path)
    elif score is not None:
        image = np.zeros(score.labels.shape)
    elif width and height:
        image = np.zeros((height, width))
    else:
        raise ValueError("need --image, --labels, or --width/--height")
    fid_sets = []
    if points_path is not None:
        doc = json.loads(Path(points_path).read_text())
        recs = doc.get("instances", []) if isinstance(doc, dict) else [{"points": doc}]
        for rec in recs:
            if rec.get("points"):
                pts = np.asarray(rec["points"], dtype=float)
                fid_sets.append(FiducialSet(n=len(pts) // 2, points=pts))
    render_overlay(image, score, fid_sets, out)
    click.echo(f"wrote {out}")


def main(argv=None):
    try:
        cli.main(args=argv, standalone_mode=False)
    except click.exceptions.Exit as exc:
        sys.exit(exc.exit_code)
    except click.Abort:
        sys.exit(1)
    except click.ClickException as exc:
        exc.show()
        sys.exit(1)
    except _INPUT_ERRORS as exc:
        click.echo(f"input error: {exc}", err=True)
        sys.exit(1)
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        log.exception("internal error")
        click.echo(f"internal error: {exc}", err=True)
        sys.exit(2)
    sys.exit(0)


if __name__ == "__main__":
    main()
