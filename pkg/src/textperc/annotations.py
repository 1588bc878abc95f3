"""Annotation file parsing (canonical JSON + line format) and PNG rendering."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image, ImageDraw

from .fiducials import FiducialSet
from .geom import CornerEstimationConfig, PolygonAnnotation, annotate
from .labels import RegionClass, ScoreMaps

SCHEMA_VERSION = 1

# overlay palette: center pink, head green, tail yellow, boundary blue
CLASS_COLORS = {
    RegionClass.Center: (255, 105, 180),
    RegionClass.Head: (0, 200, 0),
    RegionClass.Tail: (230, 210, 0),
    RegionClass.TopBottomBoundary: (40, 90, 255),
}


class AnnotationFormatError(ValueError):
    pass


@dataclass
class AnnotationInstance:
    points: np.ndarray
    transcription: str | None = None
    fixed_layout: int | None = None


@dataclass
class AnnotationFile:
    image_ref: str | None
    instances: list[AnnotationInstance] = field(default_factory=list)

    def to_polygons(
        self, cfg: CornerEstimationConfig = CornerEstimationConfig()
    ) -> list[PolygonAnnotation]:
        return [
            annotate(i.points, i.transcription, cfg, fixed_layout=i.fixed_layout)
            for i in self.instances
        ]


def parse_canonical(path) -> AnnotationFile:
    """Parse the canonical JSON annotation schema."""
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise AnnotationFormatError(f"invalid JSON: {exc}") from exc
    if not isinstance(doc, dict) or "instances" not in doc:
        raise AnnotationFormatError("missing 'instances' key")
    out = AnnotationFile(image_ref=doc.get("image_ref"))
    for idx, inst in enumerate(doc["instances"]):
        pts = np.asarray(inst.get("points", []), dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 4:
            raise AnnotationFormatError(f"instance {idx}: need at least 4 [x, y] points")
        if not np.all(np.isfinite(pts)):
            raise AnnotationFormatError(f"instance {idx}: non-finite coordinates")
        out.instances.append(
            AnnotationInstance(pts, inst.get("transcription"), inst.get("fixed_layout"))
        )
    return out


def serialize_canonical(ann: AnnotationFile, path) -> None:
    doc = {
        "schema_version": SCHEMA_VERSION,
        "image_ref": ann.image_ref,
        "instances": [
            {
                "points": np.asarray(i.points, dtype=float).tolist(),
                **({"transcription": i.transcription} if i.transcription is not None else {}),
                **({"fixed_layout": i.fixed_layout} if i.fixed_layout is not None else {}),
            }
            for i in ann.instances
        ],
    }
    Path(path).write_text(json.dumps(doc, indent=2))


def import_line_format(path, points_per_line: int | None = None) -> AnnotationFile:
    """One instance per line: x1,y1,...,xk,yk[,transcription].

    ``points_per_line`` pins a fixed layout (e.g. 14 for two-row line
    annotations) whose corners come from index arithmetic; otherwise
    corners are found by the angle heuristic downstream.
    """
    out = AnnotationFile(image_ref=None)
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        fields = line.split(",")
        coords = []
        transcription = None
        for i, tok in enumerate(fields):
            try:
                coords.append(float(tok))
            except ValueError:
                transcription = ",".join(fields[i:]).strip()
                break
        # a purely numeric transcription parses as one extra coordinate;
        # an odd count (or one token past a pinned layout) gives it back
        extra = len(coords) % 2 != 0 or (
            points_per_line is not None and len(coords) == 2 * points_per_line + 1
        )
        if transcription is None and extra and coords:
            coords.pop()
            transcription = fields[len(coords)].strip()
        if len(coords) % 2 != 0:
            raise AnnotationFormatError(f"line {lineno}: odd coordinate count")
        pts = np.asarray(coords, dtype=float).reshape(-1, 2)
        if points_per_line is not None and len(pts) != points_per_line:
            raise AnnotationFormatError(
                f"line {lineno}: expected {points_per_line} points, got {len(pts)}"
            )
        if len(pts) < 4:
            raise AnnotationFormatError(f"line {lineno}: need at least 4 points")
        out.instances.append(AnnotationInstance(pts, transcription, points_per_line))
    return out


def render_overlay(
    image: np.ndarray,
    score: ScoreMaps | None,
    fiducials: list[FiducialSet] | None,
    out_path,
    alpha: float = 0.5,
) -> None:
    """Class-colored overlay plus fiducial dots with index labels."""
    img = np.asarray(image, dtype=float)
    if img.ndim == 3:
        img = img[:, :, 0]
    base = np.repeat((np.clip(img, 0, 1) * 255).astype(np.uint8)[:, :, None], 3, axis=2)
    if score is not None:
        if score.labels.shape != img.shape:
            raise ValueError("image / score map size mismatch")
        for cls, color in CLASS_COLORS.items():
            m = score.labels == int(cls)
            base[m] = ((1 - alpha) * base[m] + alpha * np.array(color)).astype(np.uint8)
    pil = Image.fromarray(base)
    draw = ImageDraw.Draw(pil)
    for fs in fiducials or []:
        for i, (x, y) in enumerate(fs.points):
            draw.ellipse([x - 2, y - 2, x + 2, y + 2], fill=(255, 0, 0))
            draw.text((x + 3, y - 3), str(i + 1), fill=(255, 255, 255))
    pil.save(out_path)
