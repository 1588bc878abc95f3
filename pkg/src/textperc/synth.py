"""Synthetic curved-text scenes with exact ribbon-polygon annotations.

Digit strings are stamped along arc baselines; each instance carries a
fixed 14-point ribbon polygon (7 top + 7 bottom, clockwise) and its
transcription.  Scenes are a deterministic function of the seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from shapely.geometry import Polygon as _ShapelyPolygon
from shapely.ops import unary_union

from .geom import PolygonAnnotation, annotate

RIBBON_POINTS = 14  # 7 per chain

# 5x7 digit glyph bitmaps
_GLYPH_ROWS = {
    "0": ["01110", "10001", "10011", "10101", "11001", "10001", "01110"],
    "1": ["00100", "01100", "00100", "00100", "00100", "00100", "01110"],
    "2": ["01110", "10001", "00001", "00010", "00100", "01000", "11111"],
    "3": ["11111", "00010", "00100", "00010", "00001", "10001", "01110"],
    "4": ["00010", "00110", "01010", "10010", "11111", "00010", "00010"],
    "5": ["11111", "10000", "11110", "00001", "00001", "10001", "01110"],
    "6": ["00110", "01000", "10000", "11110", "10001", "10001", "01110"],
    "7": ["11111", "00001", "00010", "00100", "01000", "01000", "01000"],
    "8": ["01110", "10001", "10001", "01110", "10001", "10001", "01110"],
    "9": ["01110", "10001", "10001", "01111", "00001", "00010", "01100"],
}
GLYPHS = {
    ch: np.array([[int(c) for c in row] for row in rows], dtype=float)
    for ch, rows in _GLYPH_ROWS.items()
}
GLYPH_H, GLYPH_W = 7, 5


@dataclass(frozen=True)
class SceneConfig:
    height: int = 192
    width: int = 256
    n_instances: int = 2
    curvature: tuple[float, float] = (0.08, 0.18)  # arc amplitude / length
    glyph_scale: int = 2
    digits: tuple[int, int] = (6, 9)  # inclusive count range
    length: tuple[float, float] = (115.0, 160.0)
    angle_deg: tuple[float, float] = (-15.0, 15.0)
    ribbon_margin: float = 2.0  # extra half-height beyond the glyphs
    max_attempts: int = 40


@dataclass
class SyntheticScene:
    image: np.ndarray  # (H, W, 1) in [0, 1]
    annotations: list[PolygonAnnotation]
    rng_seed: int
    placement_failures: int = 0


def _glyph_bitmap(ch: str, scale: int) -> np.ndarray:
    return np.kron(GLYPHS[ch], np.ones((scale, scale)))


def ribbon_polygon(
    start: np.ndarray,
    direction: np.ndarray,
    length: float,
    amplitude: float,
    half_height: float,
    n_samples: int = RIBBON_POINTS // 2,
) -> np.ndarray:
    """14-point ribbon around an arc baseline (7 top + 7 bottom, clockwise)."""
    ts = np.linspace(0.0, 1.0, n_samples)
    normal = np.array([direction[1], -direction[0]])  # screen-up for l-to-r text
    center = start[None, :] + ts[:, None] * length * direction[None, :]
    center = center + (amplitude * np.sin(np.pi * ts))[:, None] * normal[None, :]
    # tangents of the arc, for per-sample normals
    d_center = length * direction[None, :] + (
        amplitude * np.pi * np.cos(np.pi * ts)
    )[:, None] * normal[None, :]
    d_center /= np.hypot(d_center[:, 0], d_center[:, 1])[:, None]
    n_pts = np.stack([d_center[:, 1], -d_center[:, 0]], axis=1)
    top = center + half_height * n_pts
    bottom = center - half_height * n_pts
    return np.concatenate([top, bottom[::-1]], axis=0)


def baseline_point(start, direction, length, amplitude, t):
    normal = np.array([direction[1], -direction[0]])
    return start + t * length * direction + amplitude * np.sin(np.pi * t) * normal


def synth_scene(seed: int, config: SceneConfig = SceneConfig()) -> SyntheticScene:
    """Render a deterministic scene of digit ribbons with annotations."""
    rng = np.random.default_rng(seed)
    h, w = config.height, config.width
    image = np.zeros((h, w), dtype=float)
    annotations: list[PolygonAnnotation] = []
    placed_geoms = []
    failures = 0
    half_height = (GLYPH_H * config.glyph_scale) / 2 + config.ribbon_margin

    for _ in range(config.n_instances):
        placed = False
        for _attempt in range(config.max_attempts):
            length = rng.uniform(*config.length)
            angle = np.deg2rad(rng.uniform(*config.angle_deg))
            direction = np.array([np.cos(angle), np.sin(angle)])
            amplitude = rng.uniform(*config.curvature) * length
            margin = half_height + amplitude + 4
            dx, dy = length * direction
            x_lo, x_hi = margin, w - dx - margin
            y_lo, y_hi = margin + max(0.0, -dy), h - margin - max(0.0, dy)
            if x_hi <= x_lo or y_hi <= y_lo:
                break
            start = np.array([rng.uniform(x_lo, x_hi), rng.uniform(y_lo, y_hi)])
            poly_pts = ribbon_polygon(start, direction, length, amplitude, half_height)
            geom = _ShapelyPolygon(poly_pts)
            if not geom.is_valid:
                continue
            if placed_geoms and geom.buffer(3.0).intersects(unary_union(placed_geoms)):
                continue
            n_digits = int(rng.integers(config.digits[0], config.digits[1] + 1))
            text = "".join(str(d) for d in rng.integers(0, 10, n_digits))
            _stamp_text(image, text, start, direction, length, amplitude, config.glyph_scale)
            ann = annotate(poly_pts, transcription=text, fixed_layout=RIBBON_POINTS)
            annotations.append(ann)
            placed_geoms.append(geom)
            placed = True
            break
        if not placed:
            failures += 1
    return SyntheticScene(image[:, :, None], annotations, seed, failures)


def _stamp_text(image, text, start, direction, length, amplitude, scale):
    h, w = image.shape
    k = len(text)
    for i, ch in enumerate(text):
        t = (i + 0.5) / k
        cx, cy = baseline_point(start, direction, length, amplitude, t)
        glyph = _glyph_bitmap(ch, scale)
        gh, gw = glyph.shape
        y0 = int(round(cy - gh / 2))
        x0 = int(round(cx - gw / 2))
        ys = slice(max(y0, 0), max(min(y0 + gh, h), 0))
        xs = slice(max(x0, 0), max(min(x0 + gw, w), 0))
        if ys.start >= ys.stop or xs.start >= xs.stop:
            continue
        gys = slice(ys.start - y0, ys.stop - y0)
        gxs = slice(xs.start - x0, xs.stop - x0)
        image[ys, xs] = np.maximum(image[ys, xs], glyph[gys, gxs])
