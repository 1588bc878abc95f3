"""Polygon primitives: interior angles, key-corner identification, boundary chains.

Conventions used throughout the package:

* image coordinates, x to the right and y downwards;
* text polygons are annotated clockwise (on screen) starting at the
  reading-order top-left; the 1st and 4th key corners bound the head
  (reading-order start) edge, the 2nd and 3rd bound the tail edge.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from shapely.geometry import Polygon as _ShapelyPolygon


class PolygonError(ValueError):
    pass


@dataclass(frozen=True)
class CornerEstimationConfig:
    """Weighting of the right-angle term in the corner-scoring heuristic."""

    gamma: float = 0.5

    def __post_init__(self):
        if self.gamma < 0:
            raise PolygonError("gamma must be >= 0")


@dataclass
class PolygonAnnotation:
    """An ordered polygon boundary with identified key corners.

    points: (M, 2) float array, M >= 4, clockwise on screen.
    corner_indices: indices of the 1st/2nd/3rd/4th key corners, or None
        until assigned.
    """

    points: np.ndarray
    corner_indices: tuple[int, int, int, int] | None = None
    transcription: str | None = None

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 2:
            raise PolygonError("points must be an (M, 2) array")
        if pts.shape[0] < 4:
            raise PolygonError("polygon needs at least 4 points")
        if not np.all(np.isfinite(pts)):
            raise PolygonError("polygon points must be finite")
        self.points = pts
        if self.corner_indices is not None:
            self.corner_indices = tuple(int(i) for i in self.corner_indices)
            _check_corner_order(self.corner_indices, len(pts))

    @property
    def num_points(self) -> int:
        return len(self.points)

    def is_simple(self) -> bool:
        return _ShapelyPolygon(self.points).is_valid

    def validate_simple(self) -> None:
        if not self.is_simple():
            raise PolygonError("polygon is not simple (self-intersecting)")

    def shapely(self) -> _ShapelyPolygon:
        return _ShapelyPolygon(self.points)


@dataclass
class BoundaryChains:
    """The polygon boundary split at the four key corners.

    Neighbouring chains share their endpoint: top runs 1st->2nd corner,
    tail 2nd->3rd, bottom 3rd->4th, head 4th->1st.
    """

    head_chain: np.ndarray
    top_chain: np.ndarray
    tail_chain: np.ndarray
    bottom_chain: np.ndarray


def _check_corner_order(corners, m):
    if len(set(corners)) != 4:
        raise PolygonError("corner indices must be distinct")
    if any(not (0 <= c < m) for c in corners):
        raise PolygonError("corner index out of range")
    c1, c2, c3, c4 = corners
    # cyclic order 1st -> 2nd -> 3rd -> 4th along the point list
    shifted = [(c - c1) % m for c in corners]
    if not (shifted[0] < shifted[1] < shifted[2] < shifted[3]):
        raise PolygonError("corner indices not in cyclic order")


def interior_angle(polygon: PolygonAnnotation, i: int) -> float:
    """Interior angle at vertex i, in (0, 2*pi); reflex vertices > pi."""
    pts = polygon.points
    m = len(pts)
    if not 0 <= i < m:
        raise PolygonError("vertex index out of range")
    return _interior_angles(pts)[i]


def _interior_angles(pts: np.ndarray) -> np.ndarray:
    """Interior angles at every vertex of a simple polygon."""
    m = len(pts)
    prev = np.roll(pts, 1, axis=0)
    nxt = np.roll(pts, -1, axis=0)
    u = pts - prev  # incoming edge
    w = nxt - pts  # outgoing edge
    if np.any(np.hypot(*u.T) == 0) or np.any(np.hypot(*w.T) == 0):
        raise PolygonError("degenerate polygon vertex")
    cross = u[:, 0] * w[:, 1] - u[:, 1] * w[:, 0]
    dot = (u * w).sum(axis=1)
    turn = np.arctan2(cross, dot)  # exterior turn at each vertex
    total = turn.sum()  # +-2*pi for a simple polygon
    if abs(total) < 1e-9:
        raise PolygonError("degenerate polygon (zero total turning)")
    s = 1.0 if total > 0 else -1.0
    angles = math.pi - s * turn
    if np.any(angles <= 0) or np.any(angles >= 2 * math.pi):
        raise PolygonError("degenerate polygon vertex")
    return angles


def corner_pair_score(angles: np.ndarray, i: int, gamma: float) -> float:
    """Score of (vertex i, vertex i+1) as the tail corner pair.

    Low when both angles are near pi/2 and their sum is near pi
    (near-parallel neighbouring boundaries).
    """
    a, b = angles[i], angles[i + 1]
    half = math.pi / 2
    return gamma * (abs(a - half) + abs(b - half)) + abs(a + b - math.pi)


def fixed_layout_corners(m: int, layout: int) -> tuple[int, int, int, int]:
    """Corner indices for an even fixed point layout (k top + k bottom)."""
    if layout % 2 != 0 or layout < 4:
        raise PolygonError("fixed layout must be an even count >= 4")
    if m != layout:
        raise PolygonError(f"polygon has {m} points, fixed layout expects {layout}")
    k = layout // 2
    return (0, k - 1, k, layout - 1)


def identify_corners(
    points: np.ndarray,
    cfg: CornerEstimationConfig = CornerEstimationConfig(),
    fixed_layout: int | None = None,
) -> tuple[int, int, int, int]:
    """Find the four key corner indices of a clockwise-annotated polygon.

    The 1st corner is index 0 and the 4th is index M-1 (annotation starts
    at the reading-order top-left).  With ``fixed_layout`` the corners come
    straight from the index arithmetic; otherwise the 2nd/3rd pair is the
    adjacent vertex pair minimizing ``corner_pair_score`` over the interior
    of the chain.  Ties break toward the smaller index.
    """
    pts = np.asarray(points, dtype=float)
    m = len(pts)
    if m < 4:
        raise PolygonError("polygon needs at least 4 points")
    if fixed_layout is not None:
        return fixed_layout_corners(m, fixed_layout)
    if m == 4:
        return (0, 1, 2, 3)
    angles = _interior_angles(pts)
    # candidate pairs (i, i+1) strictly between the given 1st and 4th corners
    candidates = range(1, m - 2)
    if len(candidates) == 0:
        raise PolygonError("no candidate vertices for the tail corners")
    best = min(candidates, key=lambda i: (corner_pair_score(angles, i, cfg.gamma), i))
    return (0, best, best + 1, m - 1)


def is_vertical_annotation(points: np.ndarray, aspect_threshold: float = 1.5) -> bool:
    """Heuristic: axis-aligned height exceeds width by the given factor."""
    pts = np.asarray(points, dtype=float)
    w = pts[:, 0].max() - pts[:, 0].min()
    h = pts[:, 1].max() - pts[:, 1].min()
    return h > w * aspect_threshold


def roll_vertical_start(points: np.ndarray, aspect_threshold: float = 1.5) -> np.ndarray:
    """Re-index a vertical polygon so the top-right point starts the ring.

    Horizontal polygons pass through unchanged.  Keeps the reading-order
    convention that index 0 is the head-side corner.
    """
    pts = np.asarray(points, dtype=float)
    if not is_vertical_annotation(pts, aspect_threshold):
        return pts
    # top-right = max(x - y) among vertices
    start = int(np.argmax(pts[:, 0] - pts[:, 1]))
    return np.roll(pts, -start, axis=0)


def annotate(
    points: np.ndarray,
    transcription: str | None = None,
    cfg: CornerEstimationConfig = CornerEstimationConfig(),
    fixed_layout: int | None = None,
    reorient_vertical: bool = True,
) -> PolygonAnnotation:
    """Build a validated PolygonAnnotation with corners identified."""
    pts = np.asarray(points, dtype=float)
    if reorient_vertical and fixed_layout is None:
        pts = roll_vertical_start(pts)
    corners = identify_corners(pts, cfg, fixed_layout)
    ann = PolygonAnnotation(pts, corners, transcription)
    ann.validate_simple()
    return ann


def _cyclic_slice(pts: np.ndarray, a: int, b: int) -> np.ndarray:
    """Points from index a to b inclusive, wrapping around the ring."""
    m = len(pts)
    if a <= b:
        return pts[a : b + 1].copy()
    return np.concatenate([pts[a:], pts[: b + 1]])


def split_chains(polygon: PolygonAnnotation) -> BoundaryChains:
    """Partition the boundary at the four key corners."""
    if polygon.corner_indices is None:
        raise PolygonError("corner indices not set")
    _check_corner_order(polygon.corner_indices, polygon.num_points)
    c1, c2, c3, c4 = polygon.corner_indices
    pts = polygon.points
    return BoundaryChains(
        head_chain=_cyclic_slice(pts, c4, c1),
        top_chain=_cyclic_slice(pts, c1, c2),
        tail_chain=_cyclic_slice(pts, c2, c3),
        bottom_chain=_cyclic_slice(pts, c3, c4),
    )


def min_edge_len(polygon: PolygonAnnotation) -> float:
    """Minimum edge length over the closed boundary ring."""
    pts = polygon.points
    d = np.roll(pts, -1, axis=0) - pts
    lengths = np.hypot(d[:, 0], d[:, 1])
    if np.any(lengths == 0):
        raise PolygonError("degenerate polygon vertex")
    return float(lengths.min())


def chain_length(chain: np.ndarray) -> float:
    """Arc length of an open polyline."""
    d = np.diff(np.asarray(chain, dtype=float), axis=0)
    return float(np.hypot(d[:, 0], d[:, 1]).sum())
