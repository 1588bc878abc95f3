"""Ground-truth score maps and geometry maps from polygon annotations.

Each text instance is rasterized as an ordered overlay of four region
classes: the full interior becomes *center*, the head/tail bands (shrunk
inward from the head/tail edges) overwrite part of it, and the top&bottom
boundary band (straddling the long edges) overwrites everything.
Geometry maps carry corner offsets for head/tail pixels and boundary
offsets for center pixels; ``target = pixel + offset``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import IntEnum
from pathlib import Path

import numpy as np
import shapely
from shapely.geometry import Polygon as _ShapelyPolygon
from shapely.ops import unary_union

from .geom import (
    BoundaryChains,
    PolygonAnnotation,
    PolygonError,
    chain_length,
    min_edge_len,
    split_chains,
)
from .tensorio import read_tensor, write_tensor

TINY_MIN_EDGE = 4.0  # px; below this an instance gets no geometry supervision
LONG_AXIS_WEIGHT = 0.1  # down-weight of boundary offsets along the long text axis


class RegionClass(IntEnum):
    Background = 0
    Center = 1
    Head = 2
    Tail = 3
    TopBottomBoundary = 4


@dataclass(frozen=True)
class BandWidthConfig:
    """Band widths as ratios of the instance's minimum edge length."""

    delta_topbottom: float = 0.2
    delta_headtail: float = 0.3

    def __post_init__(self):
        for v in (self.delta_topbottom, self.delta_headtail):
            if not 0 < v <= 0.5:
                raise ValueError("band ratios must be in (0, 0.5]")


@dataclass
class ScoreMaps:
    labels: np.ndarray  # (H, W) uint8 of RegionClass values
    instance_ids: np.ndarray  # (H, W) int32, 0 = none
    tiny_ids: list[int] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    @property
    def height(self) -> int:
        return self.labels.shape[0]

    @property
    def width(self) -> int:
        return self.labels.shape[1]


@dataclass
class GeometryMaps:
    corner_offsets: np.ndarray  # (H, W, 8) float32
    boundary_offsets: np.ndarray  # (H, W, 4) float32
    valid_mask: np.ndarray  # (H, W, 12) float32 in [0, 1]


def _pixel_grid(h: int, w: int):
    ys, xs = np.mgrid[0:h, 0:w]
    return xs, ys


def rasterize_polygon(geom, h: int, w: int) -> np.ndarray:
    """Pixel-center coverage mask of a shapely geometry (boundary included)."""
    mask = np.zeros((h, w), dtype=bool)
    if geom.is_empty:
        return mask
    minx, miny, maxx, maxy = geom.bounds
    x0 = max(int(np.floor(minx)), 0)
    y0 = max(int(np.floor(miny)), 0)
    x1 = min(int(np.ceil(maxx)), w - 1)
    y1 = min(int(np.ceil(maxy)), h - 1)
    if x1 < x0 or y1 < y0:
        return mask
    ys, xs = np.mgrid[y0 : y1 + 1, x0 : x1 + 1]
    hit = shapely.intersects_xy(geom, xs.ravel().astype(float), ys.ravel().astype(float))
    mask[y0 : y1 + 1, x0 : x1 + 1] = hit.reshape(ys.shape)
    return mask


def _vertex_normals(chain: np.ndarray) -> np.ndarray:
    """Unit normals at polyline vertices (averaged segment normals)."""
    chain = np.asarray(chain, dtype=float)
    d = np.diff(chain, axis=0)
    seg_n = np.stack([-d[:, 1], d[:, 0]], axis=1)
    norms = np.hypot(seg_n[:, 0], seg_n[:, 1])
    if np.any(norms == 0):
        raise PolygonError("degenerate chain segment")
    seg_n /= norms[:, None]
    vert_n = np.zeros_like(chain)
    vert_n[:-1] += seg_n
    vert_n[1:] += seg_n
    vn = np.hypot(vert_n[:, 0], vert_n[:, 1])
    vn[vn == 0] = 1.0
    return vert_n / vn[:, None]


def offset_chain(chain: np.ndarray, dist: float, inward_of: _ShapelyPolygon) -> np.ndarray:
    """Offset a boundary polyline toward the interior of ``inward_of``."""
    chain = np.asarray(chain, dtype=float)
    normals = _vertex_normals(chain)
    seg = (len(chain) - 1) // 2
    mid = (chain[seg] + chain[seg + 1]) / 2
    d = chain[seg + 1] - chain[seg]
    n_mid = np.array([-d[1], d[0]]) / np.hypot(*d)
    sign = 0.0
    for probe in (0.5, 1.0, 2.0, 4.0):
        if inward_of.contains(shapely.Point(mid + n_mid * probe)):
            sign = 1.0
            break
        if inward_of.contains(shapely.Point(mid - n_mid * probe)):
            sign = -1.0
            break
    if sign == 0.0:
        raise PolygonError("cannot determine inward chain direction")
    # vertex normals share the segment normals' rotation sense
    return chain + sign * normals * dist


def band_strip(chain: np.ndarray, inward: float, outward: float, polygon: _ShapelyPolygon):
    """Union of per-segment quads around a chain, offset toward/away from
    the polygon interior by ``inward`` / ``outward``."""
    chain = np.asarray(chain, dtype=float)
    inner = offset_chain(chain, inward, polygon) if inward > 0 else chain
    outer = offset_chain(chain, -outward, polygon) if outward > 0 else chain
    quads = []
    for i in range(len(chain) - 1):
        quad = _ShapelyPolygon([outer[i], outer[i + 1], inner[i + 1], inner[i]])
        if not quad.is_valid:
            quad = quad.buffer(0)
        if not quad.is_empty:
            quads.append(quad)
    return unary_union(quads)


def _instance_region_geoms(ann: PolygonAnnotation, cfg: BandWidthConfig):
    """Shapely geometries of the four overlay regions for one instance."""
    poly = ann.shapely()
    chains = split_chains(ann)
    ml = min_edge_len(ann)
    d_ht = cfg.delta_headtail * ml
    d_tb = cfg.delta_topbottom * ml
    head = band_strip(chains.head_chain, d_ht, 0.0, poly).intersection(poly)
    tail = band_strip(chains.tail_chain, d_ht, 0.0, poly).intersection(poly)
    tb = unary_union(
        [
            band_strip(chains.top_chain, d_tb / 2, d_tb / 2, poly),
            band_strip(chains.bottom_chain, d_tb / 2, d_tb / 2, poly),
        ]
    )
    return poly, head, tail, tb


def gen_score_maps(
    annotations: list[PolygonAnnotation],
    size: tuple[int, int],
    cfg: BandWidthConfig = BandWidthConfig(),
) -> ScoreMaps:
    """Rasterize all instances into label / instance-id grids.

    Instances are drawn in annotation order, later ones overwriting
    earlier; within an instance the order is center, head, tail,
    top&bottom boundary.
    """
    h, w = size
    labels = np.zeros((h, w), dtype=np.uint8)
    ids = np.zeros((h, w), dtype=np.int32)
    score = ScoreMaps(labels, ids)
    for idx, ann in enumerate(annotations):
        inst = idx + 1
        ml = min_edge_len(ann)
        if ml <= 0:
            score.warnings.append(f"instance {inst}: non-positive min edge length, skipped")
            continue
        if ml <= TINY_MIN_EDGE:
            score.tiny_ids.append(inst)
        poly, head, tail, tb = _instance_region_geoms(ann, cfg)
        overlay = [
            (rasterize_polygon(poly, h, w), RegionClass.Center),
            (rasterize_polygon(head, h, w), RegionClass.Head),
            (rasterize_polygon(tail, h, w), RegionClass.Tail),
            (rasterize_polygon(tb, h, w), RegionClass.TopBottomBoundary),
        ]
        for mask, cls in overlay:
            labels[mask] = cls
            ids[mask] = inst
    return score


def nearest_on_polyline(points: np.ndarray, chain: np.ndarray) -> np.ndarray:
    """Nearest point on an open polyline for each query point.

    points: (K, 2); chain: (S, 2) with S >= 2.  Returns (K, 2).
    """
    p = np.asarray(points, dtype=float)[:, None, :]  # (K, 1, 2)
    a = np.asarray(chain, dtype=float)[None, :-1, :]  # (1, S-1, 2)
    b = np.asarray(chain, dtype=float)[None, 1:, :]
    ab = b - a
    denom = (ab * ab).sum(axis=2)
    denom[denom == 0] = 1.0
    t = ((p - a) * ab).sum(axis=2) / denom
    t = np.clip(t, 0.0, 1.0)
    proj = a + t[:, :, None] * ab  # (K, S-1, 2)
    d2 = ((proj - p) ** 2).sum(axis=2)
    best = np.argmin(d2, axis=1)
    return proj[np.arange(len(best)), best]


def _long_axis_is_horizontal(chains: BoundaryChains) -> bool:
    span = chains.top_chain[-1] - chains.top_chain[0]
    return abs(span[0]) >= abs(span[1])


def gen_geometry_maps(
    annotations: list[PolygonAnnotation],
    score: ScoreMaps,
    cfg: BandWidthConfig = BandWidthConfig(),
    boundary_target: str = "chain",
) -> GeometryMaps:
    """Fill offset channels for the head/tail/center pixels of ``score``.

    Head pixels carry offsets toward the 1st/4th corners (channels 0-3),
    tail pixels toward the 2nd/3rd corners (channels 4-7).  Center pixels
    carry offsets to the nearest point of the top chain (boundary channels
    0-1) and bottom chain (2-3); with ``boundary_target="band_inner_edge"``
    the chains are first inset by half the top&bottom band width.

    valid_mask channels 0-7 mirror the corner channels; channels 8-11 are
    the boundary channels with the long-text-axis pair down-weighted to
    LONG_AXIS_WEIGHT (proximity rule).  Tiny instances get zero mask.
    """
    if boundary_target not in ("chain", "band_inner_edge"):
        raise ValueError("boundary_target must be 'chain' or 'band_inner_edge'")
    h, w = score.labels.shape
    corner = np.zeros((h, w, 8), dtype=np.float32)
    boundary = np.zeros((h, w, 4), dtype=np.float32)
    valid = np.zeros((h, w, 12), dtype=np.float32)
    present = np.unique(score.instance_ids)
    if present.size and present.max() > len(annotations):
        raise ValueError(f"instance id {present.max()} has no annotation")
    xs, ys = _pixel_grid(h, w)
    for idx, ann in enumerate(annotations):
        inst = idx + 1
        if inst not in present:
            continue
        supervised = inst not in score.tiny_ids
        chains = split_chains(ann)
        c1, c2, c3, c4 = (ann.points[i] for i in ann.corner_indices)
        inst_mask = score.instance_ids == inst

        head_m = inst_mask & (score.labels == RegionClass.Head)
        if head_m.any():
            px = np.stack([xs[head_m], ys[head_m]], axis=1).astype(np.float32)
            corner[head_m, 0:2] = c1.astype(np.float32) - px
            corner[head_m, 2:4] = c4.astype(np.float32) - px
            if supervised:
                valid[head_m, 0:4] = 1.0

        tail_m = inst_mask & (score.labels == RegionClass.Tail)
        if tail_m.any():
            px = np.stack([xs[tail_m], ys[tail_m]], axis=1).astype(np.float32)
            corner[tail_m, 4:6] = c2.astype(np.float32) - px
            corner[tail_m, 6:8] = c3.astype(np.float32) - px
            if supervised:
                valid[tail_m, 4:8] = 1.0

        center_m = inst_mask & (score.labels == RegionClass.Center)
        if center_m.any():
            top = chains.top_chain
            bottom = chains.bottom_chain
            if boundary_target == "band_inner_edge":
                poly = ann.shapely()
                inset = cfg.delta_topbottom * min_edge_len(ann) / 2
                top = offset_chain(top, inset, poly)
                bottom = offset_chain(bottom, inset, poly)
            px = np.stack([xs[center_m], ys[center_m]], axis=1).astype(float)
            boundary[center_m, 0:2] = (nearest_on_polyline(px, top) - px).astype(np.float32)
            boundary[center_m, 2:4] = (nearest_on_polyline(px, bottom) - px).astype(np.float32)
            if supervised:
                weights = np.ones(4, dtype=np.float32)
                long_is_chain = chain_length(chains.top_chain) > min_edge_len(ann)
                horizontal = _long_axis_is_horizontal(chains)
                # down-weight the offset pair along the long text axis
                downweight_x = horizontal == long_is_chain
                if downweight_x:
                    weights[[0, 2]] = LONG_AXIS_WEIGHT
                else:
                    weights[[1, 3]] = LONG_AXIS_WEIGHT
                valid[center_m, 8:12] = weights
    return GeometryMaps(corner, boundary, valid)


def gen_labels(
    annotations: list[PolygonAnnotation],
    size: tuple[int, int],
    cfg: BandWidthConfig = BandWidthConfig(),
    boundary_target: str = "chain",
) -> tuple[ScoreMaps, GeometryMaps]:
    score = gen_score_maps(annotations, size, cfg)
    geo = gen_geometry_maps(annotations, score, cfg, boundary_target)
    return score, geo


SCHEMA_VERSION = 1


def serialize_labels(score: ScoreMaps, geometry: GeometryMaps, path) -> None:
    """Write a label bundle directory (tensors + meta.json)."""
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    write_tensor(out / "labels.tpt", score.labels)
    write_tensor(out / "instance_ids.tpt", score.instance_ids)
    write_tensor(out / "corner_offsets.tpt", geometry.corner_offsets)
    write_tensor(out / "boundary_offsets.tpt", geometry.boundary_offsets)
    write_tensor(out / "valid_mask.tpt", geometry.valid_mask)
    meta = {
        "schema_version": SCHEMA_VERSION,
        "width": score.width,
        "height": score.height,
        "instance_count": int(score.instance_ids.max()),
        "tiny_ids": score.tiny_ids,
        "warnings": score.warnings,
    }
    (out / "meta.json").write_text(json.dumps(meta, indent=2))


def deserialize_labels(path) -> tuple[ScoreMaps, GeometryMaps]:
    src = Path(path)
    meta = json.loads((src / "meta.json").read_text())
    score = ScoreMaps(
        labels=read_tensor(src / "labels.tpt"),
        instance_ids=read_tensor(src / "instance_ids.tpt"),
        tiny_ids=list(meta.get("tiny_ids", [])),
        warnings=list(meta.get("warnings", [])),
    )
    geometry = GeometryMaps(
        corner_offsets=read_tensor(src / "corner_offsets.tpt"),
        boundary_offsets=read_tensor(src / "boundary_offsets.tpt"),
        valid_mask=read_tensor(src / "valid_mask.tpt"),
    )
    return score, geometry
