"""Detection post-processing: class overlay, connected components,
head/tail matching, false-positive filtering and polygon output."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage
from shapely.geometry import Polygon as _ShapelyPolygon

from .labels import RegionClass, ScoreMaps

EIGHT_CONN = np.ones((3, 3), dtype=bool)
MATCH_DILATION_PX = 2  # adjacency radius when pairing head/tail with a center


@dataclass
class ComponentLabeling:
    component_ids: np.ndarray  # (H, W) int32, 0 = none
    component_class: "RegionClass"
    component_area: np.ndarray  # (K,) pixel counts, component k at index k-1

    @property
    def count(self) -> int:
        return len(self.component_area)

    def mask(self, cid: int) -> np.ndarray:
        return self.component_ids == cid


@dataclass
class DetectedInstance:
    center_component: int
    head_component: int | None = None
    tail_component: int | None = None
    fiducials: object | None = None  # FiducialSet once generated
    polygon: np.ndarray | None = None
    filtered: bool = False
    filter_reason: str | None = None
    self_intersecting: bool = False


def overlay_classes(per_class_scores: np.ndarray, thresholds=None) -> np.ndarray:
    """Binarize per-class score maps and overlay them in fixed priority.

    per_class_scores: (H, W, 5) in [0, 1], channel order follows
    RegionClass.  Overlay order: center, head, tail, top&bottom boundary
    (later overwrites); pixels below every threshold stay background.
    """
    scores = np.asarray(per_class_scores, dtype=float)
    if scores.ndim != 3 or scores.shape[2] != 5:
        raise ValueError("expected (H, W, 5) score tensor")
    if thresholds is None:
        thresholds = {}
    labels = np.zeros(scores.shape[:2], dtype=np.uint8)
    order = (
        RegionClass.Center,
        RegionClass.Head,
        RegionClass.Tail,
        RegionClass.TopBottomBoundary,
    )
    for cls in order:
        thr = float(thresholds.get(cls, 0.5)) if isinstance(thresholds, dict) else float(thresholds[cls])
        labels[scores[:, :, cls] >= thr] = cls
    return labels


def connected_components(labels: np.ndarray, cls: RegionClass) -> ComponentLabeling:
    """8-connected components of the pixels carrying one class."""
    mask = np.asarray(labels) == int(cls)
    ids, n = ndimage.label(mask, structure=EIGHT_CONN)
    areas = np.bincount(ids.ravel(), minlength=n + 1)[1:]
    return ComponentLabeling(ids.astype(np.int32), cls, areas.astype(np.int64))


def match_head_tail(
    center: ComponentLabeling,
    head: ComponentLabeling,
    tail: ComponentLabeling,
) -> list[DetectedInstance]:
    """Pair each center component with adjacent head/tail components.

    Adjacency is overlap with the center component dilated by
    MATCH_DILATION_PX; among several candidates the maximum-area one
    wins.  Centers missing either side are kept but marked filtered.
    """
    structure = EIGHT_CONN
    instances = []
    for cid in range(1, center.count + 1):
        cmask = center.mask(cid)
        dilated = ndimage.binary_dilation(cmask, structure=structure, iterations=MATCH_DILATION_PX)
        inst = DetectedInstance(center_component=cid)
        inst.head_component = _best_adjacent(dilated, head)
        inst.tail_component = _best_adjacent(dilated, tail)
        if inst.head_component is None or inst.tail_component is None:
            inst.filtered = True
            missing = []
            if inst.head_component is None:
                missing.append("head")
            if inst.tail_component is None:
                missing.append("tail")
            inst.filter_reason = "missing " + "+".join(missing)
        instances.append(inst)
    return instances


def _best_adjacent(dilated_center: np.ndarray, comps: ComponentLabeling) -> int | None:
    touched = np.unique(comps.component_ids[dilated_center])
    touched = touched[touched > 0]
    if touched.size == 0:
        return None
    areas = comps.component_area[touched - 1]
    # deterministic under enumeration order: max area, then smallest id
    best = touched[np.lexsort((touched, -areas))][0]
    return int(best)


def instance_polygon(instance: DetectedInstance) -> np.ndarray:
    """Closed clockwise ring through the instance's fiducial points."""
    if instance.fiducials is None:
        raise ValueError("instance has no fiducial points")
    ring = np.asarray(instance.fiducials.points, dtype=float)
    poly = _ShapelyPolygon(ring)
    instance.self_intersecting = not poly.is_valid
    instance.polygon = ring
    return ring


def polygon_iou(a: np.ndarray, b: np.ndarray) -> float:
    """Intersection-over-union of two simple polygons via clipping."""
    pa = _ShapelyPolygon(np.asarray(a, dtype=float))
    pb = _ShapelyPolygon(np.asarray(b, dtype=float))
    if not pa.is_valid:
        pa = pa.buffer(0)
    if not pb.is_valid:
        pb = pb.buffer(0)
    if pa.area == 0 or pb.area == 0:
        return 0.0
    inter = pa.intersection(pb).area
    union = pa.union(pb).area
    return float(inter / union) if union > 0 else 0.0
