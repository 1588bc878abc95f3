"""Convenience glue: label maps -> matched instances -> fiducials -> polygons."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .detect import (
    ComponentLabeling,
    DetectedInstance,
    connected_components,
    instance_polygon,
    match_head_tail,
)
from .fiducials import FiducialConfig, FiducialSet, generate_fiducials, instance_masks
from .labels import GeometryMaps, RegionClass
from .tps import DestLayout, RegionGrid, TpsTransform, dest_points, tps_fit, warp


@dataclass
class Labelings:
    center: ComponentLabeling
    head: ComponentLabeling
    tail: ComponentLabeling


def label_components(labels: np.ndarray) -> Labelings:
    return Labelings(
        center=connected_components(labels, RegionClass.Center),
        head=connected_components(labels, RegionClass.Head),
        tail=connected_components(labels, RegionClass.Tail),
    )


def detect_instances(labels: np.ndarray) -> tuple[list[DetectedInstance], Labelings]:
    comps = label_components(labels)
    return match_head_tail(comps.center, comps.head, comps.tail), comps


def attach_fiducials(
    instances: list[DetectedInstance],
    comps: Labelings,
    geo: GeometryMaps,
    cfg: FiducialConfig,
) -> None:
    """Generate fiducials and polygons for every matched instance."""
    for inst in instances:
        if inst.filtered:
            continue
        cm, hm, tm = instance_masks(inst, comps.center, comps.head, comps.tail)
        inst.fiducials = generate_fiducials(geo, cm, hm, tm, cfg)
        instance_polygon(inst)


def annotation_index(inst: DetectedInstance, comps: Labelings, instance_ids: np.ndarray) -> int:
    """0-based index of the annotation that produced a detected instance."""
    ids = instance_ids[comps.center.mask(inst.center_component)]
    ids = ids[ids > 0]
    if ids.size == 0:
        raise ValueError("center component carries no instance id")
    return int(np.bincount(ids).argmax()) - 1


def rectify_instance(
    image: np.ndarray,
    fiducials: FiducialSet,
    layout: DestLayout,
    lambda_tps: float = 1e-6,
) -> tuple[RegionGrid, TpsTransform]:
    """Fit the spline for one instance and warp the image region."""
    if layout.n != fiducials.n:
        layout = DestLayout(layout.w, layout.h, layout.delta_w, layout.delta_h, fiducials.n)
    t = tps_fit(fiducials, dest_points(layout), lambda_tps)
    region = image if isinstance(image, RegionGrid) else RegionGrid(image)
    return warp(region, t, layout), t
