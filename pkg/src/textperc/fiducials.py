"""Fiducial-point generation from score and geometry maps.

Each detected instance gets 2N ordered boundary points: the four corners
by averaging pixel+offset over the head/tail regions, the rest by
recursive dichotomous placement using band-averaged boundary offsets.

Ordering: points[0..N-1] run along the top boundary head->tail,
points[N..2N-1] along the bottom boundary tail->head (clockwise ring).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .detect import ComponentLabeling, DetectedInstance
from .labels import GeometryMaps

# channel indices into the 12-channel geometry stack (8 corner + 4 boundary)
CH_CORNER_1 = (0, 1)
CH_CORNER_4 = (2, 3)
CH_CORNER_2 = (4, 5)
CH_CORNER_3 = (6, 7)
CH_TOP = (8, 9)
CH_BOTTOM = (10, 11)


class FiducialError(RuntimeError):
    pass


class BandMissError(FiducialError):
    pass


@dataclass(frozen=True)
class FiducialConfig:
    n: int = 7  # points per side
    delta_ep: float = 3.0  # half-width of the averaging band, px

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("need at least 2 points per side")
        if self.delta_ep <= 0:
            raise ValueError("delta_ep must be positive")


@dataclass
class PointProvenance:
    """Which pixels and offset channels produced one fiducial point."""

    pixels: np.ndarray | None  # (K, 2) int (x, y), None for fallback points
    channels: tuple[int, int] | None


@dataclass
class FiducialSet:
    n: int
    points: np.ndarray  # (2N, 2)
    provenance: list[PointProvenance] | None = None


@dataclass
class BandRegion:
    pixels: np.ndarray  # (K, 2) int (x, y)
    axis: str  # "horizontal-span" or "vertical-span"


def _mask_pixels(mask: np.ndarray) -> np.ndarray:
    ys, xs = np.nonzero(mask)
    return np.stack([xs, ys], axis=1)


def _stack_geometry(geo: GeometryMaps) -> np.ndarray:
    return np.concatenate([geo.corner_offsets, geo.boundary_offsets], axis=2)


def _region_mean(pixels: np.ndarray, geo12: np.ndarray, channels) -> np.ndarray:
    off = geo12[pixels[:, 1], pixels[:, 0]][:, list(channels)]
    return (pixels + off).mean(axis=0)


def corner_fiducials(
    geo: GeometryMaps,
    head_mask: np.ndarray,
    tail_mask: np.ndarray,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """The four corner points (P1, PN, P_{N+1}, P_{2N}) via offset averaging."""
    hp = _mask_pixels(head_mask)
    tp = _mask_pixels(tail_mask)
    if len(hp) == 0 or len(tp) == 0:
        raise FiducialError("unmatched instance: empty head or tail region")
    g = _stack_geometry(geo)
    p1 = _region_mean(hp, g, CH_CORNER_1)
    p2n = _region_mean(hp, g, CH_CORNER_4)
    pn = _region_mean(tp, g, CH_CORNER_2)
    pn1 = _region_mean(tp, g, CH_CORNER_3)
    return p1, pn, pn1, p2n


def midpoint_coord(a: float, b: float, n: int) -> float:
    """Index-middle coordinate between two endpoints of an n-point span."""
    if n < 3:
        raise ValueError("span must contain at least 3 points")
    w_far = ((n - 1) // 2) / (n - 1)
    return (1.0 - w_far) * a + w_far * b


def band_pixels(
    center_mask: np.ndarray,
    coord_mid: float,
    delta_ep: float,
    axis: str = "horizontal-span",
) -> BandRegion:
    """Center-component pixels within +-delta_ep of the mid coordinate."""
    px = _mask_pixels(center_mask)
    col = 0 if axis == "horizontal-span" else 1
    sel = np.abs(px[:, col] - coord_mid) <= delta_ep
    if not sel.any():
        raise BandMissError(f"band miss at {axis} coordinate {coord_mid:.2f}")
    return BandRegion(px[sel], axis)


def band_fiducial(
    band: BandRegion,
    geo: GeometryMaps,
    side: str,
    coord_mid: float,
) -> tuple[np.ndarray, PointProvenance]:
    """Place one fiducial point from a band's averaged boundary offsets."""
    if len(band.pixels) == 0:
        raise BandMissError("empty band")
    channels = CH_TOP if side == "top" else CH_BOTTOM
    g = _stack_geometry(geo)
    target = _region_mean(band.pixels, g, channels)
    if band.axis == "horizontal-span":
        point = np.array([coord_mid, target[1]])
    else:
        point = np.array([target[0], coord_mid])
    return point, PointProvenance(band.pixels, channels)


def _place_recursive(
    side_pts: np.ndarray,
    provenance: list,
    lo: int,
    hi: int,
    center_mask: np.ndarray,
    geo: GeometryMaps,
    side: str,
    cfg: FiducialConfig,
) -> None:
    if hi - lo <= 1:
        return
    mid = (lo + hi) // 2
    pa, pb = side_pts[lo], side_pts[hi]
    span = pb - pa
    axis = "horizontal-span" if abs(span[0]) >= abs(span[1]) else "vertical-span"
    col = 0 if axis == "horizontal-span" else 1
    coord_mid = midpoint_coord(pa[col], pb[col], hi - lo + 1)

    point = None
    prov = PointProvenance(None, None)
    delta = cfg.delta_ep
    for _ in range(4):  # original width plus three doublings
        try:
            band = band_pixels(center_mask, coord_mid, delta, axis)
            point, prov = band_fiducial(band, geo, side, coord_mid)
            break
        except BandMissError:
            delta *= 2
    if point is None:
        # fall back to linear interpolation between the pair endpoints
        t = (mid - lo) / (hi - lo)
        point = (1 - t) * pa + t * pb
    side_pts[mid] = point
    provenance[mid] = prov
    _place_recursive(side_pts, provenance, lo, mid, center_mask, geo, side, cfg)
    _place_recursive(side_pts, provenance, mid, hi, center_mask, geo, side, cfg)


def generate_fiducials(
    geo: GeometryMaps,
    center_mask: np.ndarray,
    head_mask: np.ndarray,
    tail_mask: np.ndarray,
    cfg: FiducialConfig,
) -> FiducialSet:
    """All 2N fiducial points of one instance, with provenance."""
    n = cfg.n
    p1, pn, pn1, p2n = corner_fiducials(geo, head_mask, tail_mask)
    hp = _mask_pixels(head_mask)
    tp = _mask_pixels(tail_mask)

    top = np.zeros((n, 2))
    bottom = np.zeros((n, 2))
    top[0], top[n - 1] = p1, pn
    bottom[0], bottom[n - 1] = pn1, p2n
    top_prov: list = [None] * n
    bottom_prov: list = [None] * n
    top_prov[0] = PointProvenance(hp, CH_CORNER_1)
    top_prov[n - 1] = PointProvenance(tp, CH_CORNER_2)
    bottom_prov[0] = PointProvenance(tp, CH_CORNER_3)
    bottom_prov[n - 1] = PointProvenance(hp, CH_CORNER_4)

    if n > 2:
        if not center_mask.any():
            raise FiducialError("unmatched instance: empty center region")
        _place_recursive(top, top_prov, 0, n - 1, center_mask, geo, "top", cfg)
        _place_recursive(bottom, bottom_prov, 0, n - 1, center_mask, geo, "bottom", cfg)

    return FiducialSet(
        n=n,
        points=np.concatenate([top, bottom], axis=0),
        provenance=top_prov + bottom_prov,
    )


def instance_masks(
    instance: DetectedInstance,
    center: ComponentLabeling,
    head: ComponentLabeling,
    tail: ComponentLabeling,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Boolean masks of one matched instance's three regions."""
    if instance.head_component is None or instance.tail_component is None:
        raise FiducialError("unmatched instance")
    return (
        center.mask(instance.center_component),
        head.mask(instance.head_component),
        tail.mask(instance.tail_component),
    )
