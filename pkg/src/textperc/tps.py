"""Differentiable thin-plate-spline rectification.

A TPS mapping is fitted from a canonical destination layout (evenly
spaced points with margins) to the generated source fiducial points,
in inverse-warp convention: each output pixel is mapped to a source
location and bilinearly sampled with zero padding.

Because the fitted source coordinate at a fixed destination location is
linear in the source fiducial coordinates, the Jacobian w.r.t. the
fiducials is the TPS basis evaluated per output pixel; the backward pass
is analytic for both the input grid and the fiducial points, and point
gradients can be scattered back onto geometry-map channels.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fiducials import FiducialSet


class TpsError(ValueError):
    pass


@dataclass(frozen=True)
class DestLayout:
    """Canonical rectified grid: width, height and fiducial margins."""

    w: int
    h: int
    delta_w: float | None = None  # default 0.1 * w
    delta_h: float | None = None  # default 0.1 * h
    n: int = 7

    def __post_init__(self):
        object.__setattr__(self, "delta_w", 0.1 * self.w if self.delta_w is None else self.delta_w)
        object.__setattr__(self, "delta_h", 0.1 * self.h if self.delta_h is None else self.delta_h)
        if self.w <= 2 * self.delta_w or self.h <= 2 * self.delta_h:
            raise TpsError("margins leave no interior space")
        if self.n < 2:
            raise TpsError("need at least 2 points per side")


@dataclass
class RegionGrid:
    values: np.ndarray  # (H, W, C)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim == 2:
            v = v[:, :, None]
        if not np.all(np.isfinite(v)):
            raise ValueError("region values must be finite")
        self.values = v

    @property
    def height(self):
        return self.values.shape[0]

    @property
    def width(self):
        return self.values.shape[1]

    @property
    def channels(self):
        return self.values.shape[2]


@dataclass
class TpsTransform:
    """Destination -> source TPS map in normalized [0,1]^2 coordinates."""

    control_points: np.ndarray  # (2N, 2) normalized destination controls
    affine: np.ndarray  # (2, 3): rows [a0, ax, ay] per output dim
    kernel_weights: np.ndarray  # (2N, 2)
    regularization: float
    dst_scale: np.ndarray  # (2,) divisor used to normalize destinations
    src_scale: np.ndarray  # (2,) divisor used to normalize sources


@dataclass
class WarpGradients:
    d_input: np.ndarray  # same shape as the source region
    d_fiducials: np.ndarray  # (2N, 2)
    d_geometry: np.ndarray | None = None  # (H, W, 12) increments


def dest_points(layout: DestLayout) -> np.ndarray:
    """The 2N canonical destination points, top row then bottom row.

    Top row runs left to right at y = delta_h, bottom row right to left
    at y = h - delta_h, matching the clockwise fiducial ordering.
    """
    n = layout.n
    xs = np.linspace(layout.delta_w, layout.w - layout.delta_w, n)
    top = np.stack([xs, np.full(n, layout.delta_h)], axis=1)
    bottom = np.stack([xs[::-1], np.full(n, layout.h - layout.delta_h)], axis=1)
    return np.concatenate([top, bottom], axis=0)


def _kernel(r2: np.ndarray) -> np.ndarray:
    # U(r) = r^2 log r^2, with U(0) = 0
    with np.errstate(divide="ignore", invalid="ignore"):
        out = r2 * np.log(r2)
    return np.where(r2 > 0, out, 0.0)


def _pairwise_r2(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    d = a[:, None, :] - b[None, :, :]
    return (d * d).sum(axis=2)


def tps_fit(
    src,
    dst: np.ndarray,
    lambda_tps: float = 1e-6,
    src_scale=None,
    dst_scale=None,
) -> TpsTransform:
    """Fit a TPS mapping destination points onto source points.

    src: FiducialSet or (K, 2) array of source points; dst: (K, 2)
    destination points (the TPS controls).  lambda_tps is a ridge on the
    kernel block; 0 gives exact interpolation at the controls.
    """
    s = np.asarray(src.points if isinstance(src, FiducialSet) else src, dtype=float)
    d = np.asarray(dst, dtype=float)
    if s.shape != d.shape or s.ndim != 2 or s.shape[1] != 2 or len(s) < 3:
        raise TpsError("need matching (K, 2) point sets with K >= 3")
    dst_scale = _default_scale(d) if dst_scale is None else np.asarray(dst_scale, dtype=float)
    src_scale = _default_scale(s) if src_scale is None else np.asarray(src_scale, dtype=float)
    dn = d / dst_scale
    sn = s / src_scale
    k = len(dn)
    L = _bordered_system(dn, lambda_tps)
    rhs = np.zeros((k + 3, 2))
    rhs[:k] = sn
    try:
        sol = np.linalg.solve(L, rhs)
    except np.linalg.LinAlgError as exc:
        raise TpsError("degenerate fiducials") from exc
    if not np.all(np.isfinite(sol)):
        raise TpsError("degenerate fiducials")
    weights = sol[:k]
    affine = sol[k:].T  # (2, 3), columns [1, x, y]
    return TpsTransform(dn, affine, weights, lambda_tps, dst_scale, src_scale)


def _default_scale(points: np.ndarray) -> np.ndarray:
    scale = np.abs(points).max(axis=0)
    scale[scale == 0] = 1.0
    return scale


def _bordered_system(controls: np.ndarray, lam: float) -> np.ndarray:
    k = len(controls)
    K = _kernel(_pairwise_r2(controls, controls))
    P = np.concatenate([np.ones((k, 1)), controls], axis=1)
    L = np.zeros((k + 3, k + 3))
    L[:k, :k] = K + lam * np.eye(k)
    L[:k, k:] = P
    L[k:, :k] = P.T
    return L


def tps_basis(t: TpsTransform, query: np.ndarray) -> np.ndarray:
    """Raw basis [U(q, controls), 1, qx, qy] for normalized queries (Q, 2)."""
    q = np.asarray(query, dtype=float)
    U = _kernel(_pairwise_r2(q, t.control_points))
    P = np.concatenate([np.ones((len(q), 1)), q], axis=1)
    return np.concatenate([U, P], axis=1)  # (Q, K+3)


def source_basis(t: TpsTransform, query: np.ndarray) -> np.ndarray:
    """Weights B with source = B @ src_points (per coordinate), (Q, K).

    The fitted solution is linear in the source points, so the sampled
    source coordinate at each query is a fixed combination of them.
    """
    k = len(t.control_points)
    L = _bordered_system(t.control_points, t.regularization)
    phi = tps_basis(t, query)  # (Q, K+3)
    full = np.linalg.solve(L.T, phi.T).T  # (Q, K+3)
    return full[:, :k]


def tps_apply(t: TpsTransform, query: np.ndarray) -> np.ndarray:
    """Map unnormalized destination coordinates to source coordinates."""
    q = np.asarray(query, dtype=float) / t.dst_scale
    phi = tps_basis(t, q)
    params = np.concatenate([t.kernel_weights, t.affine.T], axis=0)  # (K+3, 2)
    return (phi @ params) * t.src_scale


def _output_queries(layout: DestLayout) -> np.ndarray:
    ys, xs = np.mgrid[0 : layout.h, 0 : layout.w]
    return np.stack([xs.ravel(), ys.ravel()], axis=1).astype(float)


def _bilinear_gather(values: np.ndarray, coords: np.ndarray):
    """Sample (H, W, C) values at float (Q, 2) coords, zero padding outside.

    Returns samples plus the interpolation stencil for the backward pass.
    """
    h, w, c = values.shape
    x, y = coords[:, 0], coords[:, 1]
    x0 = np.floor(x).astype(int)
    y0 = np.floor(y).astype(int)
    fx = x - x0
    fy = y - y0
    out = np.zeros((len(coords), c))
    stencil = []
    for dy in (0, 1):
        for dx in (0, 1):
            xi = x0 + dx
            yi = y0 + dy
            wgt = (fx if dx else 1 - fx) * (fy if dy else 1 - fy)
            inside = (xi >= 0) & (xi < w) & (yi >= 0) & (yi < h)
            xi_c = np.clip(xi, 0, w - 1)
            yi_c = np.clip(yi, 0, h - 1)
            val = np.where(inside[:, None], values[yi_c, xi_c], 0.0)
            out += wgt[:, None] * val
            stencil.append((xi_c, yi_c, wgt, inside, val))
    return out, (x0, y0, fx, fy, stencil)


def warp(region: RegionGrid, t: TpsTransform, layout: DestLayout) -> RegionGrid:
    """Rectify a source region onto the layout grid (inverse warp)."""
    queries = _output_queries(layout)
    coords = tps_apply(t, queries)
    samples, _ = _bilinear_gather(region.values, coords)
    return RegionGrid(samples.reshape(layout.h, layout.w, region.channels))


def warp_backward(
    d_output: np.ndarray,
    region: RegionGrid,
    t: TpsTransform,
    layout: DestLayout,
) -> WarpGradients:
    """Gradients of the warp w.r.t. the source region and fiducial points."""
    d_out = np.asarray(d_output, dtype=float)
    if d_out.ndim == 2:
        d_out = d_out[:, :, None]
    if d_out.shape != (layout.h, layout.w, region.channels):
        raise TpsError("d_output shape does not match the warp output")
    values = region.values
    h, w, c = values.shape
    queries = _output_queries(layout)
    coords = tps_apply(t, queries)
    g = d_out.reshape(-1, c)  # (Q, C)

    x, y = coords[:, 0], coords[:, 1]
    x0 = np.floor(x).astype(int)
    y0 = np.floor(y).astype(int)
    fx = x - x0
    fy = y - y0

    d_input = np.zeros_like(values)
    d_sx = np.zeros(len(coords))  # dL/d(source x) per output pixel
    d_sy = np.zeros(len(coords))
    for dy in (0, 1):
        for dx in (0, 1):
            xi = x0 + dx
            yi = y0 + dy
            inside = (xi >= 0) & (xi < w) & (yi >= 0) & (yi < h)
            xi_c = np.clip(xi, 0, w - 1)
            yi_c = np.clip(yi, 0, h - 1)
            wgt = (fx if dx else 1 - fx) * (fy if dy else 1 - fy)
            contrib = g * wgt[:, None] * inside[:, None]
            np.add.at(d_input, (yi_c, xi_c), contrib)
            val = np.where(inside[:, None], values[yi_c, xi_c], 0.0)
            gv = (g * val).sum(axis=1)
            dwx = (1.0 if dx else -1.0) * (fy if dy else 1 - fy)
            dwy = (fx if dx else 1 - fx) * (1.0 if dy else -1.0)
            d_sx += gv * dwx
            d_sy += gv * dwy

    # source coord = src_scale * (B @ normalized src points)
    B = source_basis(t, queries / t.dst_scale)  # (Q, K)
    # d/d(src point) includes the normalization: s = scale * B @ (S / scale)
    d_fid = np.stack([B.T @ d_sx, B.T @ d_sy], axis=1)
    return WarpGradients(d_input=d_input, d_fiducials=d_fid)


def scatter_point_grads(
    d_fiducials: np.ndarray,
    provenance,
    size: tuple[int, int],
    base: np.ndarray | None = None,
) -> np.ndarray:
    """Distribute per-point gradients onto geometry-map channels.

    Each fiducial's gradient is divided by its originating region's pixel
    count and added on the channel pair that produced the point; ``base``
    (e.g. the regression-loss gradient) is incremented in place of zeros.
    """
    h, w = size
    out = np.zeros((h, w, 12)) if base is None else np.array(base, dtype=float, copy=True)
    d = np.asarray(d_fiducials, dtype=float)
    for grad, prov in zip(d, provenance):
        if prov is None or prov.pixels is None:
            continue
        if len(prov.pixels) == 0:
            raise ValueError("cannot distribute gradient over an empty region")
        inc = grad / len(prov.pixels)
        cx, cy = prov.channels
        out[prov.pixels[:, 1], prov.pixels[:, 0], cx] += inc[0]
        out[prov.pixels[:, 1], prov.pixels[:, 0], cy] += inc[1]
    return out
