"""Training losses and the soft loss-weight schedule."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .labels import GeometryMaps, RegionClass

DICE_EPS = 1e-6
FOREGROUND_CLASSES = (
    RegionClass.Center,
    RegionClass.Head,
    RegionClass.Tail,
    RegionClass.TopBottomBoundary,
)


@dataclass(frozen=True)
class LossWeights:
    lambda_b: float
    lambda_c: float
    lambda_r: float


@dataclass(frozen=True)
class ScheduleConfig:
    lambda_star: float = 0.6  # peak weight of the regression terms
    lambda_r_star: float = 0.8  # cap on the recognition weight

    def __post_init__(self):
        if self.lambda_star <= 0 or self.lambda_r_star <= 0:
            raise ValueError("schedule maxima must be positive")


def dice_loss(pred: np.ndarray, target: np.ndarray, mask: np.ndarray | None = None) -> float:
    """Binary Dice coefficient loss, 0 for a perfect match, 1 for disjoint."""
    p = np.asarray(pred, dtype=float)
    t = np.asarray(target, dtype=float)
    if p.shape != t.shape:
        raise ValueError("pred/target shape mismatch")
    m = np.ones_like(p) if mask is None else np.asarray(mask, dtype=float)
    inter = (p * t * m).sum()
    denom = (p * p * m).sum() + (t * t * m).sum() + DICE_EPS
    return float(1.0 - 2.0 * inter / denom)


def classification_loss(
    pred_scores: np.ndarray,
    labels: np.ndarray,
    mask: np.ndarray | None = None,
    reduce: str = "mean",
) -> float:
    """Dice loss over the four foreground classes of a label grid."""
    if reduce not in ("mean", "sum"):
        raise ValueError("reduce must be 'mean' or 'sum'")
    per_class = [
        dice_loss(pred_scores[:, :, cls], labels == int(cls), mask)
        for cls in FOREGROUND_CLASSES
    ]
    total = float(np.sum(per_class))
    return total / len(per_class) if reduce == "mean" else total


def smooth_l1(z, sigma: float = 3.0):
    """Smooth-L1 penalty of a residual; quadratic below |z| = 1/sigma^2."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    z = np.asarray(z, dtype=float)
    knee = 1.0 / sigma**2
    out = np.where(np.abs(z) < knee, 0.5 * (sigma * z) ** 2, np.abs(z) - 0.5 * knee)
    return float(out) if out.ndim == 0 else out


def regression_losses(
    pred_geo: GeometryMaps,
    gt_geo: GeometryMaps,
    sigma: float = 3.0,
) -> tuple[float, float, bool]:
    """Masked smooth-L1 over corner and boundary channels.

    Returns (L_corner, L_boundary, supervised): each loss is the
    valid-mask-weighted smooth-L1 averaged over entries with nonzero
    mask; an all-zero mask yields 0 with supervised=False.
    """
    if pred_geo.corner_offsets.shape != gt_geo.corner_offsets.shape:
        raise ValueError("corner offset shape mismatch")
    if pred_geo.boundary_offsets.shape != gt_geo.boundary_offsets.shape:
        raise ValueError("boundary offset shape mismatch")
    mask = gt_geo.valid_mask.astype(float)

    def masked(pred, gt, m):
        nz = m > 0
        if not nz.any():
            return 0.0, False
        z = (np.asarray(pred, dtype=float) - np.asarray(gt, dtype=float))[nz]
        return float((smooth_l1(z, sigma) * m[nz]).sum() / nz.sum()), True

    l_corner, sup_c = masked(pred_geo.corner_offsets, gt_geo.corner_offsets, mask[:, :, :8])
    l_boundary, sup_b = masked(pred_geo.boundary_offsets, gt_geo.boundary_offsets, mask[:, :, 8:])
    return l_corner, l_boundary, sup_c or sup_b


def loss_schedule(epoch: int, cfg: ScheduleConfig = ScheduleConfig(), literal: bool = False) -> LossWeights:
    """Soft loss weights at a given epoch.

    The regression weight decays from lambda_star to lambda_star - 0.5
    and the recognition weight ramps from 0 up to lambda_r_star.  With
    ``literal=True`` the regression decay uses max() instead of min()
    (constant then unbounded decay, clamped at 0) for comparison.
    """
    if epoch < 0:
        raise ValueError("epoch must be >= 0")
    lr = min(max(-0.1 + 0.02 * epoch, 0.0), cfg.lambda_r_star)
    if literal:
        lb = max(cfg.lambda_star - max(0.02 * epoch, 0.5), 0.0)
    else:
        lb = cfg.lambda_star - min(0.02 * epoch, 0.5)
    return LossWeights(lambda_b=lb, lambda_c=lb, lambda_r=lr)


def total_loss(l_cls: float, l_corner: float, l_boundary: float, l_recog: float, w: LossWeights) -> float:
    parts = (l_cls, l_corner, l_boundary, l_recog)
    if not all(np.isfinite(parts)):
        raise ValueError("non-finite loss input")
    return float(l_cls + w.lambda_b * l_corner + w.lambda_c * l_boundary + w.lambda_r * l_recog)
