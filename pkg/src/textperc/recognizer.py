"""Toy differentiable sequence recognizer: per-column pooled linear logits.

Stands in for a full sequence model so that gradients can be pushed back
through the rectifier; one logit vector per rectified column, alphabet =
ten digits plus blank.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tps import DestLayout, RegionGrid

ALPHABET = "0123456789"
BLANK = len(ALPHABET)  # class index 10
ALPHABET_SIZE = len(ALPHABET) + 1


@dataclass
class ToyRecognizer:
    weights: np.ndarray  # ((2r + 1) * n_bins * channels + 1, ALPHABET_SIZE)
    height: int
    n_bins: int = 7
    channels: int = 1
    context: int = 2  # neighbour columns included on each side

    @classmethod
    def zeros(
        cls, height: int, n_bins: int = 7, channels: int = 1, context: int = 2
    ) -> "ToyRecognizer":
        if height % n_bins != 0:
            raise ValueError("height must be divisible by n_bins")
        # + 1 for the constant bias feature
        rows = (2 * context + 1) * n_bins * channels + 1
        return cls(np.zeros((rows, ALPHABET_SIZE)), height, n_bins, channels, context)

    def _pooled(self, rectified: RegionGrid) -> np.ndarray:
        v = rectified.values
        if v.shape[0] != self.height or v.shape[2] != self.channels:
            raise ValueError("rectified grid does not match recognizer shape")
        pool = self.height // self.n_bins
        binned = v.reshape(self.n_bins, pool, v.shape[1], self.channels).mean(axis=1)
        return binned.transpose(1, 0, 2).reshape(v.shape[1], -1)

    def features(self, rectified: RegionGrid) -> np.ndarray:
        """(W, (2r + 1) * n_bins * C + 1) column features: height-pooled
        averages of the column and its 2r neighbours (zero past the edges)
        plus a constant bias feature."""
        pooled = self._pooled(rectified)
        w = pooled.shape[0]
        pad = np.pad(pooled, ((self.context, self.context), (0, 0)))
        window = [pad[s : s + w] for s in range(2 * self.context + 1)]
        feats = np.concatenate(window, axis=1)
        return np.concatenate([feats, np.ones((w, 1))], axis=1)


def recognize(rectified: RegionGrid, model: ToyRecognizer) -> np.ndarray:
    """(W, ALPHABET_SIZE) logits, one row per rectified column."""
    return model.features(rectified) @ model.weights


def recognize_backward(
    d_logits: np.ndarray,
    rectified: RegionGrid,
    model: ToyRecognizer,
) -> tuple[np.ndarray, np.ndarray]:
    """Exact adjoint: gradients w.r.t. the rectified grid and the weights."""
    d_logits = np.asarray(d_logits, dtype=float)
    feats = model.features(rectified)
    if d_logits.shape != (feats.shape[0], ALPHABET_SIZE):
        raise ValueError("d_logits shape mismatch")
    d_weights = feats.T @ d_logits
    d_feats = (d_logits @ model.weights.T)[:, :-1]  # drop the bias column
    h, wdt, c = rectified.values.shape
    nb = model.n_bins * c
    # undo the context window: each shifted copy contributes to the pooled
    # columns it was drawn from
    d_pad = np.zeros((wdt + 2 * model.context, nb))
    for k in range(2 * model.context + 1):
        d_pad[k : k + wdt] += d_feats[:, k * nb : (k + 1) * nb]
    d_pooled = d_pad[model.context : model.context + wdt]
    pool = model.height // model.n_bins
    d_binned = d_pooled.reshape(wdt, model.n_bins, c).transpose(1, 0, 2)
    d_rect = np.repeat(d_binned[:, None, :, :], pool, axis=1) / pool
    return d_rect.reshape(h, wdt, c), d_weights


def column_targets(text: str, layout: DestLayout, fill: float = 1.0) -> np.ndarray:
    """Per-column class targets: the string stretched over the interior
    columns, blank inside the margins.

    ``fill`` is the fraction of each character cell the glyph actually
    occupies (centered); columns in the remaining gap are labelled blank.
    With the default 1.0 every interior column gets a character class.
    """
    if not 0.0 < fill <= 1.0:
        raise ValueError("fill must be in (0, 1]")
    targets = np.full(layout.w, BLANK, dtype=int)
    x0, x1 = layout.delta_w, layout.w - layout.delta_w
    cols = np.arange(layout.w)
    inside = (cols >= x0) & (cols < x1)
    pos = (cols[inside] - x0) / (x1 - x0)
    idx = np.minimum((pos * len(text)).astype(int), len(text) - 1)
    classes = np.array([ALPHABET.index(ch) for ch in text])[idx]
    frac = pos * len(text) - idx  # position within the character cell
    on_glyph = np.abs(frac - 0.5) <= fill / 2
    targets[inside] = np.where(on_glyph, classes, BLANK)
    return targets


def cross_entropy(logits: np.ndarray, targets: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean softmax cross-entropy over columns, with its logits gradient."""
    z = logits - logits.max(axis=1, keepdims=True)
    ez = np.exp(z)
    p = ez / ez.sum(axis=1, keepdims=True)
    t = np.asarray(targets, dtype=int)
    n = len(t)
    loss = float(-np.log(p[np.arange(n), t] + 1e-12).mean())
    d = p.copy()
    d[np.arange(n), t] -= 1.0
    return loss, d / n


def column_accuracy(logits: np.ndarray, targets: np.ndarray) -> float:
    return float((logits.argmax(axis=1) == np.asarray(targets)).mean())
