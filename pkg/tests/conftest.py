import numpy as np
import pytest

from textperc.geom import annotate


@pytest.fixture
def rect_ann():
    """Axis-aligned 100x32 rectangle, clockwise from the top-left."""
    return annotate(np.array([[0, 0], [100, 0], [100, 32], [0, 32]], dtype=float))


def ribbon_points(
    start=(20.0, 60.0),
    direction=(1.0, 0.0),
    length=120.0,
    amplitude=14.0,
    half_height=9.0,
    n_samples=7,
):
    """Sine-arc ribbon polygon, n_samples points per chain, clockwise."""
    start = np.asarray(start, dtype=float)
    direction = np.asarray(direction, dtype=float)
    direction = direction / np.hypot(*direction)
    ts = np.linspace(0.0, 1.0, n_samples)
    normal = np.array([direction[1], -direction[0]])
    center = start[None] + ts[:, None] * length * direction[None]
    center = center + (amplitude * np.sin(np.pi * ts))[:, None] * normal[None]
    d = length * direction[None] + (amplitude * np.pi * np.cos(np.pi * ts))[:, None] * normal[None]
    d /= np.hypot(d[:, 0], d[:, 1])[:, None]
    n_pts = np.stack([d[:, 1], -d[:, 0]], axis=1)
    top = center + half_height * n_pts
    bottom = center - half_height * n_pts
    return np.concatenate([top, bottom[::-1]], axis=0)
