"""Seeded synthetic dataset generators for tests and benchmarks.

All generators emit Web Mercator coordinates directly and are fully
deterministic for a given seed.
"""

from __future__ import annotations

import math

import numpy as np

from .geometry import BoundingBox, ORIGIN_SHIFT

# Keep generated data away from the projection singularities.
DEFAULT_BOX = BoundingBox(
    -ORIGIN_SHIFT * 0.8, -ORIGIN_SHIFT * 0.8, ORIGIN_SHIFT * 0.8, ORIGIN_SHIFT * 0.8
)


def uniform_points(n: int, seed: int, box: BoundingBox = DEFAULT_BOX) -> np.ndarray:
    """(n, 2) points uniform over box."""
    rng = np.random.default_rng(seed)
    xs = rng.uniform(box.min_x, box.max_x, n)
    ys = rng.uniform(box.min_y, box.max_y, n)
    return np.column_stack([xs, ys])


def random_walk_linestrings(
    count: int,
    seed: int,
    box: BoundingBox = DEFAULT_BOX,
    steps: int = 12,
    step_scale: float = 0.01,
) -> tuple[list[np.ndarray], np.ndarray]:
    """Random-walk linestrings: (vertex arrays, flat (m, 4) segment array)."""
    rng = np.random.default_rng(seed)
    scale = min(box.x_span, box.y_span) * step_scale
    lines: list[np.ndarray] = []
    segs: list[np.ndarray] = []
    for _ in range(count):
        n_pts = int(rng.integers(2, steps + 1))
        start = np.array(
            [rng.uniform(box.min_x, box.max_x), rng.uniform(box.min_y, box.max_y)]
        )
        deltas = rng.normal(0.0, scale, size=(n_pts - 1, 2))
        pts = np.vstack([start, start + np.cumsum(deltas, axis=0)])
        pts[:, 0] = np.clip(pts[:, 0], box.min_x, box.max_x)
        pts[:, 1] = np.clip(pts[:, 1], box.min_y, box.max_y)
        lines.append(pts)
        segs.append(np.column_stack([pts[:-1], pts[1:]]))
    return lines, np.concatenate(segs, axis=0)


def _star_ring(
    cx: float, cy: float, radii: np.ndarray, phase: float
) -> list[tuple[float, float]]:
    n = radii.shape[0]
    angles = phase + np.arange(n) * (2.0 * math.pi / n)
    ring = [
        (cx + r * math.cos(a), cy + r * math.sin(a))
        for r, a in zip(radii, angles)
    ]
    ring.append(ring[0])
    return ring


def random_polygons(
    count: int,
    seed: int,
    box: BoundingBox = DEFAULT_BOX,
    radius_scale: float = 0.02,
    max_vertices: int = 12,
    hole_fraction: float = 0.0,
) -> list[list[list[tuple[float, float]]]]:
    """Random star polygons (simple by construction), optionally with a hole.

    Returns one entry per polygon: a list of closed rings, outer first. The
    hole is a shrunken star around the same center, strictly inside the
    outer ring.
    """
    rng = np.random.default_rng(seed)
    base = min(box.x_span, box.y_span) * radius_scale
    polygons = []
    for k in range(count):
        cx = rng.uniform(box.min_x + base * 2, box.max_x - base * 2)
        cy = rng.uniform(box.min_y + base * 2, box.max_y - base * 2)
        n = int(rng.integers(3, max_vertices + 1))
        radii = base * rng.uniform(0.5, 1.0, n)
        phase = rng.uniform(0.0, 2.0 * math.pi)
        rings = [_star_ring(cx, cy, radii, phase)]
        if rng.random() < hole_fraction:
            m = int(rng.integers(3, 7))
            # Hole radius capped under the outer inradius so rings never touch.
            hole = radii.min() * 0.45 * rng.uniform(0.5, 1.0, m)
            rings.append(_star_ring(cx, cy, hole, rng.uniform(0.0, 2.0 * math.pi)))
        polygons.append(rings)
    return polygons


def polygons_to_edges(
    polygons: list[list[list[tuple[float, float]]]]
) -> np.ndarray:
    """Flat (m, 4) non-degenerate edge array over all rings."""
    rows = []
    for rings in polygons:
        for ring in rings:
            for a, b in zip(ring[:-1], ring[1:]):
                if a != b:
                    rows.append((a[0], a[1], b[0], b[1]))
    return np.asarray(rows, dtype=np.float64)
