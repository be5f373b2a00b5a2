"""Brute-force data-driven reference rasterizer.

Every pixel is scored against every primitive by linear scan with no
spatial pruning, mirroring classical object-at-a-time rasterization cost:
per-pixel work grows linearly with object count. Used to validate the
index-driven renderer and to exhibit the O(n) versus O(log n) contrast.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .geometry import (
    TILE_SIZE,
    TileKey,
    dist_points_to_segments,
    tile_bounds,
    resolution,
)
from .render import ClassGrid, sibv_radii


@dataclass(frozen=True)
class PrimitiveSet:
    """Flat in-memory primitives for oracle scans.

    kind 'point': coords (n, 2). kind 'segment' or 'edge': segs (n, 4).
    Polygons additionally carry their raw rings for even-odd filling; ring
    order and closure are taken as ingested.
    """

    kind: str
    coords: np.ndarray | None = None
    segs: np.ndarray | None = None
    polygons: Sequence[Sequence[Sequence[tuple[float, float]]]] | None = None

    @property
    def count(self) -> int:
        if self.kind == "point":
            return 0 if self.coords is None else int(self.coords.shape[0])
        return 0 if self.segs is None else int(self.segs.shape[0])


def oracle_classify(
    p: tuple[float, float],
    z: int,
    n_pixels: int,
    objects: PrimitiveSet,
) -> int:
    """Classify one pixel by scanning every primitive.

    Applies the identical R/R1/R2 thresholds and the 4-sub-pixel rule as
    the index path; sub-pixel distances are measured against the arg-min
    object (ties to the lowest id).
    """
    x, y = p
    rz, radius, r1, r2 = sibv_radii(z, n_pixels)
    if objects.count == 0:
        return 0
    if objects.kind == "point":
        cx = objects.coords[:, 0]
        cy = objects.coords[:, 1]
        dx = cx - x
        dy = cy - y
        d = np.sqrt(dx * dx + dy * dy)
    else:
        s = objects.segs
        d = dist_points_to_segments(x, y, s[:, 0], s[:, 1], s[:, 2], s[:, 3])
    best = int(np.argmin(d))
    dd = float(d[best])
    if dd <= r1:
        return 4
    if dd <= r2:
        off = 0.25 * rz
        count = 0
        for sx, sy in ((x - off, y + off), (x + off, y + off), (x - off, y - off), (x + off, y - off)):
            if objects.kind == "point":
                ddx = objects.coords[best, 0] - sx
                ddy = objects.coords[best, 1] - sy
                sd = math.sqrt(ddx * ddx + ddy * ddy)
            else:
                ax, ay, bx, by = objects.segs[best]
                sd = float(dist_points_to_segments(sx, sy, ax, ay, bx, by))
            if sd <= radius:
                count += 1
        return count
    return 0


def oracle_point_in_polygon(
    p: tuple[float, float],
    rings: Sequence[Sequence[tuple[float, float]]],
) -> bool:
    """Classical even-odd ray cast from p to +infinity over raw rings.

    Horizontal edges never count; each edge owns the half-open vertical
    interval (min_y, max_y] of its endpoints.
    """
    x, y = p
    crossings = 0
    for ring in rings:
        for k in range(len(ring) - 1):
            ax, ay = ring[k]
            bx, by = ring[k + 1]
            if ay == by:
                continue
            y_lo, y_hi = (ay, by) if ay < by else (by, ay)
            if not (y_lo < y <= y_hi):
                continue
            cx = ax + (y - ay) * (bx - ax) / (by - ay)
            if cx > x:
                crossings += 1
    return crossings % 2 == 1


def _oracle_distance_grid(
    objects: PrimitiveSet, tile: TileKey
) -> tuple[np.ndarray, np.ndarray]:
    """(min distance, arg-min id) per pixel, full linear scan, chunked."""
    rz = resolution(tile.z)
    tb = tile_bounds(tile)
    xs = tb.min_x + (np.arange(TILE_SIZE) + 0.5) * rz
    ys = tb.max_y - (np.arange(TILE_SIZE) + 0.5) * rz
    dist = np.empty((TILE_SIZE, TILE_SIZE))
    amin = np.zeros((TILE_SIZE, TILE_SIZE), dtype=np.int64)
    # Cap the (rows x 256 x n) broadcast at ~2e7 doubles per chunk.
    chunk_rows = min(TILE_SIZE, max(1, int(2e7 / (max(objects.count, 1) * TILE_SIZE))))
    for j0 in range(0, TILE_SIZE, chunk_rows):
        j1 = min(j0 + chunk_rows, TILE_SIZE)
        py = ys[j0:j1][:, None, None]
        px = xs[None, :, None]
        if objects.kind == "point":
            dx = objects.coords[None, None, :, 0] - px
            dy = objects.coords[None, None, :, 1] - py
            d = np.sqrt(dx * dx + dy * dy)
        else:
            s = objects.segs
            d = dist_points_to_segments(
                px, py, s[None, None, :, 0], s[None, None, :, 1],
                s[None, None, :, 2], s[None, None, :, 3],
            )
        amin[j0:j1] = np.argmin(d, axis=2)
        dist[j0:j1] = np.take_along_axis(d, amin[j0:j1][..., None], axis=2)[..., 0]
    return dist, amin


def oracle_render_tile(
    objects: PrimitiveSet, tile: TileKey, n_pixels: int = 1
) -> ClassGrid:
    """Full-tile reference grid: per-pixel linear-scan classification plus
    even-odd fill (boundary precedence identical to the engine)."""
    grid = ClassGrid.empty()
    rz, radius, r1, r2 = sibv_radii(tile.z, n_pixels)
    if objects.count > 0:
        dist, amin = _oracle_distance_grid(objects, tile)
        codes = np.zeros((TILE_SIZE, TILE_SIZE), dtype=np.uint8)
        codes[dist <= r1] = 4
        bj, bi = np.nonzero((dist > r1) & (dist <= r2))
        if bj.size:
            tb = tile_bounds(tile)
            xs = tb.min_x + (np.arange(TILE_SIZE) + 0.5) * rz
            ys = tb.max_y - (np.arange(TILE_SIZE) + 0.5) * rz
            px = xs[bi]
            py = ys[bj]
            best = amin[bj, bi]
            off = 0.25 * rz
            count = np.zeros(bj.size, dtype=np.uint8)
            for ox, oy in ((-off, off), (off, off), (-off, -off), (off, -off)):
                if objects.kind == "point":
                    dx = objects.coords[best, 0] - (px + ox)
                    dy = objects.coords[best, 1] - (py + oy)
                    sd = np.sqrt(dx * dx + dy * dy)
                else:
                    s = objects.segs[best]
                    sd = dist_points_to_segments(px + ox, py + oy, s[:, 0], s[:, 1], s[:, 2], s[:, 3])
                count += sd <= radius
            codes[bj, bi] = count
        grid.codes[:] = codes

    if objects.kind == "edge" and objects.polygons is not None:
        tb = tile_bounds(tile)
        xs = tb.min_x + (np.arange(TILE_SIZE) + 0.5) * rz
        ys = tb.max_y - (np.arange(TILE_SIZE) + 0.5) * rz
        inside = np.zeros((TILE_SIZE, TILE_SIZE), dtype=bool)
        for rings in objects.polygons:
            edges = []
            for ring in rings:
                for k in range(len(ring) - 1):
                    ax, ay = ring[k]
                    bx, by = ring[k + 1]
                    if ay != by:
                        edges.append((ax, ay, bx, by))
            if not edges:
                continue
            e = np.asarray(edges)
            ax, ay, bx, by = e[:, 0], e[:, 1], e[:, 2], e[:, 3]
            ey_lo = np.minimum(ay, by)
            ey_hi = np.maximum(ay, by)
            for j in range(TILE_SIZE):
                y = ys[j]
                own = (ey_lo < y) & (y <= ey_hi)
                if not own.any():
                    continue
                cx = ax[own] + (y - ay[own]) * (bx[own] - ax[own]) / (by[own] - ay[own])
                cx.sort()
                n_gt = cx.size - np.searchsorted(cx, xs, side="right")
                inside[j] |= (n_gt % 2) == 1
        grid.fill[:] = inside & (grid.codes == 0)
    return grid
