"""Input validation helpers shared by the estimator facade and services."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .geometry import TileKey


def check_tile(tile: TileKey | tuple[int, int, int]) -> TileKey:
    """Coerce and validate a (z, x, y) tile address."""
    if isinstance(tile, TileKey):
        return tile
    try:
        z, x, y = (int(v) for v in tile)
    except (TypeError, ValueError) as exc:
        raise ValueError(f"expected (z, x, y), got {tile!r}") from exc
    return TileKey(z, x, y)


def check_tiles(tiles: Sequence) -> list[TileKey]:
    if isinstance(tiles, (TileKey, tuple)) and len(tiles) == 3 and not isinstance(tiles[0], (tuple, list, TileKey)):
        raise ValueError("expected a sequence of tiles; wrap a single tile in a list")
    return [check_tile(t) for t in tiles]


def check_stroke_width(width) -> int:
    w = int(width)
    if w != width or w < 1:
        raise ValueError("stroke_width must be an integer >= 1")
    return w


def check_points_array(data) -> np.ndarray:
    arr = np.asarray(data, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ValueError(f"expected an (n, 2) point array, got shape {arr.shape}")
    if arr.shape[0] == 0:
        raise ValueError("empty input")
    if not np.isfinite(arr).all():
        raise ValueError("points contain non-finite coordinates")
    return arr


def check_segments_array(data) -> np.ndarray:
    arr = np.asarray(data, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] != 4:
        raise ValueError(f"expected an (n, 4) segment array, got shape {arr.shape}")
    if arr.shape[0] == 0:
        raise ValueError("empty input")
    if not np.isfinite(arr).all():
        raise ValueError("segments contain non-finite coordinates")
    return arr


def check_polygons(polygons) -> list:
    if not polygons:
        raise ValueError("empty input")
    for k, rings in enumerate(polygons):
        if not rings:
            raise ValueError(f"polygon {k} has no rings")
        for ring in rings:
            if len(ring) < 4:
                raise ValueError(f"polygon {k}: ring needs >= 4 vertices including closure")
            if tuple(ring[0]) != tuple(ring[-1]):
                raise ValueError(f"polygon {k}: ring is not closed")
    return list(polygons)
