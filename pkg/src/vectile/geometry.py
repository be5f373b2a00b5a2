"""Web Mercator tile-pyramid math and primitive geometric types.

All world coordinates are EPSG:3857 meters. Tiles follow the XYZ
convention: 256x256 pixels, row 0 at the north edge, up to 2^z tiles
per axis at zoom z.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import GeometryParseError, ZoomRangeError

TILE_SIZE = 256
MAX_ZOOM = 22
EARTH_RADIUS = 6378137.0
ORIGIN_SHIFT = 20037508.342789244
WORLD_WIDTH = 40075016.685578488
MAX_LATITUDE = 85.05112878


class WorldPoint(NamedTuple):
    """A planar point in Web Mercator meters."""

    x: float
    y: float


class SegmentGeom(NamedTuple):
    """A straight segment between two world points."""

    a: WorldPoint
    b: WorldPoint


@dataclass(frozen=True)
class BoundingBox:
    """Axis-aligned rectangle in world meters."""

    min_x: float
    min_y: float
    max_x: float
    max_y: float

    def __post_init__(self) -> None:
        if self.min_x > self.max_x or self.min_y > self.max_y:
            raise ValueError(f"inverted bounding box: {self}")

    @property
    def x_span(self) -> float:
        return self.max_x - self.min_x

    @property
    def y_span(self) -> float:
        return self.max_y - self.min_y

    def expand(self, margin: float) -> "BoundingBox":
        return BoundingBox(
            self.min_x - margin, self.min_y - margin,
            self.max_x + margin, self.max_y + margin,
        )

    def intersects(self, other: "BoundingBox") -> bool:
        return not (
            self.max_x < other.min_x or other.max_x < self.min_x
            or self.max_y < other.min_y or other.max_y < self.min_y
        )

    def contains_point(self, x: float, y: float) -> bool:
        return self.min_x <= x <= self.max_x and self.min_y <= y <= self.max_y

    def union(self, other: "BoundingBox") -> "BoundingBox":
        return BoundingBox(
            min(self.min_x, other.min_x), min(self.min_y, other.min_y),
            max(self.max_x, other.max_x), max(self.max_y, other.max_y),
        )


@dataclass(frozen=True)
class TileKey:
    """Tile address (z, x, y), XYZ scheme with row 0 at north."""

    z: int
    x: int
    y: int

    def __post_init__(self) -> None:
        if not 0 <= self.z <= MAX_ZOOM:
            raise ZoomRangeError("zoom out of range")
        n = 1 << self.z
        if not (0 <= self.x < n and 0 <= self.y < n):
            raise ValueError(f"tile ({self.x},{self.y}) out of range at z={self.z}")


@dataclass(frozen=True)
class PixelAddress:
    """A single pixel within a tile; (i, j) = (column, row) from north-west."""

    tile: TileKey
    i: int
    j: int

    def __post_init__(self) -> None:
        if not (0 <= self.i < TILE_SIZE and 0 <= self.j < TILE_SIZE):
            raise ValueError(f"pixel ({self.i},{self.j}) outside 256x256 tile")


WORLD_BOUNDS = BoundingBox(-ORIGIN_SHIFT, -ORIGIN_SHIFT, ORIGIN_SHIFT, ORIGIN_SHIFT)


def resolution(z: int) -> float:
    """Ground resolution in meters per pixel at zoom z."""
    if not 0 <= z <= MAX_ZOOM:
        raise ZoomRangeError("zoom out of range")
    return WORLD_WIDTH / (TILE_SIZE * (1 << z))


def tile_span(z: int) -> float:
    """Edge length of one tile in meters at zoom z."""
    if not 0 <= z <= MAX_ZOOM:
        raise ZoomRangeError("zoom out of range")
    return WORLD_WIDTH / (1 << z)


def _edge_x(z: int, k: int) -> float:
    # Column edges computed from one canonical expression so adjacent
    # tiles share bit-identical boundaries.
    return -ORIGIN_SHIFT + k * tile_span(z)


def _edge_y(z: int, k: int) -> float:
    return ORIGIN_SHIFT - k * tile_span(z)


def tile_bounds(t: TileKey) -> BoundingBox:
    """World extent of a tile; tiles at one zoom partition the world box."""
    return BoundingBox(
        _edge_x(t.z, t.x), _edge_y(t.z, t.y + 1),
        _edge_x(t.z, t.x + 1), _edge_y(t.z, t.y),
    )


def pixel_center(p: PixelAddress) -> WorldPoint:
    """World coordinate of the pixel's center."""
    rz = resolution(p.tile.z)
    return WorldPoint(
        _edge_x(p.tile.z, p.tile.x) + (p.i + 0.5) * rz,
        _edge_y(p.tile.z, p.tile.y) - (p.j + 0.5) * rz,
    )


def pixel_containing(z: int, x: float, y: float) -> PixelAddress:
    """Inverse of pixel_center: the pixel whose square contains (x, y)."""
    rz = resolution(z)
    n = (1 << z) * TILE_SIZE
    gi = int(math.floor((x + ORIGIN_SHIFT) / rz))
    gj = int(math.floor((ORIGIN_SHIFT - y) / rz))
    gi = min(max(gi, 0), n - 1)
    gj = min(max(gj, 0), n - 1)
    return PixelAddress(
        TileKey(z, gi // TILE_SIZE, gj // TILE_SIZE),
        gi % TILE_SIZE, gj % TILE_SIZE,
    )


def tile_range_for_box(z: int, box: BoundingBox) -> tuple[int, int, int, int]:
    """Inclusive (x_min, x_max, y_min, y_max) range of tiles touching box."""
    span = tile_span(z)
    n = 1 << z
    x_min = int(math.floor((box.min_x + ORIGIN_SHIFT) / span))
    x_max = int(math.floor((box.max_x + ORIGIN_SHIFT) / span))
    y_min = int(math.floor((ORIGIN_SHIFT - box.max_y) / span))
    y_max = int(math.floor((ORIGIN_SHIFT - box.min_y) / span))
    clamp = lambda v: min(max(v, 0), n - 1)
    return clamp(x_min), clamp(x_max), clamp(y_min), clamp(y_max)


def lonlat_to_mercator(lon: float, lat: float) -> WorldPoint:
    """Spherical Mercator forward transform (EPSG:4326 -> EPSG:3857).

    Latitude is clamped to +/-85.05112878 degrees where the projection
    becomes singular.
    """
    if not (math.isfinite(lon) and math.isfinite(lat)):
        raise GeometryParseError(f"non-finite coordinate ({lon}, {lat})")
    if abs(lon) > 180.0:
        raise GeometryParseError(f"longitude out of range: {lon}")
    lat = min(max(lat, -MAX_LATITUDE), MAX_LATITUDE)
    x = EARTH_RADIUS * math.radians(lon)
    # atanh(sin phi) == ln(tan(pi/4 + phi/2)) but is exact at the equator.
    y = EARTH_RADIUS * math.atanh(math.sin(math.radians(lat)))
    return WorldPoint(x, y)


def dist_point_point(px: float, py: float, x: float, y: float) -> float:
    dx = px - x
    dy = py - y
    return math.sqrt(dx * dx + dy * dy)


def dist_point_segment(
    px: float, py: float, ax: float, ay: float, bx: float, by: float
) -> float:
    """Euclidean distance from (px, py) to the closed segment a-b.

    Written with the same operation order as the vectorized variant so
    scalar and array paths agree bit-for-bit.
    """
    ux = bx - ax
    uy = by - ay
    dpx = px - ax
    dpy = py - ay
    denom = ux * ux + uy * uy
    if denom == 0.0:
        return math.sqrt(dpx * dpx + dpy * dpy)
    t = (dpx * ux + dpy * uy) / denom
    if t < 0.0:
        t = 0.0
    elif t > 1.0:
        t = 1.0
    dx = dpx - t * ux
    dy = dpy - t * uy
    return math.sqrt(dx * dx + dy * dy)


def dist_points_to_segments(
    px: np.ndarray, py: np.ndarray,
    ax: np.ndarray, ay: np.ndarray, bx: np.ndarray, by: np.ndarray,
) -> np.ndarray:
    """Vectorized point-to-segment distance; broadcasts like numpy."""
    ux = bx - ax
    uy = by - ay
    dpx = px - ax
    dpy = py - ay
    denom = ux * ux + uy * uy
    with np.errstate(invalid="ignore", divide="ignore"):
        t = np.where(denom == 0.0, 0.0, (dpx * ux + dpy * uy) / np.where(denom == 0.0, 1.0, denom))
    t = np.clip(t, 0.0, 1.0)
    dx = dpx - t * ux
    dy = dpy - t * uy
    return np.sqrt(dx * dx + dy * dy)


def segment_intersects_box(
    ax: float, ay: float, bx: float, by: float, box: BoundingBox
) -> bool:
    """Exact segment/rectangle intersection (closed on both sides)."""
    if max(ax, bx) < box.min_x or min(ax, bx) > box.max_x:
        return False
    if max(ay, by) < box.min_y or min(ay, by) > box.max_y:
        return False
    if box.contains_point(ax, ay) or box.contains_point(bx, by):
        return True
    # Separating-line test: all four corners strictly on one side fails.
    dx = bx - ax
    dy = by - ay
    s1 = dx * (box.min_y - ay) - dy * (box.min_x - ax)
    s2 = dx * (box.min_y - ay) - dy * (box.max_x - ax)
    s3 = dx * (box.max_y - ay) - dy * (box.min_x - ax)
    s4 = dx * (box.max_y - ay) - dy * (box.max_x - ax)
    if s1 > 0 and s2 > 0 and s3 > 0 and s4 > 0:
        return False
    if s1 < 0 and s2 < 0 and s3 < 0 and s4 < 0:
        return False
    return True
