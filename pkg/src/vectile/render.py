"""Per-pixel tile classification and polygon filling over spatial indexes.

Two equivalent code paths exist for classification:

* `classify_pixel_sibv` / `point_in_polygon_sibf` are the per-pixel
  operations, built from staged index queries with an instrumented
  node-visit count.
* `render_classgrid` classifies a whole 256x256 tile with vectorized
  candidate queries. It computes every distance with the same float
  expressions and the same (distance, id) tie-break as the per-pixel path,
  so the resulting grids are bit-identical to a per-pixel loop and
  independent of row partitioning.

Classification codes: 0 background, 1-3 anti-alias transition (number of
sub-pixel samples inside the stroke radius), 4 fully inside.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from io import BytesIO
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import PatternNotFoundError
from .geometry import (
    TILE_SIZE,
    BoundingBox,
    TileKey,
    WorldPoint,
    dist_points_to_segments,
    resolution,
    tile_bounds,
)
from .index import KIND_EDGE, KIND_POINT, SpatialIndex

SQRT2_4 = math.sqrt(2.0) / 4.0
SQRT2_2 = math.sqrt(2.0) / 2.0

RGBA = tuple[int, int, int, int]

FILL_NONE = "none"
FILL_MONO = "mono"
FILL_PATTERN = "pattern"


@dataclass(frozen=True)
class Style:
    """Rendering parameters; grids never depend on any of these except
    stroke_width, which shapes the classified buffer zone."""

    stroke_width: int = 1
    stroke_color: RGBA = (20, 20, 20, 255)
    fill_mode: str = FILL_NONE
    fill_color: RGBA = (120, 170, 220, 255)
    pattern_id: str | None = None
    background: RGBA = (0, 0, 0, 0)

    def __post_init__(self) -> None:
        if self.stroke_width < 1 or int(self.stroke_width) != self.stroke_width:
            raise ValueError("stroke_width must be an integer >= 1")
        if self.fill_mode not in (FILL_NONE, FILL_MONO, FILL_PATTERN):
            raise ValueError(f"unknown fill_mode {self.fill_mode!r}")
        if self.fill_mode == FILL_PATTERN and not self.pattern_id:
            raise ValueError("fill_mode=pattern requires pattern_id")
        for c in (self.stroke_color, self.fill_color, self.background):
            if len(c) != 4 or any(not 0 <= v <= 255 for v in c):
                raise ValueError(f"bad RGBA tuple {c!r}")


@dataclass
class ClassGrid:
    """256x256 per-pixel classification codes plus polygon fill mask."""

    codes: np.ndarray
    fill: np.ndarray

    def __post_init__(self) -> None:
        if self.codes.shape != (TILE_SIZE, TILE_SIZE) or self.codes.dtype != np.uint8:
            raise ValueError("codes must be a 256x256 uint8 array")
        if self.fill.shape != (TILE_SIZE, TILE_SIZE) or self.fill.dtype != np.bool_:
            raise ValueError("fill must be a 256x256 bool array")

    @classmethod
    def empty(cls) -> "ClassGrid":
        return cls(
            np.zeros((TILE_SIZE, TILE_SIZE), dtype=np.uint8),
            np.zeros((TILE_SIZE, TILE_SIZE), dtype=bool),
        )

    def tobytes(self) -> bytes:
        return self.codes.tobytes() + np.packbits(self.fill).tobytes()

    @classmethod
    def frombytes(cls, raw: bytes) -> "ClassGrid":
        n = TILE_SIZE * TILE_SIZE
        codes = np.frombuffer(raw[:n], dtype=np.uint8).reshape(TILE_SIZE, TILE_SIZE)
        bits = np.frombuffer(raw[n:], dtype=np.uint8)
        fill = np.unpackbits(bits)[:n].astype(bool).reshape(TILE_SIZE, TILE_SIZE)
        return cls(codes.copy(), fill)


def sibv_radii(z: int, n_pixels: int) -> tuple[float, float, float, float]:
    """(R_z, R, R1, R2): stroke radius and anti-alias thresholds at zoom z."""
    rz = resolution(z)
    radius = n_pixels * rz
    return rz, radius, radius - SQRT2_4 * rz, radius + SQRT2_4 * rz


# -- per-pixel operations ----------------------------------------------


def classify_pixel_sibv(
    p: WorldPoint | tuple[float, float],
    z: int,
    n_pixels: int,
    index: SpatialIndex,
) -> int:
    code, _ = classify_pixel_sibv_counted(p, z, n_pixels, index)
    return code


def classify_pixel_sibv_counted(
    p: WorldPoint | tuple[float, float],
    z: int,
    n_pixels: int,
    index: SpatialIndex,
) -> tuple[int, int]:
    """Classify one pixel against buffered point/segment/edge objects.

    Staged query plan: a small inner box answers dense regions with a
    single intersection probe; otherwise nearest-neighbor searches limited
    to boxes of half-width R1 then R2 decide full coverage, transition
    (scored by 4 super-sampled sub-centers against the nearest object), or
    background. Returns (code, index nodes visited).
    """
    if n_pixels < 1:
        raise ValueError("stroke width must be >= 1 pixel")
    x, y = p
    rz, radius, r1, r2 = sibv_radii(z, n_pixels)
    visits = 0

    r_inner = SQRT2_2 * r1
    hit, v = index.intersects_any(BoundingBox(x - r_inner, y - r_inner, x + r_inner, y + r_inner))
    visits += v
    if hit:
        return 4, visits

    d, pos, v = index.nearest(x, y, within=BoundingBox(x - r1, y - r1, x + r1, y + r1))
    visits += v
    if pos >= 0 and d <= r1:
        return 4, visits

    d, pos, v = index.nearest(x, y, within=BoundingBox(x - r2, y - r2, x + r2, y + r2))
    visits += v
    if pos >= 0 and d <= r2:
        off = 0.25 * rz
        count = 0
        for sx, sy in (
            (x - off, y + off),
            (x + off, y + off),
            (x - off, y - off),
            (x + off, y - off),
        ):
            if index.entry_distance(pos, sx, sy) <= radius:
                count += 1
        return count, visits
    return 0, visits


def point_in_polygon_sibf(
    p: WorldPoint | tuple[float, float],
    edge_index: SpatialIndex,
    mbr_index: SpatialIndex,
) -> bool:
    """Index-accelerated even-odd ray casting for polygon interiority.

    Candidate polygons (MBR contains p) are tried in ascending x-span
    order; for each, a horizontal query segment runs from the nearer MBR
    x-edge to p and edge crossings of that polygon are counted under the
    half-open (min_y, max_y] vertex rule, skipping x-parallel edges.
    """
    x, y = p
    cands = mbr_index.query_box(BoundingBox(x, y, x, y))
    if cands.size == 0:
        return False
    boxes = mbr_index.arrays["boxes"]
    pids = mbr_index.arrays["polygon_ids"]
    spans = boxes[cands, 2] - boxes[cands, 0]
    order = np.lexsort((pids[cands], spans))
    segs = edge_index.arrays["segs"]
    edge_pids = edge_index.arrays["polygon_ids"]
    edge_level = edge_index.arrays["is_level"]

    for c in cands[order]:
        vminx = boxes[c, 0]
        vmaxx = boxes[c, 2]
        pid = pids[c]
        if x - vminx < vmaxx - x:
            qs_x0, qs_x1 = vminx, x
        else:
            qs_x0, qs_x1 = x, vmaxx
        hits = edge_index.query_box(BoundingBox(qs_x0, y, qs_x1, y))
        count = 0
        for e in hits:
            if edge_pids[e] != pid or edge_level[e]:
                continue
            ax, ay, bx, by = segs[e]
            y_lo, y_hi = (ay, by) if ay < by else (by, ay)
            if not (y_lo < y <= y_hi):
                continue
            cx = ax + (y - ay) * (bx - ax) / (by - ay)
            if qs_x0 <= cx <= qs_x1:
                count += 1
        if count % 2 == 1:
            return True
    return False


# -- vectorized tile rendering ------------------------------------------


@lru_cache(maxsize=32)
def _point_stencil(n_pixels: int) -> tuple[np.ndarray, np.ndarray]:
    """Integer pixel offsets around a point whose centers can lie within R2."""
    reach = n_pixels + SQRT2_4
    m = math.ceil(reach + 0.5)
    di, dj = np.meshgrid(np.arange(-m, m + 1), np.arange(-m, m + 1))
    di = di.ravel()
    dj = dj.ravel()
    lo_x = np.maximum(np.abs(di) - 0.5, 0.0)
    lo_y = np.maximum(np.abs(dj) - 0.5, 0.0)
    keep = np.sqrt(lo_x * lo_x + lo_y * lo_y) <= reach + 1e-9
    return di[keep].astype(np.int64), dj[keep].astype(np.int64)


def _pixel_axes(tile: TileKey) -> tuple[np.ndarray, np.ndarray, BoundingBox, float]:
    rz = resolution(tile.z)
    tb = tile_bounds(tile)
    xs = tb.min_x + (np.arange(TILE_SIZE) + 0.5) * rz
    ys = tb.max_y - (np.arange(TILE_SIZE) + 0.5) * rz
    return xs, ys, tb, rz


def _min_distance_field(
    primary: SpatialIndex,
    tile: TileKey,
    n_pixels: int,
    j0: int,
    j1: int,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Min distance and arg-min candidate over a block of tile rows.

    Returns (dist, rank, cand_positions): `rank` indexes into
    `cand_positions` (sorted by original entry id, so smaller rank means
    smaller id and ties resolve exactly like the scalar nearest query);
    pixels with no candidate within R2 keep dist=inf.
    """
    xs, ys, tb, rz = _pixel_axes(tile)
    _, radius, _, r2 = sibv_radii(tile.z, n_pixels)
    rows = j1 - j0
    dist = np.full((rows, TILE_SIZE), np.inf)
    rank = np.full((rows, TILE_SIZE), np.iinfo(np.int64).max, dtype=np.int64)

    margin = r2 + rz
    qbox = BoundingBox(
        xs[0] - margin, ys[j1 - 1] - margin, xs[-1] + margin, ys[j0] + margin
    )
    cand = primary.query_box(qbox)
    if cand.size == 0:
        return dist, rank, cand
    cand = primary.positions_sorted_by_id(cand)

    if primary.kind == KIND_POINT:
        coords = np.asarray(primary.arrays["coords"][cand])
        cx = coords[:, 0]
        cy = coords[:, 1]
        fi = (cx - tb.min_x) / rz - 0.5
        fj = (tb.max_y - cy) / rz - 0.5
        ic = np.floor(fi + 0.5).astype(np.int64)
        jc = np.floor(fj + 0.5).astype(np.int64)
        di, dj = _point_stencil(n_pixels)
        ii = ic[:, None] + di[None, :]
        jj = jc[:, None] + dj[None, :]
        valid = (ii >= 0) & (ii < TILE_SIZE) & (jj >= j0) & (jj < j1)
        if not valid.any():
            return dist, rank, cand
        ranks = np.broadcast_to(
            np.arange(cand.size, dtype=np.int64)[:, None], ii.shape
        )[valid]
        ii = ii[valid]
        jj = jj[valid]
        pcx = xs[ii]
        pcy = ys[jj]
        ccx = np.broadcast_to(cx[:, None], valid.shape)[valid]
        ccy = np.broadcast_to(cy[:, None], valid.shape)[valid]
        dx = ccx - pcx
        dy = ccy - pcy
        d = np.sqrt(dx * dx + dy * dy)
        flat = (jj - j0) * TILE_SIZE + ii
        dist_flat = dist.ravel()
        rank_flat = rank.ravel()
        np.minimum.at(dist_flat, flat, d)
        claim = d == dist_flat[flat]
        np.minimum.at(rank_flat, flat[claim], ranks[claim])
    else:
        segs = np.asarray(primary.arrays["segs"][cand])
        ys_block = ys[j0:j1]
        for k in range(cand.size):
            ax, ay, bx, by = segs[k]
            s_min_x, s_max_x = (ax, bx) if ax < bx else (bx, ax)
            s_min_y, s_max_y = (ay, by) if ay < by else (by, ay)
            i_lo = max(int(math.floor((s_min_x - margin - tb.min_x) / rz - 0.5)), 0)
            i_hi = min(int(math.ceil((s_max_x + margin - tb.min_x) / rz)) + 1, TILE_SIZE)
            jg_lo = max(int(math.floor((tb.max_y - s_max_y - margin) / rz - 0.5)), j0)
            jg_hi = min(int(math.ceil((tb.max_y - s_min_y + margin) / rz)) + 1, j1)
            if i_lo >= i_hi or jg_lo >= jg_hi:
                continue
            sub_x = xs[i_lo:i_hi][None, :]
            sub_y = ys_block[jg_lo - j0 : jg_hi - j0][:, None]
            d = dist_points_to_segments(sub_x, sub_y, ax, ay, bx, by)
            dv = dist[jg_lo - j0 : jg_hi - j0, i_lo:i_hi]
            rv = rank[jg_lo - j0 : jg_hi - j0, i_lo:i_hi]
            better = d < dv
            dv[better] = d[better]
            rv[better] = k
    return dist, rank, cand


def _classify_block(
    primary: SpatialIndex,
    tile: TileKey,
    n_pixels: int,
    j0: int,
    j1: int,
) -> np.ndarray:
    xs, ys, _, rz = _pixel_axes(tile)
    _, radius, r1, r2 = sibv_radii(tile.z, n_pixels)
    dist, rank, cand = _min_distance_field(primary, tile, n_pixels, j0, j1)
    codes = np.zeros((j1 - j0, TILE_SIZE), dtype=np.uint8)
    if cand.size == 0:
        return codes
    codes[dist <= r1] = 4
    bj, bi = np.nonzero((dist > r1) & (dist <= r2))
    if bj.size:
        pos = cand[rank[bj, bi]]
        px = xs[bi]
        py = ys[j0 + bj]
        off = 0.25 * rz
        count = np.zeros(bj.size, dtype=np.uint8)
        if primary.kind == KIND_POINT:
            pts = np.asarray(primary.arrays["coords"][pos])
            for sx_off, sy_off in ((-off, off), (off, off), (-off, -off), (off, -off)):
                dx = pts[:, 0] - (px + sx_off)
                dy = pts[:, 1] - (py + sy_off)
                count += np.sqrt(dx * dx + dy * dy) <= radius
        else:
            segs = np.asarray(primary.arrays["segs"][pos])
            for sx_off, sy_off in ((-off, off), (off, off), (-off, -off), (off, -off)):
                d = dist_points_to_segments(
                    px + sx_off, py + sy_off,
                    segs[:, 0], segs[:, 1], segs[:, 2], segs[:, 3],
                )
                count += d <= radius
        codes[bj, bi] = count
    return codes


def _fill_block(
    edge_index: SpatialIndex,
    mbr_index: SpatialIndex,
    tile: TileKey,
    j0: int,
    j1: int,
) -> np.ndarray:
    """Even-odd interiority for every pixel of the block (ignoring codes)."""
    xs, ys, _, _ = _pixel_axes(tile)
    ys_block = ys[j0:j1]
    inside = np.zeros((j1 - j0, TILE_SIZE), dtype=bool)
    block_box = BoundingBox(xs[0], ys_block[-1], xs[-1], ys_block[0])
    cands = mbr_index.query_box(block_box)
    if cands.size == 0:
        return inside
    boxes = mbr_index.arrays["boxes"]
    mbr_pids = mbr_index.arrays["polygon_ids"]
    segs = edge_index.arrays["segs"]
    edge_pids = edge_index.arrays["polygon_ids"]
    edge_level = edge_index.arrays["is_level"]

    for c in cands:
        vminx, vminy, vmaxx, vmaxy = boxes[c]
        pid = mbr_pids[c]
        row_sel = np.nonzero((ys_block >= vminy) & (ys_block <= vmaxy))[0]
        col_sel = np.nonzero((xs >= vminx) & (xs <= vmaxx))[0]
        if row_sel.size == 0 or col_sel.size == 0:
            continue
        y_lo_q = float(ys_block[row_sel[-1]])
        y_hi_q = float(ys_block[row_sel[0]])
        hits = edge_index.query_box(BoundingBox(vminx, y_lo_q, vmaxx, y_hi_q))
        hits = hits[(edge_pids[hits] == pid) & (~edge_level[hits])]
        if hits.size == 0:
            continue
        e = np.asarray(segs[hits])
        ax, ay, bx, by = e[:, 0], e[:, 1], e[:, 2], e[:, 3]
        ey_lo = np.minimum(ay, by)
        ey_hi = np.maximum(ay, by)
        px = xs[col_sel]
        left = (px - vminx) < (vmaxx - px)
        for r in row_sel:
            y = ys_block[r]
            own = (ey_lo < y) & (y <= ey_hi)
            if not own.any():
                continue
            cx = ax[own] + (y - ay[own]) * (bx[own] - ax[own]) / (by[own] - ay[own])
            cx.sort()
            n_le = np.searchsorted(cx, px, side="right") - np.searchsorted(cx, vminx, side="left")
            n_ge = np.searchsorted(cx, vmaxx, side="right") - np.searchsorted(cx, px, side="left")
            odd = np.where(left, n_le, n_ge) % 2 == 1
            inside[r, col_sel[odd]] = True
    return inside


def render_rows(
    primary: SpatialIndex,
    mbr_index: SpatialIndex | None,
    tile: TileKey,
    n_pixels: int,
    j0: int,
    j1: int,
) -> tuple[np.ndarray, np.ndarray]:
    """Render a contiguous block of tile rows: (codes, fill)."""
    codes = _classify_block(primary, tile, n_pixels, j0, j1)
    if primary.kind == KIND_EDGE and mbr_index is not None:
        fill = _fill_block(primary, mbr_index, tile, j0, j1) & (codes == 0)
    else:
        fill = np.zeros_like(codes, dtype=bool)
    return codes, fill


def render_classgrid(
    primary: SpatialIndex,
    mbr_index: SpatialIndex | None,
    tile: TileKey,
    n_pixels: int = 1,
    row_parallelism: int = 1,
) -> ClassGrid:
    """Classify a full tile; the polygon fill mask is evaluated only where
    the boundary classification left background (code 0).

    Output is identical for any row_parallelism, which only controls how
    many worker threads share the row blocks.
    """
    if n_pixels < 1:
        raise ValueError("stroke width must be >= 1 pixel")
    blocks = max(1, min(int(row_parallelism), TILE_SIZE))
    bounds = np.linspace(0, TILE_SIZE, blocks + 1, dtype=int)
    spans = [(int(bounds[k]), int(bounds[k + 1])) for k in range(blocks) if bounds[k] < bounds[k + 1]]
    if len(spans) == 1:
        parts = [render_rows(primary, mbr_index, tile, n_pixels, 0, TILE_SIZE)]
    else:
        with ThreadPoolExecutor(max_workers=len(spans)) as pool:
            parts = list(
                pool.map(
                    lambda s: render_rows(primary, mbr_index, tile, n_pixels, s[0], s[1]),
                    spans,
                )
            )
    codes = np.concatenate([p[0] for p in parts], axis=0)
    fill = np.concatenate([p[1] for p in parts], axis=0)
    return ClassGrid(codes, fill)


# -- styling -------------------------------------------------------------


class PatternLibrary:
    """Directory of small RGBA PNG swatches addressed by filename stem."""

    def __init__(self, directory: str | Path | None):
        self.directory = Path(directory) if directory else None
        self._cache: dict[str, np.ndarray] = {}

    def get(self, pattern_id: str) -> np.ndarray:
        if pattern_id in self._cache:
            return self._cache[pattern_id]
        if self.directory is None:
            raise PatternNotFoundError(f"no pattern library configured ({pattern_id!r})")
        path = self.directory / f"{pattern_id}.png"
        if not path.exists():
            raise PatternNotFoundError(f"unknown pattern {pattern_id!r}")
        with Image.open(path) as im:
            arr = np.asarray(im.convert("RGBA"), dtype=np.uint8)
        self._cache[pattern_id] = arr
        return arr

    def names(self) -> list[str]:
        if self.directory is None or not self.directory.exists():
            return []
        return sorted(p.stem for p in self.directory.glob("*.png"))


def style_tile(
    grid: ClassGrid,
    style: Style,
    tile: TileKey,
    patterns: PatternLibrary | None = None,
) -> np.ndarray:
    """Turn a classification grid into a 256x256 RGBA image array.

    Transition codes k=1..3 draw the stroke color with alpha scaled by k/4
    composited over the underlying background or fill; patterns sample in
    global pixel space so they tile seamlessly across tile boundaries.
    """
    base = np.empty((TILE_SIZE, TILE_SIZE, 4), dtype=np.float64)
    base[:] = np.asarray(style.background, dtype=np.float64)
    if style.fill_mode == FILL_MONO:
        base[grid.fill] = np.asarray(style.fill_color, dtype=np.float64)
    elif style.fill_mode == FILL_PATTERN:
        lib = patterns if patterns is not None else PatternLibrary(None)
        tex = lib.get(style.pattern_id or "")
        th, tw = tex.shape[0], tex.shape[1]
        jj, ii = np.nonzero(grid.fill)
        gx = (tile.x * TILE_SIZE + ii) % tw
        gy = (tile.y * TILE_SIZE + jj) % th
        base[jj, ii] = tex[gy, gx].astype(np.float64)

    out = base.copy()
    sr, sg, sb, sa = (float(v) for v in style.stroke_color)
    for k in (1, 2, 3):
        mask = grid.codes == k
        if not mask.any():
            continue
        alpha = round(sa * k / 4.0)
        out[mask] = _composite_over(np.array([sr, sg, sb, alpha]), base[mask])
    out[grid.codes == 4] = np.asarray(style.stroke_color, dtype=np.float64)
    return np.clip(np.rint(out), 0, 255).astype(np.uint8)


def _composite_over(src: np.ndarray, dst: np.ndarray) -> np.ndarray:
    """Source-over alpha compositing on straight-alpha RGBA in 0..255."""
    sa = src[3] / 255.0
    da = dst[..., 3] / 255.0
    out_a = sa + da * (1.0 - sa)
    out = np.empty_like(dst)
    safe = np.where(out_a == 0.0, 1.0, out_a)
    for c in range(3):
        out[..., c] = (src[c] * sa + dst[..., c] * da * (1.0 - sa)) / safe
    out[..., 3] = out_a * 255.0
    return out


def encode_png(rgba: np.ndarray) -> bytes:
    """Lossless non-interlaced RGBA PNG bytes for one tile image."""
    im = Image.fromarray(rgba, mode="RGBA")
    buf = BytesIO()
    im.save(buf, format="PNG")
    return buf.getvalue()


def render_tile_png(
    grid: ClassGrid,
    style: Style,
    tile: TileKey,
    patterns: PatternLibrary | None = None,
) -> bytes:
    return encode_png(style_tile(grid, style, tile, patterns))


_TRANSPARENT_PNG: bytes | None = None


def transparent_tile_png() -> bytes:
    """Cached fully transparent 256x256 tile."""
    global _TRANSPARENT_PNG
    if _TRANSPARENT_PNG is None:
        _TRANSPARENT_PNG = encode_png(
            np.zeros((TILE_SIZE, TILE_SIZE, 4), dtype=np.uint8)
        )
    return _TRANSPARENT_PNG
