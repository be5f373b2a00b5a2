"""Packed R-tree spatial indexes over points, segments, polygon edges and MBRs.

Indexes are bulk-loaded (sort-tile-recursive), immutable once built, and
persist to a versioned little-endian binary format whose arrays are
memory-mapped on load so node pages fault in on demand.

Edge entries carry their parent polygon id and an is_level flag marking
edges parallel to the x-axis; horizontal-ray crossing tests attribute each
edge the half-open vertical interval (min_y, max_y] of its endpoints, so a
scan line through a shared vertex of two y-monotone edges counts exactly
one crossing while a reversal vertex counts two (parity neutral).
"""

from __future__ import annotations

import heapq
import json
import struct
import zlib
from pathlib import Path
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .errors import IndexFormatError
from .geometry import (
    BoundingBox,
    SegmentGeom,
    WorldPoint,
    dist_point_point,
    dist_point_segment,
    segment_intersects_box,
)

KIND_POINT = "point"
KIND_SEGMENT = "segment"
KIND_EDGE = "edge"
KIND_MBR = "mbr"

_KIND_CODES = {KIND_POINT: 0, KIND_SEGMENT: 1, KIND_EDGE: 2, KIND_MBR: 3}
_CODE_KINDS = {v: k for k, v in _KIND_CODES.items()}

DEFAULT_FANOUT = 16
_MAGIC = b"VTIX"
_VERSION = 1
_PAGE = 4096
_HEADER_FMT = "<4sIBxxxIQII4dQII"
_HEADER_SIZE = struct.calcsize(_HEADER_FMT)


class IndexedEdge(NamedTuple):
    """One polygon edge as stored in the edge index."""

    geom: SegmentGeom
    polygon_id: int
    is_level: bool


class PolygonMbrEntry(NamedTuple):
    """One polygon MBR as stored in the MBR index."""

    box: BoundingBox
    polygon_id: int

    @property
    def x_span(self) -> float:
        return self.box.max_x - self.box.min_x


def cut_edges(ring: Sequence[tuple[float, float]], polygon_id: int) -> list[IndexedEdge]:
    """Decompose one closed ring into indexed edges.

    The ring must repeat its first vertex at the end. Zero-length edges are
    dropped; edges with equal endpoint y become is_level and never count as
    ray crossings. The cutting semantics live in the (min_y, max_y] interval
    rule applied by crossing tests, not in trimmed geometry.
    """
    if len(ring) < 4:
        raise ValueError("ring needs at least 3 distinct vertices plus closure")
    if ring[0] != ring[-1]:
        raise ValueError("ring is not closed")
    edges: list[IndexedEdge] = []
    for k in range(len(ring) - 1):
        ax, ay = ring[k]
        bx, by = ring[k + 1]
        if ax == bx and ay == by:
            continue
        edges.append(
            IndexedEdge(
                SegmentGeom(WorldPoint(ax, ay), WorldPoint(bx, by)),
                polygon_id,
                ay == by,
            )
        )
    if len(edges) < 3:
        raise ValueError("ring degenerates to fewer than 3 edges")
    return edges


def _str_permutation(cx: np.ndarray, cy: np.ndarray, fanout: int) -> np.ndarray:
    """Sort-tile-recursive ordering of entry centers."""
    n = cx.shape[0]
    n_leaves = -(-n // fanout)
    n_slabs = int(np.ceil(np.sqrt(n_leaves)))
    slab = n_slabs * fanout
    by_x = np.argsort(cx, kind="stable")
    perm = np.empty(n, dtype=np.int64)
    for s in range(0, n, slab):
        chunk = by_x[s : s + slab]
        perm[s : s + slab] = chunk[np.argsort(cy[chunk], kind="stable")]
    return perm


def _group_boxes(boxes: np.ndarray, fanout: int) -> np.ndarray:
    """MBRs of consecutive groups of `fanout` child boxes."""
    starts = np.arange(0, boxes.shape[0], fanout)
    out = np.empty((starts.shape[0], 4), dtype=np.float64)
    out[:, 0] = np.minimum.reduceat(boxes[:, 0], starts)
    out[:, 1] = np.minimum.reduceat(boxes[:, 1], starts)
    out[:, 2] = np.maximum.reduceat(boxes[:, 2], starts)
    out[:, 3] = np.maximum.reduceat(boxes[:, 3], starts)
    return out


def _expand_ranges(starts: np.ndarray, ends: np.ndarray) -> np.ndarray:
    """Concatenate [s, e) integer ranges without a Python loop."""
    lens = ends - starts
    total = int(lens.sum())
    if total == 0:
        return np.empty(0, dtype=np.int64)
    offsets = np.cumsum(lens)
    out = np.ones(total, dtype=np.int64)
    out[0] = starts[0]
    if starts.shape[0] > 1:
        out[offsets[:-1]] = starts[1:] - (starts[:-1] + lens[:-1] - 1)
    return np.cumsum(out)


class SpatialIndex:
    """Immutable packed R-tree over one entry kind.

    Arrays may be plain ndarrays (fresh build) or read-only memmaps (loaded
    from disk); all query paths treat them identically.
    """

    def __init__(
        self,
        kind: str,
        fanout: int,
        ids: np.ndarray,
        arrays: dict[str, np.ndarray],
        levels: list[np.ndarray],
    ):
        self.kind = kind
        self.fanout = fanout
        self.ids = ids
        self.arrays = arrays
        self.levels = levels
        self.count = int(ids.shape[0])
        root = levels[-1][0]
        self.mbr = BoundingBox(float(root[0]), float(root[1]), float(root[2]), float(root[3]))

    # -- construction -------------------------------------------------

    @classmethod
    def build(
        cls,
        kind: str,
        arrays: dict[str, np.ndarray],
        entry_boxes: np.ndarray,
        fanout: int = DEFAULT_FANOUT,
    ) -> "SpatialIndex":
        n = entry_boxes.shape[0]
        if n == 0:
            raise ValueError("empty input")
        cx = (entry_boxes[:, 0] + entry_boxes[:, 2]) * 0.5
        cy = (entry_boxes[:, 1] + entry_boxes[:, 3]) * 0.5
        perm = _str_permutation(cx, cy, fanout)
        arrays = {k: np.ascontiguousarray(v[perm]) for k, v in arrays.items()}
        ids = perm.astype(np.int64)
        levels = [_group_boxes(entry_boxes[perm], fanout)]
        while levels[-1].shape[0] > 1:
            levels.append(_group_boxes(levels[-1], fanout))
        return cls(kind, fanout, ids, arrays, levels)

    # -- entry geometry -----------------------------------------------

    def entry_boxes(self, pos: np.ndarray) -> np.ndarray:
        if self.kind == KIND_POINT:
            pts = self.arrays["coords"][pos]
            return np.column_stack([pts[:, 0], pts[:, 1], pts[:, 0], pts[:, 1]])
        if self.kind == KIND_MBR:
            return self.arrays["boxes"][pos]
        segs = self.arrays["segs"][pos]
        return np.column_stack(
            [
                np.minimum(segs[:, 0], segs[:, 2]),
                np.minimum(segs[:, 1], segs[:, 3]),
                np.maximum(segs[:, 0], segs[:, 2]),
                np.maximum(segs[:, 1], segs[:, 3]),
            ]
        )

    def _entry_box_scalar(self, pos: int) -> tuple[float, float, float, float]:
        if self.kind == KIND_POINT:
            x, y = self.arrays["coords"][pos]
            return x, y, x, y
        if self.kind == KIND_MBR:
            b = self.arrays["boxes"][pos]
            return b[0], b[1], b[2], b[3]
        ax, ay, bx, by = self.arrays["segs"][pos]
        return min(ax, bx), min(ay, by), max(ax, bx), max(ay, by)

    def entry_distance(self, pos: int, x: float, y: float) -> float:
        if self.kind == KIND_POINT:
            cx, cy = self.arrays["coords"][pos]
            return dist_point_point(x, y, cx, cy)
        if self.kind == KIND_MBR:
            b = self.arrays["boxes"][pos]
            dx = max(b[0] - x, 0.0, x - b[2])
            dy = max(b[1] - y, 0.0, y - b[3])
            return float(np.hypot(dx, dy))
        ax, ay, bx, by = self.arrays["segs"][pos]
        return dist_point_segment(x, y, ax, ay, bx, by)

    def entry_intersects_box(self, pos: int, box: BoundingBox) -> bool:
        if self.kind == KIND_POINT:
            x, y = self.arrays["coords"][pos]
            return box.contains_point(x, y)
        if self.kind == KIND_MBR:
            b = self.arrays["boxes"][pos]
            return box.intersects(BoundingBox(b[0], b[1], b[2], b[3]))
        ax, ay, bx, by = self.arrays["segs"][pos]
        return segment_intersects_box(ax, ay, bx, by, box)

    # -- queries ------------------------------------------------------

    def _children(self, level: int, node: int) -> tuple[int, int]:
        start = node * self.fanout
        limit = self.count if level == 0 else self.levels[level - 1].shape[0]
        return start, min(start + self.fanout, limit)

    def query_box(self, box: BoundingBox) -> np.ndarray:
        """Positions of entries whose bounding box intersects `box`.

        Candidates only: exact geometry filtering (for segment kinds) is the
        caller's responsibility. Positions come back in packed order.
        """
        nodes = np.zeros(1, dtype=np.int64)
        for level in range(len(self.levels) - 1, -1, -1):
            b = self.levels[level][nodes]
            hit = (
                (b[:, 0] <= box.max_x) & (b[:, 2] >= box.min_x)
                & (b[:, 1] <= box.max_y) & (b[:, 3] >= box.min_y)
            )
            nodes = nodes[hit]
            if nodes.size == 0:
                return np.empty(0, dtype=np.int64)
            starts = nodes * self.fanout
            limit = self.count if level == 0 else self.levels[level - 1].shape[0]
            nodes = _expand_ranges(starts, np.minimum(starts + self.fanout, limit))
        b = self.entry_boxes(nodes)
        hit = (
            (b[:, 0] <= box.max_x) & (b[:, 2] >= box.min_x)
            & (b[:, 1] <= box.max_y) & (b[:, 3] >= box.min_y)
        )
        return nodes[hit]

    def intersects_any(self, box: BoundingBox) -> tuple[bool, int]:
        """Early-exit test for at least one entry exactly intersecting box.

        Returns (hit, nodes_expanded): the count of tree nodes whose
        children were examined.
        """
        visits = 0
        top = len(self.levels) - 1
        if not self._boxes_overlap(self.levels[top][0], box):
            return False, visits
        stack: list[tuple[int, int]] = [(top, 0)]
        while stack:
            level, node = stack.pop()
            visits += 1
            start, end = self._children(level, node)
            if level == 0:
                for pos in range(start, end):
                    if self.entry_intersects_box(pos, box):
                        return True, visits
            else:
                for child in range(start, end):
                    if self._boxes_overlap(self.levels[level - 1][child], box):
                        stack.append((level - 1, child))
        return False, visits

    def nearest(
        self, x: float, y: float, within: BoundingBox | None = None
    ) -> tuple[float, int, int]:
        """Nearest entry to (x, y), optionally restricted to entries that
        exactly intersect `within`.

        Returns (distance, position, nodes_visited); position is -1 when no
        candidate qualifies. Distance ties break on the smallest entry id so
        results are deterministic.
        """
        visits = 0
        heap: list[tuple[float, int, int, int, int]] = []
        top = len(self.levels) - 1
        if within is None or self._boxes_overlap(self.levels[top][0], within):
            heapq.heappush(heap, (self._box_dist(self.levels[top][0], x, y), 0, 0, top, -1))
        while heap:
            dist, is_entry, key, level, pos = heapq.heappop(heap)
            if is_entry:
                return dist, pos, visits
            node = key
            visits += 1
            start, end = self._children(level, node)
            if level == 0:
                for p in range(start, end):
                    if within is not None and not self.entry_intersects_box(p, within):
                        continue
                    d = self.entry_distance(p, x, y)
                    # Entry heap key (d, 1, id) pops after any node with an
                    # equal box distance, so equidistant ties resolve to the
                    # lowest original entry id.
                    heapq.heappush(heap, (d, 1, int(self.ids[p]), -1, p))
            else:
                for child in range(start, end):
                    cb = self.levels[level - 1][child]
                    if within is not None and not self._boxes_overlap(cb, within):
                        continue
                    heapq.heappush(
                        heap, (self._box_dist(cb, x, y), 0, child, level - 1, -1)
                    )
        return float("inf"), -1, visits

    @staticmethod
    def _boxes_overlap(b: np.ndarray, box: BoundingBox) -> bool:
        return bool(
            b[0] <= box.max_x and b[2] >= box.min_x
            and b[1] <= box.max_y and b[3] >= box.min_y
        )

    @staticmethod
    def _box_dist(b: np.ndarray, x: float, y: float) -> float:
        dx = max(b[0] - x, 0.0, x - b[2])
        dy = max(b[1] - y, 0.0, y - b[3])
        return float(np.sqrt(dx * dx + dy * dy))

    # entries ordered for deterministic downstream iteration
    def positions_sorted_by_id(self, pos: np.ndarray) -> np.ndarray:
        return pos[np.argsort(self.ids[pos], kind="stable")]


def build_point_index(points: np.ndarray | Iterable[WorldPoint], fanout: int = DEFAULT_FANOUT) -> SpatialIndex:
    """Index over point geometry; `points` is an (n, 2) array of x, y."""
    coords = np.ascontiguousarray(np.asarray(points, dtype=np.float64).reshape(-1, 2))
    if coords.shape[0] == 0:
        raise ValueError("empty input")
    boxes = np.column_stack([coords[:, 0], coords[:, 1], coords[:, 0], coords[:, 1]])
    return SpatialIndex.build(KIND_POINT, {"coords": coords}, boxes, fanout)


def build_segment_index(segments: np.ndarray | Iterable[SegmentGeom], fanout: int = DEFAULT_FANOUT) -> SpatialIndex:
    """Index over segments; `segments` is an (n, 4) array of ax, ay, bx, by."""
    if not isinstance(segments, np.ndarray):
        segments = np.array(
            [(s.a.x, s.a.y, s.b.x, s.b.y) for s in segments], dtype=np.float64
        )
    segs = np.ascontiguousarray(segments.astype(np.float64).reshape(-1, 4))
    if segs.shape[0] == 0:
        raise ValueError("empty input")
    boxes = np.column_stack(
        [
            np.minimum(segs[:, 0], segs[:, 2]),
            np.minimum(segs[:, 1], segs[:, 3]),
            np.maximum(segs[:, 0], segs[:, 2]),
            np.maximum(segs[:, 1], segs[:, 3]),
        ]
    )
    return SpatialIndex.build(KIND_SEGMENT, {"segs": segs}, boxes, fanout)


def build_polygon_indexes(
    polygons: Sequence[Sequence[Sequence[tuple[float, float]]]],
    fanout: int = DEFAULT_FANOUT,
) -> tuple[SpatialIndex, SpatialIndex]:
    """Multi-level polygon organization: (edge index, polygon-MBR index).

    Each polygon is a sequence of closed rings (outer first, then holes);
    all rings of one polygon share its id so even-odd parity handles holes.
    """
    if len(polygons) == 0:
        raise ValueError("empty input")
    seg_rows: list[tuple[float, float, float, float]] = []
    pid_rows: list[int] = []
    level_rows: list[bool] = []
    mbr_boxes = np.empty((len(polygons), 4), dtype=np.float64)
    for pid, rings in enumerate(polygons):
        lo_x = lo_y = np.inf
        hi_x = hi_y = -np.inf
        for ring in rings:
            for e in cut_edges(ring, pid):
                seg_rows.append((e.geom.a.x, e.geom.a.y, e.geom.b.x, e.geom.b.y))
                pid_rows.append(pid)
                level_rows.append(e.is_level)
        ring_pts = np.concatenate([np.asarray(r, dtype=np.float64) for r in rings])
        lo_x, lo_y = ring_pts.min(axis=0)
        hi_x, hi_y = ring_pts.max(axis=0)
        mbr_boxes[pid] = (lo_x, lo_y, hi_x, hi_y)

    segs = np.asarray(seg_rows, dtype=np.float64)
    boxes = np.column_stack(
        [
            np.minimum(segs[:, 0], segs[:, 2]),
            np.minimum(segs[:, 1], segs[:, 3]),
            np.maximum(segs[:, 0], segs[:, 2]),
            np.maximum(segs[:, 1], segs[:, 3]),
        ]
    )
    edge_index = SpatialIndex.build(
        KIND_EDGE,
        {
            "segs": segs,
            "polygon_ids": np.asarray(pid_rows, dtype=np.int64),
            "is_level": np.asarray(level_rows, dtype=bool),
        },
        boxes,
        fanout,
    )
    mbr_index = SpatialIndex.build(
        KIND_MBR,
        {
            "boxes": mbr_boxes,
            "polygon_ids": np.arange(len(polygons), dtype=np.int64),
        },
        mbr_boxes.copy(),
        fanout,
    )
    return edge_index, mbr_index


# -- persistence -------------------------------------------------------


def _align(n: int) -> int:
    return (n + _PAGE - 1) // _PAGE * _PAGE


def persist_index(index: SpatialIndex, path: str | Path) -> None:
    """Write the index to a page-aligned, little-endian, versioned file."""
    path = Path(path)
    named: list[tuple[str, np.ndarray]] = [("ids", index.ids)]
    named += [(f"a:{k}", v) for k, v in sorted(index.arrays.items())]
    named += [(f"l:{i}", lvl) for i, lvl in enumerate(index.levels)]

    table = []
    offset = _align(_HEADER_SIZE + 65536)  # generous room for the json table
    blobs: list[bytes] = []
    for name, arr in named:
        arr = np.ascontiguousarray(arr)
        data = arr.astype(arr.dtype.newbyteorder("<"), copy=False).tobytes()
        table.append(
            {
                "name": name,
                "dtype": arr.dtype.str.replace(">", "<").replace("=", "<"),
                "shape": list(arr.shape),
                "offset": offset,
                "nbytes": len(data),
            }
        )
        blobs.append(data)
        offset = _align(offset + len(data))
    total_size = offset
    table_json = json.dumps(table).encode()
    if _HEADER_SIZE + len(table_json) > _align(_HEADER_SIZE + 65536):
        raise IndexFormatError("array table too large")

    data_crc = 0
    for blob in blobs:
        data_crc = zlib.crc32(blob, data_crc)

    mbr = index.mbr
    head_wo_crc = struct.pack(
        _HEADER_FMT,
        _MAGIC,
        _VERSION,
        _KIND_CODES[index.kind],
        index.fanout,
        index.count,
        len(named),
        len(table_json),
        mbr.min_x,
        mbr.min_y,
        mbr.max_x,
        mbr.max_y,
        total_size,
        data_crc,
        0,
    )
    header_crc = zlib.crc32(head_wo_crc[:-4] + table_json)
    header = head_wo_crc[:-4] + struct.pack("<I", header_crc)

    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "wb") as f:
        f.write(header)
        f.write(table_json)
        f.write(b"\x00" * (table[0]["offset"] - f.tell()))
        for entry, blob in zip(table, blobs):
            f.seek(entry["offset"])
            f.write(blob)
        f.truncate(total_size)
    tmp.replace(path)


def load_index(path: str | Path, verify: bool = False) -> SpatialIndex:
    """Memory-map a persisted index; node pages fault in on demand.

    verify=True additionally streams the data region through crc32 (eager
    read) and fails on checksum mismatch.
    """
    path = Path(path)
    try:
        with open(path, "rb") as f:
            header = f.read(_HEADER_SIZE)
    except OSError as exc:
        raise IndexFormatError(f"cannot open index file: {exc}") from exc
    if len(header) < _HEADER_SIZE:
        raise IndexFormatError("truncated index file: header incomplete")
    (
        magic, version, kind_code, fanout, count, n_arrays, json_len,
        min_x, min_y, max_x, max_y, total_size, data_crc, header_crc,
    ) = struct.unpack(_HEADER_FMT, header)
    if magic != _MAGIC:
        raise IndexFormatError("bad magic: not an index file")
    if version != _VERSION:
        raise IndexFormatError(f"unsupported index version {version}")
    if path.stat().st_size != total_size:
        raise IndexFormatError("truncated index file: size mismatch")
    with open(path, "rb") as f:
        f.seek(_HEADER_SIZE)
        table_json = f.read(json_len)
    if zlib.crc32(header[:-4] + table_json) != header_crc:
        raise IndexFormatError("header checksum failure")
    table = json.loads(table_json)
    if len(table) != n_arrays:
        raise IndexFormatError("array table count mismatch")

    arrays: dict[str, np.ndarray] = {}
    levels: dict[int, np.ndarray] = {}
    ids: np.ndarray | None = None
    for entry in table:
        mm = np.memmap(
            path,
            mode="r",
            dtype=np.dtype(entry["dtype"]),
            offset=entry["offset"],
            shape=tuple(entry["shape"]),
        )
        name = entry["name"]
        if name == "ids":
            ids = mm
        elif name.startswith("a:"):
            arrays[name[2:]] = mm
        elif name.startswith("l:"):
            levels[int(name[2:])] = mm
        else:
            raise IndexFormatError(f"unknown array {name!r}")
    if ids is None or not levels:
        raise IndexFormatError("index file missing core arrays")

    if verify:
        crc = 0
        with open(path, "rb") as f:
            for entry in table:
                f.seek(entry["offset"])
                crc = zlib.crc32(f.read(entry["nbytes"]), crc)
        if crc != data_crc:
            raise IndexFormatError("data checksum failure")

    return SpatialIndex(
        _CODE_KINDS[kind_code],
        fanout,
        ids,
        arrays,
        [levels[i] for i in sorted(levels)],
    )
