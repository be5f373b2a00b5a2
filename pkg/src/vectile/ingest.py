"""Vector dataset parsing: WKT lines, GeoJSON and CSV points.

Parsers yield RawFeature records in lon/lat degrees; projection to Web
Mercator happens at registration. Multi-geometries are flattened so each
part becomes its own feature (polygon parity needs per-polygon ids).
One dataset must be homogeneous in geometry type.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from typing import IO, Iterable, Iterator, Union

from .errors import GeometryParseError

Coord = tuple[float, float]

GEOM_POINT = "point"
GEOM_LINE = "line"
GEOM_POLYGON = "polygon"


@dataclass(frozen=True)
class RawFeature:
    """One parsed feature before projection.

    coords layout by geom_type: point -> (lon, lat); line -> [ (lon, lat) ];
    polygon -> [ ring ][ (lon, lat) ] with every ring closed.
    """

    fid: int
    geom_type: str
    coords: object

    def vertex_count(self) -> int:
        if self.geom_type == GEOM_POINT:
            return 1
        if self.geom_type == GEOM_LINE:
            return len(self.coords)
        return sum(len(r) for r in self.coords)


def _dedup(coords: list[Coord]) -> list[Coord]:
    out = [coords[0]]
    for c in coords[1:]:
        if c != out[-1]:
            out.append(c)
    return out


def _ring_area2(ring: list[Coord]) -> float:
    s = 0.0
    for k in range(len(ring) - 1):
        s += ring[k][0] * ring[k + 1][1] - ring[k + 1][0] * ring[k][1]
    return s


def _segments_properly_cross(a: Coord, b: Coord, c: Coord, d: Coord) -> bool:
    def orient(p: Coord, q: Coord, r: Coord) -> float:
        return (q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0])

    o1 = orient(a, b, c)
    o2 = orient(a, b, d)
    o3 = orient(c, d, a)
    o4 = orient(c, d, b)
    return o1 * o2 < 0 and o3 * o4 < 0


def _validate_ring(ring: list[Coord], line: int) -> list[Coord]:
    if len(ring) < 4:
        raise GeometryParseError("polygon ring needs at least 4 vertices", line)
    if ring[0] != ring[-1]:
        raise GeometryParseError("polygon ring is not closed", line)
    ring = _dedup(ring[:-1]) + [ring[0]]
    if ring[-2] == ring[-1]:
        ring = ring[:-2] + [ring[0]]
    if len(ring) < 4:
        raise GeometryParseError("polygon ring degenerates after removing duplicate vertices", line)
    n = len(ring) - 1
    for i in range(n):
        for j in range(i + 1, n):
            if abs(i - j) in (0, 1) or (i == 0 and j == n - 1):
                continue
            if _segments_properly_cross(ring[i], ring[i + 1], ring[j], ring[j + 1]):
                raise GeometryParseError("polygon ring is self-intersecting", line)
    if _ring_area2(ring) == 0.0:
        raise GeometryParseError("polygon ring has zero area", line)
    return ring


def _validate_line(coords: list[Coord], line: int) -> list[Coord]:
    if len(coords) < 2:
        raise GeometryParseError("linestring needs at least 2 vertices", line)
    coords = _dedup(coords)
    if len(coords) < 2:
        raise GeometryParseError("linestring degenerates after removing duplicate vertices", line)
    return coords


def _check_coord(c: object, line: int) -> Coord:
    try:
        lon, lat = float(c[0]), float(c[1])
    except (TypeError, ValueError, IndexError) as exc:
        raise GeometryParseError(f"bad coordinate {c!r}", line) from exc
    if lon != lon or lat != lat or abs(lon) == float("inf") or abs(lat) == float("inf"):
        raise GeometryParseError(f"non-finite coordinate ({lon}, {lat})", line)
    return (lon, lat)


# -- WKT ------------------------------------------------------------------

_WKT_HEAD = re.compile(r"^\s*([A-Za-z]+)\s*(.*)$", re.S)


def _wkt_coords(body: str, line: int) -> list:
    """Parse a WKT parenthesized body into nested coordinate lists."""
    body = body.strip()
    if not body.startswith("("):
        raise GeometryParseError(f"expected '(' in WKT geometry, got {body[:20]!r}", line)

    pos = 0

    def parse_group() -> list:
        nonlocal pos
        assert body[pos] == "("
        pos += 1
        items: list = []
        while True:
            while pos < len(body) and body[pos].isspace():
                pos += 1
            if pos >= len(body):
                raise GeometryParseError("unbalanced parentheses in WKT", line)
            if body[pos] == "(":
                items.append(parse_group())
            else:
                end = pos
                while end < len(body) and body[end] not in ",()":
                    end += 1
                token = body[pos:end].strip()
                if token:
                    parts = token.split()
                    if len(parts) < 2:
                        raise GeometryParseError(f"bad WKT coordinate {token!r}", line)
                    items.append(_check_coord(parts[:2], line))
                pos = end
            while pos < len(body) and body[pos].isspace():
                pos += 1
            if pos >= len(body):
                raise GeometryParseError("unbalanced parentheses in WKT", line)
            if body[pos] == ",":
                pos += 1
                continue
            if body[pos] == ")":
                pos += 1
                return items
            raise GeometryParseError(f"unexpected character {body[pos]!r} in WKT", line)

    group = parse_group()
    rest = body[pos:].strip()
    if rest:
        raise GeometryParseError(f"trailing content after WKT geometry: {rest[:20]!r}", line)
    return group


def _features_from_wkt(text: str, fid: int, line: int) -> Iterator[tuple[str, object]]:
    m = _WKT_HEAD.match(text)
    if not m:
        raise GeometryParseError("unparseable WKT", line)
    tag = m.group(1).upper()
    body = m.group(2)
    if "EMPTY" in body.upper() and "(" not in body:
        raise GeometryParseError(f"empty geometry {tag}", line)
    coords = _wkt_coords(body, line)
    if tag == "POINT":
        yield GEOM_POINT, _as_coord(coords, line)
    elif tag == "MULTIPOINT":
        for c in coords:
            yield GEOM_POINT, _as_coord([c] if isinstance(c, tuple) else c, line)
    elif tag == "LINESTRING":
        yield GEOM_LINE, _validate_line(_coord_list(coords, line), line)
    elif tag == "MULTILINESTRING":
        for part in coords:
            yield GEOM_LINE, _validate_line(_coord_list(part, line), line)
    elif tag == "POLYGON":
        yield GEOM_POLYGON, [_validate_ring(_coord_list(r, line), line) for r in coords]
    elif tag == "MULTIPOLYGON":
        for part in coords:
            yield GEOM_POLYGON, [_validate_ring(_coord_list(r, line), line) for r in part]
    else:
        raise GeometryParseError(f"unsupported WKT geometry {tag}", line)


def _as_coord(item: object, line: int) -> Coord:
    if isinstance(item, tuple):
        return item
    if isinstance(item, list):
        if len(item) == 1:
            return _as_coord(item[0], line)
        if len(item) == 2 and all(isinstance(v, (int, float)) for v in item):
            return _check_coord(item, line)
    raise GeometryParseError("expected a single coordinate", line)


def _coord_list(items: object, line: int) -> list[Coord]:
    if not isinstance(items, list) or not items or not all(isinstance(c, tuple) for c in items):
        raise GeometryParseError("expected a coordinate list", line)
    return list(items)


def parse_wkt_lines(stream: Iterable[str]) -> Iterator[RawFeature]:
    fid = 0
    for lineno, raw in enumerate(stream, start=1):
        text = raw.strip()
        if not text:
            continue
        for geom_type, coords in _features_from_wkt(text, fid, lineno):
            yield RawFeature(fid, geom_type, coords)
            fid += 1


# -- GeoJSON ---------------------------------------------------------------


def parse_geojson(text: str) -> Iterator[RawFeature]:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise GeometryParseError(f"invalid JSON: {exc}") from exc
    if doc.get("type") != "FeatureCollection" or "features" not in doc:
        raise GeometryParseError("expected a GeoJSON FeatureCollection")
    fid = 0
    for rec, feature in enumerate(doc["features"], start=1):
        geom = feature.get("geometry") if isinstance(feature, dict) else None
        if not isinstance(geom, dict):
            raise GeometryParseError("feature without geometry", rec)
        for geom_type, coords in _features_from_geojson_geometry(geom, rec):
            yield RawFeature(fid, geom_type, coords)
            fid += 1


def _features_from_geojson_geometry(geom: dict, rec: int) -> Iterator[tuple[str, object]]:
    gtype = geom.get("type")
    coords = geom.get("coordinates")
    if gtype == "Point":
        yield GEOM_POINT, _check_coord(coords, rec)
    elif gtype == "MultiPoint":
        for c in coords:
            yield GEOM_POINT, _check_coord(c, rec)
    elif gtype == "LineString":
        yield GEOM_LINE, _validate_line([_check_coord(c, rec) for c in coords], rec)
    elif gtype == "MultiLineString":
        for part in coords:
            yield GEOM_LINE, _validate_line([_check_coord(c, rec) for c in part], rec)
    elif gtype == "Polygon":
        yield GEOM_POLYGON, [
            _validate_ring([_check_coord(c, rec) for c in ring], rec) for ring in coords
        ]
    elif gtype == "MultiPolygon":
        for part in coords:
            yield GEOM_POLYGON, [
                _validate_ring([_check_coord(c, rec) for c in ring], rec) for ring in part
            ]
    else:
        raise GeometryParseError(f"unsupported GeoJSON geometry {gtype!r}", rec)


# -- CSV points --------------------------------------------------------------


def parse_csv_points(stream: Iterable[str], header: bool = False) -> Iterator[RawFeature]:
    fid = 0
    for lineno, raw in enumerate(stream, start=1):
        if header and lineno == 1:
            continue
        text = raw.strip()
        if not text:
            continue
        parts = text.split(",")
        if len(parts) < 2:
            raise GeometryParseError(f"expected 'lon,lat', got {text!r}", lineno)
        yield RawFeature(fid, GEOM_POINT, _check_coord(parts[:2], lineno))
        fid += 1


# -- dispatch ----------------------------------------------------------------

FORMATS = ("wkt-lines", "geojson", "csv-points")


def parse_dataset(
    source: Union[str, bytes, IO[str]],
    fmt: str,
    csv_header: bool = False,
) -> list[RawFeature]:
    """Parse a whole dataset and enforce a homogeneous geometry type.

    Raises GeometryParseError for malformed geometry (with the record
    number), mixed geometry types, or an empty dataset.
    """
    if fmt not in FORMATS:
        raise GeometryParseError(f"unknown format {fmt!r}; expected one of {FORMATS}")
    if isinstance(source, bytes):
        source = source.decode("utf-8")
    if fmt == "geojson":
        text = source if isinstance(source, str) else source.read()
        features = list(parse_geojson(text))
    else:
        lines = source.splitlines() if isinstance(source, str) else source
        if fmt == "wkt-lines":
            features = list(parse_wkt_lines(lines))
        else:
            features = list(parse_csv_points(lines, header=csv_header))
    if not features:
        raise GeometryParseError("no features")
    kinds = {f.geom_type for f in features}
    if len(kinds) > 1:
        raise GeometryParseError(f"mixed geometry types in one dataset: {sorted(kinds)}")
    return features
