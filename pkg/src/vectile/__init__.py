"""Display-driven vector map tile rendering.

Pixels, not objects, are the computing units: each output pixel classifies
itself against indexed vector data through R-tree queries, so render cost
per tile stays near-constant as datasets grow.
"""

from .catalog import Catalog, DatasetHandle
from .errors import (
    DuplicateDatasetError,
    GeometryParseError,
    IndexFormatError,
    PatternNotFoundError,
    TaskQueueFullError,
    UnknownDatasetError,
    VectileError,
    ZoomRangeError,
)
from .geometry import (
    BoundingBox,
    PixelAddress,
    SegmentGeom,
    TileKey,
    WorldPoint,
    dist_point_segment,
    lonlat_to_mercator,
    pixel_center,
    resolution,
    tile_bounds,
)
from .index import (
    IndexedEdge,
    PolygonMbrEntry,
    SpatialIndex,
    build_point_index,
    build_polygon_indexes,
    build_segment_index,
    cut_edges,
    load_index,
    persist_index,
)
from .ingest import RawFeature, parse_dataset
from .oracle import PrimitiveSet, oracle_classify, oracle_point_in_polygon, oracle_render_tile
from .render import (
    ClassGrid,
    PatternLibrary,
    Style,
    classify_pixel_sibv,
    point_in_polygon_sibf,
    render_classgrid,
    render_tile_png,
    style_tile,
)
from .estimator import DisplayDrivenRasterizer
from .service import Metrics, ResultPool, ServiceConfig, TileService, parse_config

__version__ = "0.1.0"

__all__ = [
    "BoundingBox",
    "Catalog",
    "ClassGrid",
    "DatasetHandle",
    "DisplayDrivenRasterizer",
    "DuplicateDatasetError",
    "GeometryParseError",
    "IndexFormatError",
    "IndexedEdge",
    "Metrics",
    "PatternLibrary",
    "PatternNotFoundError",
    "PixelAddress",
    "PolygonMbrEntry",
    "PrimitiveSet",
    "RawFeature",
    "ResultPool",
    "SegmentGeom",
    "ServiceConfig",
    "SpatialIndex",
    "Style",
    "TaskQueueFullError",
    "TileKey",
    "TileService",
    "UnknownDatasetError",
    "VectileError",
    "WorldPoint",
    "ZoomRangeError",
    "build_point_index",
    "build_polygon_indexes",
    "build_segment_index",
    "classify_pixel_sibv",
    "cut_edges",
    "dist_point_segment",
    "load_index",
    "lonlat_to_mercator",
    "oracle_classify",
    "oracle_point_in_polygon",
    "oracle_render_tile",
    "parse_config",
    "parse_dataset",
    "persist_index",
    "pixel_center",
    "point_in_polygon_sibf",
    "render_classgrid",
    "render_tile_png",
    "resolution",
    "style_tile",
    "tile_bounds",
]
