"""Estimator-style facade over index building and tile rasterization.

Follows the scikit-learn fit/transform protocol (get_params/set_params
included) without depending on scikit-learn itself, so the renderer drops
into pipelines and tooling that clone estimators by their parameters:

    rast = DisplayDrivenRasterizer(geometry="point", stroke_width=2)
    grids = rast.fit(points).transform([(3, 1, 2), (4, 3, 5)])
"""

from __future__ import annotations

import inspect
from typing import Sequence

import numpy as np

from .geometry import TileKey
from .index import build_point_index, build_polygon_indexes, build_segment_index
from .render import ClassGrid, PatternLibrary, Style, render_classgrid, render_tile_png
from .validation import (
    check_points_array,
    check_polygons,
    check_segments_array,
    check_stroke_width,
    check_tiles,
)

GEOMETRIES = ("point", "line", "polygon")


class DisplayDrivenRasterizer:
    """Fit spatial indexes over vector data, then transform tile addresses
    into classification grids.

    Parameters
    ----------
    geometry : 'point' | 'line' | 'polygon'
        Layout of X in fit: (n, 2) points, (n, 4) segments, or a sequence
        of ring lists per polygon (rings closed, in Web Mercator meters).
    stroke_width : int
        Stroke radius in pixels used during transform.
    fanout : int
        R-tree node fanout for the packed bulk load.
    """

    def __init__(self, geometry: str = "point", stroke_width: int = 1, fanout: int = 16):
        self.geometry = geometry
        self.stroke_width = stroke_width
        self.fanout = fanout

    # -- sklearn protocol ------------------------------------------------

    @classmethod
    def _param_names(cls) -> list[str]:
        sig = inspect.signature(cls.__init__)
        return [p for p in sig.parameters if p != "self"]

    def get_params(self, deep: bool = True) -> dict:
        return {name: getattr(self, name) for name in self._param_names()}

    def set_params(self, **params) -> "DisplayDrivenRasterizer":
        valid = set(self._param_names())
        for key, value in params.items():
            if key not in valid:
                raise ValueError(f"invalid parameter {key!r} for {type(self).__name__}")
            setattr(self, key, value)
        return self

    # -- fitting -----------------------------------------------------------

    def fit(self, X, y=None) -> "DisplayDrivenRasterizer":
        if self.geometry not in GEOMETRIES:
            raise ValueError(f"geometry must be one of {GEOMETRIES}")
        width = check_stroke_width(self.stroke_width)
        if self.geometry == "point":
            pts = check_points_array(X)
            self.index_ = build_point_index(pts, fanout=self.fanout)
            self.mbr_index_ = None
        elif self.geometry == "line":
            segs = check_segments_array(X)
            self.index_ = build_segment_index(segs, fanout=self.fanout)
            self.mbr_index_ = None
        else:
            polys = check_polygons(X)
            self.index_, self.mbr_index_ = build_polygon_indexes(polys, fanout=self.fanout)
        self.n_primitives_ = self.index_.count
        self.stroke_width_ = width
        return self

    def _check_fitted(self) -> None:
        if not hasattr(self, "index_"):
            raise RuntimeError("this rasterizer is not fitted yet; call fit first")

    # -- transform ----------------------------------------------------------

    def transform(self, tiles: Sequence) -> list[ClassGrid]:
        """Render one classification grid per (z, x, y) tile address."""
        self._check_fitted()
        return [
            render_classgrid(self.index_, self.mbr_index_, tile, self.stroke_width_)
            for tile in check_tiles(tiles)
        ]

    def fit_transform(self, X, tiles: Sequence, y=None) -> list[ClassGrid]:
        return self.fit(X).transform(tiles)

    def render_png(
        self,
        tile: TileKey | tuple[int, int, int],
        style: Style | None = None,
        patterns: PatternLibrary | None = None,
    ) -> bytes:
        """Styled PNG for a single tile."""
        self._check_fitted()
        (tile_key,) = check_tiles([tile])
        style = style if style is not None else Style(stroke_width=self.stroke_width_)
        grid = render_classgrid(self.index_, self.mbr_index_, tile_key, style.stroke_width)
        return render_tile_png(grid, style, tile_key, patterns)

    def contains(self, points) -> np.ndarray:
        """Polygon-interior test per point; only valid for geometry='polygon'."""
        from .render import point_in_polygon_sibf

        self._check_fitted()
        if self.mbr_index_ is None:
            raise ValueError("contains() requires geometry='polygon'")
        pts = check_points_array(points)
        return np.fromiter(
            (point_in_polygon_sibf((x, y), self.index_, self.mbr_index_) for x, y in pts),
            dtype=bool,
            count=pts.shape[0],
        )
