"""Dataset registration and the on-disk catalog.

A registered dataset is a directory holding index files named after their
node type (RtreeP, RtreeL, RtreeE, RtreeMBR) plus a meta.json with the
dataset MBR and record counts. Registration is atomic: indexes are built
in a hidden staging directory and renamed into place, so a failed build
leaves nothing visible. Handles load their indexes lazily via memory
mapping and are safe to share across renderer processes.
"""

from __future__ import annotations

import json
import os
import shutil
import uuid
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DuplicateDatasetError, GeometryParseError, UnknownDatasetError
from .geometry import BoundingBox, lonlat_to_mercator
from .index import SpatialIndex, build_point_index, build_polygon_indexes, build_segment_index, load_index, persist_index
from .ingest import GEOM_LINE, GEOM_POINT, GEOM_POLYGON, RawFeature

META_NAME = "meta.json"
INDEX_FILES = {
    GEOM_POINT: {"primary": "RtreeP.vtix"},
    GEOM_LINE: {"primary": "RtreeL.vtix"},
    GEOM_POLYGON: {"primary": "RtreeE.vtix", "mbr": "RtreeMBR.vtix"},
}


@dataclass
class DatasetHandle:
    """Registered dataset: metadata plus lazily mapped indexes."""

    name: str
    geom_type: str
    mbr: BoundingBox
    counts: dict[str, int]
    index_paths: dict[str, str]
    _primary: SpatialIndex | None = field(default=None, repr=False)
    _mbr_index: SpatialIndex | None = field(default=None, repr=False)

    @property
    def primary_index(self) -> SpatialIndex:
        if self._primary is None:
            self._primary = load_index(self.index_paths["primary"])
        return self._primary

    @property
    def mbr_index(self) -> SpatialIndex | None:
        if self.geom_type != GEOM_POLYGON:
            return None
        if self._mbr_index is None:
            self._mbr_index = load_index(self.index_paths["mbr"])
        return self._mbr_index

    def meta(self) -> dict:
        return {
            "name": self.name,
            "geom_type": self.geom_type,
            "mbr": [self.mbr.min_x, self.mbr.min_y, self.mbr.max_x, self.mbr.max_y],
            "counts": self.counts,
            "index_paths": self.index_paths,
        }


def _project_feature_coords(features: Sequence[RawFeature], geom_type: str):
    if geom_type == GEOM_POINT:
        pts = np.empty((len(features), 2))
        for k, f in enumerate(features):
            pts[k] = lonlat_to_mercator(*f.coords)
        return pts
    if geom_type == GEOM_LINE:
        rows = []
        for f in features:
            proj = [lonlat_to_mercator(lon, lat) for lon, lat in f.coords]
            for a, b in zip(proj, proj[1:]):
                rows.append((a.x, a.y, b.x, b.y))
        return np.asarray(rows, dtype=np.float64)
    polygons = []
    for f in features:
        rings = []
        for ring in f.coords:
            proj = [tuple(lonlat_to_mercator(lon, lat)) for lon, lat in ring]
            if proj[0] != proj[-1]:
                proj[-1] = proj[0]
            rings.append(proj)
        polygons.append(rings)
    return polygons


class Catalog:
    """Directory of registered datasets."""

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self._handles: dict[str, DatasetHandle] = {}

    def names(self) -> list[str]:
        return sorted(
            p.name for p in self.root.iterdir()
            if p.is_dir() and (p / META_NAME).exists() and not p.name.startswith(".")
        )

    def list_meta(self) -> list[dict]:
        return [self.get(name).meta() for name in self.names()]

    def get(self, name: str) -> DatasetHandle:
        if name in self._handles:
            return self._handles[name]
        meta_path = self.root / name / META_NAME
        if not meta_path.exists():
            raise UnknownDatasetError(f"unknown dataset {name!r}")
        meta = json.loads(meta_path.read_text())
        handle = DatasetHandle(
            name=meta["name"],
            geom_type=meta["geom_type"],
            mbr=BoundingBox(*meta["mbr"]),
            counts=meta["counts"],
            index_paths={
                k: str(self.root / name / v) for k, v in meta["index_files"].items()
            },
        )
        self._handles[name] = handle
        return handle

    # -- registration -------------------------------------------------

    def register(self, name: str, features: Sequence[RawFeature]) -> DatasetHandle:
        """Project, decompose and index parsed features under `name`."""
        if not features:
            raise GeometryParseError("no features")
        geom_type = features[0].geom_type
        if any(f.geom_type != geom_type for f in features):
            raise GeometryParseError("mixed geometry types in one dataset")
        data = _project_feature_coords(features, geom_type)
        if geom_type == GEOM_POINT:
            return self.register_points(name, data, records=len(features))
        if geom_type == GEOM_LINE:
            return self.register_segments(name, data, records=len(features))
        return self.register_polygons(name, data, records=len(features))

    def register_points(self, name: str, coords: np.ndarray, records: int | None = None) -> DatasetHandle:
        index = build_point_index(coords)
        return self._write(
            name, GEOM_POINT,
            {"primary": index},
            records=records if records is not None else int(coords.shape[0]),
            primitives=int(coords.shape[0]),
        )

    def register_segments(self, name: str, segs: np.ndarray, records: int | None = None) -> DatasetHandle:
        index = build_segment_index(segs)
        return self._write(
            name, GEOM_LINE,
            {"primary": index},
            records=records if records is not None else int(segs.shape[0]),
            primitives=int(segs.shape[0]),
        )

    def register_polygons(
        self,
        name: str,
        polygons: Sequence[Sequence[Sequence[tuple[float, float]]]],
        records: int | None = None,
    ) -> DatasetHandle:
        edge_index, mbr_index = build_polygon_indexes(polygons)
        primitives = sum(sum(len(r) - 1 for r in rings) for rings in polygons)
        return self._write(
            name, GEOM_POLYGON,
            {"primary": edge_index, "mbr": mbr_index},
            records=records if records is not None else len(polygons),
            primitives=primitives,
        )

    def _write(
        self,
        name: str,
        geom_type: str,
        indexes: dict[str, SpatialIndex],
        records: int,
        primitives: int,
    ) -> DatasetHandle:
        if not name or "/" in name or name.startswith("."):
            raise GeometryParseError(f"invalid dataset name {name!r}")
        final_dir = self.root / name
        if final_dir.exists():
            raise DuplicateDatasetError(f"duplicate dataset {name!r}")
        staging = self.root / f".staging-{name}-{uuid.uuid4().hex[:8]}"
        staging.mkdir(parents=True)
        try:
            files = INDEX_FILES[geom_type]
            for key, index in indexes.items():
                persist_index(index, staging / files[key])
            primary = indexes["primary"]
            meta = {
                "name": name,
                "geom_type": geom_type,
                "mbr": [primary.mbr.min_x, primary.mbr.min_y, primary.mbr.max_x, primary.mbr.max_y],
                "counts": {
                    "records": records,
                    "primitives": primitives,
                    "indexed": primary.count,
                },
                "index_files": dict(files),
            }
            (staging / META_NAME).write_text(json.dumps(meta, indent=2))
            try:
                os.rename(staging, final_dir)
            except OSError:
                if final_dir.exists():
                    raise DuplicateDatasetError(f"duplicate dataset {name!r}") from None
                raise
        except Exception:
            shutil.rmtree(staging, ignore_errors=True)
            raise
        return self.get(name)

    def remove(self, name: str) -> None:
        self._handles.pop(name, None)
        target = self.root / name
        if target.exists():
            shutil.rmtree(target)
