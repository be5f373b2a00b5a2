"""Benchmark harness: workload generation, throughput/latency runs,
worker scaling sweeps and the index-versus-scan complexity contrast.

Reports are returned as dicts and written as CSV plus JSON so results can
be plotted elsewhere.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import threading
import time
import urllib.request
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .catalog import Catalog
from .geometry import MAX_ZOOM, BoundingBox, TileKey, tile_bounds, tile_range_for_box
from .index import build_point_index
from .oracle import PrimitiveSet, oracle_render_tile
from .render import classify_pixel_sibv_counted, render_classgrid
from .service import ServiceConfig, TileService, latency_summary
from .synth import DEFAULT_BOX, uniform_points


@dataclass(frozen=True)
class Workload:
    """Reproducible random tile request stream against one dataset."""

    dataset: str
    count: int
    zoom_range: tuple[int, int] = (3, 15)
    seed: int = 0
    rate: float = math.inf  # tiles per second; inf dispatches all at once
    stroke_width: int = 1

    def __post_init__(self) -> None:
        lo, hi = self.zoom_range
        if not (0 <= lo <= hi <= MAX_ZOOM):
            raise ValueError(f"zoom_range {self.zoom_range} outside [0, {MAX_ZOOM}]")
        if self.count < 1:
            raise ValueError("count must be >= 1")
        if self.rate <= 0:
            raise ValueError("rate must be positive (or inf)")


def gen_workload(workload: Workload, mbr: BoundingBox) -> list[TileKey]:
    """Deterministic tile sequence: zoom uniform over the range, then the
    tile uniform over those intersecting the dataset MBR at that zoom."""
    rng = np.random.default_rng(workload.seed)
    lo, hi = workload.zoom_range
    tiles: list[TileKey] = []
    for _ in range(workload.count):
        z = int(rng.integers(lo, hi + 1))
        x0, x1, y0, y1 = tile_range_for_box(z, mbr)
        x = int(rng.integers(x0, x1 + 1))
        y = int(rng.integers(y0, y1 + 1))
        tiles.append(TileKey(z, x, y))
    return tiles


def dispatch_offsets(count: int, rate: float) -> np.ndarray:
    """Seconds after start at which each request becomes due."""
    if math.isinf(rate):
        return np.zeros(count)
    return np.arange(count) / rate


# -- HTTP benchmark ----------------------------------------------------------


def run_benchmark(
    workload: Workload,
    base_url: str,
    mbr: BoundingBox,
    concurrency: int = 16,
    timeout: float = 120.0,
) -> dict:
    """Issue the workload against a live tile endpoint and measure per-tile
    request latency; rate-limited dispatch when workload.rate is finite."""
    tiles = gen_workload(workload, mbr)
    due = dispatch_offsets(len(tiles), workload.rate)
    latencies = [0.0] * len(tiles)
    failures = [0]
    cursor = [0]
    lock = threading.Lock()
    t_start = time.monotonic()

    def pump() -> None:
        while True:
            with lock:
                k = cursor[0]
                if k >= len(tiles):
                    return
                cursor[0] += 1
            delay = due[k] - (time.monotonic() - t_start)
            if delay > 0:
                time.sleep(delay)
            t = tiles[k]
            url = (
                f"{base_url}/tile/{workload.dataset}/{t.z}/{t.x}/{t.y}.png"
                f"?width={workload.stroke_width}"
            )
            t0 = time.monotonic()
            try:
                with urllib.request.urlopen(url, timeout=timeout) as resp:
                    resp.read()
                latencies[k] = time.monotonic() - t0
            except Exception:
                with lock:
                    failures[0] += 1
                latencies[k] = float("nan")

    threads = [threading.Thread(target=pump) for _ in range(min(concurrency, len(tiles)))]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    wall = time.monotonic() - t_start
    ok = [v for v in latencies if not math.isnan(v)]
    return {
        "kind": "benchmark",
        "dataset": workload.dataset,
        "tiles": len(tiles),
        "failures": failures[0],
        "wall_seconds": wall,
        "tiles_per_second": len(ok) / wall if wall > 0 else float("inf"),
        "rate": None if math.isinf(workload.rate) else workload.rate,
        "latency": latency_summary(ok),
        "per_tile": [
            {"z": t.z, "x": t.x, "y": t.y, "seconds": latencies[k]}
            for k, t in enumerate(tiles)
        ],
    }


# -- scaling sweep -------------------------------------------------------------


def _drive_batch(service: TileService, workload: Workload, tiles: Sequence[TileKey]) -> tuple[float, str]:
    """Render a batch through the service; returns (wall seconds, grid hash)."""
    digest = hashlib.sha256()
    results: dict[int, bytes] = {}
    lock = threading.Lock()
    cursor = [0]

    def pump() -> None:
        while True:
            with lock:
                k = cursor[0]
                if k >= len(tiles):
                    return
                cursor[0] += 1
            t = tiles[k]
            grid = service.grid_for(workload.dataset, t.z, t.x, t.y, workload.stroke_width)
            payload = b"" if grid is None else grid.tobytes()
            with lock:
                results[k] = payload

    n_threads = max(2 * service.config.workers, 4)
    t0 = time.monotonic()
    threads = [threading.Thread(target=pump) for _ in range(min(n_threads, len(tiles)))]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    wall = time.monotonic() - t0
    for k in range(len(tiles)):
        digest.update(results[k])
    return wall, digest.hexdigest()


def run_scaling(
    workload: Workload,
    data_dir: str | Path,
    workers_list: Sequence[int],
    threads_list: Sequence[int],
    warmup_tiles: int = 8,
) -> dict:
    """Total batch time per (workers, threads) cell, cache disabled.

    Grids must hash identically across every cell; the report carries the
    speedup of each cell relative to the slowest cell.
    """
    catalog = Catalog(data_dir)
    mbr = catalog.get(workload.dataset).mbr
    tiles = gen_workload(workload, mbr)
    cells = []
    hashes = set()
    for workers in workers_list:
        for threads in threads_list:
            config = ServiceConfig(
                workers=workers,
                threads_per_worker=threads,
                data_dir=str(data_dir),
                cache_enabled=False,
            )
            with TileService(config) as service:
                if warmup_tiles:
                    _drive_batch(service, workload, tiles[:warmup_tiles])
                wall, digest = _drive_batch(service, workload, tiles)
            cells.append(
                {
                    "workers": workers,
                    "threads_per_worker": threads,
                    "wall_seconds": wall,
                    "tiles_per_second": len(tiles) / wall,
                    "grid_hash": digest,
                }
            )
            hashes.add(digest)
    slowest = max(c["wall_seconds"] for c in cells)
    for c in cells:
        c["speedup_vs_slowest"] = slowest / c["wall_seconds"]
    return {
        "kind": "scaling",
        "dataset": workload.dataset,
        "tiles": len(tiles),
        "deterministic": len(hashes) == 1,
        "cells": cells,
    }


# -- complexity contrast ---------------------------------------------------------


def run_complexity_contrast(
    sizes: Sequence[int] = (10**3, 10**4, 10**5, 10**6),
    seed: int = 0,
    tiles_per_size: int = 5,
    pixels_per_tile: int = 200,
    zoom_range: tuple[int, int] = (3, 15),
    include_oracle_timing: bool = False,
) -> dict:
    """Per-pixel engine node visits versus oracle primitive touches on
    uniform point datasets, plus per-tile render wall time.

    Oracle touches per pixel equal the primitive count by construction (a
    full linear scan); engine visits are measured with the instrumented
    per-pixel classifier on sampled pixels of random tiles.
    """
    rng = np.random.default_rng(seed)
    # One tile-and-pixel sample reused for every dataset size so growth
    # ratios and render-time comparisons are like-for-like.
    tiles = []
    for _ in range(tiles_per_size):
        z = int(rng.integers(zoom_range[0], zoom_range[1] + 1))
        x0, x1, y0, y1 = tile_range_for_box(z, DEFAULT_BOX)
        tiles.append(TileKey(z, int(rng.integers(x0, x1 + 1)), int(rng.integers(y0, y1 + 1))))
    pixel_samples = []
    for tile in tiles:
        tb = tile_bounds(tile)
        px = rng.uniform(tb.min_x, tb.max_x, pixels_per_tile)
        py = rng.uniform(tb.min_y, tb.max_y, pixels_per_tile)
        pixel_samples.append((px, py))

    rows = []
    for n in sizes:
        pts = uniform_points(int(n), seed=seed + int(math.log10(n)))
        index = build_point_index(pts)

        visits = []
        for tile, (px, py) in zip(tiles, pixel_samples):
            for x, y in zip(px, py):
                _, v = classify_pixel_sibv_counted((x, y), tile.z, 1, index)
                visits.append(v)

        render_times = []
        oracle_times = []
        objset = PrimitiveSet("point", coords=pts)
        for tile in tiles:
            t0 = time.perf_counter()
            render_classgrid(index, None, tile, 1)
            render_times.append(time.perf_counter() - t0)
            if include_oracle_timing:
                t0 = time.perf_counter()
                oracle_render_tile(objset, tile, 1)
                oracle_times.append(time.perf_counter() - t0)

        rows.append(
            {
                "n": int(n),
                "oracle_touches_per_pixel": int(n),
                "engine_visits_per_pixel_mean": float(np.mean(visits)),
                "engine_visits_per_pixel_p95": float(np.quantile(visits, 0.95)),
                "render_seconds_median": float(np.median(render_times)),
                "oracle_render_seconds_median": (
                    float(np.median(oracle_times)) if oracle_times else None
                ),
            }
        )
    return {"kind": "complexity", "sizes": [int(s) for s in sizes], "rows": rows}


# -- report output ----------------------------------------------------------------


def write_report(report: dict, out_dir: str | Path, name: str) -> tuple[Path, Path]:
    """Write a report as <name>.json plus a flat <name>.csv of its rows."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    json_path = out / f"{name}.json"
    json_path.write_text(json.dumps(report, indent=2))

    if report["kind"] == "benchmark":
        rows = report["per_tile"]
    elif report["kind"] == "scaling":
        rows = report["cells"]
    else:
        rows = report["rows"]
    csv_path = out / f"{name}.csv"
    with open(csv_path, "w", newline="") as f:
        if rows:
            writer = csv.DictWriter(f, fieldnames=list(rows[0].keys()))
            writer.writeheader()
            writer.writerows(rows)
    return json_path, csv_path
