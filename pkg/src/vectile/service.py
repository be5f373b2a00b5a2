"""Tile service core: task pool, result pool, metrics and worker pool.

The coordinator owns a bounded FIFO task pool and a keyed result pool with
TTL plus LRU eviction; renderer workers are separate OS processes that
memory-map the registered indexes and render tiles with row-parallel
threads. Each worker talks to the coordinator over its own duplex pipe
(single writer per end, so no shared queue lock can be poisoned by a
killed worker); the coordinator dispatches pool tasks to whichever worker
is idle, oldest task first. Identical concurrent requests deduplicate onto
one in-flight task; a failed task is retried once and then fails the
request.

Classification grids (not styled images) are what gets cached, so a style
change never invalidates cached work.
"""

from __future__ import annotations

import logging
import multiprocessing as mp
import threading
import time
from collections import OrderedDict, deque
from concurrent.futures import Future
from dataclasses import dataclass
from multiprocessing import connection
from pathlib import Path

import numpy as np

from .catalog import Catalog
from .errors import TaskQueueFullError, VectileError
from .geometry import TileKey, resolution, tile_bounds
from .render import ClassGrid, render_classgrid

logger = logging.getLogger(__name__)

TaskKey = tuple[str, int, int, int, int]  # (dataset, z, x, y, stroke_width)


class RenderFailedError(VectileError):
    """A tile task failed after its retry."""


@dataclass
class ServiceConfig:
    workers: int = 2
    threads_per_worker: int = 1
    result_ttl: float = 300.0
    result_capacity: int = 512
    host: str = "127.0.0.1"
    port: int = 8080
    pattern_dir: str | None = None
    data_dir: str = "data"
    queue_capacity: int = 4096
    cache_enabled: bool = True
    render_timeout: float = 300.0

    def __post_init__(self) -> None:
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        if self.threads_per_worker < 1:
            raise ValueError("threads_per_worker must be >= 1")
        if self.result_capacity < 1:
            raise ValueError("result_capacity must be >= 1")
        if self.queue_capacity < 1:
            raise ValueError("queue_capacity must be >= 1")


_CONFIG_TYPES = {
    "workers": int,
    "threads_per_worker": int,
    "result_ttl": float,
    "result_capacity": int,
    "host": str,
    "port": int,
    "pattern_dir": str,
    "data_dir": str,
    "queue_capacity": int,
    "cache_enabled": lambda v: v.strip().lower() in ("1", "true", "yes", "on"),
    "render_timeout": float,
}


def parse_config(path: str | Path) -> ServiceConfig:
    """Read a key=value config file; unknown keys are rejected."""
    values: dict = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key=value, got {line!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        if key not in _CONFIG_TYPES:
            raise ValueError(f"{path}:{lineno}: unknown config key {key!r}")
        values[key] = _CONFIG_TYPES[key](value.strip())
    return ServiceConfig(**values)


class Metrics:
    """Thread-safe service counters plus a per-tile render-time histogram."""

    MAX_SAMPLES = 100_000

    def __init__(self) -> None:
        self._lock = threading.Lock()
        self.tiles_rendered = 0
        self.cache_hits = 0
        self.mbr_skips = 0
        self.dedup_joins = 0
        self.tasks_enqueued = 0
        self.retries = 0
        self.failures = 0
        self.bad_requests = 0
        self.render_times: list[float] = []

    def inc(self, name: str, amount: int = 1) -> None:
        with self._lock:
            setattr(self, name, getattr(self, name) + amount)

    def record_render(self, seconds: float) -> None:
        with self._lock:
            self.tiles_rendered += 1
            if len(self.render_times) < self.MAX_SAMPLES:
                self.render_times.append(seconds)

    def snapshot(self, queue_depth: int = 0, result_entries: int = 0) -> dict:
        with self._lock:
            times = list(self.render_times)
            counters = {
                "tiles_rendered": self.tiles_rendered,
                "cache_hits": self.cache_hits,
                "mbr_skips": self.mbr_skips,
                "dedup_joins": self.dedup_joins,
                "tasks_enqueued": self.tasks_enqueued,
                "retries": self.retries,
                "failures": self.failures,
                "bad_requests": self.bad_requests,
            }
        counters["queue_depth"] = queue_depth
        counters["result_entries"] = result_entries
        counters["render_time"] = latency_summary(times)
        return counters


def latency_summary(times: list[float]) -> dict:
    if not times:
        return {"count": 0}
    arr = np.sort(np.asarray(times))
    q = lambda p: float(np.quantile(arr, p))
    return {
        "count": int(arr.size),
        "min": float(arr[0]),
        "p25": q(0.25),
        "p50": q(0.50),
        "p75": q(0.75),
        "p95": q(0.95),
        "max": float(arr[-1]),
        "mean": float(arr.mean()),
    }


class ResultPool:
    """Keyed grid cache with an expiry window and LRU bound.

    Eviction clears expired entries first, then least-recently-used ones
    until the pool fits its capacity. Grids are immutable so readers never
    observe a half-evicted value.
    """

    def __init__(self, capacity: int, ttl: float):
        self.capacity = capacity
        self.ttl = ttl
        self._lock = threading.Lock()
        self._entries: "OrderedDict[TaskKey, tuple[ClassGrid, float]]" = OrderedDict()
        self.evictions = 0

    def __len__(self) -> int:
        with self._lock:
            return len(self._entries)

    def get(self, key: TaskKey, now: float | None = None) -> ClassGrid | None:
        now = time.monotonic() if now is None else now
        with self._lock:
            item = self._entries.get(key)
            if item is None:
                return None
            grid, created = item
            if now - created > self.ttl:
                del self._entries[key]
                self.evictions += 1
                return None
            self._entries.move_to_end(key)
            return grid

    def put(self, key: TaskKey, grid: ClassGrid, now: float | None = None) -> None:
        now = time.monotonic() if now is None else now
        grid.codes.flags.writeable = False
        grid.fill.flags.writeable = False
        with self._lock:
            expired = [k for k, (_, t) in self._entries.items() if now - t > self.ttl]
            for k in expired:
                del self._entries[k]
                self.evictions += 1
            self._entries[key] = (grid, now)
            self._entries.move_to_end(key)
            while len(self._entries) > self.capacity:
                self._entries.popitem(last=False)
                self.evictions += 1

    def clear(self) -> None:
        with self._lock:
            self._entries.clear()


def worker_main(
    worker_id: int,
    catalog_root: str,
    conn: "connection.Connection",
    threads_per_worker: int,
) -> None:
    """Renderer process: receive tasks on its pipe, render, send results."""
    catalog = Catalog(catalog_root)
    while True:
        try:
            task = conn.recv()
        except (EOFError, OSError):
            break
        if task is None:
            break
        key: TaskKey = task
        t0 = time.perf_counter()
        try:
            dataset, z, x, y, width = key
            handle = catalog.get(dataset)
            grid = render_classgrid(
                handle.primary_index,
                handle.mbr_index,
                TileKey(z, x, y),
                width,
                row_parallelism=threads_per_worker,
            )
            conn.send(("done", key, grid.tobytes(), time.perf_counter() - t0))
        except Exception as exc:  # reported to the coordinator, never fatal here
            conn.send(("failed", key, f"{type(exc).__name__}: {exc}"))


class _Worker:
    def __init__(self, wid: int, proc: mp.process.BaseProcess, conn: "connection.Connection"):
        self.wid = wid
        self.proc = proc
        self.conn = conn
        self.task: TaskKey | None = None
        self.spawned_at = time.monotonic()


class TileService:
    """Coordinator tying the catalog, pools, metrics and workers together."""

    def __init__(self, config: ServiceConfig):
        self.config = config
        self.catalog = Catalog(config.data_dir)
        self.metrics = Metrics()
        self.results = ResultPool(config.result_capacity, config.result_ttl)
        # forkserver keeps worker startup independent of the caller's
        # __main__ module contents and avoids forking this thread-carrying
        # coordinator directly; preloading the service module makes worker
        # (re)spawns cheap. Scripts still need the standard
        # `if __name__ == "__main__"` guard, as with any multiprocessing.
        methods = mp.get_all_start_methods()
        if "forkserver" in methods:
            self._ctx = mp.get_context("forkserver")
            self._ctx.set_forkserver_preload(["vectile.service"])
        else:
            self._ctx = mp.get_context("spawn")
        self._lock = threading.Lock()
        self._pending: "deque[TaskKey]" = deque()
        self._inflight: dict[TaskKey, Future] = {}
        self._attempts: dict[TaskKey, int] = {}
        self._workers: dict[int, _Worker] = {}
        self._next_worker_id = 0
        self._running = False
        self._collector: threading.Thread | None = None

    # -- lifecycle ------------------------------------------------------

    def start(self) -> "TileService":
        if self._running:
            return self
        self._running = True
        for _ in range(self.config.workers):
            self._spawn_worker()
        self._collector = threading.Thread(target=self._collect_loop, daemon=True)
        self._collector.start()
        return self

    def stop(self) -> None:
        if not self._running:
            return
        self._running = False
        if self._collector:
            self._collector.join(timeout=5)
        with self._lock:
            workers = list(self._workers.values())
            self._workers.clear()
            pending = list(self._inflight.values())
            self._inflight.clear()
            self._attempts.clear()
            self._pending.clear()
        for w in workers:
            w.proc.terminate()
        for w in workers:
            w.proc.join(timeout=5)
            w.conn.close()
        for fut in pending:
            if not fut.done():
                fut.set_exception(RenderFailedError("service stopped"))

    def __enter__(self) -> "TileService":
        return self.start()

    def __exit__(self, *exc) -> None:
        self.stop()

    def _spawn_worker(self) -> None:
        parent_end, worker_end = self._ctx.Pipe(duplex=True)
        with self._lock:
            wid = self._next_worker_id
            self._next_worker_id += 1
        proc = self._ctx.Process(
            target=worker_main,
            args=(wid, str(self.catalog.root), worker_end,
                  self.config.threads_per_worker),
            daemon=True,
        )
        proc.start()
        worker_end.close()  # child keeps its duplicate
        with self._lock:
            self._workers[wid] = _Worker(wid, proc, parent_end)
            self._dispatch_locked()

    # -- request path -----------------------------------------------------

    def grid_for(self, dataset: str, z: int, x: int, y: int, width: int = 1) -> ClassGrid | None:
        """Grid for one tile request; None means the tile misses the
        dataset MBR (expanded by the stroke radius) and renders empty."""
        handle = self.catalog.get(dataset)
        tile = TileKey(z, x, y)
        if width < 1:
            raise ValueError("stroke width must be >= 1 pixel")
        margin = width * resolution(z)
        if not tile_bounds(tile).intersects(handle.mbr.expand(margin)):
            self.metrics.inc("mbr_skips")
            return None
        key: TaskKey = (dataset, z, x, y, width)
        if self.config.cache_enabled:
            grid = self.results.get(key)
            if grid is not None:
                self.metrics.inc("cache_hits")
                return grid
        fut = self._submit(key)
        return fut.result(timeout=self.config.render_timeout)

    def _submit(self, key: TaskKey) -> Future:
        with self._lock:
            fut = self._inflight.get(key)
            if fut is not None:
                self.metrics.inc("dedup_joins")
                return fut
            if len(self._pending) >= self.config.queue_capacity:
                raise TaskQueueFullError("task pool is full")
            fut = Future()
            self._inflight[key] = fut
            self._attempts[key] = 0
            self._pending.append(key)
            self._dispatch_locked()
        self.metrics.inc("tasks_enqueued")
        return fut

    def _dispatch_locked(self) -> None:
        """Hand pool tasks to idle workers, oldest task first."""
        if not self._pending:
            return
        for worker in self._workers.values():
            if worker.task is not None:
                continue
            if not self._pending:
                break
            key = self._pending.popleft()
            worker.task = key
            try:
                worker.conn.send(key)
            except (BrokenPipeError, OSError):
                # worker died between dispatches; the collector will reap it
                worker.task = None
                self._pending.appendleft(key)
                break

    # -- coordinator thread ------------------------------------------------

    def _collect_loop(self) -> None:
        while self._running:
            with self._lock:
                conns = {w.conn: w.wid for w in self._workers.values()}
            if not conns:
                time.sleep(0.05)
                continue
            try:
                ready = connection.wait(list(conns), timeout=0.2)
            except OSError:
                continue
            for conn in ready:
                wid = conns[conn]
                try:
                    msg = conn.recv()
                except (EOFError, OSError):
                    self._reap_worker(wid)
                    continue
                if msg[0] == "done":
                    _, key, payload, seconds = msg
                    grid = ClassGrid.frombytes(payload)
                    self.metrics.record_render(seconds)
                    if self.config.cache_enabled:
                        self.results.put(key, grid)
                    with self._lock:
                        worker = self._workers.get(wid)
                        if worker is not None and worker.task == key:
                            worker.task = None
                        fut = self._inflight.pop(key, None)
                        self._attempts.pop(key, None)
                        self._dispatch_locked()
                    if fut is not None and not fut.done():
                        fut.set_result(grid)
                else:
                    _, key, error = msg
                    with self._lock:
                        worker = self._workers.get(wid)
                        if worker is not None and worker.task == key:
                            worker.task = None
                        self._dispatch_locked()
                    self._handle_failure(key, error)

    def _reap_worker(self, wid: int) -> None:
        """A worker pipe hit EOF: fail over its task and respawn."""
        with self._lock:
            worker = self._workers.pop(wid, None)
        if worker is None:
            return
        worker.proc.join(timeout=1)
        worker.conn.close()
        lifetime = time.monotonic() - worker.spawned_at
        logger.warning(
            "worker %d exited (lifetime %.1fs%s)", wid, lifetime,
            ", task in flight" if worker.task else "",
        )
        if worker.task is not None:
            self._handle_failure(worker.task, "worker exited mid-task")
        if self._running:
            if lifetime < 1.0:
                # a worker dying at startup must not respawn in a hot loop
                time.sleep(0.5)
            if self._running:
                self._spawn_worker()

    def _handle_failure(self, key: TaskKey, error: str) -> None:
        with self._lock:
            attempts = self._attempts.get(key)
            if attempts is None:
                return
            if attempts == 0:
                self._attempts[key] = 1
                self._pending.appendleft(key)  # retry ahead of newer work
                self._dispatch_locked()
                retry = True
                fut = None
            else:
                retry = False
                fut = self._inflight.pop(key, None)
                self._attempts.pop(key, None)
        if retry:
            self.metrics.inc("retries")
            return
        self.metrics.inc("failures")
        if fut is not None and not fut.done():
            fut.set_exception(RenderFailedError(error))

    # -- introspection ---------------------------------------------------

    def queue_depth(self) -> int:
        with self._lock:
            return len(self._pending)

    def metrics_snapshot(self) -> dict:
        return self.metrics.snapshot(self.queue_depth(), len(self.results))
