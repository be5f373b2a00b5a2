from __future__ import annotations

import threading
import time

import numpy as np
import pytest

from vectile.catalog import Catalog
from vectile.errors import TaskQueueFullError, UnknownDatasetError
from vectile.render import ClassGrid
from vectile.service import (
    Metrics,
    RenderFailedError,
    ResultPool,
    ServiceConfig,
    TileService,
    latency_summary,
    parse_config,
)
from vectile.synth import uniform_points


@pytest.fixture(scope="module")
def live(tmp_path_factory):
    """One running service shared by the read-only happy-path tests."""
    root = tmp_path_factory.mktemp("svc")
    catalog = Catalog(root)
    catalog.register_points("pts", uniform_points(50_000, seed=61))
    config = ServiceConfig(workers=2, data_dir=str(root), result_ttl=60.0, result_capacity=64)
    service = TileService(config).start()
    yield service
    service.stop()


class TestConfig:
    def test_parse_config_file(self, tmp_path):
        path = tmp_path / "server.conf"
        path.write_text(
            "# comment\nworkers=3\nthreads_per_worker = 2\nresult_ttl=12.5\n"
            "result_capacity=9\nport=9001\npattern_dir=pats\ndata_dir=dd\n"
            "cache_enabled=false\n"
        )
        cfg = parse_config(path)
        assert cfg.workers == 3
        assert cfg.threads_per_worker == 2
        assert cfg.result_ttl == 12.5
        assert cfg.result_capacity == 9
        assert cfg.port == 9001
        assert cfg.cache_enabled is False

    def test_unknown_key_rejected(self, tmp_path):
        path = tmp_path / "bad.conf"
        path.write_text("wurkers=3\n")
        with pytest.raises(ValueError, match="unknown config key"):
            parse_config(path)

    def test_invariants(self):
        with pytest.raises(ValueError):
            ServiceConfig(workers=0)
        with pytest.raises(ValueError):
            ServiceConfig(result_capacity=0)


class TestResultPool:
    def test_ttl_expiry(self):
        pool = ResultPool(capacity=10, ttl=10.0)
        pool.put(("d", 1, 0, 0, 1), ClassGrid.empty(), now=100.0)
        assert pool.get(("d", 1, 0, 0, 1), now=105.0) is not None
        assert pool.get(("d", 1, 0, 0, 1), now=111.0) is None
        assert len(pool) == 0

    def test_capacity_bound_lru(self):
        pool = ResultPool(capacity=3, ttl=1e9)
        for k in range(5):
            pool.put(("d", k, 0, 0, 1), ClassGrid.empty(), now=float(k))
        assert len(pool) == 3
        assert pool.get(("d", 0, 0, 0, 1), now=10.0) is None  # LRU evicted
        assert pool.get(("d", 4, 0, 0, 1), now=10.0) is not None

    def test_expired_evicted_before_lru(self):
        pool = ResultPool(capacity=3, ttl=10.0)
        pool.put(("old", 0, 0, 0, 1), ClassGrid.empty(), now=0.0)
        pool.put(("a", 0, 0, 0, 1), ClassGrid.empty(), now=100.0)
        pool.put(("b", 0, 0, 0, 1), ClassGrid.empty(), now=101.0)
        # pool full; inserting evicts the expired entry, not the LRU live one
        pool.put(("c", 0, 0, 0, 1), ClassGrid.empty(), now=102.0)
        assert pool.get(("a", 0, 0, 0, 1), now=103.0) is not None
        assert pool.get(("old", 0, 0, 0, 1), now=103.0) is None

    def test_hit_refreshes_lru_position(self):
        pool = ResultPool(capacity=2, ttl=1e9)
        pool.put(("a", 0, 0, 0, 1), ClassGrid.empty(), now=0.0)
        pool.put(("b", 0, 0, 0, 1), ClassGrid.empty(), now=1.0)
        pool.get(("a", 0, 0, 0, 1), now=2.0)
        pool.put(("c", 0, 0, 0, 1), ClassGrid.empty(), now=3.0)
        assert pool.get(("a", 0, 0, 0, 1), now=4.0) is not None
        assert pool.get(("b", 0, 0, 0, 1), now=4.0) is None

    def test_grids_immutable_after_caching(self):
        pool = ResultPool(capacity=2, ttl=1e9)
        grid = ClassGrid.empty()
        pool.put(("a", 0, 0, 0, 1), grid, now=0.0)
        got = pool.get(("a", 0, 0, 0, 1), now=1.0)
        with pytest.raises(ValueError):
            got.codes[0, 0] = 9


class TestMetrics:
    def test_fresh_snapshot_all_zero(self):
        m = Metrics()
        snap = m.snapshot()
        assert snap["tiles_rendered"] == 0
        assert snap["cache_hits"] == 0
        assert snap["render_time"] == {"count": 0}

    def test_render_counter(self):
        m = Metrics()
        for k in range(5):
            m.record_render(0.01 * (k + 1))
        snap = m.snapshot()
        assert snap["tiles_rendered"] == 5
        assert snap["render_time"]["count"] == 5

    def test_quantiles_monotone(self):
        s = latency_summary(list(np.random.default_rng(0).uniform(0, 1, 500)))
        assert s["min"] <= s["p25"] <= s["p50"] <= s["p75"] <= s["p95"] <= s["max"]


class TestServiceSemantics:
    def test_cache_hit_on_second_request(self, live):
        before = live.metrics_snapshot()
        a = live.grid_for("pts", 6, 31, 31, 1)
        b = live.grid_for("pts", 6, 31, 31, 1)
        after = live.metrics_snapshot()
        assert after["tiles_rendered"] == before["tiles_rendered"] + 1
        assert after["cache_hits"] >= before["cache_hits"] + 1
        np.testing.assert_array_equal(a.codes, b.codes)

    def test_mbr_skip_creates_no_task(self, live):
        before = live.metrics_snapshot()
        # tile far outside the dataset MBR at high zoom
        grid = live.grid_for("pts", 15, 0, 0, 1)
        after = live.metrics_snapshot()
        assert grid is None
        assert after["tasks_enqueued"] == before["tasks_enqueued"]
        assert after["mbr_skips"] == before["mbr_skips"] + 1

    def test_concurrent_identical_requests_render_once(self, live):
        before = live.metrics_snapshot()
        out = []

        def fetch():
            out.append(live.grid_for("pts", 7, 63, 63, 1))

        threads = [threading.Thread(target=fetch) for _ in range(6)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        after = live.metrics_snapshot()
        assert after["tiles_rendered"] == before["tiles_rendered"] + 1
        assert len({g.codes.tobytes() for g in out}) == 1

    def test_unknown_dataset(self, live):
        with pytest.raises(UnknownDatasetError):
            live.grid_for("nope", 3, 0, 0, 1)

    def test_fifo_completion_order_single_worker(self, tmp_path):
        catalog = Catalog(tmp_path)
        catalog.register_points("pts", uniform_points(200_000, seed=62))
        config = ServiceConfig(workers=1, data_dir=str(tmp_path))
        with TileService(config) as service:
            keys = [("pts", 5, 15, 15, 1), ("pts", 5, 16, 15, 1), ("pts", 5, 15, 16, 1)]
            futures = [service._submit(k) for k in keys]
            for f in futures:
                f.result(timeout=60)
            cached = list(service.results._entries.keys())
        assert cached == keys

    def test_grids_identical_one_vs_four_workers(self, tmp_path):
        catalog = Catalog(tmp_path)
        catalog.register_points("pts", uniform_points(100_000, seed=63))
        tiles = [(z, x, y) for z in (4, 5) for x in (7, 8) for y in (7, 8)]
        digests = []
        for workers in (1, 4):
            config = ServiceConfig(workers=workers, data_dir=str(tmp_path), cache_enabled=False)
            with TileService(config) as service:
                out = {}
                threads = [
                    threading.Thread(
                        target=lambda t=t: out.__setitem__(t, service.grid_for("pts", *t, 1).tobytes())
                    )
                    for t in tiles
                ]
                for t in threads:
                    t.start()
                for t in threads:
                    t.join()
            digests.append(tuple(out[t] for t in tiles))
        assert digests[0] == digests[1]

    def test_style_independence_one_grid_many_styles(self, live):
        # width is part of the key; colors are not
        before = live.metrics_snapshot()
        a = live.grid_for("pts", 8, 127, 127, 1)
        mid = live.metrics_snapshot()
        b = live.grid_for("pts", 8, 127, 127, 1)  # same key: restyle case
        after = live.metrics_snapshot()
        assert mid["tiles_rendered"] == before["tiles_rendered"] + 1
        assert after["tiles_rendered"] == mid["tiles_rendered"]
        c = live.grid_for("pts", 8, 127, 127, 2)  # new width: new key
        final = live.metrics_snapshot()
        assert final["tiles_rendered"] == after["tiles_rendered"] + 1


class TestFailureHandling:
    def test_render_failure_retried_once_then_fails(self, tmp_path):
        catalog = Catalog(tmp_path)
        handle = catalog.register_points("pts", uniform_points(1_000, seed=64))
        # poison the dataset after registration: workers will fail the load
        import pathlib

        pathlib.Path(handle.index_paths["primary"]).write_bytes(b"garbage")
        config = ServiceConfig(workers=1, data_dir=str(tmp_path))
        with TileService(config) as service:
            with pytest.raises(RenderFailedError):
                service.grid_for("pts", 5, 15, 15, 1)
            snap = service.metrics_snapshot()
            assert snap["retries"] == 1
            assert snap["failures"] == 1

    def test_worker_killed_mid_batch_recovers(self, tmp_path):
        catalog = Catalog(tmp_path)
        catalog.register_points("pts", uniform_points(3_000_000, seed=65))
        config = ServiceConfig(workers=1, data_dir=str(tmp_path))
        with TileService(config) as service:
            fut = service._submit(("pts", 3, 4, 4, 1))  # slow tile
            # wait for the worker to pick the task up, then kill it
            victim = None
            deadline = time.monotonic() + 30
            while time.monotonic() < deadline:
                with service._lock:
                    busy = [w for w in service._workers.values() if w.task is not None]
                if busy:
                    victim = busy[0]
                    break
                time.sleep(0.01)
            assert victim is not None
            victim.proc.kill()
            grid = fut.result(timeout=120)
            assert grid is not None
            snap = service.metrics_snapshot()
            assert snap["retries"] == 1
            assert snap["tiles_rendered"] == 1
            # the pool respawned a worker and stays serviceable
            assert service.grid_for("pts", 6, 31, 31, 1) is not None

    def test_queue_overflow_raises(self, tmp_path):
        catalog = Catalog(tmp_path)
        catalog.register_points("pts", uniform_points(5_000_000, seed=66))
        config = ServiceConfig(workers=1, data_dir=str(tmp_path), queue_capacity=1, cache_enabled=False)
        with TileService(config) as service:
            # first task occupies the worker; the next fills the queue slot
            first = service._submit(("pts", 3, 3, 3, 1))
            deadline = time.monotonic() + 30
            while time.monotonic() < deadline:
                with service._lock:
                    if any(w.task is not None for w in service._workers.values()):
                        break
                time.sleep(0.01)
            service._submit(("pts", 3, 4, 3, 1))
            with pytest.raises(TaskQueueFullError):
                service._submit(("pts", 3, 5, 3, 1))
            first.result(timeout=120)
