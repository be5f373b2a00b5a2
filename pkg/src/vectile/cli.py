"""Command-line interface.

  vectile serve --config server.conf [--static-dir viewer/dist]
  vectile register <name> <format> <file> [--data-dir data] [--csv-header]
  vectile bench gen|run|scale|complexity ...
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

from .bench import Workload, gen_workload, run_benchmark, run_complexity_contrast, run_scaling, write_report
from .catalog import Catalog
from .errors import VectileError
from .http_server import TileHttpServer
from .ingest import FORMATS, parse_dataset
from .service import ServiceConfig, TileService, parse_config


def _add_workload_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--dataset", required=True)
    p.add_argument("--count", type=int, default=1000)
    p.add_argument("--zooms", default="3:15", help="zoom range lo:hi")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--width", type=int, default=1, help="stroke width in pixels")
    p.add_argument("--data-dir", default="data")


def _workload(args, rate: float = math.inf) -> Workload:
    lo, _, hi = args.zooms.partition(":")
    return Workload(
        dataset=args.dataset,
        count=args.count,
        zoom_range=(int(lo), int(hi or lo)),
        seed=args.seed,
        rate=rate,
        stroke_width=args.width,
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vectile", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    serve = sub.add_parser("serve", help="run the tile server")
    serve.add_argument("--config", required=True)
    serve.add_argument("--static-dir", default=None, help="viewer bundle directory")
    serve.add_argument("--verbose", action="store_true")

    reg = sub.add_parser("register", help="register a vector dataset")
    reg.add_argument("name")
    reg.add_argument("format", choices=FORMATS)
    reg.add_argument("file")
    reg.add_argument("--data-dir", default="data")
    reg.add_argument("--csv-header", action="store_true")

    bench = sub.add_parser("bench", help="benchmarks")
    bsub = bench.add_subparsers(dest="bench_command", required=True)

    gen = bsub.add_parser("gen", help="print a deterministic tile workload")
    _add_workload_args(gen)

    run = bsub.add_parser("run", help="latency/throughput run against the HTTP API")
    _add_workload_args(run)
    run.add_argument("--rate", type=float, default=math.inf, help="tiles/second (default inf)")
    run.add_argument("--url", default=None, help="existing server URL; default spins one up")
    run.add_argument("--config", default=None, help="config for the embedded server")
    run.add_argument("--concurrency", type=int, default=16)
    run.add_argument("--out", default="results")
    run.add_argument("--name", default="benchmark")

    scale = bsub.add_parser("scale", help="worker/thread scaling sweep")
    _add_workload_args(scale)
    scale.add_argument("--workers", default="1,2,4", help="comma list of worker counts")
    scale.add_argument("--threads", default="1", help="comma list of threads per worker")
    scale.add_argument("--out", default="results")
    scale.add_argument("--name", default="scaling")

    cx = bsub.add_parser("complexity", help="index-vs-scan growth contrast")
    cx.add_argument("--sizes", default="1000,10000,100000,1000000")
    cx.add_argument("--seed", type=int, default=0)
    cx.add_argument("--tiles-per-size", type=int, default=5)
    cx.add_argument("--pixels-per-tile", type=int, default=200)
    cx.add_argument("--out", default="results")
    cx.add_argument("--name", default="complexity")
    return parser


def cmd_serve(args) -> int:
    config = parse_config(args.config)
    service = TileService(config).start()
    server = TileHttpServer(service, static_dir=args.static_dir, verbose=args.verbose)
    print(f"serving {len(service.catalog.names())} dataset(s) at {server.url}")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
        service.stop()
    return 0


def cmd_register(args) -> int:
    catalog = Catalog(args.data_dir)
    source = Path(args.file).read_text()
    features = parse_dataset(source, args.format, csv_header=args.csv_header)
    handle = catalog.register(args.name, features)
    print(json.dumps(handle.meta(), indent=2))
    return 0


def cmd_bench_gen(args) -> int:
    catalog = Catalog(args.data_dir)
    workload = _workload(args)
    tiles = gen_workload(workload, catalog.get(args.dataset).mbr)
    for t in tiles:
        print(f"{t.z}/{t.x}/{t.y}")
    return 0


def cmd_bench_run(args) -> int:
    workload = _workload(args, rate=args.rate)
    catalog = Catalog(args.data_dir)
    mbr = catalog.get(args.dataset).mbr
    if args.url:
        report = run_benchmark(workload, args.url.rstrip("/"), mbr, concurrency=args.concurrency)
    else:
        if args.config:
            config = parse_config(args.config)
        else:
            config = ServiceConfig(data_dir=args.data_dir, port=0)
        # Benchmarks measure the engine: no result cache, every tile renders.
        config.cache_enabled = False
        config.data_dir = args.data_dir
        config.port = 0
        service = TileService(config).start()
        server = TileHttpServer(service).start_background()
        try:
            report = run_benchmark(workload, server.url, mbr, concurrency=args.concurrency)
            report["server_metrics"] = service.metrics_snapshot()
        finally:
            server.stop()
            service.stop()
    paths = write_report(report, args.out, args.name)
    lat = report["latency"]
    print(
        f"{report['tiles']} tiles in {report['wall_seconds']:.2f}s "
        f"({report['tiles_per_second']:.1f} tiles/s), "
        f"p50={lat.get('p50', float('nan')):.4f}s p95={lat.get('p95', float('nan')):.4f}s"
    )
    print(f"wrote {paths[0]} and {paths[1]}")
    return 0


def cmd_bench_scale(args) -> int:
    workload = _workload(args)
    report = run_scaling(
        workload,
        args.data_dir,
        [int(w) for w in args.workers.split(",")],
        [int(t) for t in args.threads.split(",")],
    )
    paths = write_report(report, args.out, args.name)
    for cell in report["cells"]:
        print(
            f"workers={cell['workers']} threads={cell['threads_per_worker']}: "
            f"{cell['wall_seconds']:.2f}s ({cell['tiles_per_second']:.1f} tiles/s)"
        )
    print(f"deterministic={report['deterministic']}")
    print(f"wrote {paths[0]} and {paths[1]}")
    return 0


def cmd_bench_complexity(args) -> int:
    report = run_complexity_contrast(
        sizes=[int(float(s)) for s in args.sizes.split(",")],
        seed=args.seed,
        tiles_per_size=args.tiles_per_size,
        pixels_per_tile=args.pixels_per_tile,
    )
    paths = write_report(report, args.out, args.name)
    for row in report["rows"]:
        print(
            f"n={row['n']:>8}: oracle touches/pixel={row['oracle_touches_per_pixel']:>8} "
            f"engine visits/pixel={row['engine_visits_per_pixel_mean']:.1f} "
            f"render={row['render_seconds_median'] * 1000:.1f}ms"
        )
    print(f"wrote {paths[0]} and {paths[1]}")
    return 0


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "serve":
            return cmd_serve(args)
        if args.command == "register":
            return cmd_register(args)
        if args.command == "bench":
            return {
                "gen": cmd_bench_gen,
                "run": cmd_bench_run,
                "scale": cmd_bench_scale,
                "complexity": cmd_bench_complexity,
            }[args.bench_command](args)
    except VectileError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
