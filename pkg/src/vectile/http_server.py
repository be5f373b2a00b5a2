"""WMTS-style HTTP tile endpoint over the tile service.

Routes:
  GET  /tile/{dataset}/{z}/{x}/{y}.png?width=N&stroke=RRGGBBAA
         &fill=mono|pattern:{id}|none&fillcolor=RRGGBBAA
  GET  /datasets           list registered dataset metadata
  POST /datasets           multipart registration (name, format, file)
  GET  /metrics            counters + render-time histogram snapshot
  GET  /                   static viewer bundle when present

Tiles outside the dataset MBR (expanded by the stroke radius) return a
transparent tile without creating a task; styling happens per request from
the cached classification grid.
"""

from __future__ import annotations

import json
import mimetypes
import re
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from urllib.parse import parse_qs, urlparse

from .errors import (
    DuplicateDatasetError,
    GeometryParseError,
    PatternNotFoundError,
    TaskQueueFullError,
    UnknownDatasetError,
)
from .ingest import FORMATS, parse_dataset
from .render import (
    FILL_MONO,
    FILL_NONE,
    FILL_PATTERN,
    PatternLibrary,
    Style,
    render_tile_png,
    transparent_tile_png,
)
from .geometry import TileKey
from .service import RenderFailedError, TileService

_TILE_RE = re.compile(r"^/tile/([^/]+)/(\d+)/(\d+)/(\d+)\.png$")
_HEX_RGBA = re.compile(r"^[0-9a-fA-F]{8}$")


class BadRequest(Exception):
    pass


def _parse_color(value: str) -> tuple[int, int, int, int]:
    if not _HEX_RGBA.match(value):
        raise BadRequest(f"expected RRGGBBAA hex color, got {value!r}")
    return tuple(int(value[k : k + 2], 16) for k in (0, 2, 4, 6))  # type: ignore[return-value]


def parse_style_params(params: dict[str, list[str]]) -> Style:
    """Build a Style from tile query parameters; bad values raise BadRequest."""
    kwargs: dict = {}
    if "width" in params:
        try:
            width = int(params["width"][0])
        except ValueError:
            raise BadRequest(f"bad width {params['width'][0]!r}") from None
        if width < 1 or width > 64:
            raise BadRequest("width must be in 1..64")
        kwargs["stroke_width"] = width
    if "stroke" in params:
        kwargs["stroke_color"] = _parse_color(params["stroke"][0])
    if "fillcolor" in params:
        kwargs["fill_color"] = _parse_color(params["fillcolor"][0])
    if "background" in params:
        kwargs["background"] = _parse_color(params["background"][0])
    if "fill" in params:
        mode = params["fill"][0]
        if mode == FILL_NONE or mode == FILL_MONO:
            kwargs["fill_mode"] = mode
        elif mode.startswith(f"{FILL_PATTERN}:"):
            kwargs["fill_mode"] = FILL_PATTERN
            kwargs["pattern_id"] = mode.split(":", 1)[1]
        else:
            raise BadRequest(f"bad fill mode {mode!r}")
    try:
        return Style(**kwargs)
    except ValueError as exc:
        raise BadRequest(str(exc)) from None


def parse_multipart(body: bytes, content_type: str) -> dict[str, tuple[str | None, bytes]]:
    """Minimal multipart/form-data parser: field name -> (filename, data)."""
    m = re.search(r'boundary="?([^";]+)"?', content_type)
    if not m:
        raise BadRequest("multipart boundary missing")
    boundary = b"--" + m.group(1).encode()
    fields: dict[str, tuple[str | None, bytes]] = {}
    for part in body.split(boundary):
        part = part.strip(b"\r\n")
        if not part or part == b"--":
            continue
        if b"\r\n\r\n" not in part:
            continue
        head, _, data = part.partition(b"\r\n\r\n")
        disp = re.search(rb'Content-Disposition:[^\r\n]*?[;\s]name="([^"]*)"', head, re.I)
        if not disp:
            continue
        name = disp.group(1).decode()
        fname = re.search(rb'filename="([^"]*)"', head, re.I)
        fields[name] = (fname.group(1).decode() if fname else None, data)
    return fields


class _Handler(BaseHTTPRequestHandler):
    server: "TileHttpServer"
    protocol_version = "HTTP/1.1"

    # -- plumbing -----------------------------------------------------

    def log_message(self, fmt: str, *args) -> None:  # quiet by default
        if self.server.app.verbose:
            super().log_message(fmt, *args)

    def _send(self, status: int, content_type: str, payload: bytes) -> None:
        self.send_response(status)
        self.send_header("Content-Type", content_type)
        self.send_header("Content-Length", str(len(payload)))
        self.send_header("Access-Control-Allow-Origin", "*")
        self.end_headers()
        self.wfile.write(payload)

    def _send_json(self, status: int, doc: object) -> None:
        self._send(status, "application/json", json.dumps(doc).encode())

    def _send_error_json(self, status: int, message: str) -> None:
        self._send_json(status, {"error": message})

    # -- routes ---------------------------------------------------------

    def do_GET(self) -> None:  # noqa: N802  (stdlib handler naming)
        url = urlparse(self.path)
        try:
            m = _TILE_RE.match(url.path)
            if m:
                self._tile(m, parse_qs(url.query))
            elif url.path.startswith("/tile/"):
                self.server.app.service.metrics.inc("bad_requests")
                self._send_error_json(400, f"malformed tile path {url.path!r}")
            elif url.path == "/datasets":
                self._send_json(200, self.server.app.service.catalog.list_meta())
            elif url.path == "/metrics":
                self._send_json(200, self.server.app.service.metrics_snapshot())
            elif url.path == "/patterns":
                self._send_json(200, self.server.app.patterns.names())
            else:
                self._static(url.path)
        except BrokenPipeError:
            pass
        except Exception as exc:  # pragma: no cover - last-resort guard
            self._send_error_json(500, f"internal error: {exc}")

    def do_POST(self) -> None:  # noqa: N802
        url = urlparse(self.path)
        if url.path != "/datasets":
            self._send_error_json(404, "not found")
            return
        try:
            length = int(self.headers.get("Content-Length", "0"))
            body = self.rfile.read(length)
            fields = parse_multipart(body, self.headers.get("Content-Type", ""))
            for required in ("name", "format", "file"):
                if required not in fields:
                    raise BadRequest(f"missing multipart field {required!r}")
            name = fields["name"][1].decode().strip()
            fmt = fields["format"][1].decode().strip()
            if fmt not in FORMATS:
                raise BadRequest(f"unknown format {fmt!r}; expected one of {FORMATS}")
            payload = fields["file"][1]
            csv_header = fields.get("csv_header", (None, b"false"))[1].decode().lower() in ("1", "true")
            features = parse_dataset(payload, fmt, csv_header=csv_header)
            handle = self.server.app.service.catalog.register(name, features)
            self._send_json(201, handle.meta())
        except BadRequest as exc:
            self.server.app.service.metrics.inc("bad_requests")
            self._send_error_json(400, str(exc))
        except DuplicateDatasetError as exc:
            self._send_error_json(409, str(exc))
        except GeometryParseError as exc:
            self._send_error_json(422, str(exc))

    def _tile(self, m: re.Match, params: dict[str, list[str]]) -> None:
        app = self.server.app
        try:
            style = parse_style_params(params)
            dataset = m.group(1)
            z, x, y = int(m.group(2)), int(m.group(3)), int(m.group(4))
            try:
                tile = TileKey(z, x, y)
            except Exception as exc:
                raise BadRequest(str(exc)) from None
            grid = app.service.grid_for(dataset, z, x, y, style.stroke_width)
            if grid is None:
                self._send(200, "image/png", transparent_tile_png())
                return
            png = render_tile_png(grid, style, tile, app.patterns)
            self._send(200, "image/png", png)
        except BadRequest as exc:
            app.service.metrics.inc("bad_requests")
            self._send_error_json(400, str(exc))
        except UnknownDatasetError as exc:
            self._send_error_json(404, str(exc))
        except PatternNotFoundError as exc:
            app.service.metrics.inc("bad_requests")
            self._send_error_json(400, str(exc))
        except TaskQueueFullError as exc:
            self._send_error_json(503, str(exc))
        except RenderFailedError as exc:
            self._send_error_json(500, str(exc))

    def _static(self, path: str) -> None:
        app = self.server.app
        if path == "/":
            path = "/index.html"
        if app.static_dir is not None:
            target = (app.static_dir / path.lstrip("/")).resolve()
            if str(target).startswith(str(app.static_dir.resolve())) and target.is_file():
                ctype = mimetypes.guess_type(str(target))[0] or "application/octet-stream"
                self._send(200, ctype, target.read_bytes())
                return
        if path == "/index.html":
            self._send(200, "text/html", _FALLBACK_PAGE)
            return
        self._send_error_json(404, "not found")


_FALLBACK_PAGE = (
    b"<!doctype html><title>vectile</title>"
    b"<h1>vectile tile service</h1>"
    b"<p>No viewer bundle installed. Endpoints: "
    b"<code>/tile/{dataset}/{z}/{x}/{y}.png</code>, <code>/datasets</code>, "
    b"<code>/metrics</code>.</p>"
)


class TileHttpServer(ThreadingHTTPServer):
    """Threaded HTTP server bound to one TileService."""

    daemon_threads = True

    def __init__(
        self,
        service: TileService,
        static_dir: str | Path | None = None,
        verbose: bool = False,
    ):
        self.app = self
        self.service = service
        self.patterns = PatternLibrary(service.config.pattern_dir)
        self.static_dir = Path(static_dir) if static_dir else None
        self.verbose = verbose
        self._thread: threading.Thread | None = None
        super().__init__((service.config.host, service.config.port), _Handler)

    @property
    def url(self) -> str:
        host, port = self.server_address[:2]
        return f"http://{host}:{port}"

    def start_background(self) -> "TileHttpServer":
        self._thread = threading.Thread(target=self.serve_forever, daemon=True)
        self._thread.start()
        return self

    def stop(self) -> None:
        self.shutdown()
        if self._thread:
            self._thread.join(timeout=5)
        self.server_close()
