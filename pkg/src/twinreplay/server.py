"""HTTP service streaming a scene to viewers.

Endpoints (all GET, all immutable and cacheable):

    /api/manifest             scene.json bytes (application/json)
    /api/frames/{i}           SPCF frame bytes (application/octet-stream)
    /api/trajectory/{entity}  STRJ trajectory bytes
    /api/mesh/{entity}        OBJ text
    /                         viewer static assets when built, else an info page

The server never mutates scene data; repeated GETs return identical bytes.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

from . import scene as scene_mod

_CONTENT_TYPES = {
    ".html": "text/html; charset=utf-8",
    ".js": "text/javascript; charset=utf-8",
    ".mjs": "text/javascript; charset=utf-8",
    ".css": "text/css; charset=utf-8",
    ".json": "application/json",
    ".map": "application/json",
    ".png": "image/png",
    ".svg": "image/svg+xml",
    ".wasm": "application/wasm",
    ".ico": "image/x-icon",
}

_PLACEHOLDER_PAGE = """<!doctype html>
<html><head><title>twinreplay</title></head>
<body>
<h1>twinreplay scene server</h1>
<p>No viewer build is installed. The API is live:</p>
<ul>
<li><a href="/api/manifest">/api/manifest</a></li>
<li>/api/frames/{index}</li>
<li>/api/trajectory/{entity}</li>
<li>/api/mesh/{entity}</li>
</ul>
</body></html>
"""


@dataclass
class ServeConfig:
    scene_root: Path
    host: str = "127.0.0.1"
    port: int = 8787
    cors: bool = False
    static_dir: Path | None = None
    quiet: bool = True


class SceneServer(ThreadingHTTPServer):
    daemon_threads = True

    def __init__(self, config: ServeConfig):
        self.config = config
        manifest_path = Path(config.scene_root) / "scene.json"
        if not manifest_path.is_file():
            raise FileNotFoundError(f"scene root has no manifest: {manifest_path}")
        self.manifest_path = manifest_path
        self.manifest = scene_mod.parse_manifest(manifest_path.read_bytes())
        super().__init__((config.host, config.port), _Handler)

    @property
    def url(self) -> str:
        host, port = self.server_address[:2]
        return f"http://{host}:{port}"

    def serve_background(self) -> threading.Thread:
        """Serve on a daemon thread; call shutdown() to stop."""
        thread = threading.Thread(target=self.serve_forever, daemon=True)
        thread.start()
        return thread


class _Handler(BaseHTTPRequestHandler):
    server: SceneServer

    def log_message(self, fmt, *args):
        if not self.server.config.quiet:
            super().log_message(fmt, *args)

    def _send(self, status: int, body: bytes, content_type: str, cacheable: bool = True):
        self.send_response(status)
        self.send_header("Content-Type", content_type)
        self.send_header("Content-Length", str(len(body)))
        if cacheable and status == 200:
            self.send_header("Cache-Control", "public, max-age=31536000, immutable")
        if self.server.config.cors:
            self.send_header("Access-Control-Allow-Origin", "*")
        self.end_headers()
        self.wfile.write(body)

    def _error(self, status: int, message: str):
        self._send(status, (message + "\n").encode("utf-8"), "text/plain; charset=utf-8",
                   cacheable=False)

    def _send_file(self, path: Path, content_type: str):
        try:
            body = path.read_bytes()
        except FileNotFoundError:
            self._error(404, f"not found: {self.path}")
            return
        self._send(200, body, content_type)

    def do_GET(self):  # noqa: N802 (http.server API)
        path = self.path.split("?", 1)[0]
        manifest = self.server.manifest
        root = Path(self.server.config.scene_root)

        if path == "/api/manifest":
            self._send_file(self.server.manifest_path, "application/json")
            return

        if path.startswith("/api/frames/"):
            tail = path[len("/api/frames/"):]
            if not tail.isdigit():
                self._error(400, f"frame index must be a non-negative integer, got '{tail}'")
                return
            index = int(tail)
            if index >= manifest.frame_count:
                self._error(404, f"frame {index} out of range [0, {manifest.frame_count})")
                return
            uri = manifest.pointcloud_entity().frame_uri(index)
            self._send_file(root / uri, "application/octet-stream")
            return

        if path.startswith("/api/trajectory/"):
            entity_id = path[len("/api/trajectory/"):]
            self._entity_file(entity_id, "instrument", "application/octet-stream")
            return

        if path.startswith("/api/mesh/"):
            entity_id = path[len("/api/mesh/"):]
            self._entity_file(entity_id, "mesh", "text/plain; charset=utf-8")
            return

        self._static(path)

    def _entity_file(self, entity_id: str, kind: str, content_type: str):
        manifest = self.server.manifest
        try:
            entity = manifest.entity(entity_id)
        except KeyError:
            self._error(404, f"unknown entity '{entity_id}'")
            return
        if entity.kind != kind or entity.uri is None:
            self._error(404, f"entity '{entity_id}' has no {kind} resource")
            return
        self._send_file(Path(self.server.config.scene_root) / entity.uri, content_type)

    def _static(self, path: str):
        static_dir = self.server.config.static_dir
        if path == "/":
            path = "/index.html"
        if static_dir is not None:
            base = Path(static_dir).resolve()
            target = (base / path.lstrip("/")).resolve()
            if base in target.parents or target == base:
                if target.is_file():
                    ctype = _CONTENT_TYPES.get(target.suffix, "application/octet-stream")
                    self._send_file(target, ctype)
                    return
        if path == "/index.html":
            self._send(200, _PLACEHOLDER_PAGE.encode("utf-8"), "text/html; charset=utf-8",
                       cacheable=False)
            return
        self._error(404, f"not found: {self.path}")


def make_server(config: ServeConfig) -> SceneServer:
    return SceneServer(config)
