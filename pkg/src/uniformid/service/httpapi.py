"""Local HTTP API for the triage UI (stdlib http.server, loopback bind).

Endpoints (bodies are the JSON interchange forms from jsonio):

    GET  /health                      -> status + model versions
    GET  /schools[?region=A,B]        -> school profiles
    POST /search                      -> SearchResult for an ad-hoc query
    POST /cases                       -> run the pipeline on raw image bytes
    GET  /cases/{id}                  -> stored CaseRecord
    POST /cases/{id}/attributes       -> analyst edit + fresh SearchResult

The server binds loopback by default and never dials out; the offline
guarantee is enforced by tests running the whole suite under a
no-egress socket guard.
"""

from __future__ import annotations

import json
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Any
from urllib.parse import parse_qs, urlparse

from .. import nnkern
from ..errors import DataError, SchemaViolation, UniformIdError
from ..search import SearchQuery
from .jsonio import dist_from_json, school_to_json, search_result_to_json
from .pipeline import PipelineRuntime, run_pipeline


def _search_query_from_json(obj: dict[str, Any], runtime: PipelineRuntime) -> SearchQuery:
    if "distribution" not in obj:
        raise SchemaViolation("search body needs a 'distribution'")
    return SearchQuery(
        distribution=dist_from_json(obj["distribution"]),
        region_filter=frozenset(obj["region_filter"])
        if obj.get("region_filter") is not None
        else None,
        max_mismatches=obj.get("max_mismatches"),
        top_n=obj.get("top_n", runtime.config.search_top_n),
        epsilon=obj.get("epsilon", runtime.config.search_epsilon),
    )


class _Handler(BaseHTTPRequestHandler):
    runtime: PipelineRuntime  # set by make_server

    # Silence per-request stderr logging.
    def log_message(self, fmt, *args):  # noqa: D102
        pass

    def _send(self, code: int, payload: dict[str, Any]) -> None:
        raw = json.dumps(payload, sort_keys=True).encode()
        self.send_response(code)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(raw)))
        self.send_header("Access-Control-Allow-Origin", "*")
        self.end_headers()
        self.wfile.write(raw)

    def _error(self, code: int, exc: Exception) -> None:
        self._send(code, {"error": type(exc).__name__, "message": str(exc)})

    def _read_body(self) -> bytes:
        length = int(self.headers.get("Content-Length", "0"))
        return self.rfile.read(length)

    def do_OPTIONS(self):  # CORS preflight for the local UI
        self.send_response(204)
        self.send_header("Access-Control-Allow-Origin", "*")
        self.send_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS")
        self.send_header("Access-Control-Allow-Headers", "Content-Type")
        self.end_headers()

    def do_GET(self):
        runtime = self.runtime
        url = urlparse(self.path)
        try:
            if url.path == "/health":
                self._send(
                    200,
                    {
                        "status": "ok",
                        "models": runtime.versions,
                        "registry_digest": runtime.school_registry.digest,
                        "kernel_backend": nnkern.backend_name(),
                        "cases": len(runtime.case_store.all_cases()),
                    },
                )
            elif url.path == "/schools":
                params = parse_qs(url.query)
                regions = None
                if "region" in params:
                    regions = set(",".join(params["region"]).split(","))
                profiles = [
                    school_to_json(p)
                    for p in runtime.school_registry.profiles
                    if regions is None or p.region_code in regions
                ]
                self._send(
                    200,
                    {
                        "schools": profiles,
                        "registry_digest": runtime.school_registry.digest,
                    },
                )
            elif url.path.startswith("/cases/"):
                case_id = url.path[len("/cases/") :]
                record = runtime.case_store.get(case_id)
                self._send(200, record.to_json())
            else:
                self._send(404, {"error": "NotFound", "message": f"no route {url.path}"})
        except DataError as exc:
            self._error(404, exc)
        except UniformIdError as exc:
            self._error(400, exc)

    def do_POST(self):
        runtime = self.runtime
        url = urlparse(self.path)
        try:
            if url.path == "/cases":
                record = run_pipeline(self._read_body(), runtime)
                self._send(200, record.to_json())
            elif url.path == "/search":
                body = json.loads(self._read_body() or b"{}")
                query = _search_query_from_json(body, runtime)
                self._send(200, search_result_to_json(runtime.search(query)))
            elif url.path.startswith("/cases/") and url.path.endswith("/attributes"):
                case_id = url.path[len("/cases/") : -len("/attributes")]
                body = json.loads(self._read_body() or b"{}")
                if "distribution" not in body:
                    raise SchemaViolation("edit body needs a 'distribution'")
                dist = dist_from_json(body["distribution"])
                runtime.case_store.get(case_id)  # 404 before computing
                query = SearchQuery(
                    distribution=dist,
                    region_filter=frozenset(body["region_filter"])
                    if body.get("region_filter") is not None
                    else None,
                    top_n=body.get("top_n", runtime.config.search_top_n),
                    epsilon=runtime.config.search_epsilon,
                )
                result = runtime.search(query)
                record = runtime.case_store.record_edit(case_id, dist, result)
                self._send(200, record.to_json())
            else:
                self._send(404, {"error": "NotFound", "message": f"no route {url.path}"})
        except json.JSONDecodeError as exc:
            self._send(400, {"error": "BadJson", "message": str(exc)})
        except DataError as exc:
            self._error(404, exc)
        except UniformIdError as exc:
            self._error(400, exc)


def make_server(runtime: PipelineRuntime, host: str | None = None, port: int | None = None):
    handler = type("BoundHandler", (_Handler,), {"runtime": runtime})
    host = host if host is not None else runtime.config.bind_host
    port = port if port is not None else runtime.config.bind_port
    return ThreadingHTTPServer((host, port), handler)


def serve(runtime: PipelineRuntime) -> None:
    server = make_server(runtime)
    host, port = server.server_address[:2]
    print(f"uniformid service listening on http://{host}:{port}")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
