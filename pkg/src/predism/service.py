"""HTTP service exposing the prediction pipeline.

Endpoints (JSON unless noted):
  GET  /health        -> {"status": "ok", "backbones": [...]}
  GET  /config        -> effective public config (palette, tau, thresholds...)
  POST /hazard-score  -> {"per_attribute_levels": {...}, "overall": n}
  POST /predict       -> DamageMap document
  POST /sweep         -> manifest {"job_id", "maps": [...], "renders": [...]}
  GET  /artifacts/<name> -> persisted artifact bytes

Status codes: 200 ok, 400 malformed request, 422 domain error (body carries
the error class name as "error"), 500 backend failure.
"""

from __future__ import annotations

import base64
import binascii
import hashlib
import json
import threading
from dataclasses import dataclass, field
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

from .config import AppConfig, build_model
from .damagemap import predict_scene, render_png, sweep, to_geojson
from .dataset import parse_label_file
from .errors import (
    BackboneFailure,
    BackendStartupFailure,
    MalformedLabelFile,
    PortUnavailable,
    PredismError,
)
from .hazard import HazardAttributes, attribute_levels, overall_level
from .sceneio import decode_scene_png, load_scene
from .rastergeom import GeoBounds


class _RequestProblem(Exception):
    """Malformed request payload -> HTTP 400."""


@dataclass
class JobRecord:
    job_id: str
    inputs_digest: str
    status: str = "pending"  # pending | running | done | failed
    artifacts: list[str] = field(default_factory=list)


class JobStore:
    """The only mutable shared state; all writes serialized through one lock."""

    def __init__(self) -> None:
        self._jobs: dict[str, JobRecord] = {}
        self._lock = threading.Lock()

    def put(self, record: JobRecord) -> None:
        with self._lock:
            self._jobs[record.job_id] = record

    def get(self, job_id: str) -> JobRecord | None:
        with self._lock:
            return self._jobs.get(job_id)


class DamageService:
    """Owns the model registry, job store and artifact directory."""

    def __init__(self, config: AppConfig, model_override: str | None = None):
        self.config = config
        self.model = build_model(config, model_override)
        self.jobs = JobStore()
        self.artifacts_dir = Path(config.artifacts_dir)
        self._server: ThreadingHTTPServer | None = None
        self._thread: threading.Thread | None = None
        self._startup_check()

    def _startup_check(self) -> None:
        """Spawn subprocess backends now so a broken command fails fast."""
        for disaster_type in self.model.registry.types():
            backbone = self.model.registry.get(disaster_type)
            start = getattr(backbone, "start", None)
            if start is None:
                continue
            try:
                start()
            except PredismError as e:
                raise BackendStartupFailure(f"{disaster_type}: {e}") from None

    @property
    def port(self) -> int:
        return self._server.server_address[1]

    def start(self, block: bool = False) -> None:
        host, _, port_text = self.config.listen.rpartition(":")
        try:
            self._server = ThreadingHTTPServer((host or "127.0.0.1", int(port_text)), _Handler)
        except OSError as e:
            raise PortUnavailable(f"cannot bind {self.config.listen}: {e}") from None
        self._server.service = self  # type: ignore[attr-defined]
        if block:
            self._server.serve_forever()
        else:
            self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)
            self._thread.start()

    def join(self) -> None:
        if self._thread is not None:
            self._thread.join()

    def stop(self) -> None:
        if self._server is not None:
            self._server.shutdown()
            self._server.server_close()
        self.model.registry.close()

    # --- request handlers ---

    def handle_health(self) -> dict:
        return {"status": "ok", "backbones": self.model.registry.types()}

    def handle_config(self) -> dict:
        return self.config.public_dict()

    def handle_hazard_score(self, body: dict) -> dict:
        attrs_raw = body.get("attrs", body)
        if not isinstance(attrs_raw, dict):
            raise _RequestProblem("'attrs' must be an object of attribute values")
        attrs = HazardAttributes.from_mapping(attrs_raw)
        return {
            "per_attribute_levels": attribute_levels(attrs, self.model.thresholds),
            "overall": overall_level(attrs, self.model.thresholds),
        }

    def _load_inputs(self, body: dict):
        if "scene_b64" in body:
            try:
                data = base64.b64decode(body["scene_b64"], validate=True)
            except (binascii.Error, TypeError):
                raise _RequestProblem("'scene_b64' is not valid base64") from None
            bounds = None
            if isinstance(body.get("geo_bounds"), dict):
                try:
                    bounds = GeoBounds(**body["geo_bounds"])
                except (TypeError, ValueError) as e:
                    raise _RequestProblem(f"geo_bounds: {e}") from None
            try:
                scene = decode_scene_png(data, body.get("scene_id", "scene"), bounds)
            except Exception:
                raise _RequestProblem("'scene_b64' does not decode as an image") from None
        elif "scene_path" in body:
            try:
                scene = load_scene(body["scene_path"])
            except FileNotFoundError:
                raise _RequestProblem(f"scene not found: {body['scene_path']}") from None
        else:
            raise _RequestProblem("request needs 'scene_b64' or 'scene_path'")

        if "labels" in body:
            labels_doc = body["labels"]
            if isinstance(labels_doc, dict):
                labels_doc = json.dumps(labels_doc)
            buildings = parse_label_file(labels_doc)
        elif "labels_path" in body:
            try:
                buildings = parse_label_file(Path(body["labels_path"]).read_text())
            except FileNotFoundError:
                raise _RequestProblem(f"labels not found: {body['labels_path']}") from None
        else:
            raise _RequestProblem("request needs 'labels' or 'labels_path'")

        disaster_type = body.get("disaster_type")
        if not disaster_type:
            raise _RequestProblem("request needs 'disaster_type'")
        return scene, [b.footprint for b in buildings], disaster_type

    def _hazard_from_body(self, body: dict):
        if "hazard_level" in body:
            level = body["hazard_level"]
            if not isinstance(level, int):
                raise _RequestProblem("'hazard_level' must be an integer")
            return level
        if "attrs" in body:
            if not isinstance(body["attrs"], dict):
                raise _RequestProblem("'attrs' must be an object")
            return HazardAttributes.from_mapping(body["attrs"])
        raise _RequestProblem("request needs 'hazard_level' or 'attrs'")

    def handle_predict(self, body: dict) -> dict:
        scene, footprints, disaster_type = self._load_inputs(body)
        hazard = self._hazard_from_body(body)
        damage_map = predict_scene(scene, footprints, disaster_type, hazard, self.model)
        return damage_map.to_dict()

    def handle_sweep(self, body: dict) -> dict:
        scene, footprints, disaster_type = self._load_inputs(body)
        levels = body.get("levels")
        if not isinstance(levels, list) or not levels or not all(isinstance(v, int) for v in levels):
            raise _RequestProblem("'levels' must be a non-empty array of integers")

        digest = hashlib.sha256(json.dumps({
            "scene": hashlib.sha256(scene.pixels.tobytes()).hexdigest(),
            "bounds": scene.geo_bounds.as_dict() if scene.geo_bounds else None,
            "type": disaster_type,
            "levels": levels,
            "buildings": [fp.building_id for fp in footprints],
            "tau": self.model.tau,
            "chip_size": self.model.chip_size,
        }, sort_keys=True).encode()).hexdigest()
        job = JobRecord(job_id=f"j{digest[:12]}", inputs_digest=digest, status="running")
        self.jobs.put(job)

        try:
            maps = sweep(scene, footprints, disaster_type, levels, self.model)
            self.artifacts_dir.mkdir(parents=True, exist_ok=True)
            manifest: dict = {"job_id": job.job_id, "scene_id": scene.scene_id,
                              "disaster_type": disaster_type, "maps": [], "renders": []}
            for damage_map in maps:
                geojson = to_geojson(damage_map, footprints, scene.geo_bounds,
                                     (scene.width, scene.height))
                png = render_png(damage_map, scene, footprints, self.config.palette)
                geo_name = f"{job.job_id}_level{damage_map.hazard_level}.geojson"
                png_name = f"{job.job_id}_level{damage_map.hazard_level}.png"
                self._write_artifact(geo_name, geojson.encode("utf-8"))
                self._write_artifact(png_name, png)
                job.artifacts += [geo_name, png_name]
                manifest["maps"].append({
                    "level": damage_map.hazard_level,
                    "geojson": json.loads(geojson),
                    "artifact": f"/artifacts/{geo_name}",
                })
                manifest["renders"].append(f"/artifacts/{png_name}")
            manifest_name = f"{job.job_id}_manifest.json"
            self._write_artifact(manifest_name, json.dumps(manifest, indent=2).encode("utf-8"))
            job.artifacts.append(manifest_name)
            job.status = "done"
            self.jobs.put(job)
            return manifest
        except Exception:
            job.status = "failed"
            self.jobs.put(job)
            raise

    def _write_artifact(self, name: str, data: bytes) -> None:
        # atomic publish so concurrent identical jobs never expose partial files
        tmp = self.artifacts_dir / f".{name}.{threading.get_ident()}.tmp"
        tmp.write_bytes(data)
        tmp.replace(self.artifacts_dir / name)

    def read_artifact(self, name: str) -> bytes | None:
        path = (self.artifacts_dir / name).resolve()
        if path.parent != self.artifacts_dir.resolve() or not path.is_file():
            return None
        return path.read_bytes()


class _Handler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"

    @property
    def service(self) -> DamageService:
        return self.server.service  # type: ignore[attr-defined]

    def log_message(self, fmt, *args):  # quiet by default
        pass

    def _send(self, status: int, payload: bytes, content_type: str) -> None:
        self.send_response(status)
        self.send_header("Content-Type", content_type)
        self.send_header("Content-Length", str(len(payload)))
        self.send_header("Access-Control-Allow-Origin", "*")
        self.send_header("Access-Control-Allow-Headers", "Content-Type")
        self.send_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS")
        self.end_headers()
        self.wfile.write(payload)

    def _send_json(self, status: int, doc: dict) -> None:
        self._send(status, json.dumps(doc).encode("utf-8"), "application/json")

    def _send_error(self, status: int, code: str, message: str) -> None:
        self._send_json(status, {"error": code, "message": message})

    def _read_body(self) -> dict:
        length = int(self.headers.get("Content-Length") or 0)
        raw = self.rfile.read(length) if length else b""
        if not raw:
            raise _RequestProblem("empty request body")
        try:
            body = json.loads(raw)
        except json.JSONDecodeError as e:
            raise _RequestProblem(f"request body is not valid JSON: {e}") from None
        if not isinstance(body, dict):
            raise _RequestProblem("request body must be a JSON object")
        return body

    def do_OPTIONS(self) -> None:
        self._send(204, b"", "text/plain")

    def do_GET(self) -> None:
        if self.path == "/health":
            self._send_json(200, self.service.handle_health())
        elif self.path == "/config":
            self._send_json(200, self.service.handle_config())
        elif self.path.startswith("/artifacts/"):
            name = self.path[len("/artifacts/"):]
            data = self.service.read_artifact(name)
            if data is None:
                self._send_error(404, "NotFound", f"no artifact {name!r}")
                return
            content_type = "image/png" if name.endswith(".png") else "application/json"
            if name.endswith(".geojson"):
                content_type = "application/geo+json"
            self._send(200, data, content_type)
        else:
            self._send_error(404, "NotFound", f"no route {self.path!r}")

    def do_POST(self) -> None:
        routes = {
            "/hazard-score": self.service.handle_hazard_score,
            "/predict": self.service.handle_predict,
            "/sweep": self.service.handle_sweep,
        }
        handler = routes.get(self.path)
        if handler is None:
            self._send_error(404, "NotFound", f"no route {self.path!r}")
            return
        try:
            self._send_json(200, handler(self._read_body()))
        except _RequestProblem as e:
            self._send_error(400, "MalformedRequest", str(e))
        except MalformedLabelFile as e:
            self._send_error(400, e.code, str(e))
        except BackboneFailure as e:
            self._send_error(500, e.code, str(e))
        except PredismError as e:
            self._send_error(422, e.code, str(e))
        except ValueError as e:
            self._send_error(422, "InvalidValue", str(e))
        except Exception as e:  # pragma: no cover - unexpected
            self._send_error(500, "InternalError", f"{type(e).__name__}: {e}")


def serve(config: AppConfig, model_override: str | None = None,
          block: bool = False) -> DamageService:
    """Build the model, spawn external backends, and start listening."""
    service = DamageService(config, model_override)
    service.start(block=block)
    return service
