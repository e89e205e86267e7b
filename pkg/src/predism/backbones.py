"""Per-disaster-type model backends and ensemble routing.

A backbone maps (chip, meta vector) to 5 logits. Reference backbones wrap
the ordinal/softmax heads over extracted features; external backbones speak
line-delimited JSON to a child process or POST /infer over HTTP, which is
how a real CNN plugs in. Routing picks convex weights over backbones from a
co-occurrence matrix, defaulting to one-hot.
"""

from __future__ import annotations

import base64
import json
import queue
import subprocess
import threading
import urllib.error
import urllib.request
from typing import Mapping, Optional, Union

import numpy as np

from .dataset import DISASTER_TYPES
from .errors import BackboneFailure, NoBackboneAvailable, UnknownDisasterType
from .features import design_vector, extract_features
from .heads import OrdinalHead, SoftmaxHead, softmax
from .rastergeom import Chip
from .sceneio import encode_png

ChipOrFeatures = Union[Chip, np.ndarray]

DEFAULT_TIMEOUT_MS = 5000


def _design(chip_or_features: ChipOrFeatures, meta: np.ndarray) -> np.ndarray:
    if isinstance(chip_or_features, Chip):
        chip_or_features = extract_features(chip_or_features)
    return design_vector(np.asarray(chip_or_features, dtype=np.float64), meta)


class ReferenceOrdinalBackbone:
    """Cumulative-link head over chip features; the in-process reference."""

    kind = "reference-ordinal"

    def __init__(self, head: OrdinalHead, disaster_type: str = ""):
        self.head = head
        self.disaster_type = disaster_type

    def logits(self, chip: ChipOrFeatures, meta: np.ndarray) -> np.ndarray:
        return self.head.logits(_design(chip, meta))

    def predict_probs(self, chip: ChipOrFeatures, meta: np.ndarray) -> np.ndarray:
        return self.head.probs(_design(chip, meta))


class ReferenceSoftmaxBackbone:
    """Softmax-linear head over chip features."""

    kind = "reference-softmax"

    def __init__(self, head: SoftmaxHead, disaster_type: str = ""):
        self.head = head
        self.disaster_type = disaster_type

    def logits(self, chip: ChipOrFeatures, meta: np.ndarray) -> np.ndarray:
        return self.head.logits(_design(chip, meta))

    def predict_probs(self, chip: ChipOrFeatures, meta: np.ndarray) -> np.ndarray:
        return self.head.probs(_design(chip, meta))


def _validate_logits(payload: object, request_id: str, context: str) -> np.ndarray:
    if not isinstance(payload, dict):
        raise BackboneFailure(f"{context}: reply is not a JSON object")
    if payload.get("request_id") != request_id:
        raise BackboneFailure(
            f"{context}: reply request_id {payload.get('request_id')!r} != {request_id!r}"
        )
    logits = payload.get("logits")
    if not isinstance(logits, list) or len(logits) != 5:
        raise BackboneFailure(f"{context}: expected 5 logits, got {logits!r}")
    arr = np.asarray(logits, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise BackboneFailure(f"{context}: non-finite logits {logits!r}")
    return arr


def _wire_request(chip: ChipOrFeatures, meta: np.ndarray, request_id: str) -> dict:
    if not isinstance(chip, Chip):
        raise BackboneFailure("external backbones need chip pixels, not a feature vector")
    return {
        "chip_png_b64": base64.b64encode(encode_png(chip.pixels)).decode("ascii"),
        "meta": [float(v) for v in meta],
        "request_id": request_id,
    }


class SubprocessBackbone:
    """External model behind a child process speaking line-delimited JSON.

    One in-flight request at a time; a timeout or malformed reply kills the
    child (it respawns on the next call) and raises BackboneFailure.
    """

    kind = "external"

    def __init__(self, command: list[str], disaster_type: str = "",
                 timeout_ms: int = DEFAULT_TIMEOUT_MS):
        self.command = list(command)
        self.disaster_type = disaster_type
        self.timeout_ms = timeout_ms
        self._proc: Optional[subprocess.Popen] = None
        self._lines: "queue.Queue[Optional[str]]" = queue.Queue()
        self._lock = threading.Lock()
        self._counter = 0

    def start(self) -> None:
        """Spawn the child; raises BackboneFailure if it cannot start."""
        with self._lock:
            self._ensure_process()

    def _ensure_process(self) -> subprocess.Popen:
        if self._proc is not None and self._proc.poll() is None:
            return self._proc
        try:
            self._proc = subprocess.Popen(
                self.command,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                stderr=subprocess.DEVNULL,
                text=True,
                bufsize=1,
            )
        except OSError as e:
            raise BackboneFailure(f"cannot start backend {self.command!r}: {e}") from None
        self._lines = queue.Queue()
        reader = threading.Thread(target=self._pump, args=(self._proc,), daemon=True)
        reader.start()
        return self._proc

    def _pump(self, proc: subprocess.Popen) -> None:
        lines = self._lines
        for line in proc.stdout:
            lines.put(line)
        lines.put(None)

    def _kill(self) -> None:
        if self._proc is not None:
            self._proc.kill()
            self._proc.wait()
            self._proc = None

    def close(self) -> None:
        with self._lock:
            self._kill()

    def logits(self, chip: ChipOrFeatures, meta: np.ndarray) -> np.ndarray:
        with self._lock:
            proc = self._ensure_process()
            self._counter += 1
            request_id = f"req-{self._counter}"
            request = _wire_request(chip, meta, request_id)
            context = f"backend {self.command[0]!r}"
            try:
                proc.stdin.write(json.dumps(request) + "\n")
                proc.stdin.flush()
            except (BrokenPipeError, OSError) as e:
                self._kill()
                raise BackboneFailure(f"{context}: write failed: {e}") from None
            try:
                line = self._lines.get(timeout=self.timeout_ms / 1000.0)
            except queue.Empty:
                self._kill()
                raise BackboneFailure(
                    f"{context}: no reply within {self.timeout_ms} ms"
                ) from None
            if line is None:
                self._kill()
                raise BackboneFailure(f"{context}: backend exited")
            try:
                payload = json.loads(line)
            except json.JSONDecodeError:
                self._kill()
                raise BackboneFailure(f"{context}: non-JSON reply {line[:80]!r}") from None
            try:
                return _validate_logits(payload, request_id, context)
            except BackboneFailure:
                self._kill()
                raise

    def predict_probs(self, chip: ChipOrFeatures, meta: np.ndarray) -> np.ndarray:
        return softmax(self.logits(chip, meta))


class HttpBackbone:
    """External model behind HTTP POST /infer."""

    kind = "external"

    def __init__(self, url: str, disaster_type: str = "",
                 timeout_ms: int = DEFAULT_TIMEOUT_MS):
        self.url = url if url.rstrip("/").endswith("/infer") else url.rstrip("/") + "/infer"
        self.disaster_type = disaster_type
        self.timeout_ms = timeout_ms
        self._lock = threading.Lock()
        self._counter = 0

    def logits(self, chip: ChipOrFeatures, meta: np.ndarray) -> np.ndarray:
        with self._lock:
            self._counter += 1
            request_id = f"req-{self._counter}"
        request = _wire_request(chip, meta, request_id)
        context = f"backend {self.url!r}"
        body = json.dumps(request).encode("utf-8")
        http_request = urllib.request.Request(
            self.url, data=body, headers={"Content-Type": "application/json"}
        )
        try:
            with urllib.request.urlopen(http_request, timeout=self.timeout_ms / 1000.0) as resp:
                payload = json.loads(resp.read().decode("utf-8"))
        except (urllib.error.URLError, TimeoutError, OSError) as e:
            raise BackboneFailure(f"{context}: {e}") from None
        except json.JSONDecodeError:
            raise BackboneFailure(f"{context}: non-JSON reply") from None
        return _validate_logits(payload, request_id, context)

    def predict_probs(self, chip: ChipOrFeatures, meta: np.ndarray) -> np.ndarray:
        return softmax(self.logits(chip, meta))


class BackboneRegistry:
    """Immutable map disaster type -> backbone, plus optional co-occurrence."""

    def __init__(self, backbones: Mapping[str, object],
                 co_occurrence: Optional[np.ndarray] = None):
        for disaster_type in backbones:
            if disaster_type not in DISASTER_TYPES:
                raise UnknownDisasterType(f"unknown disaster type {disaster_type!r}")
        self._backbones = dict(backbones)
        if co_occurrence is not None:
            co_occurrence = np.asarray(co_occurrence, dtype=np.float64)
            n = len(DISASTER_TYPES)
            if co_occurrence.shape != (n, n):
                raise ValueError(f"co-occurrence matrix must be {n}x{n}")
            if np.any(co_occurrence < 0):
                raise ValueError("co-occurrence entries must be nonnegative")
            if not np.allclose(co_occurrence, co_occurrence.T):
                raise ValueError("co-occurrence matrix must be symmetric")
        self.co_occurrence = co_occurrence

    def __contains__(self, disaster_type: str) -> bool:
        return disaster_type in self._backbones

    def get(self, disaster_type: str):
        return self._backbones[disaster_type]

    def types(self) -> list[str]:
        return sorted(self._backbones)

    def close(self) -> None:
        for backbone in self._backbones.values():
            close = getattr(backbone, "close", None)
            if close:
                close()


def route(disaster_type: str, registry: BackboneRegistry) -> dict[str, float]:
    """Convex routing weights over registered backbones for a disaster type.

    Without a co-occurrence matrix this is one-hot on the type itself. With
    one, the type's row is restricted to registered backbones and
    renormalized; a row with no mass on registered types falls back to the
    self backbone when present.
    """
    if disaster_type not in DISASTER_TYPES:
        raise UnknownDisasterType(f"unknown disaster type {disaster_type!r}")

    if registry.co_occurrence is not None:
        row = registry.co_occurrence[DISASTER_TYPES.index(disaster_type)]
        weights = {
            other: float(row[i])
            for i, other in enumerate(DISASTER_TYPES)
            if other in registry and row[i] > 0
        }
        total = sum(weights.values())
        if total > 0:
            return {t: w / total for t, w in sorted(weights.items())}

    if disaster_type in registry:
        return {disaster_type: 1.0}
    raise NoBackboneAvailable(f"no backbone registered for {disaster_type!r}")


def ensemble_predict(chip: ChipOrFeatures, meta: np.ndarray,
                     registry: BackboneRegistry, weights: Mapping[str, float]) -> np.ndarray:
    """Probability mixture over routed backbones."""
    total = sum(weights.values())
    if abs(total - 1.0) > 1e-9:
        raise ValueError(f"routing weights must sum to 1, got {total}")
    mixture = np.zeros(5, dtype=np.float64)
    for disaster_type, weight in weights.items():
        backbone = registry.get(disaster_type)
        try:
            probs = backbone.predict_probs(chip, meta)
        except BackboneFailure as e:
            raise BackboneFailure(f"{disaster_type}: {e}") from None
        mixture += weight * np.asarray(probs, dtype=np.float64)
    return mixture
