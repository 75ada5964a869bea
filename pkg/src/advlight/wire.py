"""JSON-over-HTTP tensor protocol shared by the remote backends.

Tensors travel as {"shape": [H, W, 3], "dtype": "f32", "data": <base64>} where
data is the raw little-endian float32 buffer in row-major order. Endpoints
answer errors as JSON {"code", "message"} bodies on non-2xx statuses.
"""

from __future__ import annotations

import base64
import json
import threading
import urllib.error
import urllib.request

import numpy as np

from .errors import BackendUnavailableError, RemoteBackendError


def encode_tensor(arr: np.ndarray) -> dict:
    """Encode an (H, W, 3) float array as a wire tensor object."""
    arr = np.asarray(arr)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise ValueError(f"expected (H, W, 3) tensor, got shape {arr.shape}")
    buf = np.ascontiguousarray(arr, dtype="<f4").tobytes()
    return {
        "shape": [int(s) for s in arr.shape],
        "dtype": "f32",
        "data": base64.b64encode(buf).decode("ascii"),
    }


def decode_tensor(obj, expect_shape=None) -> np.ndarray:
    """Decode a wire tensor object to a float64 (H, W, 3) array."""
    if not isinstance(obj, dict):
        raise RemoteBackendError("bad_tensor", f"tensor must be an object, got {type(obj).__name__}")
    try:
        shape = tuple(int(s) for s in obj["shape"])
        dtype = obj["dtype"]
        raw = base64.b64decode(obj["data"], validate=True)
    except (KeyError, TypeError, ValueError) as exc:
        raise RemoteBackendError("bad_tensor", f"malformed tensor object: {exc}") from exc
    if dtype != "f32":
        raise RemoteBackendError("bad_tensor", f"unsupported dtype {dtype!r}")
    if len(shape) != 3 or shape[2] != 3 or shape[0] < 1 or shape[1] < 1:
        raise RemoteBackendError("bad_tensor", f"unsupported tensor shape {shape}")
    expected_bytes = shape[0] * shape[1] * shape[2] * 4
    if len(raw) != expected_bytes:
        raise RemoteBackendError(
            "bad_tensor", f"payload holds {len(raw)} bytes, shape needs {expected_bytes}"
        )
    if expect_shape is not None and shape != tuple(expect_shape):
        raise RemoteBackendError("bad_tensor", f"expected shape {tuple(expect_shape)}, got {shape}")
    arr = np.frombuffer(raw, dtype="<f4").reshape(shape).astype(np.float64)
    if not np.all(np.isfinite(arr)):
        raise RemoteBackendError("bad_tensor", "tensor contains non-finite values")
    return arr


class HttpClient:
    """Minimal JSON POST/GET client with a bounded in-flight request count."""

    def __init__(self, base_url: str, timeout: float = 30.0, max_in_flight: int = 4):
        if timeout <= 0:
            raise ValueError("timeout must be positive")
        if max_in_flight < 1:
            raise ValueError("max_in_flight must be >= 1")
        self.base_url = base_url.rstrip("/")
        self.timeout = timeout
        self._slots = threading.Semaphore(max_in_flight)

    def _request(self, req: urllib.request.Request) -> dict:
        with self._slots:
            try:
                with urllib.request.urlopen(req, timeout=self.timeout) as resp:
                    body = resp.read()
            except urllib.error.HTTPError as exc:
                detail = exc.read()
                try:
                    payload = json.loads(detail)
                    raise RemoteBackendError(
                        str(payload.get("code", "error")),
                        str(payload.get("message", detail[:200])),
                        status=exc.code,
                    ) from exc
                except (ValueError, AttributeError):
                    raise RemoteBackendError("http_error", detail[:200].decode("utf-8", "replace"), status=exc.code) from exc
            except (urllib.error.URLError, OSError) as exc:
                raise BackendUnavailableError(f"{req.full_url}: {exc}") from exc
        try:
            return json.loads(body)
        except ValueError as exc:
            raise RemoteBackendError("bad_response", f"response is not JSON: {exc}") from exc

    def post(self, path: str, payload: dict, headers: dict | None = None) -> dict:
        merged = {"Content-Type": "application/json"}
        if headers:
            merged.update(headers)
        req = urllib.request.Request(
            self.base_url + path,
            data=json.dumps(payload).encode("utf-8"),
            headers=merged,
            method="POST",
        )
        return self._request(req)

    def get(self, path: str) -> dict:
        req = urllib.request.Request(self.base_url + path, method="GET")
        return self._request(req)
