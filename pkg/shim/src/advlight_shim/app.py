"""FastAPI application exposing the wire protocol endpoints.

Request bodies are parsed by hand rather than through pydantic models so that
every failure mode returns the protocol's {"code", "message"} JSON shape, and
so oversized payloads are rejected before JSON decoding. Access to each hosted
model is serialized with a per-model lock; handlers are otherwise stateless.
"""

import json
import threading

import numpy as np
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from starlette.exceptions import HTTPException as StarletteHTTPException

from .codec import TensorError, decode_tensor, encode_tensor
from .config import ShimConfig
from .models import build_relight_model, build_victim_model


class ApiError(Exception):
    """Protocol error carrying an HTTP status and a machine-readable code."""

    def __init__(self, status: int, code: str, message: str):
        super().__init__(message)
        self.status = status
        self.code = code
        self.message = message


async def _read_json(request: Request, limit: int) -> dict:
    """Read the body enforcing the size limit, then parse it as a JSON object."""
    declared = request.headers.get("content-length")
    if declared is not None and declared.isdigit() and int(declared) > limit:
        raise ApiError(413, "request_too_large", f"request body exceeds {limit} bytes")
    raw = await request.body()
    if len(raw) > limit:
        raise ApiError(413, "request_too_large", f"request body exceeds {limit} bytes")
    try:
        body = json.loads(raw)
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ApiError(400, "bad_json", f"request body is not valid JSON: {exc}") from exc
    if not isinstance(body, dict):
        raise ApiError(400, "bad_request", "request body must be a JSON object")
    return body


def _check_fields(body: dict, required: set, optional: set):
    missing = required - body.keys()
    if missing:
        raise ApiError(400, "missing_field", f"missing required fields: {sorted(missing)}")
    unknown = body.keys() - required - optional
    if unknown:
        raise ApiError(400, "unknown_field", f"unknown fields: {sorted(unknown)}")


def _tensor_field(body: dict, name: str) -> np.ndarray:
    try:
        return decode_tensor(body[name])
    except TensorError as exc:
        raise ApiError(400, "bad_tensor", f"field {name!r}: {exc}") from exc


def _seed_field(body: dict) -> int:
    seed = body.get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
        raise ApiError(400, "bad_seed", f"seed must be a non-negative integer, got {seed!r}")
    return seed


def create_app(config: ShimConfig) -> FastAPI:
    """Build the server app, loading models eagerly so bad ids fail at startup."""
    relight_model = build_relight_model(config.relight_model, config.device)
    victim_model = build_victim_model(config.victim_model, config.device)
    relight_lock = threading.Lock()
    victim_lock = threading.Lock()
    limit = config.max_request_bytes

    app = FastAPI(title="advlight-shim", docs_url=None, redoc_url=None, openapi_url=None)

    @app.exception_handler(ApiError)
    async def handle_api_error(request: Request, exc: ApiError):
        return JSONResponse({"code": exc.code, "message": exc.message}, status_code=exc.status)

    @app.exception_handler(StarletteHTTPException)
    async def handle_http_error(request: Request, exc: StarletteHTTPException):
        return JSONResponse({"code": "http_error", "message": str(exc.detail)}, status_code=exc.status_code)

    @app.get("/health")
    async def health():
        return {
            "status": "ok",
            "models": {"relight": config.relight_model, "victim": config.victim_model},
        }

    @app.post("/relight")
    async def relight(request: Request):
        body = await _read_json(request, limit)
        _check_fields(body, required={"lighting", "image"}, optional={"seed"})
        lighting = _tensor_field(body, "lighting")
        image = _tensor_field(body, "image")
        seed = _seed_field(body)
        try:
            with relight_lock:
                relit = relight_model.relight(lighting, image, seed)
            relit = np.asarray(relit, dtype=np.float32)
        except Exception as exc:
            raise ApiError(500, "model_failure", f"relight model raised: {exc}") from exc
        if relit.shape != image.shape:
            raise ApiError(500, "model_failure", f"relight returned shape {relit.shape}, expected {image.shape}")
        return {"relit": encode_tensor(relit)}

    @app.post("/relight_vjp")
    async def relight_vjp(request: Request):
        body = await _read_json(request, limit)
        _check_fields(body, required={"lighting", "image", "grad_out"}, optional={"seed"})
        lighting = _tensor_field(body, "lighting")
        image = _tensor_field(body, "image")
        grad_out = _tensor_field(body, "grad_out")
        seed = _seed_field(body)
        if grad_out.shape != image.shape:
            raise ApiError(
                400, "shape_mismatch", f"grad_out shape {grad_out.shape} != image shape {image.shape}"
            )
        try:
            with relight_lock:
                grad_lighting, approx = relight_model.relight_vjp(lighting, image, grad_out, seed)
            grad_lighting = np.asarray(grad_lighting, dtype=np.float32)
        except Exception as exc:
            raise ApiError(500, "model_failure", f"relight model raised: {exc}") from exc
        return {"grad_lighting": encode_tensor(grad_lighting), "approx": bool(approx)}

    @app.post("/loss_grad")
    async def loss_grad(request: Request):
        body = await _read_json(request, limit)
        _check_fields(body, required={"image", "clean_image", "text"}, optional=set())
        image = _tensor_field(body, "image")
        clean_image = _tensor_field(body, "clean_image")
        text = body["text"]
        if not isinstance(text, str) or not text:
            raise ApiError(400, "bad_text", "text must be a non-empty string")
        try:
            with victim_lock:
                loss, match_term, nat_term, grad = victim_model.loss_grad(image, clean_image, text)
            grad = np.asarray(grad, dtype=np.float32)
        except Exception as exc:
            raise ApiError(500, "model_failure", f"victim model raised: {exc}") from exc
        if grad.shape != image.shape:
            raise ApiError(500, "model_failure", f"loss grad has shape {grad.shape}, expected {image.shape}")
        return {
            "loss": float(loss),
            "match_term": float(match_term),
            "nat_term": float(nat_term),
            "grad": encode_tensor(grad),
        }

    return app
