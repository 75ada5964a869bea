"""Initial lighting recommendation: ask a chat model, fall back to a heuristic.

The chat model receives a short scene summary and must answer with a single
JSON object naming hex start/end colors and a gradient direction. Anything
going wrong on that path (no endpoint, transport failure, unparseable answer)
silently downgrades to a deterministic image-statistics heuristic, so
recommend() never fails hard.
"""

from __future__ import annotations

import base64
import colorsys
import json
import os
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import RecommendationParseError
from .imagecore import Image, png_encode
from .lightgen import Direction, LightingParams, parse_hex_color
from .wire import HttpClient

PROMPT_TEMPLATE_VERSION = 1

PROMPT_TEMPLATE = """You are choosing lighting for a photographic relighting tool.

Scene: {summary}

Pick a lighting gradient that would illuminate this scene plausibly. Answer
with exactly one JSON object and nothing else, in this schema:

{{"start_color": "#RRGGBB", "end_color": "#RRGGBB", "direction": "<one of: left_to_right, right_to_left, top_to_bottom, bottom_to_top>"}}
"""

DEFAULT_WEIGHT = 1.0


class RecommendationSource(str, Enum):
    LLM = "llm"
    HEURISTIC = "heuristic"


@dataclass(frozen=True)
class Recommendation:
    params: LightingParams
    source: RecommendationSource
    raw_response: str | None = None


def build_prompt(summary: str) -> str:
    """Fill the prompt template with a non-empty scene summary."""
    summary = summary.strip()
    if not summary:
        raise ValueError("summary must be non-empty")
    return PROMPT_TEMPLATE.format(summary=summary)


def _first_json_object(raw: str) -> dict:
    """Extract the first balanced JSON object from free-form model output."""
    start = raw.find("{")
    while start != -1:
        depth = 0
        in_string = False
        escape = False
        for i in range(start, len(raw)):
            ch = raw[i]
            if in_string:
                if escape:
                    escape = False
                elif ch == "\\":
                    escape = True
                elif ch == '"':
                    in_string = False
            elif ch == '"':
                in_string = True
            elif ch == "{":
                depth += 1
            elif ch == "}":
                depth -= 1
                if depth == 0:
                    try:
                        obj = json.loads(raw[start : i + 1])
                    except ValueError:
                        break
                    if isinstance(obj, dict):
                        return obj
                    break
        start = raw.find("{", start + 1)
    raise RecommendationParseError("no JSON object found in response")


def parse_response(raw: str) -> LightingParams:
    """Parse a chat answer into LightingParams (weight fixed at the default)."""
    obj = _first_json_object(raw)
    try:
        start = parse_hex_color(str(obj["start_color"]))
        end = parse_hex_color(str(obj["end_color"]))
        direction = Direction(str(obj["direction"]).strip().lower())
    except KeyError as exc:
        raise RecommendationParseError(f"response object missing key {exc}") from exc
    except ValueError as exc:
        raise RecommendationParseError(f"bad field in response object: {exc}") from exc
    return LightingParams(start, end, direction, DEFAULT_WEIGHT)


_LUMA = np.array([0.299, 0.587, 0.114])


def heuristic_fallback(image: Image) -> LightingParams:
    """Deterministic initializer from image statistics.

    Start color: mean of the brightest luminance quartile, re-saturated to a
    bright variant; end color: the same hue darkened, so the ramp dims the
    scene along the gradient. Direction runs from the brighter side of the
    image toward the darker side (by luminance centroid).
    """
    arr = image.data
    height, width = arr.shape[:2]
    lum = arr @ _LUMA
    q3 = np.quantile(lum, 0.75)
    bright = arr[lum >= q3]
    base = bright.mean(axis=0)
    hue, sat, _ = colorsys.rgb_to_hsv(*np.clip(base, 0.0, 1.0))
    start = colorsys.hsv_to_rgb(hue, sat, 0.9)
    end = colorsys.hsv_to_rgb(hue, sat, 0.35)

    total = float(lum.sum())
    direction = Direction.LEFT_TO_RIGHT
    if total > 0.0:
        xbar = float((lum.sum(axis=0) * (np.arange(width) + 0.5)).sum()) / total
        ybar = float((lum.sum(axis=1) * (np.arange(height) + 0.5)).sum()) / total
        dx = xbar - width / 2.0
        dy = ybar - height / 2.0
        if max(abs(dx), abs(dy)) < 1e-9:
            dx = dy = 0.0  # centered (e.g. constant image): keep the default
        if abs(dx) >= abs(dy):
            direction = Direction.LEFT_TO_RIGHT if dx <= 0 else Direction.RIGHT_TO_LEFT
        else:
            direction = Direction.TOP_TO_BOTTOM if dy <= 0 else Direction.BOTTOM_TO_TOP
    return LightingParams(start, end, direction, DEFAULT_WEIGHT)


@dataclass(frozen=True)
class RecommenderConfig:
    """Chat-endpoint settings. api_key_env names the variable holding the key;
    the key itself never appears in config files or reports."""

    endpoint: str | None = None
    model: str = "gpt-4o"
    api_key_env: str = "RECOMMENDER_API_KEY"
    timeout: float = 30.0
    max_in_flight: int = 2
    attach_image: bool = False


class Recommender:
    """LLM-backed recommender with the heuristic as a safety net."""

    def __init__(self, config: RecommenderConfig = RecommenderConfig()):
        self.config = config
        self._client = (
            HttpClient(config.endpoint, timeout=config.timeout, max_in_flight=config.max_in_flight)
            if config.endpoint
            else None
        )

    def _ask(self, image: Image, summary: str) -> str:
        prompt = build_prompt(summary)
        if self.config.attach_image:
            data_uri = "data:image/png;base64," + base64.b64encode(png_encode(image)).decode("ascii")
            content = [
                {"type": "text", "text": prompt},
                {"type": "image_url", "image_url": {"url": data_uri}},
            ]
        else:
            content = prompt
        body = {"model": self.config.model, "messages": [{"role": "user", "content": content}]}
        key = os.environ.get(self.config.api_key_env)
        headers = {"Authorization": f"Bearer {key}"} if key else {}
        resp = self._client.post("/chat/completions", body, headers)
        return str(resp["choices"][0]["message"]["content"])

    def recommend(self, image: Image, summary: str) -> Recommendation:
        """Best-effort LLM recommendation; any failure falls back to the heuristic."""
        if self._client is None:
            return Recommendation(heuristic_fallback(image), RecommendationSource.HEURISTIC, None)
        try:
            raw = self._ask(image, summary)
            params = parse_response(raw)
            return Recommendation(params, RecommendationSource.LLM, raw)
        except Exception as exc:  # downgrade on any failure; never fail hard
            return Recommendation(
                heuristic_fallback(image),
                RecommendationSource.HEURISTIC,
                f"fallback after error: {type(exc).__name__}: {exc}",
            )
