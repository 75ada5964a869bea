"""Parametric lighting images: a start color blending toward an end color
along one of four axis-aligned directions.

The weight parameter w in [0, 2] controls how much of the axis stays at the
pure start color before the ramp begins: with s = w/2, blend coefficient

    b(t) = 0                  for t <= s
    b(t) = (t - s) / (1 - s)  for t > s      (b = 0 everywhere when s >= 1)

where t is the normalized pixel-center coordinate along the direction axis.
Each pixel is (1 - b) * start + b * end, so w = 2 paints the constant start
color and w = 0 ramps across the whole image.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .imagecore import GradientTensor, Image


class Direction(str, Enum):
    LEFT_TO_RIGHT = "left_to_right"
    RIGHT_TO_LEFT = "right_to_left"
    TOP_TO_BOTTOM = "top_to_bottom"
    BOTTOM_TO_TOP = "bottom_to_top"


def _check_color(name: str, color) -> tuple:
    color = tuple(float(c) for c in color)
    if len(color) != 3:
        raise ValueError(f"{name} must have 3 channels, got {len(color)}")
    if not all(math.isfinite(c) for c in color):
        raise ValueError(f"{name} contains non-finite values")
    if min(color) < 0.0 or max(color) > 1.0:
        raise ValueError(f"{name} must lie in [0, 1]^3, got {color}")
    return color


@dataclass(frozen=True)
class LightingParams:
    """Gradient lighting specification: colors in [0, 1]^3, weight in [0, 2]."""

    start_color: tuple
    end_color: tuple
    direction: Direction
    weight: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "start_color", _check_color("start_color", self.start_color))
        object.__setattr__(self, "end_color", _check_color("end_color", self.end_color))
        object.__setattr__(self, "direction", Direction(self.direction))
        w = float(self.weight)
        if not math.isfinite(w):
            raise ValueError("weight must be finite")
        if w < 0.0 or w > 2.0:
            raise ValueError(f"weight must lie in [0, 2], got {w}")
        object.__setattr__(self, "weight", w)

    @classmethod
    def projected(cls, start_color, end_color, direction, weight) -> "LightingParams":
        """Clamp colors to [0, 1] and weight to [0, 2], then construct.

        This is the feasibility projection used after unconstrained updates.
        """
        clamp = lambda v: tuple(min(1.0, max(0.0, float(c))) for c in v)
        return cls(clamp(start_color), clamp(end_color), Direction(direction), min(2.0, max(0.0, float(weight))))


def parse_hex_color(text: str) -> tuple:
    """Parse '#RRGGBB' into an RGB tuple scaled to [0, 1]."""
    t = text.strip()
    if len(t) != 7 or t[0] != "#":
        raise ValueError(f"expected '#RRGGBB', got {text!r}")
    try:
        return tuple(int(t[i : i + 2], 16) / 255.0 for i in (1, 3, 5))
    except ValueError:
        raise ValueError(f"expected '#RRGGBB', got {text!r}") from None


def _axis_coords(direction: Direction, height: int, width: int) -> np.ndarray:
    """Normalized pixel-center coordinate along the blend axis, per pixel.

    Reversed directions reuse the forward coordinate array in reverse order,
    so mirrored parameter pairs produce bitwise-mirrored images.
    """
    if direction in (Direction.LEFT_TO_RIGHT, Direction.RIGHT_TO_LEFT):
        base = (np.arange(width, dtype=np.float64) + 0.5) / width
        if direction is Direction.RIGHT_TO_LEFT:
            base = base[::-1]
        return np.broadcast_to(base[None, :], (height, width))
    base = (np.arange(height, dtype=np.float64) + 0.5) / height
    if direction is Direction.BOTTOM_TO_TOP:
        base = base[::-1]
    return np.broadcast_to(base[:, None], (height, width))


def _blend_coeff(t: np.ndarray, weight: float) -> np.ndarray:
    s = weight / 2.0
    b = np.zeros_like(t)
    if s < 1.0:
        ramp = t > s
        b[ramp] = (t[ramp] - s) / (1.0 - s)
    return b


def generate_lighting_image(params: LightingParams, height: int, width: int) -> Image:
    """Render the parametric gradient at the requested size."""
    if height < 1 or width < 1:
        raise ValueError(f"size must be >= 1x1, got {height}x{width}")
    t = _axis_coords(params.direction, height, width)
    b = _blend_coeff(t, params.weight)[:, :, None]
    start = np.array(params.start_color, dtype=np.float64)
    end = np.array(params.end_color, dtype=np.float64)
    pixels = (1.0 - b) * start + b * end
    return Image(np.clip(pixels, 0.0, 1.0))


def lighting_vjp_params(
    params: LightingParams, height: int, width: int, grad_image: GradientTensor
):
    """Pull a gradient w.r.t. the rendered lighting image back to the parameters.

    Returns (grad_start_color, grad_end_color, grad_weight). Per pixel the
    render is (1 - b) * start + b * end, so color gradients are b-weighted
    sums of the incoming gradient, and the weight gradient uses

        db/dw = 0.5 * (t - 1) / (1 - s)^2   on the ramp region t > s, s < 1

    and is identically zero when s >= 1 (constant image, flat in w).
    """
    if grad_image.shape[:2] != (height, width):
        raise ValueError(f"gradient shape {grad_image.shape} does not match {height}x{width}")
    g = grad_image.data
    t = _axis_coords(params.direction, height, width)
    b = _blend_coeff(t, params.weight)[:, :, None]
    grad_start = ((1.0 - b) * g).sum(axis=(0, 1))
    grad_end = (b * g).sum(axis=(0, 1))
    s = params.weight / 2.0
    grad_weight = 0.0
    if s < 1.0:
        ramp = t > s
        db_dw = np.zeros_like(t)
        db_dw[ramp] = 0.5 * (t[ramp] - 1.0) / (1.0 - s) ** 2
        delta = np.array(params.end_color) - np.array(params.start_color)
        grad_weight = float((db_dw[:, :, None] * delta * g).sum())
    return grad_start, grad_end, grad_weight
