"""Relighting backends: composite a lighting image onto a photograph.

The surrogate is an intentionally simple differentiable stand-in for a heavy
diffusion relighter: R = I * (floor + gain * L), a per-pixel scale of the
original by the lighting. The remote backend speaks the JSON tensor protocol
to an external service that may wrap a real model.
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass

import numpy as np

from .errors import UnsupportedCapabilityError
from .imagecore import GradientTensor, Image
from .wire import HttpClient, decode_tensor, encode_tensor


class RelightBackend(ABC):
    """Interface every relighting backend implements."""

    name: str = "relight"
    has_vjp: bool = False

    @abstractmethod
    def relight(self, lighting: Image, image: Image) -> Image:
        """Composite ``lighting`` onto ``image``; output matches image shape."""

    def relight_vjp(self, lighting: Image, image: Image, grad_out: GradientTensor) -> GradientTensor:
        """Pull a gradient w.r.t. the relit output back to the lighting image."""
        raise UnsupportedCapabilityError(f"backend {self.name!r} does not provide gradients")


def _check_pair(lighting: Image, image: Image):
    if lighting.shape != image.shape:
        raise ValueError(f"lighting shape {lighting.shape} != image shape {image.shape}")


@dataclass(frozen=True)
class SurrogateRelightConfig:
    """Affine response: relit = image * (floor + gain * lighting).

    floor > 0 keeps unlit regions visible; floor + gain <= 1 keeps the output
    inside [0, 1] for any valid lighting image.
    """

    floor: float = 0.3
    gain: float = 0.7

    def __post_init__(self):
        if self.floor < 0.0 or self.gain < 0.0:
            raise ValueError("floor and gain must be >= 0")
        if self.floor + self.gain > 1.0:
            raise ValueError("floor + gain must not exceed 1 (range safety)")


class SurrogateRelight(RelightBackend):
    """Differentiable local relighting surrogate."""

    has_vjp = True

    def __init__(self, config: SurrogateRelightConfig = SurrogateRelightConfig()):
        self.config = config
        self.name = f"surrogate-relight(floor={config.floor}, gain={config.gain})"

    def relight(self, lighting: Image, image: Image) -> Image:
        _check_pair(lighting, image)
        # floor + gain <= 1 keeps the product in [0, 1]; no clamp, so the map
        # stays linear in the lighting and the VJP is exact everywhere.
        return Image(image.data * (self.config.floor + self.config.gain * lighting.data))

    def relight_vjp(self, lighting: Image, image: Image, grad_out: GradientTensor) -> GradientTensor:
        _check_pair(lighting, image)
        if grad_out.shape != image.shape:
            raise ValueError(f"grad shape {grad_out.shape} != image shape {image.shape}")
        return GradientTensor(grad_out.data * (self.config.gain * image.data))


class RemoteRelight(RelightBackend):
    """Relighting served over the JSON tensor protocol.

    ``seed`` travels with every request so stochastic remote relighters
    (diffusion samplers) can be pinned; ``approx`` flags on VJP responses are
    recorded on the instance for callers that care how gradients were made.
    """

    has_vjp = True

    def __init__(self, endpoint: str, timeout: float = 30.0, max_in_flight: int = 4, seed: int = 0):
        self._client = HttpClient(endpoint, timeout=timeout, max_in_flight=max_in_flight)
        self.seed = int(seed)
        self.last_vjp_approx = False
        self.name = f"remote-relight({endpoint})"

    def relight(self, lighting: Image, image: Image) -> Image:
        _check_pair(lighting, image)
        resp = self._client.post(
            "/relight",
            {"lighting": encode_tensor(lighting.data), "image": encode_tensor(image.data), "seed": self.seed},
        )
        relit = decode_tensor(resp.get("relit"), expect_shape=image.shape)
        # Remote float32 round trips can stray a hair outside [0, 1].
        return Image(np.clip(relit, 0.0, 1.0))

    def relight_vjp(self, lighting: Image, image: Image, grad_out: GradientTensor) -> GradientTensor:
        _check_pair(lighting, image)
        if grad_out.shape != image.shape:
            raise ValueError(f"grad shape {grad_out.shape} != image shape {image.shape}")
        resp = self._client.post(
            "/relight_vjp",
            {
                "lighting": encode_tensor(lighting.data),
                "image": encode_tensor(image.data),
                "grad_out": encode_tensor(grad_out.data),
                "seed": self.seed,
            },
        )
        self.last_vjp_approx = bool(resp.get("approx", False))
        return GradientTensor(decode_tensor(resp.get("grad_lighting"), expect_shape=lighting.shape))

    def health(self) -> dict:
        return self._client.get("/health")
