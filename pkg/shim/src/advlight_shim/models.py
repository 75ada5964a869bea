"""Hosted model implementations and the id registry.

Every deployment ships the "echo" models: weight-free stand-ins with exactly
specified outputs, so protocol conformance can be tested on any machine with
no checkpoints or GPU. Real model backends register alongside them under new
ids; the registry rejects unknown ids at startup rather than at first request.
"""

from typing import Tuple

import numpy as np


class EchoRelight:
    """Relighter that returns the input image unchanged.

    The VJP is a straight-through passthrough of grad_out, reported with
    approx=True since it is not the true derivative of the echo map.
    """

    name = "echo"

    def relight(self, lighting: np.ndarray, image: np.ndarray, seed: int) -> np.ndarray:
        return image

    def relight_vjp(
        self, lighting: np.ndarray, image: np.ndarray, grad_out: np.ndarray, seed: int
    ) -> Tuple[np.ndarray, bool]:
        return grad_out, True


class EchoVictim:
    """Victim scorer with a closed-form loss: the mean pixel value.

    nat_term is 1.0 exactly when the adversarial image equals the clean image
    bit for bit, else 0.0; match_term takes up the remainder so the terms
    always sum to loss. The gradient of the mean is constant 1 / (H * W * 3).
    """

    name = "echo"

    def loss_grad(
        self, image: np.ndarray, clean_image: np.ndarray, text: str
    ) -> Tuple[float, float, float, np.ndarray]:
        loss = float(np.mean(image, dtype=np.float64))
        nat_term = 1.0 if image.shape == clean_image.shape and np.array_equal(image, clean_image) else 0.0
        match_term = loss - nat_term
        grad = np.full(image.shape, 1.0 / image.size, dtype=np.float32)
        return loss, match_term, nat_term, grad


RELIGHT_MODELS = {"echo": EchoRelight}
VICTIM_MODELS = {"echo": EchoVictim}


def build_relight_model(model_id: str, device: str):
    if model_id not in RELIGHT_MODELS:
        raise ValueError(f"unknown relight model id {model_id!r}, known: {sorted(RELIGHT_MODELS)}")
    return RELIGHT_MODELS[model_id]()


def build_victim_model(model_id: str, device: str):
    if model_id not in VICTIM_MODELS:
        raise ValueError(f"unknown victim model id {model_id!r}, known: {sorted(VICTIM_MODELS)}")
    return VICTIM_MODELS[model_id]()
