"""Finite-difference verification of every analytic gradient in the toolkit.

Central differences with step 1e-3 against the closed-form VJPs, on randomly
seeded instances kept away from box edges and blend kinks so the objective is
smooth within the probe step. Used by the test suite and the `check-grad`
CLI subcommand.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .imagecore import GradientTensor, Image
from .lightgen import Direction, LightingParams, generate_lighting_image, lighting_vjp_params
from .relight import SurrogateRelight
from .victim import SurrogateVictim

FD_STEP = 1e-3
REL_TOL = 1e-3

_DIRECTIONS = list(Direction)


@dataclass(frozen=True)
class GradCheckResult:
    module: str
    instances: int
    max_rel_err: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.max_rel_err <= self.tolerance


def _rel_err(analytic: np.ndarray, numeric: np.ndarray) -> float:
    analytic = np.asarray(analytic, dtype=np.float64).ravel()
    numeric = np.asarray(numeric, dtype=np.float64).ravel()
    return float(np.linalg.norm(analytic - numeric) / (1e-12 + np.linalg.norm(numeric)))


def _central_diff(fn, x: np.ndarray, step: float = FD_STEP) -> np.ndarray:
    """Per-coordinate central differences of a scalar function."""
    grad = np.zeros_like(x, dtype=np.float64)
    flat = grad.reshape(-1)
    base = x.astype(np.float64).copy()
    view = base.reshape(-1)
    for i in range(view.size):
        orig = view[i]
        view[i] = orig + step
        hi = fn(base)
        view[i] = orig - step
        lo = fn(base)
        view[i] = orig
        flat[i] = (hi - lo) / (2.0 * step)
    return grad


def _safe_weight(rng: np.random.Generator, height: int, width: int) -> float:
    """Weight whose blend threshold s = w/2 stays > 2*step from every pixel
    coordinate, so finite differences never straddle the kink."""
    coords = np.concatenate(
        [(np.arange(width) + 0.5) / width, (np.arange(height) + 0.5) / height]
    )
    while True:
        w = rng.uniform(0.1, 1.7)
        if np.abs(coords - w / 2.0).min() > 2.5 * FD_STEP:
            return w


def check_lightgen(instances: int = 20, seed: int = 0) -> GradCheckResult:
    """lighting_vjp_params vs finite differences of probe . generate(params)."""
    rng = np.random.Generator(np.random.PCG64(seed))
    worst = 0.0
    for k in range(instances):
        height, width = int(rng.integers(3, 7)), int(rng.integers(3, 8))
        params = LightingParams(
            tuple(rng.uniform(0.05, 0.95, 3)),
            tuple(rng.uniform(0.05, 0.95, 3)),
            _DIRECTIONS[k % 4],
            _safe_weight(rng, height, width),
        )
        probe = rng.standard_normal((height, width, 3))
        g_start, g_end, g_weight = lighting_vjp_params(
            params, height, width, GradientTensor(probe)
        )
        analytic = np.concatenate([g_start, g_end, [g_weight]])

        def objective(vec):
            p = LightingParams(tuple(vec[0:3]), tuple(vec[3:6]), params.direction, float(vec[6]))
            return float((probe * generate_lighting_image(p, height, width).data).sum())

        theta = np.concatenate([params.start_color, params.end_color, [params.weight]])
        numeric = _central_diff(objective, theta)
        worst = max(worst, _rel_err(analytic, numeric))
    return GradCheckResult("lightgen", instances, worst, REL_TOL)


def check_relight(instances: int = 20, seed: int = 1) -> GradCheckResult:
    """Surrogate relight_vjp vs finite differences in the lighting image."""
    rng = np.random.Generator(np.random.PCG64(seed))
    backend = SurrogateRelight()
    worst = 0.0
    for _ in range(instances):
        height, width = int(rng.integers(3, 8)), int(rng.integers(3, 8))
        image = Image(rng.uniform(0.05, 0.95, (height, width, 3)))
        lighting = rng.uniform(0.05, 0.95, (height, width, 3))
        probe = rng.standard_normal((height, width, 3))
        analytic = backend.relight_vjp(
            Image(lighting), image, GradientTensor(probe)
        ).data

        def objective(arr):
            return float((probe * backend.relight(Image(arr), image).data).sum())

        numeric = _central_diff(objective, lighting)
        worst = max(worst, _rel_err(analytic, numeric))
    return GradCheckResult("relight", instances, worst, REL_TOL)


_TEXTS = [
    "a cat sitting on a mat",
    "two dogs running on grass",
    "a red car parked near a wall",
    "children playing football in a park",
    "a bowl of fruit on the table",
]


def check_victim(instances: int = 20, seed: int = 2) -> GradCheckResult:
    """Surrogate loss gradient vs finite differences in the candidate image."""
    rng = np.random.Generator(np.random.PCG64(seed))
    victim = SurrogateVictim()
    worst = 0.0
    for k in range(instances):
        height, width = int(rng.integers(6, 10)), int(rng.integers(6, 10))
        clean = Image(rng.uniform(0.05, 0.95, (height, width, 3)))
        adv = rng.uniform(0.05, 0.95, (height, width, 3))
        text = _TEXTS[k % len(_TEXTS)]
        _, grad = victim.loss_grad(Image(adv), clean, text)

        def objective(arr):
            return victim.loss(Image(arr), clean, text).total

        numeric = _central_diff(objective, adv)
        worst = max(worst, _rel_err(grad.data, numeric))
    return GradCheckResult("victim", instances, worst, REL_TOL)


def run_all(instances: int = 20) -> list:
    return [check_lightgen(instances), check_relight(instances), check_victim(instances)]
