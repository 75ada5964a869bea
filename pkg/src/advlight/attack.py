"""Two-step collaborative sign-gradient attack on relighting.

Step one climbs in the 7-dim lighting parameter space (start color, end
color, weight): pull the loss gradient back through the relighter and the
lighting generator, take a sign step, and project onto the feasible box.
Step two refines the rendered lighting image directly: the image is resized
to several scales, the loss gradient is pulled back through each resize pair,
the per-scale gradients are summed, and a signed pixel step is taken. Both
steps keep the best iterate seen, measured by the loss value.

Also provides a budgeted black-box adapter that reuses the same loss as a
termination criterion over arbitrary candidate streams (gamma and color-
filter perturbations ship as ready-made streams).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterator, Sequence

import numpy as np

from .errors import BackendUnavailableError, RemoteBackendError
from .imagecore import GradientTensor, Image, resize_adjoint_array, resize_bilinear_array
from .lightgen import LightingParams, generate_lighting_image, lighting_vjp_params
from .recommender import Recommendation, RecommendationSource, heuristic_fallback
from .relight import RelightBackend
from .victim import LossBreakdown, VictimBackend


def _default_scales(count: int) -> tuple:
    if count == 1:
        return (1.0,)
    return tuple(np.linspace(0.5, 1.5, count))


@dataclass(frozen=True)
class AttackConfig:
    """Knobs for both optimization steps.

    ``scale_factors`` defaults to ``resize_count`` values evenly spaced over
    [0.5, 1.5] (just (1.0,) when resize_count is 1, which reduces step two to
    plain single-scale sign ascent). Steps may be zero, giving a null update;
    movement requires a positive step.
    """

    param_step: float = 0.02
    image_step: float = 1.0 / 255.0
    param_iters: int = 20
    image_iters: int = 40
    resize_count: int = 5
    scale_factors: tuple | None = None
    keep_best: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.param_step < 0.0 or self.image_step < 0.0:
            raise ValueError("step sizes must be >= 0")
        if self.param_iters < 0 or self.image_iters < 0:
            raise ValueError("iteration counts must be >= 0")
        if not (1 <= self.resize_count <= 16):
            raise ValueError("resize_count must be in [1, 16]")
        if self.scale_factors is not None:
            scales = tuple(float(s) for s in self.scale_factors)
            if len(scales) != self.resize_count:
                raise ValueError(
                    f"scale_factors has {len(scales)} entries, resize_count is {self.resize_count}"
                )
            if min(scales) <= 0.0:
                raise ValueError("scale factors must be positive")
            object.__setattr__(self, "scale_factors", scales)

    @property
    def effective_scales(self) -> tuple:
        return self.scale_factors if self.scale_factors is not None else _default_scales(self.resize_count)


@dataclass
class AttackResult:
    """Everything the pipeline produced for one image."""

    final_params: LightingParams
    final_lighting: Image
    final_image: Image
    loss_trace: list
    best_loss: float
    iterations_used: int
    relight_backend: str
    victim_backend: str
    recommendation: Recommendation | None = None


_BACKEND_ERRORS = (BackendUnavailableError, RemoteBackendError)


def _tagged(exc: Exception, stage: str, iteration: int) -> Exception:
    """Prefix a backend failure with where in the optimization it happened."""
    exc.args = (f"{stage} iteration {iteration}: {exc.args[0] if exc.args else exc}",)
    return exc


def _check_finite(total: float, stage: str, iteration: int):
    if not np.isfinite(total):
        raise ValueError(f"non-finite loss {total!r} at {stage} iteration {iteration}")


def optimize_lighting_params(
    config: AttackConfig,
    relighter: RelightBackend,
    victim: VictimBackend,
    init: LightingParams,
    image: Image,
    text: str,
):
    """Sign-gradient ascent over lighting parameters.

    Returns (params, trace): the best (or last, with keep_best off) iterate
    and one LossBreakdown per evaluated iterate, the final one included, so
    the trace has param_iters + 1 entries.
    """
    height, width = image.height, image.width
    params = init
    trace: list = []
    best_total = -np.inf
    best_params = params
    for i in range(config.param_iters):
        lighting = generate_lighting_image(params, height, width)
        try:
            relit = relighter.relight(lighting, image)
            breakdown, grad_relit = victim.loss_grad(relit, image, text)
        except _BACKEND_ERRORS as exc:
            raise _tagged(exc, "parameter", i)
        _check_finite(breakdown.total, "parameter", i)
        trace.append(breakdown)
        if breakdown.total > best_total:
            best_total, best_params = breakdown.total, params
        try:
            grad_lighting = relighter.relight_vjp(lighting, image, grad_relit)
        except _BACKEND_ERRORS as exc:
            raise _tagged(exc, "parameter", i)
        g_start, g_end, g_weight = lighting_vjp_params(params, height, width, grad_lighting)
        step = config.param_step
        start = np.array(params.start_color) + step * np.sign(g_start)
        end = np.array(params.end_color) + step * np.sign(g_end)
        weight = params.weight + step * float(np.sign(g_weight))
        params = LightingParams.projected(start, end, params.direction, weight)
    lighting = generate_lighting_image(params, height, width)
    try:
        breakdown = victim.loss(relighter.relight(lighting, image), image, text)
    except _BACKEND_ERRORS as exc:
        raise _tagged(exc, "parameter", config.param_iters)
    _check_finite(breakdown.total, "parameter", config.param_iters)
    trace.append(breakdown)
    if breakdown.total > best_total:
        best_total, best_params = breakdown.total, params
    return (best_params if config.keep_best else params), trace


def _multiscale_gradient(
    config: AttackConfig,
    relighter: RelightBackend,
    victim: VictimBackend,
    lighting: np.ndarray,
    image: Image,
    text: str,
    iteration: int,
) -> np.ndarray:
    """Sum of loss gradients w.r.t. the lighting image across resize scales.

    Each scale resizes the lighting to (round(s*H), round(s*W)) and back to
    native resolution before relighting; the gradient is pulled back through
    both resizes with the exact adjoint. Scale 1.0 is an identity round trip.
    """
    height, width = image.height, image.width
    total = np.zeros_like(lighting)
    for scale in config.effective_scales:
        sh = max(1, int(round(height * scale)))
        sw = max(1, int(round(width * scale)))
        scaled = resize_bilinear_array(lighting, sh, sw)
        back = resize_bilinear_array(scaled, height, width)
        lighting_img = Image(np.clip(back, 0.0, 1.0))
        try:
            relit = relighter.relight(lighting_img, image)
            breakdown, grad_relit = victim.loss_grad(relit, image, text)
            grad_back = relighter.relight_vjp(lighting_img, image, grad_relit)
        except _BACKEND_ERRORS as exc:
            raise _tagged(exc, "image", iteration)
        _check_finite(breakdown.total, "image", iteration)
        grad_scaled = resize_adjoint_array(grad_back.data, sh, sw)
        total += resize_adjoint_array(grad_scaled, height, width)
    return total


def optimize_lighting_image(
    config: AttackConfig,
    relighter: RelightBackend,
    victim: VictimBackend,
    lighting: Image,
    image: Image,
    text: str,
):
    """Multi-scale sign-gradient ascent directly on the lighting image.

    Returns (lighting, trace) with the same conventions as
    optimize_lighting_params: trace holds image_iters + 1 native-resolution
    loss evaluations, and the best iterate is returned when keep_best is set.
    """
    if lighting.shape != image.shape:
        raise ValueError(f"lighting shape {lighting.shape} != image shape {image.shape}")
    current = lighting.data.copy()
    trace: list = []
    best_total = -np.inf
    best = current.copy()
    for i in range(config.image_iters):
        current_img = Image(current)
        try:
            breakdown = victim.loss(relighter.relight(current_img, image), image, text)
        except _BACKEND_ERRORS as exc:
            raise _tagged(exc, "image", i)
        _check_finite(breakdown.total, "image", i)
        trace.append(breakdown)
        if breakdown.total > best_total:
            best_total, best = breakdown.total, current.copy()
        grad = _multiscale_gradient(config, relighter, victim, current, image, text, i)
        current = np.clip(current + config.image_step * np.sign(grad), 0.0, 1.0)
    current_img = Image(current)
    try:
        breakdown = victim.loss(relighter.relight(current_img, image), image, text)
    except _BACKEND_ERRORS as exc:
        raise _tagged(exc, "image", config.image_iters)
    _check_finite(breakdown.total, "image", config.image_iters)
    trace.append(breakdown)
    if breakdown.total > best_total:
        best_total, best = breakdown.total, current.copy()
    return Image(best if config.keep_best else current), trace


def run_pipeline(
    config: AttackConfig,
    relighter: RelightBackend,
    victim: VictimBackend,
    recommender,
    image: Image,
    text: str,
) -> AttackResult:
    """Full attack: recommend initial params, climb in parameter space, then
    refine the rendered lighting image, and relight with the winner.

    ``recommender`` may be None, in which case the heuristic initializer runs.
    """
    if recommender is None:
        rec = Recommendation(
            params=heuristic_fallback(image), source=RecommendationSource.HEURISTIC, raw_response=None
        )
    else:
        rec = recommender.recommend(image, text)
    best_params, param_trace = optimize_lighting_params(
        config, relighter, victim, rec.params, image, text
    )
    lighting0 = generate_lighting_image(best_params, image.height, image.width)
    best_lighting, image_trace = optimize_lighting_image(
        config, relighter, victim, lighting0, image, text
    )
    final_image = relighter.relight(best_lighting, image)
    trace = param_trace + image_trace
    return AttackResult(
        final_params=best_params,
        final_lighting=best_lighting,
        final_image=final_image,
        loss_trace=trace,
        best_loss=max(b.total for b in trace),
        iterations_used=(len(param_trace) - 1) + (len(image_trace) - 1),
        relight_backend=relighter.name,
        victim_backend=victim.name,
        recommendation=rec,
    )


# ---------------------------------------------------------------------------
# black-box transfer: the loss as a termination criterion over candidates
# ---------------------------------------------------------------------------

CandidateGenerator = Callable[[Image], Iterator[Image]]


def adapt_classifier_attack(
    generator: CandidateGenerator,
    victim: VictimBackend,
    image: Image,
    text: str,
    budget: int,
):
    """Run a candidate stream under a loss-maximization termination criterion.

    Evaluates at most ``budget`` candidates and returns (best_image,
    best_loss), where the clean image itself is the starting incumbent. The
    result is monotone in budget for a fixed stream, and a zero budget
    returns the clean image and its loss.
    """
    if budget < 0:
        raise ValueError("budget must be >= 0")
    best_img = image
    best_total = victim.loss(image, image, text).total
    stream = generator(image)
    for _ in range(budget):
        candidate = next(stream, None)
        if candidate is None:
            break
        total = victim.loss(candidate, image, text).total
        if total > best_total:
            best_total, best_img = total, candidate
    return best_img, best_total


def apply_gamma(image: Image, gamma: Sequence[float]) -> Image:
    """Per-channel gamma curve p -> p**gamma_c; gamma must be positive."""
    gamma = np.asarray(gamma, dtype=np.float64)
    if gamma.shape != (3,) or np.any(gamma <= 0.0):
        raise ValueError("gamma must be 3 positive exponents")
    return Image(np.power(image.data, gamma))


def apply_color_filter(image: Image, matrix: np.ndarray) -> Image:
    """Per-pixel 3x3 color mix, clipped back to [0, 1]."""
    matrix = np.asarray(matrix, dtype=np.float64)
    if matrix.shape != (3, 3):
        raise ValueError("color filter must be a 3x3 matrix")
    return Image.clamped(image.data @ matrix.T)


def gamma_lite(seed: int = 0) -> CandidateGenerator:
    """Endless stream of random per-channel gamma perturbations."""

    def generate(image: Image) -> Iterator[Image]:
        rng = np.random.Generator(np.random.PCG64(seed))
        while True:
            yield apply_gamma(image, rng.uniform(0.5, 2.0, size=3))

    return generate


def color_filter_lite(seed: int = 0) -> CandidateGenerator:
    """Endless stream of near-identity random color-mix perturbations."""

    def generate(image: Image) -> Iterator[Image]:
        rng = np.random.Generator(np.random.PCG64(seed))
        while True:
            yield apply_color_filter(image, np.eye(3) + rng.uniform(-0.1, 0.1, size=(3, 3)))

    return generate
