"""Adversarial relighting toolkit.

Generates parametric lighting images, composites them onto photographs through
a relighting backend, and runs sign-gradient attacks that push a victim
model's loss up while a naturalness term keeps the result plausible. Includes
caption-quality and no-reference image-quality metrics for evaluation, and a
batch harness with a CLI.
"""

from .attack import (
    AttackConfig,
    AttackResult,
    adapt_classifier_attack,
    color_filter_lite,
    gamma_lite,
    optimize_lighting_image,
    optimize_lighting_params,
    run_pipeline,
)
from .errors import (
    BackendUnavailableError,
    DegenerateDistributionError,
    DegenerateEmbeddingError,
    InsufficientDataError,
    ManifestError,
    PngDecodeError,
    RecommendationParseError,
    RemoteBackendError,
    UnsupportedCapabilityError,
    UnsupportedFormatError,
)
from .imagecore import (
    GradientTensor,
    Image,
    flip_horizontal,
    png_decode,
    png_encode,
    resize_adjoint,
    resize_bilinear,
)
from .lightgen import (
    Direction,
    LightingParams,
    generate_lighting_image,
    lighting_vjp_params,
    parse_hex_color,
)
from .recommender import Recommendation, Recommender, RecommenderConfig, heuristic_fallback
from .relight import RelightBackend, RemoteRelight, SurrogateRelight, SurrogateRelightConfig
from .victim import LossBreakdown, RemoteVictim, SurrogateEmbedder, SurrogateVictim, VictimBackend

__version__ = "0.1.0"

__all__ = [
    "AttackConfig",
    "AttackResult",
    "BackendUnavailableError",
    "DegenerateDistributionError",
    "DegenerateEmbeddingError",
    "Direction",
    "GradientTensor",
    "Image",
    "InsufficientDataError",
    "LightingParams",
    "LossBreakdown",
    "ManifestError",
    "PngDecodeError",
    "Recommendation",
    "Recommender",
    "RecommenderConfig",
    "RecommendationParseError",
    "RelightBackend",
    "RemoteBackendError",
    "RemoteRelight",
    "RemoteVictim",
    "SurrogateEmbedder",
    "SurrogateRelight",
    "SurrogateRelightConfig",
    "SurrogateVictim",
    "UnsupportedCapabilityError",
    "UnsupportedFormatError",
    "VictimBackend",
    "adapt_classifier_attack",
    "color_filter_lite",
    "flip_horizontal",
    "gamma_lite",
    "generate_lighting_image",
    "heuristic_fallback",
    "lighting_vjp_params",
    "optimize_lighting_image",
    "optimize_lighting_params",
    "parse_hex_color",
    "png_decode",
    "png_encode",
    "resize_adjoint",
    "resize_bilinear",
    "run_pipeline",
]
