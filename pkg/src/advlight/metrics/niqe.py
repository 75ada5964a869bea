"""No-reference image quality: NIQE built from scratch.

Follows Mittal, Soundararajan, Bovik, "Making a 'Completely Blind' Image
Quality Analyzer" (IEEE SPL 2013): MSCN coefficients from a 7x7 Gaussian
window (sigma = 7/6), asymmetric generalized Gaussian (AGGD) moment-matching
fits of the coefficients and four orientation pairwise products, at two
scales, 18 features per scale. A quality model is the Gaussian (mean,
covariance) of patch features over a pristine corpus; the score is the
Mahalanobis-type distance between the model and the test image's own feature
Gaussian under the averaged covariance.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import correlate1d
from scipy.special import gamma as gamma_fn

from ..errors import DegenerateDistributionError, InsufficientDataError
from ..imagecore import Image, resize_bilinear_array

PATCH_SIZE = 96
SHARPNESS_FRACTION = 0.75
N_SCALES = 2
N_FEATURES = 36

_LUMA = np.array([0.299, 0.587, 0.114])

# Shape-parameter grid for the AGGD lookup and the precomputed ratio
# r(g) = Gamma(2/g)^2 / (Gamma(1/g) Gamma(3/g)) it inverts.
_GAMMA_GRID = np.arange(0.2, 10.0, 0.001)
_RATIO_TABLE = gamma_fn(2.0 / _GAMMA_GRID) ** 2 / (
    gamma_fn(1.0 / _GAMMA_GRID) * gamma_fn(3.0 / _GAMMA_GRID)
)


@dataclass(frozen=True)
class AggdParams:
    """Asymmetric generalized Gaussian parameters from moment matching."""

    shape: float
    left_scale: float
    right_scale: float
    mean_offset: float


def aggd_fit(samples) -> AggdParams:
    """Moment-matching AGGD fit.

    The empirical ratio (mean |x|)^2 / mean x^2, corrected for asymmetry, is
    inverted through the tabulated generalized-Gaussian ratio function to get
    the shape; one-sided second moments give the scales. Needs at least 16
    samples with mass on both sides of zero.
    """
    x = np.asarray(samples, dtype=np.float64).ravel()
    if x.size < 16:
        raise ValueError(f"need >= 16 samples, got {x.size}")
    if not np.any(x):
        raise DegenerateDistributionError("all samples are zero")
    left = x[x < 0.0]
    right = x[x > 0.0]
    if left.size == 0 or right.size == 0:
        raise DegenerateDistributionError("samples are entirely one-sided")
    left_std = float(np.sqrt(np.mean(left * left)))
    right_std = float(np.sqrt(np.mean(right * right)))
    gamma_hat = left_std / right_std
    r_hat = float(np.mean(np.abs(x))) ** 2 / float(np.mean(x * x))
    r_norm = r_hat * (gamma_hat**3 + 1.0) * (gamma_hat + 1.0) / (gamma_hat**2 + 1.0) ** 2
    alpha = float(_GAMMA_GRID[np.argmin((_RATIO_TABLE - r_norm) ** 2)])
    conv = np.sqrt(gamma_fn(1.0 / alpha) / gamma_fn(3.0 / alpha))
    beta_l = left_std * conv
    beta_r = right_std * conv
    eta = (beta_r - beta_l) * gamma_fn(2.0 / alpha) / gamma_fn(1.0 / alpha)
    return AggdParams(shape=alpha, left_scale=float(beta_l), right_scale=float(beta_r), mean_offset=float(eta))


def _gaussian_taps(size: int = 7, sigma: float = 7.0 / 6.0) -> np.ndarray:
    half = (size - 1) / 2.0
    taps = np.exp(-((np.arange(size) - half) ** 2) / (2.0 * sigma * sigma))
    return taps / taps.sum()


_WINDOW = _gaussian_taps()


def _local_stats(gray: np.ndarray):
    """Gaussian-weighted local mean and standard deviation fields."""

    def blur(f):
        return correlate1d(correlate1d(f, _WINDOW, axis=0, mode="nearest"), _WINDOW, axis=1, mode="nearest")

    mu = blur(gray)
    second = blur(gray * gray)
    sigma = np.sqrt(np.abs(second - mu * mu))
    return mu, sigma


def _mscn(gray: np.ndarray):
    mu, sigma = _local_stats(gray)
    return (gray - mu) / (sigma + 1.0), sigma


# Pairwise-product orientations: horizontal, vertical, both diagonals.
_SHIFTS = ((0, 1), (1, 0), (1, 1), (1, -1))


def _subband_features(mscn: np.ndarray) -> list:
    """Standard 18-feature layout for one scale of one patch."""
    base = aggd_fit(mscn)
    feats = [base.shape, (base.left_scale + base.right_scale) / 2.0]
    for dy, dx in _SHIFTS:
        product = mscn * np.roll(mscn, shift=(dy, dx), axis=(0, 1))
        p = aggd_fit(product)
        feats.extend([p.shape, p.mean_offset, p.left_scale, p.right_scale])
    return feats


def _to_gray(img: Image) -> np.ndarray:
    return img.data @ _LUMA


def niqe_features(img: Image, sharpness_fraction: float | None = None) -> np.ndarray:
    """Per-patch 36-dim NIQE feature vectors, shape (num_patches, 36).

    ``sharpness_fraction`` None keeps every patch (score mode); a fraction f
    keeps patches whose mean local deviation is >= f times the sharpest
    patch's (fit mode). The image must be at least twice the patch size
    (192 px) in both dimensions so the half scale still tiles cleanly.
    """
    height, width = img.height, img.width
    if height < 2 * PATCH_SIZE or width < 2 * PATCH_SIZE:
        raise ValueError(
            f"image must be at least {2 * PATCH_SIZE}x{2 * PATCH_SIZE}, got {height}x{width}"
        )
    gray = _to_gray(img)
    mscn_full, sigma_full = _mscn(gray)
    half = resize_bilinear_array(gray[:, :, None], height // 2, width // 2)[:, :, 0]
    mscn_half, _ = _mscn(half)

    blocks_y = height // PATCH_SIZE
    blocks_x = width // PATCH_SIZE
    sharpness = np.empty((blocks_y, blocks_x))
    for by in range(blocks_y):
        for bx in range(blocks_x):
            sharpness[by, bx] = sigma_full[
                by * PATCH_SIZE : (by + 1) * PATCH_SIZE, bx * PATCH_SIZE : (bx + 1) * PATCH_SIZE
            ].mean()
    if sharpness_fraction is None:
        keep = np.ones((blocks_y, blocks_x), dtype=bool)
    else:
        keep = sharpness >= sharpness_fraction * sharpness.max()

    half_patch = PATCH_SIZE // 2
    rows = []
    for by in range(blocks_y):
        for bx in range(blocks_x):
            if not keep[by, bx]:
                continue
            patch_full = mscn_full[
                by * PATCH_SIZE : (by + 1) * PATCH_SIZE, bx * PATCH_SIZE : (bx + 1) * PATCH_SIZE
            ]
            patch_half = mscn_half[
                by * half_patch : (by + 1) * half_patch, bx * half_patch : (bx + 1) * half_patch
            ]
            rows.append(_subband_features(patch_full) + _subband_features(patch_half))
    return np.array(rows, dtype=np.float64).reshape(len(rows), N_FEATURES)


@dataclass(frozen=True)
class NiqeModel:
    """Pristine-corpus feature Gaussian plus the fit settings that made it."""

    mean: np.ndarray
    cov: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=np.float64)
        cov = np.asarray(self.cov, dtype=np.float64)
        if mean.shape != (N_FEATURES,) or cov.shape != (N_FEATURES, N_FEATURES):
            raise ValueError(f"expected mean ({N_FEATURES},) and cov {N_FEATURES}x{N_FEATURES}")
        if float(np.abs(cov - cov.T).max()) > 1e-9:
            raise ValueError("covariance is not symmetric within 1e-9")
        if float(np.linalg.eigvalsh((cov + cov.T) / 2.0).min()) < -1e-9:
            raise ValueError("covariance has eigenvalues below -1e-9")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)


def niqe_fit(pristine_images, sharpness_fraction: float = SHARPNESS_FRACTION) -> NiqeModel:
    """Fit a quality model from pristine images.

    Images whose MSCN statistics degenerate (constant regions defeating the
    AGGD fit) are skipped; at least 10 images must contribute patches.
    """
    all_rows = []
    contributors = 0
    for img in pristine_images:
        try:
            rows = niqe_features(img, sharpness_fraction=sharpness_fraction)
        except DegenerateDistributionError:
            continue
        if len(rows):
            all_rows.append(rows)
            contributors += 1
    if contributors < 10:
        raise InsufficientDataError(
            f"need >= 10 images passing the sharpness filter, got {contributors}"
        )
    feats = np.vstack(all_rows)
    mean = feats.mean(axis=0)
    cov = np.cov(feats, rowvar=False)
    meta = {
        "corpus_size": contributors,
        "patch_count": int(feats.shape[0]),
        "patch_size": PATCH_SIZE,
        "sharpness_fraction": sharpness_fraction,
        "scales": N_SCALES,
    }
    return NiqeModel(mean=mean, cov=cov, meta=meta)


def _gaussian_distance(mean1, cov1, mean2, cov2) -> float:
    pooled = (np.asarray(cov1) + np.asarray(cov2)) / 2.0
    sym = (pooled + pooled.T) / 2.0
    vals, vecs = np.linalg.eigh(sym)
    inv_vals = np.where(vals > 1e-10, 1.0 / np.where(vals > 1e-10, vals, 1.0), 0.0)
    diff = np.asarray(mean1) - np.asarray(mean2)
    proj = vecs.T @ diff
    return float(np.sqrt(max(float((inv_vals * proj * proj).sum()), 0.0)))


def niqe_score(model: NiqeModel, img: Image) -> float:
    """Distance of the image's feature Gaussian from the pristine model; >= 0,
    lower is better."""
    feats = niqe_features(img, sharpness_fraction=None)
    if feats.shape[0] < 2:
        raise InsufficientDataError(
            f"need >= 2 patches to estimate a covariance, got {feats.shape[0]}"
        )
    mean2 = feats.mean(axis=0)
    cov2 = np.cov(feats, rowvar=False)
    return _gaussian_distance(model.mean, model.cov, mean2, cov2)


def save_niqe_model(model: NiqeModel, path) -> None:
    """Write a model as JSON; floats survive the round trip bitwise."""
    payload = {
        "mean": model.mean.tolist(),
        "cov": model.cov.reshape(-1).tolist(),
        "meta": model.meta,
    }
    with open(path, "w") as fh:
        json.dump(payload, fh)


def load_niqe_model(path) -> NiqeModel:
    with open(path) as fh:
        payload = json.load(fh)
    mean = np.array(payload["mean"], dtype=np.float64)
    cov = np.array(payload["cov"], dtype=np.float64).reshape(N_FEATURES, N_FEATURES)
    return NiqeModel(mean=mean, cov=cov, meta=dict(payload.get("meta", {})))
