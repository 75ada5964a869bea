"""Victim backends: the models under attack and the loss being maximized.

The loss is a sum of two terms computed on a relit candidate R against the
clean image I and a target text T:

    match_term = 1 - cos(embed_image(R), embed_text(T))
    nat_term   = nat_weight * cos(embed_nat(R), embed_nat(I))

Driving match_term up degrades the victim's image-text alignment; nat_term
rewards candidates whose embedding stays close to the original scene, which
keeps the attack inside plausible lighting changes rather than noise.

The surrogate embedders are seeded random projections of a fixed-size resize
of the image (and of hashed character trigrams for text). They are not meant
to be accurate models, only cheap, deterministic, fully differentiable
stand-ins with the same interface and gradient structure as a real encoder.
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateEmbeddingError, RemoteBackendError
from .imagecore import GradientTensor, Image, resize_adjoint_array, resize_bilinear_array
from .wire import HttpClient, decode_tensor, encode_tensor

DEFAULT_MATCH_IMAGE_SEED = 2101
DEFAULT_MATCH_TEXT_SEED = 2102
DEFAULT_NAT_IMAGE_SEED = 3401

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_U64 = 0xFFFFFFFFFFFFFFFF


def fnv1a64(data: bytes) -> int:
    """64-bit FNV-1a hash."""
    h = _FNV_OFFSET
    for byte in data:
        h = ((h ^ byte) * _FNV_PRIME) & _U64
    return h


@dataclass(frozen=True)
class LossBreakdown:
    """Loss value with its two additive components; total == match + nat."""

    total: float
    match_term: float
    nat_term: float


class SurrogateEmbedder:
    """Random-projection embedder over a resized image or hashed text.

    Both media embed into the same unit sphere of dimension ``embed_dim``:
    images are resized to patch_size x patch_size, flattened, and projected by
    a seeded Gaussian matrix; text is lowercased, whitespace-collapsed, split
    into character trigrams, hashed (FNV-1a 64) into a count vector of the
    same input dimension, and projected by a second seeded matrix. Outputs are
    L2-normalized, so embeddings are invariant to positive scaling of the
    input and a zero pre-normalization vector is an error.
    """

    def __init__(
        self,
        patch_size: int = 16,
        embed_dim: int = 64,
        image_seed: int = DEFAULT_MATCH_IMAGE_SEED,
        text_seed: int = DEFAULT_MATCH_TEXT_SEED,
    ):
        if patch_size < 1 or embed_dim < 1:
            raise ValueError("patch_size and embed_dim must be >= 1")
        self.patch_size = patch_size
        self.embed_dim = embed_dim
        dim_in = 3 * patch_size * patch_size
        self._image_proj = np.random.Generator(np.random.PCG64(image_seed)).standard_normal(
            (embed_dim, dim_in)
        )
        self._text_proj = np.random.Generator(np.random.PCG64(text_seed)).standard_normal(
            (embed_dim, dim_in)
        )

    def _image_vector(self, arr: np.ndarray) -> np.ndarray:
        p = self.patch_size
        return resize_bilinear_array(arr, p, p).reshape(-1)

    def _normalize(self, z: np.ndarray) -> np.ndarray:
        n = float(np.linalg.norm(z))
        if n == 0.0:
            raise DegenerateEmbeddingError("embedding is exactly zero before normalization")
        return z / n

    def embed_image(self, img: Image) -> np.ndarray:
        """Unit-norm embedding of an image."""
        return self._normalize(self._image_proj @ self._image_vector(img.data))

    def embed_text(self, text: str) -> np.ndarray:
        """Unit-norm embedding of a text string."""
        norm = " ".join(text.lower().split())
        if not norm:
            raise ValueError("text is empty after normalization")
        if len(norm) < 3:
            grams = [norm]  # too short for trigrams; use the whole string
        else:
            grams = [norm[i : i + 3] for i in range(len(norm) - 2)]
        dim_in = self._text_proj.shape[1]
        counts = np.zeros(dim_in, dtype=np.float64)
        for gram in grams:
            counts[fnv1a64(gram.encode("utf-8")) % dim_in] += 1.0
        return self._normalize(self._text_proj @ counts)

    def image_cosine(self, arr: np.ndarray, target: np.ndarray, want_grad: bool):
        """cos(embed_image(arr), target), optionally with its image gradient.

        The loss and gradient paths share this forward computation so values
        agree bitwise between loss() and loss_grad().
        """
        z = self._image_proj @ self._image_vector(arr)
        n = float(np.linalg.norm(z))
        if n == 0.0:
            raise DegenerateEmbeddingError("embedding is exactly zero before normalization")
        e = z / n
        if np.array_equal(e, target):
            # identical embeddings: cosine is 1 and the normalized-chain
            # gradient (target - c*e)/n vanishes; return the exact values
            # rather than their float residue
            c, dz = 1.0, np.zeros_like(z)
        else:
            c = float(e @ target)
            dz = None
        if not want_grad:
            return c, None
        if dz is None:
            # d cos / d z for e = z/|z|: (target - c * e) / |z|
            dz = (target - c * e) / n
        dr = self._image_proj.T @ dz
        p = self.patch_size
        grad = resize_adjoint_array(dr.reshape(p, p, 3), arr.shape[0], arr.shape[1])
        return c, grad


class VictimBackend(ABC):
    """Interface every victim backend implements."""

    name: str = "victim"
    has_grad: bool = False

    @abstractmethod
    def loss(self, adv: Image, clean: Image, text: str) -> LossBreakdown:
        """Evaluate the attack loss of candidate ``adv``."""

    @abstractmethod
    def loss_grad(self, adv: Image, clean: Image, text: str):
        """Evaluate the loss and its gradient w.r.t. ``adv``.

        Returns (LossBreakdown, GradientTensor).
        """


def _check_images(adv: Image, clean: Image):
    if adv.shape != clean.shape:
        raise ValueError(f"adv shape {adv.shape} != clean shape {clean.shape}")


class SurrogateVictim(VictimBackend):
    """Differentiable surrogate victim with separable match and naturalness terms."""

    has_grad = True

    def __init__(
        self,
        match_embedder: SurrogateEmbedder | None = None,
        nat_embedder: SurrogateEmbedder | None = None,
        nat_weight: float = 1.0,
    ):
        if nat_weight < 0.0:
            raise ValueError("nat_weight must be >= 0")
        self.match_embedder = match_embedder or SurrogateEmbedder(
            image_seed=DEFAULT_MATCH_IMAGE_SEED, text_seed=DEFAULT_MATCH_TEXT_SEED
        )
        self.nat_embedder = nat_embedder or SurrogateEmbedder(
            image_seed=DEFAULT_NAT_IMAGE_SEED, text_seed=DEFAULT_NAT_IMAGE_SEED + 1
        )
        self.nat_weight = float(nat_weight)
        self.name = f"surrogate-victim(nat_weight={self.nat_weight})"

    def _terms(self, adv: Image, clean: Image, text: str, want_grad: bool):
        _check_images(adv, clean)
        u_text = self.match_embedder.embed_text(text)
        c_match, g_match = self.match_embedder.image_cosine(adv.data, u_text, want_grad)
        v_nat = self.nat_embedder.embed_image(clean)
        c_nat, g_nat = self.nat_embedder.image_cosine(adv.data, v_nat, want_grad)
        match_term = 1.0 - c_match
        nat_term = self.nat_weight * c_nat
        breakdown = LossBreakdown(
            total=match_term + nat_term, match_term=match_term, nat_term=nat_term
        )
        if not want_grad:
            return breakdown, None
        grad = -g_match + self.nat_weight * g_nat
        return breakdown, GradientTensor(grad)

    def loss(self, adv: Image, clean: Image, text: str) -> LossBreakdown:
        breakdown, _ = self._terms(adv, clean, text, want_grad=False)
        return breakdown

    def loss_grad(self, adv: Image, clean: Image, text: str):
        breakdown, grad = self._terms(adv, clean, text, want_grad=True)
        return breakdown, grad


class RemoteVictim(VictimBackend):
    """Victim served over the JSON tensor protocol (single /loss_grad endpoint)."""

    has_grad = True

    def __init__(self, endpoint: str, timeout: float = 30.0, max_in_flight: int = 4):
        self._client = HttpClient(endpoint, timeout=timeout, max_in_flight=max_in_flight)
        self.name = f"remote-victim({endpoint})"

    def _call(self, adv: Image, clean: Image, text: str):
        _check_images(adv, clean)
        resp = self._client.post(
            "/loss_grad",
            {
                "image": encode_tensor(adv.data),
                "clean_image": encode_tensor(clean.data),
                "text": text,
            },
        )
        try:
            breakdown = LossBreakdown(
                total=float(resp["loss"]),
                match_term=float(resp["match_term"]),
                nat_term=float(resp["nat_term"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise RemoteBackendError("bad_response", f"malformed /loss_grad response: {exc}") from exc
        grad = GradientTensor(decode_tensor(resp.get("grad"), expect_shape=adv.shape))
        return breakdown, grad

    def loss(self, adv: Image, clean: Image, text: str) -> LossBreakdown:
        breakdown, _ = self._call(adv, clean, text)
        return breakdown

    def loss_grad(self, adv: Image, clean: Image, text: str):
        return self._call(adv, clean, text)

    def health(self) -> dict:
        return self._client.get("/health")
