"""Evaluation metrics: caption quality and no-reference image quality."""

from .captions import (
    BLEU_EPSILON,
    ROUGE_BETA,
    TokenSeq,
    apa,
    bleu,
    cider,
    cosine_similarity,
    rouge_l,
    tokenize,
)
from .niqe import (
    AggdParams,
    NiqeModel,
    aggd_fit,
    load_niqe_model,
    niqe_features,
    niqe_fit,
    niqe_score,
    save_niqe_model,
)

__all__ = [
    "AggdParams",
    "BLEU_EPSILON",
    "NiqeModel",
    "ROUGE_BETA",
    "TokenSeq",
    "aggd_fit",
    "apa",
    "bleu",
    "cider",
    "cosine_similarity",
    "load_niqe_model",
    "niqe_features",
    "niqe_fit",
    "niqe_score",
    "rouge_l",
    "save_niqe_model",
    "tokenize",
]
