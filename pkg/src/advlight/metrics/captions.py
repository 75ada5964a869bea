"""Caption-quality metrics: corpus BLEU-4, ROUGE-L, CIDEr, and answer accuracy.

All metrics are pure functions over pre-tokenized sequences; ``tokenize``
provides the shared convention (lowercase, punctuation stripped, whitespace
split). Conventions follow the original metric papers (Papineni et al. 2002;
Lin 2004; Vedantam et al. 2015) with the smoothing choices documented on each
function.
"""

from __future__ import annotations

import math
import string
from collections import Counter
from typing import Sequence

import numpy as np

_PUNCT_TABLE = str.maketrans({c: " " for c in string.punctuation})

TokenSeq = Sequence[str]

BLEU_EPSILON = 1e-9
ROUGE_BETA = 1.2
CIDER_WEIGHT = 10.0
_ARTICLES = {"a", "an", "the"}


def tokenize(text: str) -> list:
    """Lowercase, replace punctuation with spaces, split on whitespace."""
    return text.lower().translate(_PUNCT_TABLE).split()


def _ngram_counts(tokens: TokenSeq, order: int) -> Counter:
    return Counter(tuple(tokens[i : i + order]) for i in range(len(tokens) - order + 1))


def bleu(
    candidates: Sequence[TokenSeq],
    references: Sequence[Sequence[TokenSeq]],
    max_order: int = 4,
    epsilon: float = BLEU_EPSILON,
) -> float:
    """Corpus-level BLEU with epsilon-smoothed precisions.

    Clipped n-gram matches and totals are pooled over the corpus per order; a
    zero matched count is replaced by ``epsilon`` before the ratio. Orders
    where the corpus has no candidate n-grams at all (every candidate shorter
    than the order) are omitted from the geometric mean, so a perfect match
    scores 1.0 at any length. The brevity penalty uses, per candidate, the
    reference length closest to the candidate's (ties to the shorter
    reference).
    """
    if not candidates:
        raise ValueError("need at least one candidate")
    if len(candidates) != len(references):
        raise ValueError(f"{len(candidates)} candidates vs {len(references)} reference sets")
    matched = [0] * max_order
    totals = [0] * max_order
    cand_len = 0
    ref_len = 0
    for cand, refs in zip(candidates, references):
        if not refs:
            raise ValueError("every candidate needs at least one reference")
        cand_len += len(cand)
        ref_len += len(min(refs, key=lambda r: (abs(len(r) - len(cand)), len(r))))
        for order in range(1, max_order + 1):
            counts = _ngram_counts(cand, order)
            best = Counter()
            for ref in refs:
                for gram, n in _ngram_counts(ref, order).items():
                    if n > best[gram]:
                        best[gram] = n
            matched[order - 1] += sum(min(n, best[gram]) for gram, n in counts.items())
            totals[order - 1] += max(len(cand) - order + 1, 0)
    if cand_len == 0:
        return 0.0
    logs = [math.log((m if m > 0 else epsilon) / d) for m, d in zip(matched, totals) if d > 0]
    if not logs:
        return 0.0
    brevity = math.exp(min(0.0, 1.0 - ref_len / cand_len))
    return brevity * math.exp(sum(logs) / len(logs))


def _lcs_length(a: TokenSeq, b: TokenSeq) -> int:
    if not a or not b:
        return 0
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0] * (len(b) + 1)
        for j, y in enumerate(b, start=1):
            cur[j] = prev[j - 1] + 1 if x == y else max(prev[j], cur[j - 1])
        prev = cur
    return prev[-1]


def rouge_l(candidate: TokenSeq, references: Sequence[TokenSeq], beta: float = ROUGE_BETA) -> float:
    """Longest-common-subsequence F-score, maximized over references."""
    if not references:
        raise ValueError("need at least one reference")
    if not candidate:
        return 0.0
    best = 0.0
    for ref in references:
        lcs = _lcs_length(candidate, ref)
        if lcs == 0:
            continue
        precision = lcs / len(candidate)
        recall = lcs / len(ref)
        f = (1.0 + beta * beta) * precision * recall / (recall + beta * beta * precision)
        best = max(best, f)
    return best


def cider(
    candidates: Sequence[TokenSeq],
    references: Sequence[Sequence[TokenSeq]],
    corpus: Sequence[Sequence[TokenSeq]],
    max_order: int = 4,
) -> float:
    """Consensus score: TF-IDF n-gram cosine against references, averaged.

    ``corpus`` is the list of reference sets defining document frequencies
    (one document per image: a gram counts once per image no matter how many
    of its references contain it). idf = log(N / min(1 + df, N)), so grams in
    every image get idf 0 and unseen grams the maximum log N. Raw counts are
    used for term frequency; the final score averages the per-order mean
    reference similarity and scales by 10.
    """
    if len(candidates) != len(references):
        raise ValueError(f"{len(candidates)} candidates vs {len(references)} reference sets")
    n_docs = len(corpus)
    if n_docs == 0:
        raise ValueError("corpus must contain at least one reference set")
    df = [Counter() for _ in range(max_order)]
    for refs in corpus:
        for order in range(1, max_order + 1):
            seen = set()
            for ref in refs:
                seen.update(_ngram_counts(ref, order).keys())
            for gram in seen:
                df[order - 1][gram] += 1
    def idf(order: int, gram) -> float:
        return math.log(n_docs / min(1 + df[order - 1][gram], n_docs))

    def tfidf(tokens: TokenSeq, order: int) -> dict:
        return {g: n * idf(order, g) for g, n in _ngram_counts(tokens, order).items()}

    def cosine(u: dict, v: dict) -> float:
        nu = math.sqrt(sum(x * x for x in u.values()))
        nv = math.sqrt(sum(x * x for x in v.values()))
        if nu == 0.0 or nv == 0.0:
            return 0.0
        dot = sum(x * v[g] for g, x in u.items() if g in v)
        return dot / (nu * nv)

    scores = []
    for cand, refs in zip(candidates, references):
        if not refs:
            raise ValueError("every candidate needs at least one reference")
        per_order = []
        for order in range(1, max_order + 1):
            vec_c = tfidf(cand, order)
            sims = [cosine(vec_c, tfidf(ref, order)) for ref in refs]
            per_order.append(sum(sims) / len(sims))
        scores.append(CIDER_WEIGHT * sum(per_order) / max_order)
    if not scores:
        raise ValueError("need at least one candidate")
    return sum(scores) / len(scores)


def _normalize_answer(text: str) -> str:
    return " ".join(t for t in tokenize(text) if t not in _ARTICLES)


def apa(predictions: Sequence[str], answers: Sequence[str]) -> float:
    """Answer accuracy: exact match after lowercasing, punctuation and
    article stripping, and whitespace collapsing."""
    if len(predictions) != len(answers):
        raise ValueError(f"{len(predictions)} predictions vs {len(answers)} answers")
    if not predictions:
        raise ValueError("need at least one prediction")
    hits = sum(
        1 for p, a in zip(predictions, answers) if _normalize_answer(p) == _normalize_answer(a)
    )
    return hits / len(predictions)


def cosine_similarity(u, v) -> float:
    """Cosine similarity of two equal-length vectors, clipped to [-1, 1]."""
    u = np.asarray(u, dtype=np.float64).ravel()
    v = np.asarray(v, dtype=np.float64).ravel()
    if u.shape != v.shape:
        raise ValueError(f"shape mismatch: {u.shape} vs {v.shape}")
    nu = float(np.linalg.norm(u))
    nv = float(np.linalg.norm(v))
    if nu == 0.0 or nv == 0.0:
        raise ValueError("cosine similarity undefined for zero vectors")
    if np.array_equal(u, v):
        return 1.0  # exact endpoint; the float quotient can land 1 ulp off
    if np.array_equal(u, -v):
        return -1.0
    return float(np.clip(float(u @ v) / (nu * nv), -1.0, 1.0))
