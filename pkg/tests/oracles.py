"""Independent reference implementations used to cross-check the package.

These are deliberately written from the documented formulas, in a plain
dict-and-loop style, sharing no code with the package: small, slow, and
obvious beats fast here. If the package and these disagree beyond tolerance,
one of them misreads the contract.
"""

import math
import string


def oracle_tokenize(text):
    chars = []
    for ch in text.lower():
        chars.append(" " if ch in string.punctuation else ch)
    return "".join(chars).split()


def _grams(tokens, n):
    out = {}
    for i in range(len(tokens) - n + 1):
        g = tuple(tokens[i : i + n])
        out[g] = out.get(g, 0) + 1
    return out


def oracle_bleu(cands, refss, max_order=4, eps=1e-9):
    """Corpus BLEU: pooled clipped counts, closest-ref brevity penalty.

    Orders where the corpus has no candidate n-grams are left out of the
    geometric mean; zero matches at a populated order floor at eps.
    """
    matched = {n: 0 for n in range(1, max_order + 1)}
    totals = {n: 0 for n in range(1, max_order + 1)}
    c_len = 0
    r_len = 0
    for cand, refs in zip(cands, refss):
        c_len += len(cand)
        best = None
        for ref in refs:
            key = (abs(len(ref) - len(cand)), len(ref))
            if best is None or key < best:
                best = key
        r_len += best[1]
        for n in range(1, max_order + 1):
            cg = _grams(cand, n)
            totals[n] += sum(cg.values())
            for g, c in cg.items():
                cap = 0
                for ref in refs:
                    rg = _grams(ref, n)
                    if rg.get(g, 0) > cap:
                        cap = rg[g]
                matched[n] += min(c, cap)
    logs = []
    for n in range(1, max_order + 1):
        if totals[n] > 0:
            m = matched[n] if matched[n] > 0 else eps
            logs.append(math.log(m / totals[n]))
    if not logs or c_len == 0:
        return 0.0
    geo = math.exp(sum(logs) / len(logs))
    bp = math.exp(min(0.0, 1.0 - r_len / c_len))
    return bp * geo


def oracle_lcs(a, b):
    """Full-table longest common subsequence length."""
    table = [[0] * (len(b) + 1) for _ in range(len(a) + 1)]
    for i in range(1, len(a) + 1):
        for j in range(1, len(b) + 1):
            if a[i - 1] == b[j - 1]:
                table[i][j] = table[i - 1][j - 1] + 1
            else:
                table[i][j] = max(table[i - 1][j], table[i][j - 1])
    return table[len(a)][len(b)]


def oracle_rouge_l(cand, refs, beta=1.2):
    best = 0.0
    for ref in refs:
        if len(cand) == 0 or len(ref) == 0:
            continue
        lcs = oracle_lcs(cand, ref)
        if lcs == 0:
            continue
        p = lcs / len(cand)
        r = lcs / len(ref)
        f = (1 + beta * beta) * p * r / (r + beta * beta * p)
        if f > best:
            best = f
    return best


def oracle_cider(cands, refss, corpus, max_order=4, weight=10.0):
    """TF-IDF n-gram cosine consensus; idf = log(N / min(1 + df, N))."""
    n_images = len(corpus)
    per_cand = []
    for cand, refs in zip(cands, refss):
        per_order = []
        for n in range(1, max_order + 1):
            df = {}
            for image_refs in corpus:
                seen = set()
                for ref in image_refs:
                    for g in _grams(ref, n):
                        seen.add(g)
                for g in seen:
                    df[g] = df.get(g, 0) + 1

            def idf(g):
                return math.log(n_images / min(1 + df.get(g, 0), n_images))

            cvec = {g: c * idf(g) for g, c in _grams(cand, n).items()}
            nc = math.sqrt(sum(v * v for v in cvec.values()))
            sims = []
            for ref in refs:
                rvec = {g: c * idf(g) for g, c in _grams(ref, n).items()}
                nr = math.sqrt(sum(v * v for v in rvec.values()))
                if nc == 0.0 or nr == 0.0:
                    sims.append(0.0)
                    continue
                dot = 0.0
                for g, v in cvec.items():
                    if g in rvec:
                        dot += v * rvec[g]
                sims.append(dot / (nc * nr))
            per_order.append(sum(sims) / len(sims))
        per_cand.append(weight * sum(per_order) / max_order)
    return sum(per_cand) / len(per_cand)
