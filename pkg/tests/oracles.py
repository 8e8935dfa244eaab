"""Independent brute-force reference implementations.

Everything here is deliberately naive and shares no code with the package:
these are the second route of every dual-route check. Keep them slow and
obvious.
"""

from __future__ import annotations

import itertools
import math


# --- IR metrics ----------------------------------------------------------------


def naive_metrics(ranking_ids: list[str], relevant: set[str], k: int) -> dict[str, float]:
    """All five binary metrics for one query, computed by direct counting."""
    top = ranking_ids[:k]
    hits = [1 if doc_id in relevant else 0 for doc_id in top]
    n_hits = sum(hits)
    out = {
        "recall": n_hits / len(relevant),
        "precision": n_hits / k,
        "accuracy": 1.0 if n_hits > 0 else 0.0,
    }
    mrr = 0.0
    for i, h in enumerate(hits):
        if h:
            mrr = 1.0 / (i + 1)
            break
    out["mrr"] = mrr
    dcg = sum(h / math.log2(i + 2) for i, h in enumerate(hits))
    idcg = sum(1.0 / math.log2(i + 2) for i in range(min(k, len(relevant))))
    out["ndcg"] = dcg / idcg
    return out


# --- BM25 ----------------------------------------------------------------------


def naive_bm25_ranking(
    doc_tokens: dict[str, list[str]],
    query_tokens: list[str],
    k1: float,
    b: float,
) -> list[tuple[str, float]]:
    """Score every document with the closed-form formula; no index."""
    n_docs = len(doc_tokens)
    lengths = {doc_id: len(toks) for doc_id, toks in doc_tokens.items()}
    avgdl = sum(lengths.values()) / n_docs
    df = {
        term: sum(1 for toks in doc_tokens.values() if term in toks)
        for term in set(query_tokens)
    }
    scored = []
    for doc_id, toks in doc_tokens.items():
        score = 0.0
        for term in query_tokens:
            tf = toks.count(term)
            if tf == 0:
                continue
            idf = math.log((n_docs - df[term] + 0.5) / (df[term] + 0.5) + 1.0)
            denom = tf + k1 * (1.0 - b + b * lengths[doc_id] / avgdl)
            score += idf * tf * (k1 + 1.0) / denom
        if score > 0.0:
            scored.append((doc_id, score))
    scored.sort(key=lambda item: (-item[1], item[0]))
    return scored


# --- cosine / dense search -------------------------------------------------------


def naive_cosine(a, b) -> float:
    dot = sum(x * y for x, y in zip(a, b))
    na = math.sqrt(sum(x * x for x in a))
    nb = math.sqrt(sum(y * y for y in b))
    return dot / (na * nb)


def naive_dense_ranking(entries: dict[str, list[float]], query: list[float], k: int) -> list[str]:
    sims = [(doc_id, naive_cosine(vec, query)) for doc_id, vec in entries.items()]
    sims.sort(key=lambda item: (-item[1], item[0]))
    return [doc_id for doc_id, _ in sims[:k]]


# --- in-batch softmax ranking loss ------------------------------------------------


def naive_mnrl(queries: list[list[float]], positives: list[list[float]], scale: float) -> float:
    """Materialize the full similarity matrix and the softmax directly."""
    batch = len(queries)
    total = 0.0
    for i in range(batch):
        exps = [math.exp(scale * naive_cosine(queries[i], positives[j])) for j in range(batch)]
        total += -math.log(exps[i] / sum(exps))
    return total / batch


# --- Wilcoxon signed-rank ----------------------------------------------------------


def _mean_ranks(values: list[float]) -> list[float]:
    order = sorted(range(len(values)), key=lambda i: values[i])
    ranks = [0.0] * len(values)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        for pos in range(i, j + 1):
            ranks[order[pos]] = (i + j + 2) / 2.0
        i = j + 1
    return ranks


def wilcoxon_exact_by_enumeration(diffs: list[float]) -> tuple[float, float]:
    """(W, two-sided p) by literally looping over all 2^n sign patterns.

    Only for small n. Counts patterns whose negative-rank sum falls at or
    below the observed W = min(W+, W-), then doubles the tail.
    """
    nonzero = [d for d in diffs if d != 0.0]
    n = len(nonzero)
    assert 1 <= n <= 16, "enumeration oracle is for small samples"
    ranks = _mean_ranks([abs(d) for d in nonzero])
    total = sum(ranks)
    w_minus_obs = sum(r for d, r in zip(nonzero, ranks) if d < 0)
    w_obs = min(w_minus_obs, total - w_minus_obs)
    count = 0
    for signs in itertools.product((1, -1), repeat=n):
        w_minus = sum(r for s, r in zip(signs, ranks) if s < 0)
        if w_minus <= w_obs + 1e-12:
            count += 1
    return w_obs, min(1.0, 2.0 * count / 2 ** n)
