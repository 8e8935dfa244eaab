"""BM25 retrieval over an in-memory inverted index.

Scoring uses the non-negative IDF variant, ``ln((N - df + 0.5)/(df + 0.5) + 1)``,
so every indexed term contributes a strictly positive weight even on tiny
corpora. Documents scoring 0 for a query are never returned.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

from faqrank.corpus import Corpus
from faqrank.errors import ConfigError, DataError
from faqrank.text import normalize, tokenize

INDEX_FORMAT = "faqrank-bm25-index"
INDEX_VERSION = 1


@dataclass(frozen=True)
class BM25Params:
    k1: float = 1.2
    b: float = 0.75

    def __post_init__(self):
        if self.k1 < 0:
            raise ConfigError(f"k1 must be >= 0, got {self.k1}")
        if not 0.0 <= self.b <= 1.0:
            raise ConfigError(f"b must lie in [0, 1], got {self.b}")


class InvertedIndex:
    """Term postings plus the corpus statistics BM25 needs (N, df, avgdl)."""

    def __init__(
        self,
        postings: dict[str, dict[str, int]],
        doc_length: dict[str, int],
        params: BM25Params,
    ):
        self.postings = postings
        self.doc_length = doc_length
        self.params = params
        self.N = len(doc_length)
        self.avgdl = sum(doc_length.values()) / self.N if self.N else 0.0

    def df(self, term: str) -> int:
        return len(self.postings.get(term, ()))

    def idf(self, term: str) -> float:
        df = self.df(term)
        if df == 0:
            return 0.0
        return math.log((self.N - df + 0.5) / (df + 0.5) + 1.0)

    def vocabulary_size(self) -> int:
        return len(self.postings)

    def __contains__(self, doc_id: str) -> bool:
        return doc_id in self.doc_length


def build_index(corpus: Corpus, params: BM25Params = BM25Params()) -> InvertedIndex:
    """Tokenize every document and build the postings table.

    Only the ``text`` field is indexed; documents with zero tokens are kept
    with length 0 and appear in no posting list.
    """
    if len(corpus) == 0:
        raise DataError("empty corpus")
    postings: dict[str, dict[str, int]] = {}
    doc_length: dict[str, int] = {}
    for doc in corpus:
        tokens = tokenize(normalize(doc.text))
        doc_length[doc.id] = len(tokens)
        counts: dict[str, int] = {}
        for tok in tokens:
            counts[tok] = counts.get(tok, 0) + 1
        for term, tf in counts.items():
            postings.setdefault(term, {})[doc.id] = tf
    return InvertedIndex(postings, doc_length, params)


def bm25_score(index: InvertedIndex, query_tokens: list[str], doc_id: str) -> float:
    """BM25 score of one document for a token list.

    Each token occurrence in the query contributes one summand; terms
    absent from the document (or the index) contribute 0.
    """
    if doc_id not in index.doc_length:
        raise DataError(f"unknown document id '{doc_id}'")
    k1, b = index.params.k1, index.params.b
    dl = index.doc_length[doc_id]
    score = 0.0
    for term in query_tokens:
        tf = index.postings.get(term, {}).get(doc_id, 0)
        if tf == 0:
            continue
        norm = k1 * (1.0 - b + b * dl / index.avgdl)
        score += index.idf(term) * (tf * (k1 + 1.0)) / (tf + norm)
    return score


def search(index: InvertedIndex, query_text: str, k: int) -> list[tuple[str, float]]:
    """Top-k documents by BM25 score, descending; ids break ties ascending.

    Zero-scoring documents are excluded, so fewer than k results is normal.
    """
    if k < 1:
        raise ConfigError(f"k must be >= 1, got {k}")
    query_tokens = tokenize(normalize(query_text))
    k1, b = index.params.k1, index.params.b
    scores: dict[str, float] = {}
    for term in query_tokens:
        plist = index.postings.get(term)
        if not plist:
            continue
        idf = index.idf(term)
        for doc_id, tf in plist.items():
            norm = k1 * (1.0 - b + b * index.doc_length[doc_id] / index.avgdl)
            scores[doc_id] = scores.get(doc_id, 0.0) + idf * (tf * (k1 + 1.0)) / (tf + norm)
    ranked = sorted(scores.items(), key=lambda item: (-item[1], item[0]))
    return ranked[:k]


def save_index(index: InvertedIndex, path: str | Path) -> None:
    """Persist the index as self-describing JSON (lossless round-trip)."""
    payload = {
        "format": INDEX_FORMAT,
        "version": INDEX_VERSION,
        "params": {"k1": index.params.k1, "b": index.params.b},
        "doc_length": {doc_id: index.doc_length[doc_id] for doc_id in sorted(index.doc_length)},
        "postings": {
            term: [[doc_id, index.postings[term][doc_id]] for doc_id in sorted(index.postings[term])]
            for term in sorted(index.postings)
        },
    }
    with open(path, "w", encoding="utf-8") as f:
        json.dump(payload, f, ensure_ascii=False, separators=(",", ":"))
        f.write("\n")


def load_index(path: str | Path) -> InvertedIndex:
    with open(path, "r", encoding="utf-8") as f:
        try:
            payload = json.load(f)
        except json.JSONDecodeError as exc:
            raise DataError(f"{path}: not a valid index file: {exc}") from None
    if not isinstance(payload, dict) or payload.get("format") != INDEX_FORMAT:
        raise DataError(f"{path}: not a {INDEX_FORMAT} file")
    if payload.get("version") != INDEX_VERSION:
        raise DataError(f"{path}: unsupported index version {payload.get('version')}")
    params = BM25Params(**payload["params"])
    doc_length = {doc_id: int(n) for doc_id, n in payload["doc_length"].items()}
    postings = {
        term: {doc_id: int(tf) for doc_id, tf in entries}
        for term, entries in payload["postings"].items()
    }
    for term, plist in postings.items():
        for doc_id in plist:
            if doc_id not in doc_length:
                raise DataError(f"{path}: posting for '{term}' references unknown document '{doc_id}'")
    return InvertedIndex(postings, doc_length, params)
