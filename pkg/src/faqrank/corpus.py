"""Corpora, query sets, relevance judgments, and question-answer pairs.

File formats (all UTF-8):

* corpus/queries: one JSON object per line with ``_id`` and ``text``
  (documents may add ``title``, and ``provenance`` when they came out of
  an evaluation-corpus merge);
* qrels: tab-separated with header ``query-id<TAB>corpus-id<TAB>score``;
* pairs: one JSON object per line with ``query`` and ``positive``.
"""

from __future__ import annotations

import json
import logging
import math
import random
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

from faqrank.errors import ConfigError, DataError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Document:
    id: str
    text: str
    title: str | None = None
    provenance: str | None = None

    def __post_init__(self):
        if not isinstance(self.id, str) or not self.id:
            raise DataError("document id must be a non-empty string")
        if not isinstance(self.text, str) or not self.text.strip():
            raise DataError(f"document '{self.id}' has empty text")


@dataclass(frozen=True)
class Query:
    id: str
    text: str

    def __post_init__(self):
        if not isinstance(self.id, str) or not self.id:
            raise DataError("query id must be a non-empty string")
        if not isinstance(self.text, str) or not self.text.strip():
            raise DataError(f"query '{self.id}' has empty text")


@dataclass(frozen=True)
class QAPair:
    query_text: str
    positive_text: str

    def __post_init__(self):
        if not self.query_text.strip() or not self.positive_text.strip():
            raise DataError("QA pair fields must be non-empty")


class Corpus:
    """Immutable ordered collection of documents with unique ids."""

    def __init__(self, documents: Iterable[Document]):
        self._docs: dict[str, Document] = {}
        for doc in documents:
            if doc.id in self._docs:
                raise DataError(f"duplicate document id '{doc.id}'")
            self._docs[doc.id] = doc

    def __len__(self) -> int:
        return len(self._docs)

    def __iter__(self) -> Iterator[Document]:
        return iter(self._docs.values())

    def __contains__(self, doc_id: str) -> bool:
        return doc_id in self._docs

    def __getitem__(self, doc_id: str) -> Document:
        try:
            return self._docs[doc_id]
        except KeyError:
            raise DataError(f"unknown document id '{doc_id}'") from None

    def ids(self) -> list[str]:
        return list(self._docs)


class QuerySet:
    """Immutable ordered collection of queries with unique ids."""

    def __init__(self, queries: Iterable[Query]):
        self._queries: dict[str, Query] = {}
        for q in queries:
            if q.id in self._queries:
                raise DataError(f"duplicate query id '{q.id}'")
            self._queries[q.id] = q

    def __len__(self) -> int:
        return len(self._queries)

    def __iter__(self) -> Iterator[Query]:
        return iter(self._queries.values())

    def __contains__(self, query_id: str) -> bool:
        return query_id in self._queries

    def __getitem__(self, query_id: str) -> Query:
        try:
            return self._queries[query_id]
        except KeyError:
            raise DataError(f"unknown query id '{query_id}'") from None

    def ids(self) -> list[str]:
        return list(self._queries)


class QrelSet:
    """Binary-style relevance judgments: query id -> {document id: grade}.

    Grades are positive integers; grade >= 1 means relevant. Grade-0 rows
    never enter a QrelSet (dropped at load time).
    """

    def __init__(self, judgments: dict[str, dict[str, int]]):
        for qid, docs in judgments.items():
            if not docs:
                raise DataError(f"query '{qid}' has an empty judgment set")
            for doc_id, grade in docs.items():
                if not isinstance(grade, int) or grade < 1:
                    raise DataError(
                        f"grade for ({qid}, {doc_id}) must be an integer >= 1"
                    )
        self.judgments = {qid: dict(docs) for qid, docs in judgments.items()}

    def __len__(self) -> int:
        return len(self.judgments)

    def __contains__(self, query_id: str) -> bool:
        return query_id in self.judgments

    def query_ids(self) -> list[str]:
        return list(self.judgments)

    def relevant(self, query_id: str) -> set[str]:
        return set(self.judgments.get(query_id, ()))

    def relevant_counts(self) -> dict[str, int]:
        return {qid: len(docs) for qid, docs in self.judgments.items()}

    def avg_relevant_per_query(self) -> float:
        if not self.judgments:
            return 0.0
        counts = self.relevant_counts()
        return sum(counts.values()) / len(counts)


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float
    val_fraction: float
    test_fraction: float
    seed: int = 0

    def __post_init__(self):
        for name, frac in (
            ("train_fraction", self.train_fraction),
            ("val_fraction", self.val_fraction),
            ("test_fraction", self.test_fraction),
        ):
            if not 0.0 <= frac <= 1.0:
                raise ConfigError(f"{name} must lie in [0, 1], got {frac}")
        total = self.train_fraction + self.val_fraction + self.test_fraction
        if abs(total - 1.0) > 1e-9:
            raise ConfigError(f"split fractions must sum to 1, got {total}")


def _read_jsonl(path: str | Path) -> Iterator[tuple[int, dict]]:
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}: malformed JSON at line {lineno}: {exc}") from None
            if not isinstance(obj, dict):
                raise DataError(f"{path}: line {lineno} is not a JSON object")
            yield lineno, obj


def _require_str(obj: dict, key: str, path: str | Path, lineno: int) -> str:
    value = obj.get(key)
    if not isinstance(value, str) or not value:
        raise DataError(f"{path}: line {lineno} missing required field '{key}'")
    return value


def load_corpus(path: str | Path) -> Corpus:
    """Load a JSONL corpus; rejects duplicate ids and malformed lines."""
    docs = []
    seen: set[str] = set()
    for lineno, obj in _read_jsonl(path):
        doc_id = _require_str(obj, "_id", path, lineno)
        text = _require_str(obj, "text", path, lineno)
        if doc_id in seen:
            raise DataError(f"{path}: duplicate document id '{doc_id}' at line {lineno}")
        seen.add(doc_id)
        title = obj.get("title")
        if title is not None and not isinstance(title, str):
            raise DataError(f"{path}: line {lineno} field 'title' must be a string")
        provenance = obj.get("provenance")
        if provenance is not None and not isinstance(provenance, str):
            raise DataError(f"{path}: line {lineno} field 'provenance' must be a string")
        try:
            docs.append(Document(id=doc_id, text=text, title=title, provenance=provenance))
        except DataError as exc:
            raise DataError(f"{path}: line {lineno}: {exc}") from None
    corpus = Corpus(docs)
    logger.info("loaded %d documents from %s", len(corpus), path)
    return corpus


def save_corpus(corpus: Corpus, path: str | Path) -> None:
    """Write a corpus in canonical JSONL form (stable field order)."""
    with open(path, "w", encoding="utf-8") as f:
        for doc in corpus:
            record: dict = {"_id": doc.id, "text": doc.text}
            if doc.title is not None:
                record["title"] = doc.title
            if doc.provenance is not None:
                record["provenance"] = doc.provenance
            f.write(json.dumps(record, ensure_ascii=False, separators=(",", ":")))
            f.write("\n")


def load_queries(path: str | Path) -> QuerySet:
    queries = []
    seen: set[str] = set()
    for lineno, obj in _read_jsonl(path):
        qid = _require_str(obj, "_id", path, lineno)
        text = _require_str(obj, "text", path, lineno)
        if qid in seen:
            raise DataError(f"{path}: duplicate query id '{qid}' at line {lineno}")
        seen.add(qid)
        try:
            queries.append(Query(id=qid, text=text))
        except DataError as exc:
            raise DataError(f"{path}: line {lineno}: {exc}") from None
    qs = QuerySet(queries)
    logger.info("loaded %d queries from %s", len(qs), path)
    return qs


def save_queries(queries: QuerySet, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for q in queries:
            f.write(json.dumps({"_id": q.id, "text": q.text}, ensure_ascii=False, separators=(",", ":")))
            f.write("\n")


QRELS_HEADER = "query-id\tcorpus-id\tscore"


def load_qrels(
    path: str | Path,
    corpus: Corpus | None = None,
    queries: QuerySet | None = None,
) -> QrelSet:
    """Load tab-separated qrels; validates ids when corpus/queries given.

    Grade-0 rows are dropped with a warning; negative grades are rejected.
    """
    judgments: dict[str, dict[str, int]] = {}
    with open(path, "r", encoding="utf-8") as f:
        lines = f.read().splitlines()
    if not lines or lines[0].strip() != QRELS_HEADER:
        raise DataError(f"{path}: missing qrels header '{QRELS_HEADER}'")
    for lineno, line in enumerate(lines[1:], 2):
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 3:
            raise DataError(f"{path}: line {lineno} must have 3 tab-separated fields")
        qid, doc_id, grade_str = (p.strip() for p in parts)
        try:
            grade = int(grade_str)
        except ValueError:
            raise DataError(f"{path}: line {lineno} grade '{grade_str}' is not an integer") from None
        if grade < 0:
            raise DataError(f"{path}: line {lineno} grade must be >= 0")
        if grade == 0:
            logger.warning("%s: line %d dropped (grade 0 for %s/%s)", path, lineno, qid, doc_id)
            continue
        if queries is not None and qid not in queries:
            raise DataError(f"{path}: line {lineno} references unknown query id '{qid}'")
        if corpus is not None and doc_id not in corpus:
            raise DataError(f"{path}: line {lineno} references unknown document id '{doc_id}'")
        judgments.setdefault(qid, {})[doc_id] = grade
    qrels = QrelSet(judgments)
    logger.info(
        "loaded qrels for %d queries (avg %.2f relevant/query) from %s",
        len(qrels), qrels.avg_relevant_per_query(), path,
    )
    return qrels


def save_qrels(qrels: QrelSet, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write(QRELS_HEADER + "\n")
        for qid in qrels.query_ids():
            for doc_id in sorted(qrels.judgments[qid]):
                f.write(f"{qid}\t{doc_id}\t{qrels.judgments[qid][doc_id]}\n")


def load_pairs(path: str | Path) -> list[QAPair]:
    pairs = []
    for lineno, obj in _read_jsonl(path):
        query = _require_str(obj, "query", path, lineno)
        positive = _require_str(obj, "positive", path, lineno)
        try:
            pairs.append(QAPair(query_text=query, positive_text=positive))
        except DataError as exc:
            raise DataError(f"{path}: line {lineno}: {exc}") from None
    return pairs


def save_pairs(pairs: Iterable[QAPair], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for pair in pairs:
            f.write(json.dumps(
                {"query": pair.query_text, "positive": pair.positive_text},
                ensure_ascii=False, separators=(",", ":"),
            ))
            f.write("\n")


def split_pairs(
    pairs: list[QAPair], spec: SplitSpec
) -> tuple[list[QAPair], list[QAPair], list[QAPair]]:
    """Deterministic train/val/test partition.

    Val and test sizes are floored; the remainder goes to train (548 pairs
    at 0.70/0.15/0.15 give 384/82/82).
    """
    if len(pairs) < 3:
        raise ConfigError("need at least 3 pairs to split")
    n = len(pairs)
    n_val = math.floor(n * spec.val_fraction)
    n_test = math.floor(n * spec.test_fraction)
    n_train = n - n_val - n_test
    indices = list(range(n))
    random.Random(spec.seed).shuffle(indices)
    train = [pairs[i] for i in indices[:n_train]]
    val = [pairs[i] for i in indices[n_train:n_train + n_val]]
    test = [pairs[i] for i in indices[n_train + n_val:]]
    return train, val, test


def find_near_duplicates(
    texts: list[str], embedder, threshold: float
) -> list[tuple[int, int, float]]:
    """All unordered index pairs with embedding cosine >= threshold.

    Sorted by similarity descending; meant as a review list, nothing is
    removed. The embedder must expose ``embed_texts(texts, kind)``.
    """
    if not 0.0 < threshold <= 1.0:
        raise ConfigError(f"threshold must lie in (0, 1], got {threshold}")
    if len(texts) < 2:
        return []
    vectors = np.asarray(embedder.embed_texts(list(texts), kind="passage"), dtype=np.float64)
    norms = np.linalg.norm(vectors, axis=1, keepdims=True)
    if np.any(norms == 0.0):
        raise DataError("embedder produced a zero vector")
    unit = vectors / norms
    sims = np.clip(unit @ unit.T, -1.0, 1.0)
    hits = []
    for i in range(len(texts)):
        for j in range(i + 1, len(texts)):
            sim = float(sims[i, j])
            if sim >= threshold:
                hits.append((i, j, sim))
    hits.sort(key=lambda item: (-item[2], item[0], item[1]))
    return hits


DISTRACTOR_PREFIX = "dx-"


def build_eval_corpus(relevant_docs: Corpus, distractor_docs: Corpus) -> Corpus:
    """Merge relevant documents with re-prefixed distractors.

    Distractor ids get a ``dx-`` prefix to keep the id spaces disjoint;
    each document carries a provenance flag naming its side.
    """
    merged = [
        Document(id=doc.id, text=doc.text, title=doc.title, provenance="relevant")
        for doc in relevant_docs
    ]
    relevant_ids = {doc.id for doc in relevant_docs}
    for doc in distractor_docs:
        new_id = DISTRACTOR_PREFIX + doc.id
        if new_id in relevant_ids:
            raise DataError(f"id collision after prefixing: '{new_id}'")
        merged.append(Document(id=new_id, text=doc.text, title=doc.title, provenance="distractor"))
    return Corpus(merged)
