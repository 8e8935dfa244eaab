"""Binary-relevance IR metrics over ranked runs.

Evaluation contract shared by every metric: queries without judgments are
skipped; a judged query missing from the run scores 0; "top-k" means the
first min(k, len(ranking)) entries.

Run file format is TREC: ``query-id Q0 document-id rank score tag``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from faqrank.corpus import QrelSet
from faqrank.errors import ConfigError, DataError

METRIC_NAMES = ("accuracy", "precision", "recall", "mrr", "ndcg")


@dataclass
class Run:
    """Per-query ranked (document id, score) lists plus a system tag."""

    rankings: dict[str, list[tuple[str, float]]]
    tag: str

    def __post_init__(self):
        if not self.tag or any(c.isspace() for c in self.tag):
            raise DataError(f"run tag must be non-empty without whitespace, got {self.tag!r}")
        for qid, ranking in self.rankings.items():
            seen: set[str] = set()
            previous = math.inf
            for doc_id, score in ranking:
                if doc_id in seen:
                    raise DataError(f"run '{self.tag}': duplicate document '{doc_id}' for query '{qid}'")
                seen.add(doc_id)
                if score > previous:
                    raise DataError(f"run '{self.tag}': scores not non-increasing for query '{qid}'")
                previous = score

    def query_ids(self) -> list[str]:
        return list(self.rankings)


def _evaluable_queries(run: Run, qrels: QrelSet) -> list[str]:
    evaluable = sorted(qrels.judgments)
    if not evaluable:
        raise DataError("zero evaluable queries")
    if run.rankings and not set(run.rankings) & set(evaluable):
        raise DataError("zero evaluable queries: run and qrels share no query ids")
    return evaluable


def _top_k_ids(run: Run, qid: str, k: int) -> list[str]:
    ranking = run.rankings.get(qid, [])
    return [doc_id for doc_id, _ in ranking[:k]]


def _check_k(k: int) -> None:
    if not isinstance(k, int) or k < 1:
        raise ConfigError(f"k must be a positive integer, got {k}")


def _mean(values: dict[str, float]) -> float:
    return math.fsum(values.values()) / len(values)


def recall_at_k(run: Run, qrels: QrelSet, k: int) -> tuple[dict[str, float], float]:
    """Fraction of each query's relevant documents found in the top k."""
    _check_k(k)
    per_query = {}
    for qid in _evaluable_queries(run, qrels):
        relevant = qrels.relevant(qid)
        hits = sum(1 for doc_id in _top_k_ids(run, qid, k) if doc_id in relevant)
        per_query[qid] = hits / len(relevant)
    return per_query, _mean(per_query)


def precision_at_k(run: Run, qrels: QrelSet, k: int) -> tuple[dict[str, float], float]:
    """Relevant hits in the top k divided by k (not by retrieved count)."""
    _check_k(k)
    per_query = {}
    for qid in _evaluable_queries(run, qrels):
        relevant = qrels.relevant(qid)
        hits = sum(1 for doc_id in _top_k_ids(run, qid, k) if doc_id in relevant)
        per_query[qid] = hits / k
    return per_query, _mean(per_query)


def accuracy_at_k(run: Run, qrels: QrelSet, k: int) -> tuple[dict[str, float], float]:
    """Hit rate: 1 when any relevant document appears in the top k."""
    _check_k(k)
    per_query = {}
    for qid in _evaluable_queries(run, qrels):
        relevant = qrels.relevant(qid)
        per_query[qid] = 1.0 if any(d in relevant for d in _top_k_ids(run, qid, k)) else 0.0
    return per_query, _mean(per_query)


def mrr_at_k(run: Run, qrels: QrelSet, k: int) -> tuple[dict[str, float], float]:
    """Reciprocal rank of the first relevant document within the top k."""
    _check_k(k)
    per_query = {}
    for qid in _evaluable_queries(run, qrels):
        relevant = qrels.relevant(qid)
        value = 0.0
        for rank, doc_id in enumerate(_top_k_ids(run, qid, k), 1):
            if doc_id in relevant:
                value = 1.0 / rank
                break
        per_query[qid] = value
    return per_query, _mean(per_query)


def ndcg_at_k(run: Run, qrels: QrelSet, k: int) -> tuple[dict[str, float], float]:
    """Binary-gain NDCG with the log2(rank + 1) discount."""
    _check_k(k)
    per_query = {}
    for qid in _evaluable_queries(run, qrels):
        relevant = qrels.relevant(qid)
        dcg = 0.0
        for rank, doc_id in enumerate(_top_k_ids(run, qid, k), 1):
            if doc_id in relevant:
                dcg += 1.0 / math.log2(rank + 1)
        ideal_hits = min(k, len(relevant))
        idcg = math.fsum(1.0 / math.log2(rank + 1) for rank in range(1, ideal_hits + 1))
        per_query[qid] = dcg / idcg
    return per_query, _mean(per_query)


_METRIC_FUNCS = {
    "accuracy": accuracy_at_k,
    "precision": precision_at_k,
    "recall": recall_at_k,
    "mrr": mrr_at_k,
    "ndcg": ndcg_at_k,
}


@dataclass
class MetricReport:
    """All metrics at every cutoff, with per-query values kept for stats."""

    tag: str
    k_values: list[int]
    evaluated_queries: int
    aggregate: dict[str, float] = field(default_factory=dict)
    per_query: dict[str, dict[str, float]] = field(default_factory=dict)

    def to_json_dict(self) -> dict:
        return {
            "tag": self.tag,
            "k_values": self.k_values,
            "evaluated_queries": self.evaluated_queries,
            "aggregate": self.aggregate,
            "per_query": self.per_query,
        }

    @classmethod
    def from_json_dict(cls, payload: dict) -> "MetricReport":
        try:
            return cls(
                tag=payload["tag"],
                k_values=[int(k) for k in payload["k_values"]],
                evaluated_queries=int(payload["evaluated_queries"]),
                aggregate={str(m): float(v) for m, v in payload["aggregate"].items()},
                per_query={
                    str(m): {str(q): float(v) for q, v in values.items()}
                    for m, values in payload["per_query"].items()
                },
            )
        except (KeyError, TypeError, ValueError, AttributeError) as exc:
            raise DataError(f"malformed metric report: {exc}") from None

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as f:
            json.dump(self.to_json_dict(), f, ensure_ascii=False, indent=2, sort_keys=True)
            f.write("\n")

    @classmethod
    def load(cls, path: str | Path) -> "MetricReport":
        with open(path, "r", encoding="utf-8") as f:
            return cls.from_json_dict(json.load(f))


def evaluate_run(run: Run, qrels: QrelSet, k_values: list[int]) -> MetricReport:
    """Score a run on all five metrics at every cutoff."""
    if not k_values:
        raise ConfigError("k_values must be non-empty")
    for k in k_values:
        _check_k(k)
    evaluable = _evaluable_queries(run, qrels)
    report = MetricReport(tag=run.tag, k_values=list(k_values), evaluated_queries=len(evaluable))
    for k in k_values:
        for metric in METRIC_NAMES:
            per_query, mean = _METRIC_FUNCS[metric](run, qrels, k)
            name = f"{metric}@{k}"
            report.per_query[name] = per_query
            report.aggregate[name] = mean
    return report


def write_trec_run(run: Run, path: str | Path) -> None:
    """Write a run in TREC format, queries and ranks in ascending order."""
    with open(path, "w", encoding="utf-8") as f:
        for qid in sorted(run.rankings):
            for rank, (doc_id, score) in enumerate(run.rankings[qid], 1):
                f.write(f"{qid} Q0 {doc_id} {rank} {score!r} {run.tag}\n")


def read_trec_run(path: str | Path, tag: str | None = None) -> Run:
    """Parse a TREC run file; malformed lines are reported by number."""
    per_query: dict[str, list[tuple[int, str, float]]] = {}
    seen_tag = None
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            if not line.strip():
                continue
            parts = line.split()
            if len(parts) != 6:
                raise DataError(f"{path}: line {lineno} must have 6 whitespace-separated fields")
            qid, _q0, doc_id, rank_str, score_str, line_tag = parts
            try:
                rank = int(rank_str)
                score = float(score_str)
            except ValueError:
                raise DataError(f"{path}: line {lineno} has a malformed rank or score") from None
            if rank < 1:
                raise DataError(f"{path}: line {lineno} rank must be >= 1")
            if seen_tag is None:
                seen_tag = line_tag
            elif line_tag != seen_tag:
                raise DataError(f"{path}: line {lineno} mixes run tags '{line_tag}' and '{seen_tag}'")
            per_query.setdefault(qid, []).append((rank, doc_id, score))
    rankings = {}
    for qid, entries in per_query.items():
        entries.sort(key=lambda e: e[0])
        if [rank for rank, _, _ in entries] != list(range(1, len(entries) + 1)):
            raise DataError(f"{path}: ranks for query '{qid}' are not consecutive from 1")
        rankings[qid] = [(doc_id, score) for _, doc_id, score in entries]
    return Run(rankings=rankings, tag=tag or seen_tag or "run")
