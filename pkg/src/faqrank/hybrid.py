"""Fusion of a lexical and a dense run into one ranked run.

Two methods: ``weighted_minmax`` rescales each side's scores to [0, 1]
over its own candidates and mixes them with weight alpha on the dense
side; ``rrf`` ignores scores entirely and sums reciprocal ranks.
"""

from __future__ import annotations

from dataclasses import dataclass

from faqrank.errors import ConfigError
from faqrank.eval import Run

FUSION_METHODS = ("weighted_minmax", "rrf")


@dataclass(frozen=True)
class FusionConfig:
    method: str = "weighted_minmax"
    alpha: float = 0.5
    rrf_k: int = 60
    depth: int = 100

    def __post_init__(self):
        if self.method not in FUSION_METHODS:
            raise ConfigError(f"fusion method must be one of {FUSION_METHODS}, got '{self.method}'")
        if not 0.0 <= self.alpha <= 1.0:
            raise ConfigError(f"alpha must lie in [0, 1], got {self.alpha}")
        if self.rrf_k < 1:
            raise ConfigError(f"rrf_k must be >= 1, got {self.rrf_k}")
        if self.depth < 1:
            raise ConfigError(f"depth must be >= 1, got {self.depth}")


def _minmax(candidates: list[tuple[str, float]]) -> dict[str, float]:
    # Constant-score lists (including singletons) map to all-1 instead of 0/0.
    if not candidates:
        return {}
    scores = [s for _, s in candidates]
    lo, hi = min(scores), max(scores)
    if hi == lo:
        return {doc_id: 1.0 for doc_id, _ in candidates}
    return {doc_id: (s - lo) / (hi - lo) for doc_id, s in candidates}


def fuse(
    lexical_run: Run,
    dense_run: Run,
    config: FusionConfig = FusionConfig(),
    tag: str = "hybrid",
) -> Run:
    """Fuse two runs query by query.

    Candidates are the union of each side's top-``depth``. A document
    absent from one side contributes 0 from it (weighted_minmax) or simply
    no reciprocal-rank term (rrf). Ties break by ascending document id.
    """
    rankings: dict[str, list[tuple[str, float]]] = {}
    for qid in sorted(set(lexical_run.rankings) | set(dense_run.rankings)):
        lex = lexical_run.rankings.get(qid, [])[: config.depth]
        den = dense_run.rankings.get(qid, [])[: config.depth]
        fused: dict[str, float] = {}
        if config.method == "weighted_minmax":
            lex_norm = _minmax(lex)
            den_norm = _minmax(den)
            for doc_id in set(lex_norm) | set(den_norm):
                fused[doc_id] = (
                    config.alpha * den_norm.get(doc_id, 0.0)
                    + (1.0 - config.alpha) * lex_norm.get(doc_id, 0.0)
                )
        else:  # rrf
            for side in (lex, den):
                for rank, (doc_id, _) in enumerate(side, 1):
                    fused[doc_id] = fused.get(doc_id, 0.0) + 1.0 / (config.rrf_k + rank)
        rankings[qid] = sorted(fused.items(), key=lambda item: (-item[1], item[0]))
    return Run(rankings=rankings, tag=tag)
