"""End-to-end experiment orchestration.

One configuration drives the whole loop: load data, build the BM25 index,
embed or import vectors, retrieve with the lexical/dense/hybrid systems,
score every run, and test each system against the baseline. All artifacts
land in a run directory together with the config snapshot so significance
tables stay traceable to their exact inputs.

The synthetic generator builds desk-scale datasets with a known structure:
each query shares a private token core with its relevant answers, and
distractors live in a disjoint vocabulary region. A synonym table can
shift query tokens into a vocabulary only the embedder's canonicalization
knows, which separates lexical from semantic retrieval by construction.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from pathlib import Path

from faqrank.corpus import (
    Corpus,
    Document,
    QAPair,
    QrelSet,
    Query,
    QuerySet,
    build_eval_corpus,
    load_corpus,
    load_qrels,
    load_queries,
    save_corpus,
    save_pairs,
    save_qrels,
    save_queries,
)
from faqrank.dense import (
    EmbeddingProviderSpec,
    VectorStore,
    build_provider,
    dense_search,
    ensure_unit_rows,
    import_vectors,
)
from faqrank.errors import ConfigError, DataError, StageError
from faqrank.eval import Run, evaluate_run, write_trec_run
from faqrank.hybrid import FusionConfig, fuse
from faqrank.lexical import BM25Params, InvertedIndex, build_index, search
from faqrank.stats import render_significance_table, significance_table

SYSTEM_TAGS = ("bm25", "dense", "hybrid")


@dataclass(frozen=True)
class ExperimentPaths:
    corpus: str
    queries: str
    qrels: str
    doc_vectors: str | None = None
    query_vectors: str | None = None


@dataclass
class ExperimentConfig:
    paths: ExperimentPaths
    bm25: BM25Params = field(default_factory=BM25Params)
    fusion: FusionConfig = field(default_factory=FusionConfig)
    k_values: list[int] = field(default_factory=lambda: [5, 10])
    provider: EmbeddingProviderSpec = field(default_factory=EmbeddingProviderSpec)
    baseline_tag: str = "bm25"
    seed: int = 0

    def __post_init__(self):
        if not self.k_values or any(not isinstance(k, int) or k < 1 for k in self.k_values):
            raise ConfigError("k_values must be non-empty positive integers")
        if self.baseline_tag not in SYSTEM_TAGS:
            raise ConfigError(
                f"baseline_tag must be one of {SYSTEM_TAGS}, got '{self.baseline_tag}'"
            )

    def to_json_dict(self) -> dict:
        return {
            "paths": {
                "corpus": self.paths.corpus,
                "queries": self.paths.queries,
                "qrels": self.paths.qrels,
                "doc_vectors": self.paths.doc_vectors,
                "query_vectors": self.paths.query_vectors,
            },
            "bm25": {"k1": self.bm25.k1, "b": self.bm25.b},
            "fusion": {
                "method": self.fusion.method,
                "alpha": self.fusion.alpha,
                "rrf_k": self.fusion.rrf_k,
                "depth": self.fusion.depth,
            },
            "k_values": self.k_values,
            "provider": {
                "kind": self.provider.kind,
                "dim": self.provider.dim,
                "model_name": self.provider.model_name,
                "query_prefix": self.provider.query_prefix,
                "passage_prefix": self.provider.passage_prefix,
                "synonyms_path": self.provider.synonyms_path,
                "url": self.provider.url,
            },
            "baseline_tag": self.baseline_tag,
            "seed": self.seed,
        }

    @classmethod
    def from_json_dict(cls, payload: dict) -> "ExperimentConfig":
        try:
            paths = ExperimentPaths(**payload["paths"])
            return cls(
                paths=paths,
                bm25=BM25Params(**payload.get("bm25", {})),
                fusion=FusionConfig(**payload.get("fusion", {})),
                k_values=[int(k) for k in payload.get("k_values", [5, 10])],
                provider=EmbeddingProviderSpec(**payload.get("provider", {})),
                baseline_tag=payload.get("baseline_tag", "bm25"),
                seed=int(payload.get("seed", 0)),
            )
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"malformed experiment config: {exc}") from None

    @classmethod
    def load(cls, path: str | Path) -> "ExperimentConfig":
        with open(path, "r", encoding="utf-8") as f:
            try:
                payload = json.load(f)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"{path}: malformed config JSON: {exc}") from None
        return cls.from_json_dict(payload)


def _embed_stores(
    config: ExperimentConfig, corpus: Corpus, queries: QuerySet
) -> tuple[VectorStore, dict[str, object]]:
    """Document store plus one query vector per query id."""
    spec = config.provider
    if spec.kind == "file":
        if not config.paths.doc_vectors or not config.paths.query_vectors:
            raise ConfigError("file provider requires doc_vectors and query_vectors paths")
        doc_store = import_vectors(config.paths.doc_vectors, expected_dim=spec.dim)
        query_store = import_vectors(config.paths.query_vectors, expected_dim=spec.dim)
        missing = [d.id for d in corpus if d.id not in doc_store]
        if missing:
            raise DataError(f"doc vectors missing for {len(missing)} documents, e.g. '{missing[0]}'")
        query_vecs = {}
        for q in queries:
            if q.id not in query_store:
                raise DataError(f"query vectors missing for '{q.id}'")
            query_vecs[q.id] = query_store.vector(q.id)
        return doc_store, query_vecs

    provider = build_provider(spec)
    doc_ids = [d.id for d in corpus]
    doc_matrix = ensure_unit_rows(
        provider.embed_texts([corpus[d].text for d in doc_ids], kind="passage")
    )
    doc_store = VectorStore(
        {doc_id: row for doc_id, row in zip(doc_ids, doc_matrix)}, normalized=True
    )
    qids = [q.id for q in queries]
    q_matrix = ensure_unit_rows(
        provider.embed_texts([queries[q].text for q in qids], kind="query")
    )
    return doc_store, {qid: row for qid, row in zip(qids, q_matrix)}


def run_experiment(config: ExperimentConfig, out_dir: str | Path) -> dict:
    """Execute all stages and write runs, reports, and the significance table.

    Any stage failure leaves an INCOMPLETE marker naming the stage and
    re-raises as a StageError.
    """
    out = Path(out_dir)
    (out / "runs").mkdir(parents=True, exist_ok=True)
    (out / "reports").mkdir(parents=True, exist_ok=True)
    stage = "init"

    def _fail(exc: Exception) -> StageError:
        (out / "INCOMPLETE").write_text(f"failed at stage: {stage}\n{exc}\n", encoding="utf-8")
        return StageError(stage, exc)

    try:
        stage = "load-data"
        corpus = load_corpus(config.paths.corpus)
        queries = load_queries(config.paths.queries)
        qrels = load_qrels(config.paths.qrels, corpus=corpus, queries=queries)

        stage = "build-index"
        index = build_index(corpus, config.bm25)

        stage = "embed"
        doc_store, query_vecs = _embed_stores(config, corpus, queries)

        stage = "retrieve"
        depth = max(max(config.k_values), config.fusion.depth)
        bm25_run = Run(
            rankings={q.id: search(index, q.text, depth) for q in queries}, tag="bm25"
        )
        dense_run = Run(
            rankings={q.id: dense_search(doc_store, query_vecs[q.id], depth) for q in queries},
            tag="dense",
        )

        stage = "fuse"
        hybrid_run = fuse(bm25_run, dense_run, config.fusion, tag="hybrid")

        stage = "evaluate"
        runs = {"bm25": bm25_run, "dense": dense_run, "hybrid": hybrid_run}
        reports = {tag: evaluate_run(run, qrels, config.k_values) for tag, run in runs.items()}

        stage = "significance"
        baseline_report = reports[config.baseline_tag]
        candidates = [reports[tag] for tag in SYSTEM_TAGS if tag != config.baseline_tag]
        table = significance_table(baseline_report, candidates)

        stage = "write-artifacts"
        with open(out / "config.json", "w", encoding="utf-8") as f:
            json.dump(config.to_json_dict(), f, ensure_ascii=False, indent=2, sort_keys=True)
            f.write("\n")
        for tag, run in runs.items():
            write_trec_run(run, out / "runs" / f"{tag}.trec")
        for tag, report in reports.items():
            report.save(out / "reports" / f"{tag}.json")
        with open(out / "significance.json", "w", encoding="utf-8") as f:
            json.dump(table, f, ensure_ascii=False, indent=2, sort_keys=True)
            f.write("\n")
        (out / "significance.txt").write_text(
            render_significance_table(table, baseline=baseline_report), encoding="utf-8"
        )
    except StageError:
        raise
    except Exception as exc:
        raise _fail(exc) from exc

    incomplete = out / "INCOMPLETE"
    if incomplete.exists():
        incomplete.unlink()
    return {
        "out_dir": str(out),
        "systems": list(SYSTEM_TAGS),
        "baseline": config.baseline_tag,
        "evaluated_queries": reports[config.baseline_tag].evaluated_queries,
        "aggregate": {tag: reports[tag].aggregate for tag in SYSTEM_TAGS},
    }


# --- synthetic datasets --------------------------------------------------------

_CORE_TOKENS = 6
_FILLER_POOL = 18
_MIN_DISTRACTOR_VOCAB = 32


@dataclass(frozen=True)
class SyntheticSpec:
    n_queries: int
    relevant_per_query: int
    n_distractors: int
    vocabulary_size: int
    paraphrase_noise: float

    def __post_init__(self):
        for name in ("n_queries", "relevant_per_query", "n_distractors", "vocabulary_size"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive")
        if not 0.0 <= self.paraphrase_noise <= 1.0:
            raise ConfigError(f"paraphrase_noise must lie in [0, 1], got {self.paraphrase_noise}")


@dataclass
class SyntheticDataset:
    corpus: Corpus
    queries: QuerySet
    qrels: QrelSet
    pairs: list[QAPair]
    synonym_map: dict[str, str]  # surface (synonym) token -> canonical token


def generate_synthetic_dataset(spec: SyntheticSpec, seed: int) -> SyntheticDataset:
    """Build a corpus/queries/qrels triple with controlled token overlap.

    Every query owns a disjoint vocabulary slice: a token core shared with
    all of its relevant answers plus a filler pool. With zero noise, query
    tokens are a subset of each relevant answer; with noise p, each query
    token is swapped for its synonym (a token no document contains) with
    probability p. Deterministic in the seed.
    """
    rng = random.Random(seed)
    per_query_vocab = _CORE_TOKENS + _FILLER_POOL
    base = spec.n_queries * per_query_vocab
    synonym_base = base + spec.n_queries * _CORE_TOKENS
    if spec.vocabulary_size < synonym_base + _MIN_DISTRACTOR_VOCAB:
        raise ConfigError(
            "vocabulary too small to keep query, synonym, and distractor regions disjoint: "
            f"need at least {synonym_base + _MIN_DISTRACTOR_VOCAB}, got {spec.vocabulary_size}"
        )
    vocab = [f"w{i:05d}" for i in range(spec.vocabulary_size)]
    distractor_vocab = vocab[synonym_base:]

    queries = []
    relevant_docs = []
    judgments: dict[str, dict[str, int]] = {}
    pairs = []
    synonym_map: dict[str, str] = {}
    for qi in range(spec.n_queries):
        offset = qi * per_query_vocab
        core = vocab[offset : offset + _CORE_TOKENS]
        fillers = vocab[offset + _CORE_TOKENS : offset + per_query_vocab]
        synonyms = vocab[base + qi * _CORE_TOKENS : base + (qi + 1) * _CORE_TOKENS]
        for canon, syn in zip(core, synonyms):
            synonym_map[syn] = canon

        qid = f"q{qi + 1:04d}"
        query_tokens = core.copy()
        rng.shuffle(query_tokens)
        surfaced = []
        for tok in query_tokens:
            if rng.random() < spec.paraphrase_noise:
                surfaced.append(synonyms[core.index(tok)])
            else:
                surfaced.append(tok)
        queries.append(Query(id=qid, text=" ".join(surfaced)))

        answer_texts = []
        for aj in range(spec.relevant_per_query):
            n_fill = rng.randint(4, 10)
            body = core + [rng.choice(fillers) for _ in range(n_fill)]
            rng.shuffle(body)
            doc_id = f"a{qi + 1:04d}-{aj + 1:02d}"
            text = " ".join(body)
            relevant_docs.append(Document(id=doc_id, text=text))
            judgments.setdefault(qid, {})[doc_id] = 1
            answer_texts.append(text)
        pairs.append(QAPair(query_text=queries[-1].text, positive_text=answer_texts[0]))

    distractors = []
    for di in range(spec.n_distractors):
        length = rng.randint(8, 14)
        body = [rng.choice(distractor_vocab) for _ in range(length)]
        distractors.append(Document(id=f"n{di + 1:05d}", text=" ".join(body)))

    corpus = build_eval_corpus(Corpus(relevant_docs), Corpus(distractors))
    return SyntheticDataset(
        corpus=corpus,
        queries=QuerySet(queries),
        qrels=QrelSet(judgments),
        pairs=pairs,
        synonym_map=synonym_map,
    )


def write_synthetic_dataset(dataset: SyntheticDataset, out_dir: str | Path) -> dict[str, str]:
    """Write corpus/queries/qrels/pairs/synonyms files; returns the paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "corpus": str(out / "corpus.jsonl"),
        "queries": str(out / "queries.jsonl"),
        "qrels": str(out / "qrels.tsv"),
        "pairs": str(out / "pairs.jsonl"),
        "synonyms": str(out / "synonyms.json"),
    }
    save_corpus(dataset.corpus, paths["corpus"])
    save_queries(dataset.queries, paths["queries"])
    save_qrels(dataset.qrels, paths["qrels"])
    save_pairs(dataset.pairs, paths["pairs"])
    with open(paths["synonyms"], "w", encoding="utf-8") as f:
        json.dump(dataset.synonym_map, f, ensure_ascii=False, indent=2, sort_keys=True)
        f.write("\n")
    return paths


def single_query_search(
    query_text: str,
    k: int,
    mode: str,
    index: InvertedIndex | None = None,
    doc_store: VectorStore | None = None,
    provider=None,
    fusion: FusionConfig = FusionConfig(),
) -> list[tuple[str, float]]:
    """One query through any of the three systems; shared by CLI and service."""
    if k < 1:
        raise ConfigError(f"k must be >= 1, got {k}")
    if mode not in SYSTEM_TAGS:
        raise ConfigError(f"mode must be one of {SYSTEM_TAGS}, got '{mode}'")
    if mode in ("bm25", "hybrid") and index is None:
        raise ConfigError(f"mode '{mode}' requires a BM25 index")
    if mode in ("dense", "hybrid") and (doc_store is None or provider is None):
        raise ConfigError(f"mode '{mode}' requires document vectors and an embedding provider")

    if mode == "bm25":
        return search(index, query_text, k)
    query_vec = provider.embed_texts([query_text], kind="query")[0]
    if mode == "dense":
        return dense_search(doc_store, query_vec, k)
    depth = max(k, fusion.depth)
    lex_run = Run(rankings={"q": search(index, query_text, depth)}, tag="bm25")
    den_run = Run(rankings={"q": dense_search(doc_store, query_vec, depth)}, tag="dense")
    fused = fuse(lex_run, den_run, fusion, tag="hybrid")
    return fused.rankings["q"][:k]
