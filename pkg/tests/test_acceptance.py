"""Acceptance suite.

One test per criterion, each pinned to its stated tolerance and runtime
budget, printing a PASS line when it holds. Run with ``pytest -s`` to see
the lines as they print.
"""

import json
import math
import random
import time
import urllib.parse
import urllib.request

import numpy as np
import pytest

from faqrank.cli import main as cli_main
from faqrank.corpus import QrelSet, load_corpus
from faqrank.dense import (
    MnrlConfig,
    MockEmbedder,
    ensure_unit_rows,
    import_vectors,
    mnrl_loss,
    write_vector_file,
)
from faqrank.eval import Run, evaluate_run
from faqrank.hybrid import FusionConfig, fuse
from faqrank.lexical import BM25Params, build_index, bm25_score, search
from faqrank.pipeline import (
    ExperimentConfig,
    ExperimentPaths,
    SyntheticSpec,
    generate_synthetic_dataset,
    run_experiment,
    write_synthetic_dataset,
)
from faqrank.dense import EmbeddingProviderSpec
from faqrank.service import SearchState, serve_in_thread
from faqrank.stats import (
    MARKER_BETA,
    PairedSample,
    paired_t_test,
    wilcoxon_signed_rank,
)
from faqrank.corpus import Corpus, Document
from oracles import naive_bm25_ranking, naive_metrics, naive_mnrl


def _random_run_and_qrels(rng: random.Random):
    n_docs = rng.randint(5, 200)
    doc_ids = [f"d{i:04d}" for i in range(n_docs)]
    n_queries = rng.randint(1, 50)
    rankings, judgments = {}, {}
    for qi in range(n_queries):
        qid = f"q{qi:03d}"
        retrieved = rng.sample(doc_ids, rng.randint(0, min(30, n_docs)))
        scores = sorted((rng.random() for _ in retrieved), reverse=True)
        rankings[qid] = list(zip(retrieved, scores))
        relevant = rng.sample(doc_ids, rng.randint(1, min(12, n_docs)))
        judgments[qid] = {d: 1 for d in relevant}
    return Run(rankings=rankings, tag="rand"), QrelSet(judgments)


def test_criterion_1_metric_oracle_equivalence():
    rng = random.Random(20260808)
    start = time.monotonic()
    checked = 0
    for _ in range(200):
        run, qrels = _random_run_and_qrels(rng)
        report = evaluate_run(run, qrels, [1, 5, 10])
        for qid in qrels.query_ids():
            ranking_ids = [d for d, _ in run.rankings.get(qid, [])]
            relevant = qrels.relevant(qid)
            for k in (1, 5, 10):
                expected = naive_metrics(ranking_ids, relevant, k)
                for metric, want in expected.items():
                    got = report.per_query[f"{metric}@{k}"][qid]
                    assert abs(got - want) <= 1e-9, (qid, metric, k)
                    checked += 1
    elapsed = time.monotonic() - start
    assert elapsed < 5.0, f"metric equivalence took {elapsed:.2f}s"
    print(f"\nACCEPTANCE 1 PASS - {checked} metric values match the brute-force "
          f"scorer to 1e-9 across 200 instances in {elapsed:.2f}s")


def test_criterion_2_worked_metric_example():
    run = Run(
        rankings={"q1": [("d9", 0.9), ("d1", 0.8), ("d7", 0.7), ("d2", 0.6), ("d8", 0.5)]},
        tag="worked",
    )
    qrels = QrelSet({"q1": {"d1": 1, "d2": 1, "d3": 1}})
    report = evaluate_run(run, qrels, [5])
    assert report.aggregate["recall@5"] == pytest.approx(2 / 3, abs=1e-9)
    assert report.aggregate["precision@5"] == pytest.approx(0.4, abs=1e-9)
    assert report.aggregate["mrr@5"] == pytest.approx(0.5, abs=1e-9)
    assert report.aggregate["ndcg@5"] == pytest.approx(0.49819, abs=1e-5)
    assert report.aggregate["accuracy@5"] == 1.0
    print("\nACCEPTANCE 2 PASS - worked 5-document example: recall 2/3, "
          "precision 0.4, mrr 0.5, ndcg 0.49819, accuracy 1")


def test_criterion_3_bm25_equivalence():
    rng = random.Random(31337)
    start = time.monotonic()
    for trial in range(50):
        n_docs = rng.randint(5, 150) if trial < 47 else rng.randint(600, 1000)
        vocab = [f"t{i}" for i in range(rng.randint(8, 60))]
        texts = {
            f"d{i:04d}": " ".join(rng.choices(vocab, k=rng.randint(1, 25)))
            for i in range(n_docs)
        }
        corpus = Corpus([Document(doc_id, text) for doc_id, text in texts.items()])
        index = build_index(corpus, BM25Params(k1=1.2, b=0.75))
        query = " ".join(rng.choices(vocab, k=rng.randint(1, 6)))
        expected = naive_bm25_ranking(
            {d: t.split() for d, t in texts.items()}, query.split(), 1.2, 0.75
        )
        actual = search(index, query, n_docs)
        assert [d for d, _ in actual] == [d for d, _ in expected], f"trial {trial}"
        for (_, got), (_, want) in zip(actual, expected):
            assert abs(got - want) <= 1e-9 * max(1.0, abs(want))
    # hand-computed three-document score
    three = Corpus([Document("d1", "a b"), Document("d2", "a c"), Document("d3", "b c")])
    index = build_index(three, BM25Params(k1=1.2, b=0.75))
    assert bm25_score(index, ["a"], "d1") == pytest.approx(0.4700, abs=1e-4)
    elapsed = time.monotonic() - start
    assert elapsed < 10.0, f"bm25 equivalence took {elapsed:.2f}s"
    print(f"\nACCEPTANCE 3 PASS - 50 random corpora match brute-force BM25; "
          f"hand example 0.4700 reproduced; {elapsed:.2f}s")


def test_criterion_4_mnrl_loss():
    rng = np.random.default_rng(44)
    # random batches against the materialized softmax
    for _ in range(30):
        batch = int(rng.integers(1, 65))
        dim = int(rng.integers(2, 129))
        Q = rng.normal(size=(batch, dim))
        P = rng.normal(size=(batch, dim))
        scale = float(rng.uniform(0.5, 40.0))
        ours = mnrl_loss(Q, P, MnrlConfig(scale=scale))
        brute = naive_mnrl(Q.tolist(), P.tolist(), scale)
        assert abs(ours - brute) <= 1e-9
    # single-pair batch is exactly zero
    single = rng.normal(size=(1, 16))
    assert mnrl_loss(single, single) == 0.0
    # identical-vector batch collapses to ln B
    for batch in (2, 8, 64):
        vecs = np.tile(rng.normal(size=16), (batch, 1))
        loss = mnrl_loss(vecs, vecs, MnrlConfig(scale=20.0))
        assert abs(loss - math.log(batch)) <= 1e-9
    print("\nACCEPTANCE 4 PASS - ranking loss matches brute-force softmax to 1e-9; "
          "B=1 gives 0; identical batch gives ln B")


def test_criterion_5_statistics():
    def from_diffs(diffs):
        return PairedSample(
            {f"q{i:03d}": 0.0 for i in range(len(diffs))},
            {f"q{i:03d}": float(d) for i, d in enumerate(diffs)},
        )

    t_result = paired_t_test(from_diffs([1, 2, 3, 4, 5]))
    assert t_result.statistic == pytest.approx(4.24264, abs=1e-5)
    assert t_result.p_value == pytest.approx(0.01324, abs=1e-4)

    w_result = wilcoxon_signed_rank(from_diffs([1, 2, 3, 4, 5]))
    assert w_result.p_value == 0.0625

    rng = np.random.default_rng(555)
    worst = 0.0
    for _ in range(100):
        diffs = list(rng.normal(size=25))
        sample = from_diffs(diffs)
        exact = wilcoxon_signed_rank(sample, exact_cutoff=25)
        approx = wilcoxon_signed_rank(sample, exact_cutoff=0)
        worst = max(worst, abs(exact.p_value - approx.p_value))
    assert worst < 0.02, f"worst exact-vs-normal gap {worst:.4f}"
    print(f"\nACCEPTANCE 5 PASS - t = 4.24264, p = 0.01324; exact Wilcoxon 0.0625; "
          f"exact vs normal within {worst:.4f} at n=25")


def _distinct_score_run_pair(rng: random.Random):
    doc_ids = [f"d{i:03d}" for i in range(40)]
    runs = []
    for tag in ("lex", "den"):
        rankings = {}
        for qi in range(3):
            chosen = rng.sample(doc_ids, rng.randint(3, 20))
            scores = rng.sample(range(1, 100_000), len(chosen))
            scores = sorted((s / 1000.0 for s in scores), reverse=True)
            rankings[f"q{qi}"] = list(zip(chosen, scores))
        runs.append(Run(rankings=rankings, tag=tag))
    return runs


def test_criterion_6_fusion_properties():
    rng = random.Random(66)
    for _ in range(100):
        lex, den = _distinct_score_run_pair(rng)
        for alpha, source in ((0.0, lex), (1.0, den)):
            fused = fuse(lex, den, FusionConfig(alpha=alpha, depth=100))
            for qid, ranking in source.rankings.items():
                source_ids = [d for d, _ in ranking]
                fused_ids = [d for d, _ in fused.rankings[qid] if d in set(source_ids)]
                assert fused_ids == source_ids, (alpha, qid)
    # document at rank 1 in both runs under RRF
    lex = Run(rankings={"q": [("a", 2.0), ("b", 1.0)]}, tag="lex")
    den = Run(rankings={"q": [("a", 0.9), ("c", 0.1)]}, tag="den")
    fused = fuse(lex, den, FusionConfig(method="rrf", rrf_k=60))
    assert abs(dict(fused.rankings["q"])["a"] - 2 / 61) <= 1e-9
    # byte-exact determinism
    lex, den = _distinct_score_run_pair(rng)
    once = fuse(lex, den, FusionConfig())
    twice = fuse(lex, den, FusionConfig())
    assert json.dumps(once.rankings, sort_keys=True) == json.dumps(twice.rankings, sort_keys=True)
    print("\nACCEPTANCE 6 PASS - alpha 0/1 reproduce single-system orders on 100 "
          "random pairs; RRF 2/61; fusion byte-deterministic")


def test_criterion_7_directional_claim(tmp_path):
    start = time.monotonic()
    spec = SyntheticSpec(
        n_queries=82, relevant_per_query=10, n_distractors=2000,
        vocabulary_size=5000, paraphrase_noise=1.0,
    )
    shifted = generate_synthetic_dataset(spec, seed=7)
    paths = write_synthetic_dataset(shifted, tmp_path / "shifted")
    config = ExperimentConfig(
        paths=ExperimentPaths(corpus=paths["corpus"], queries=paths["queries"], qrels=paths["qrels"]),
        provider=EmbeddingProviderSpec(kind="mock", dim=256, synonyms_path=paths["synonyms"]),
        k_values=[5, 10],
        seed=7,
    )
    out = tmp_path / "exp"
    summary = run_experiment(config, out)
    bm25_recall = summary["aggregate"]["bm25"]["recall@10"]
    dense_recall = summary["aggregate"]["dense"]["recall@10"]
    assert dense_recall > bm25_recall
    table = json.loads((out / "significance.json").read_text())
    t_entry = table["systems"]["dense"]["recall@10"]["tests"]["paired_t"]
    assert t_entry["p_value"] < 0.01
    assert t_entry["marker"] == MARKER_BETA

    # noise-free corpus: lexical retrieval is structurally perfect
    clean = generate_synthetic_dataset(
        SyntheticSpec(82, 10, 2000, 5000, paraphrase_noise=0.0), seed=7
    )
    index = build_index(clean.corpus, BM25Params())
    run = Run(
        rankings={q.id: search(index, q.text, 10) for q in clean.queries}, tag="bm25"
    )
    report = evaluate_run(run, clean.qrels, [10])
    assert report.aggregate["accuracy@10"] == 1.0
    elapsed = time.monotonic() - start
    assert elapsed < 30.0, f"directional claim took {elapsed:.2f}s"
    print(f"\nACCEPTANCE 7 PASS - dense recall@10 {dense_recall:.4f} > bm25 "
          f"{bm25_recall:.4f} with p {t_entry['p_value']:.2e} (beta); noise-free "
          f"bm25 accuracy@10 = 1.0; {elapsed:.2f}s")


def test_criterion_8_end_to_end_determinism(tmp_path, capsys):
    ds = generate_synthetic_dataset(SyntheticSpec(20, 5, 200, 1500, 0.5), seed=99)
    paths = write_synthetic_dataset(ds, tmp_path / "data")
    config = ExperimentConfig(
        paths=ExperimentPaths(corpus=paths["corpus"], queries=paths["queries"], qrels=paths["qrels"]),
        provider=EmbeddingProviderSpec(kind="mock", dim=128, synonyms_path=paths["synonyms"]),
        k_values=[5, 10],
        seed=99,
    )
    run_experiment(config, tmp_path / "a")
    run_experiment(config, tmp_path / "b")
    for rel in (
        "runs/bm25.trec", "runs/dense.trec", "runs/hybrid.trec",
        "reports/bm25.json", "reports/dense.json", "reports/hybrid.json",
        "significance.json", "significance.txt", "config.json",
    ):
        a = (tmp_path / "a" / rel).read_bytes()
        b = (tmp_path / "b" / rel).read_bytes()
        assert a == b, f"nondeterministic artifact {rel}"

    # CLI vs service parity on 20 random queries over the same artifacts
    corpus = load_corpus(paths["corpus"])
    index_path = tmp_path / "index.json"
    rc = cli_main(["index", "--corpus", paths["corpus"], "--out", str(index_path)])
    assert rc == 0
    embedder = MockEmbedder(128)
    docs = list(corpus)
    matrix = ensure_unit_rows(embedder.embed_texts([d.text for d in docs], kind="passage"))
    vec_path = tmp_path / "docs.vec"
    write_vector_file(vec_path, [d.id for d in docs], matrix, model="mock-128", normalized=True)

    from faqrank.lexical import load_index

    state = SearchState(
        corpus=corpus,
        index=load_index(index_path),
        doc_store=import_vectors(vec_path),
        provider=embedder,
    )
    server, _thread = serve_in_thread(state)
    port = server.server_address[1]
    try:
        rng = random.Random(8)
        queries = rng.sample([q.text for q in ds.queries], 20)
        capsys.readouterr()
        for i, query in enumerate(queries):
            mode = ("bm25", "dense", "hybrid")[i % 3]
            rc = cli_main([
                "search", "--mode", mode, "--index", str(index_path),
                "--vectors", str(vec_path), "--query", query, "-k", "10",
            ])
            assert rc == 0
            rows = [
                (line.split("\t")[0], float(line.split("\t")[1]))
                for line in capsys.readouterr().out.strip().splitlines()
                if line
            ]
            url = f"http://127.0.0.1:{port}/search?q={urllib.parse.quote(query)}&k=10&mode={mode}"
            with urllib.request.urlopen(url) as response:
                body = json.loads(response.read().decode("utf-8"))
            served = [(r["id"], r["score"]) for r in body["results"]]
            assert served == rows, f"parity broke for mode {mode}"
    finally:
        server.shutdown()
    print("\nACCEPTANCE 8 PASS - repeated experiments byte-identical; CLI and "
          "service agree on 20 random queries")
