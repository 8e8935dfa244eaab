"""The embedder behind the retrieval engine's remote-provider client.

Covers the full remote loop: the engine's experiment pipeline embedding
its corpus and queries through this package's /embed endpoint.
"""

import torch

from faqrank.dense import EmbeddingProviderSpec, RemoteEmbedder
from faqrank.pipeline import (
    ExperimentConfig,
    ExperimentPaths,
    SyntheticSpec,
    generate_synthetic_dataset,
    run_experiment,
    write_synthetic_dataset,
)

from faqembed.export import encode_texts
from faqembed.model import HashEmbedder
from faqembed.server import serve_embeddings


def test_engine_remote_client_matches_local_encoding():
    torch.manual_seed(3)
    model = HashEmbedder(n_buckets=256, dim=32, query_prefix="query: ",
                         passage_prefix="passage: ")
    server, _ = serve_embeddings(model)
    try:
        url = f"http://127.0.0.1:{server.server_address[1]}"
        # the client applies prefixes itself, so the served model must not
        # double-apply them; hand the client the model's own prefixes
        client = RemoteEmbedder(url, dim=32, query_prefix="", passage_prefix="")
        texts = ["राहदानी नवीकरण", "फारम कहाँ पाइन्छ"]
        remote_q = client.embed_texts(texts, kind="query")
        local_q = encode_texts(model, texts, "query").numpy()
        assert abs(remote_q - local_q).max() <= 1e-9
    finally:
        server.shutdown()


def test_experiment_pipeline_over_remote_provider(tmp_path):
    dataset = generate_synthetic_dataset(
        SyntheticSpec(n_queries=6, relevant_per_query=3, n_distractors=20,
                      vocabulary_size=500, paraphrase_noise=0.0),
        seed=5,
    )
    paths = write_synthetic_dataset(dataset, tmp_path / "data")
    torch.manual_seed(9)
    model = HashEmbedder(n_buckets=512, dim=48)
    server, _ = serve_embeddings(model)
    try:
        url = f"http://127.0.0.1:{server.server_address[1]}"
        config = ExperimentConfig(
            paths=ExperimentPaths(corpus=paths["corpus"], queries=paths["queries"],
                                  qrels=paths["qrels"]),
            provider=EmbeddingProviderSpec(kind="remote", dim=48, url=url),
            k_values=[5],
            seed=5,
        )
        out = tmp_path / "exp"
        summary = run_experiment(config, out)
        assert summary["evaluated_queries"] == 6
        assert (out / "runs" / "dense.trec").exists()
        assert (out / "significance.json").exists()
    finally:
        server.shutdown()
