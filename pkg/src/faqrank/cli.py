"""Command-line interface.

Exit codes: 0 success, 1 usage error, 2 data error, 3 internal error.
Machine-readable output goes to stdout; diagnostics go to stderr, so
stdout of ``search``/``eval``/``compare`` can be piped or re-parsed.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from faqrank.corpus import (
    find_near_duplicates,
    load_corpus,
    load_pairs,
    load_qrels,
    load_queries,
    save_corpus,
    save_pairs,
    save_qrels,
    save_queries,
)
from faqrank.dense import (
    MockEmbedder,
    RemoteEmbedder,
    VectorStore,
    ensure_unit_rows,
    import_vectors,
    load_synonyms,
)
from faqrank.errors import ConfigError, DataError, FaqrankError, StageError
from faqrank.eval import MetricReport, evaluate_run, read_trec_run, write_trec_run
from faqrank.hybrid import FusionConfig, fuse
from faqrank.lexical import BM25Params, build_index, load_index, save_index
from faqrank.pipeline import (
    ExperimentConfig,
    SyntheticSpec,
    generate_synthetic_dataset,
    run_experiment,
    single_query_search,
    write_synthetic_dataset,
)
from faqrank.stats import render_significance_table, significance_table

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_INTERNAL = 3


def _parse_k_values(ctx, param, value):
    try:
        k_values = [int(part) for part in value.split(",") if part.strip()]
    except ValueError:
        raise click.BadParameter(f"expected comma-separated integers, got '{value}'")
    if not k_values or any(k < 1 for k in k_values):
        raise click.BadParameter("cutoffs must be positive integers")
    return k_values


@click.group()
@click.option("--config", "config_path", type=click.Path(), default=None, help="Experiment config JSON.")
@click.option("--seed", type=int, default=None, help="Override the seed.")
@click.option("--json", "as_json", is_flag=True, help="Emit JSON on stdout instead of tables.")
@click.pass_context
def cli(ctx, config_path, seed, as_json):
    """Hybrid FAQ retrieval: index, search, fuse, evaluate, compare."""
    ctx.obj = {"config_path": config_path, "seed": seed, "json": as_json}


@cli.command()
@click.option("--corpus", "corpus_path", type=click.Path(), default=None)
@click.option("--queries", "queries_path", type=click.Path(), default=None)
@click.option("--qrels", "qrels_path", type=click.Path(), default=None)
@click.option("--pairs", "pairs_path", type=click.Path(), default=None)
@click.option("--out", "out_dir", type=click.Path(), default=None, help="Write canonical copies here.")
@click.option("--dedup-threshold", type=float, default=None, help="Report near-duplicate pairs at or above this cosine.")
@click.option("--dim", type=int, default=256, help="Mock embedding dim for the duplicate check.")
@click.pass_context
def ingest(ctx, corpus_path, queries_path, qrels_path, pairs_path, out_dir, dedup_threshold, dim):
    """Validate input files, report counts, optionally canonicalize."""
    if not any([corpus_path, queries_path, qrels_path, pairs_path]):
        raise click.UsageError("nothing to ingest: pass at least one input file")
    if qrels_path and not (corpus_path and queries_path):
        raise click.UsageError("--qrels needs --corpus and --queries for id validation")

    counts = {}
    corpus = queries = None
    if corpus_path:
        corpus = load_corpus(corpus_path)
        counts["corpus"] = len(corpus)
    if queries_path:
        queries = load_queries(queries_path)
        counts["queries"] = len(queries)
    qrels = None
    if qrels_path:
        qrels = load_qrels(qrels_path, corpus=corpus, queries=queries)
        counts["qrels_queries"] = len(qrels)
        counts["avg_relevant_per_query"] = qrels.avg_relevant_per_query()
    pairs = None
    if pairs_path:
        pairs = load_pairs(pairs_path)
        counts["pairs"] = len(pairs)

    if out_dir:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        if corpus is not None:
            save_corpus(corpus, out / "corpus.jsonl")
        if queries is not None:
            save_queries(queries, out / "queries.jsonl")
        if qrels is not None:
            save_qrels(qrels, out / "qrels.tsv")
        if pairs is not None:
            save_pairs(pairs, out / "pairs.jsonl")
        click.echo(f"canonical copies written to {out}", err=True)

    duplicates = {}
    if dedup_threshold is not None:
        embedder = MockEmbedder(dim)
        if corpus is not None:
            docs = list(corpus)
            hits = find_near_duplicates([d.text for d in docs], embedder, dedup_threshold)
            duplicates["corpus"] = [(docs[i].id, docs[j].id, sim) for i, j, sim in hits]
        if queries is not None:
            qs = list(queries)
            hits = find_near_duplicates([q.text for q in qs], embedder, dedup_threshold)
            duplicates["queries"] = [(qs[i].id, qs[j].id, sim) for i, j, sim in hits]

    if ctx.obj["json"]:
        click.echo(json.dumps({"counts": counts, "duplicates": duplicates}, ensure_ascii=False))
        return
    for name, value in counts.items():
        click.echo(f"{name}\t{value}")
    for kind, pairs_found in duplicates.items():
        for id_a, id_b, sim in pairs_found:
            click.echo(f"duplicate\t{kind}\t{id_a}\t{id_b}\t{sim!r}")


@cli.command()
@click.option("--corpus", "corpus_path", type=click.Path(), required=True)
@click.option("--out", "out_path", type=click.Path(), required=True)
@click.option("--k1", type=float, default=1.2, show_default=True)
@click.option("--b", type=float, default=0.75, show_default=True)
@click.pass_context
def index(ctx, corpus_path, out_path, k1, b):
    """Build and persist a BM25 index."""
    corpus = load_corpus(corpus_path)
    if len(corpus) == 0:
        raise DataError(f"{corpus_path}: empty corpus")
    idx = build_index(corpus, BM25Params(k1=k1, b=b))
    save_index(idx, out_path)
    stats = {"documents": idx.N, "vocabulary": idx.vocabulary_size(), "avgdl": idx.avgdl}
    if ctx.obj["json"]:
        click.echo(json.dumps(stats))
    else:
        click.echo(f"documents\t{idx.N}")
        click.echo(f"vocabulary\t{idx.vocabulary_size()}")
        click.echo(f"avgdl\t{idx.avgdl!r}")


@cli.command("embed-import")
@click.option("--vectors", "vectors_path", type=click.Path(), required=True)
@click.option("--expect-dim", type=int, default=None)
@click.pass_context
def embed_import(ctx, vectors_path, expect_dim):
    """Validate a vector file against the header's claims."""
    store = import_vectors(vectors_path, expected_dim=expect_dim)
    stats = {"count": len(store), "dim": store.dim, "normalized": store.normalized}
    if ctx.obj["json"]:
        click.echo(json.dumps(stats))
    else:
        for name, value in stats.items():
            click.echo(f"{name}\t{value}")


def _build_query_provider(provider_kind, dim, synonyms_path, url, query_prefix, passage_prefix):
    if provider_kind == "remote":
        if not url:
            raise click.UsageError("--provider remote needs --url")
        return RemoteEmbedder(url, dim, query_prefix=query_prefix, passage_prefix=passage_prefix)
    canonical = load_synonyms(synonyms_path) if synonyms_path else None
    return MockEmbedder(dim, canonical_map=canonical, query_prefix=query_prefix, passage_prefix=passage_prefix)


@cli.command()
@click.option("--mode", type=click.Choice(["bm25", "dense", "hybrid"]), default="bm25", show_default=True)
@click.option("--query", "query_text", required=True)
@click.option("-k", "k", type=click.IntRange(min=1), default=10, show_default=True)
@click.option("--index", "index_path", type=click.Path(), default=None, help="BM25 index file.")
@click.option("--vectors", "vectors_path", type=click.Path(), default=None, help="Document vector file.")
@click.option("--embed-corpus", "embed_corpus_path", type=click.Path(), default=None,
              help="Embed this corpus with the provider instead of importing vectors.")
@click.option("--provider", "provider_kind", type=click.Choice(["mock", "remote"]), default="mock", show_default=True)
@click.option("--dim", type=int, default=256, show_default=True)
@click.option("--synonyms", "synonyms_path", type=click.Path(), default=None)
@click.option("--url", default=None, help="Remote embedding endpoint.")
@click.option("--query-prefix", default="")
@click.option("--passage-prefix", default="")
@click.option("--fusion-method", type=click.Choice(["weighted_minmax", "rrf"]), default="weighted_minmax")
@click.option("--alpha", type=float, default=0.5, show_default=True)
@click.option("--rrf-k", type=int, default=60, show_default=True)
@click.option("--depth", type=int, default=100, show_default=True)
@click.pass_context
def search(ctx, mode, query_text, k, index_path, vectors_path, embed_corpus_path, provider_kind,
           dim, synonyms_path, url, query_prefix, passage_prefix, fusion_method, alpha, rrf_k, depth):
    """Run one query; prints tab-separated (id, score) rows."""
    idx = None
    if mode in ("bm25", "hybrid"):
        if not index_path:
            raise click.UsageError(f"mode '{mode}' needs --index")
        idx = load_index(index_path)

    doc_store = provider = None
    if mode in ("dense", "hybrid"):
        if not vectors_path and not embed_corpus_path:
            raise click.UsageError(f"mode '{mode}' needs --vectors or --embed-corpus")
        if vectors_path:
            doc_store = import_vectors(vectors_path)
            dim = doc_store.dim
            provider = _build_query_provider(provider_kind, dim, synonyms_path, url, query_prefix, passage_prefix)
        else:
            provider = _build_query_provider(provider_kind, dim, synonyms_path, url, query_prefix, passage_prefix)
            corpus = load_corpus(embed_corpus_path)
            if len(corpus) == 0:
                raise DataError(f"{embed_corpus_path}: empty corpus")
            docs = list(corpus)
            matrix = ensure_unit_rows(provider.embed_texts([d.text for d in docs], kind="passage"))
            doc_store = VectorStore({d.id: row for d, row in zip(docs, matrix)}, normalized=True)

    fusion = FusionConfig(method=fusion_method, alpha=alpha, rrf_k=rrf_k, depth=depth)
    results = single_query_search(
        query_text, k, mode, index=idx, doc_store=doc_store, provider=provider, fusion=fusion
    )
    if ctx.obj["json"]:
        click.echo(json.dumps(
            [{"rank": r, "id": doc_id, "score": score} for r, (doc_id, score) in enumerate(results, 1)]
        ))
        return
    for doc_id, score in results:
        click.echo(f"{doc_id}\t{score!r}")


@cli.command("eval")
@click.option("--run", "run_path", type=click.Path(), required=True)
@click.option("--qrels", "qrels_path", type=click.Path(), required=True)
@click.option("-k", "k_values", default="5,10", show_default=True, callback=_parse_k_values)
@click.option("--report", "report_path", type=click.Path(), default=None, help="Write the JSON report here.")
@click.option("--corpus", "corpus_path", type=click.Path(), default=None, help="Validate qrels doc ids.")
@click.option("--queries", "queries_path", type=click.Path(), default=None, help="Validate qrels query ids.")
@click.pass_context
def eval_cmd(ctx, run_path, qrels_path, k_values, report_path, corpus_path, queries_path):
    """Score a TREC run against qrels."""
    run = read_trec_run(run_path)
    corpus = load_corpus(corpus_path) if corpus_path else None
    queries = load_queries(queries_path) if queries_path else None
    qrels = load_qrels(qrels_path, corpus=corpus, queries=queries)
    report = evaluate_run(run, qrels, k_values)
    if report_path:
        report.save(report_path)
        click.echo(f"report written to {report_path}", err=True)
    if ctx.obj["json"]:
        click.echo(json.dumps(report.to_json_dict(), ensure_ascii=False))
        return
    click.echo(f"tag\t{report.tag}")
    click.echo(f"evaluated_queries\t{report.evaluated_queries}")
    for name, value in report.aggregate.items():
        click.echo(f"{name}\t{value:.5f}")


@cli.command("fuse")
@click.option("--lexical", "lexical_path", type=click.Path(), required=True)
@click.option("--dense", "dense_path", type=click.Path(), required=True)
@click.option("--out", "out_path", type=click.Path(), required=True)
@click.option("--method", type=click.Choice(["weighted_minmax", "rrf"]), default="weighted_minmax", show_default=True)
@click.option("--alpha", type=float, default=0.5, show_default=True)
@click.option("--rrf-k", type=int, default=60, show_default=True)
@click.option("--depth", type=int, default=100, show_default=True)
@click.option("--tag", default="hybrid", show_default=True)
@click.pass_context
def fuse_cmd(ctx, lexical_path, dense_path, out_path, method, alpha, rrf_k, depth, tag):
    """Fuse a lexical and a dense run file into one run file."""
    lexical_run = read_trec_run(lexical_path)
    dense_run = read_trec_run(dense_path)
    config = FusionConfig(method=method, alpha=alpha, rrf_k=rrf_k, depth=depth)
    fused = fuse(lexical_run, dense_run, config, tag=tag)
    write_trec_run(fused, out_path)
    click.echo(f"fused {len(fused.rankings)} queries into {out_path}", err=True)


@cli.command()
@click.option("--baseline", "baseline_tag", required=True)
@click.option("--out", "out_path", type=click.Path(), default=None, help="Write the JSON table here.")
@click.argument("report_paths", nargs=-1, type=click.Path())
@click.pass_context
def compare(ctx, baseline_tag, out_path, report_paths):
    """Significance of every system against the baseline report."""
    if len(report_paths) < 2:
        raise click.UsageError("need at least two report files")
    reports = [MetricReport.load(p) for p in report_paths]
    by_tag = {r.tag: r for r in reports}
    if baseline_tag not in by_tag:
        raise ConfigError(f"baseline tag '{baseline_tag}' not among the reports: {sorted(by_tag)}")
    baseline = by_tag[baseline_tag]
    candidates = [r for r in reports if r.tag != baseline_tag]
    table = significance_table(baseline, candidates)
    if out_path:
        with open(out_path, "w", encoding="utf-8") as f:
            json.dump(table, f, ensure_ascii=False, indent=2, sort_keys=True)
            f.write("\n")
        click.echo(f"significance table written to {out_path}", err=True)
    if ctx.obj["json"]:
        click.echo(json.dumps(table, ensure_ascii=False))
    else:
        click.echo(render_significance_table(table, baseline=baseline), nl=False)


@cli.command()
@click.option("--queries", "n_queries", type=int, default=82, show_default=True)
@click.option("--relevant-per-query", type=int, default=10, show_default=True)
@click.option("--distractors", type=int, default=2000, show_default=True)
@click.option("--vocab", type=int, default=5000, show_default=True)
@click.option("--noise", type=float, default=0.0, show_default=True)
@click.option("--out", "out_dir", type=click.Path(), required=True)
@click.pass_context
def synth(ctx, n_queries, relevant_per_query, distractors, vocab, noise, out_dir):
    """Generate a synthetic corpus/queries/qrels/pairs dataset."""
    seed = ctx.obj["seed"] if ctx.obj["seed"] is not None else 0
    spec = SyntheticSpec(
        n_queries=n_queries,
        relevant_per_query=relevant_per_query,
        n_distractors=distractors,
        vocabulary_size=vocab,
        paraphrase_noise=noise,
    )
    dataset = generate_synthetic_dataset(spec, seed)
    paths = write_synthetic_dataset(dataset, out_dir)
    summary = {
        "queries": len(dataset.queries),
        "documents": len(dataset.corpus),
        "relevant": sum(dataset.qrels.relevant_counts().values()),
        "paths": paths,
    }
    if ctx.obj["json"]:
        click.echo(json.dumps(summary))
        return
    for name in ("queries", "documents", "relevant"):
        click.echo(f"{name}\t{summary[name]}")
    for name, path in paths.items():
        click.echo(f"{name}\t{path}")


@cli.command()
@click.option("--out", "out_dir", type=click.Path(), required=True)
@click.pass_context
def experiment(ctx, out_dir):
    """Run the full retrieve-evaluate-compare loop from a config."""
    if not ctx.obj["config_path"]:
        raise click.UsageError("experiment needs a config: faqrank --config <path> experiment --out <dir>")
    config = ExperimentConfig.load(ctx.obj["config_path"])
    if ctx.obj["seed"] is not None:
        config.seed = ctx.obj["seed"]
    summary = run_experiment(config, out_dir)
    if ctx.obj["json"]:
        click.echo(json.dumps(summary, ensure_ascii=False))
        return
    click.echo(f"out_dir\t{summary['out_dir']}")
    click.echo(f"baseline\t{summary['baseline']}")
    click.echo(f"evaluated_queries\t{summary['evaluated_queries']}")
    for tag in summary["systems"]:
        for metric, value in summary["aggregate"][tag].items():
            click.echo(f"{tag}\t{metric}\t{value:.5f}")


def main(argv: list[str] | None = None) -> int:
    """Run the CLI with the package's exit-code taxonomy."""
    try:
        cli.main(args=argv, standalone_mode=False, prog_name="faqrank")
        return EXIT_OK
    except click.exceptions.Exit as exc:
        return int(exc.exit_code)
    except click.Abort:
        click.echo("aborted", err=True)
        return EXIT_USAGE
    except click.UsageError as exc:
        click.echo(f"usage error: {exc.format_message()}", err=True)
        return EXIT_USAGE
    except ConfigError as exc:
        click.echo(f"usage error: {exc}", err=True)
        return EXIT_USAGE
    except StageError as exc:
        click.echo(f"error: {exc}", err=True)
        if isinstance(exc.cause, ConfigError):
            return EXIT_USAGE
        if isinstance(exc.cause, (DataError, OSError)):
            return EXIT_DATA
        return EXIT_INTERNAL
    except (DataError, OSError, UnicodeDecodeError) as exc:
        click.echo(f"data error: {exc}", err=True)
        return EXIT_DATA
    except FaqrankError as exc:
        click.echo(f"internal error: {exc}", err=True)
        return EXIT_INTERNAL
    except Exception as exc:  # noqa: BLE001 - last-resort CLI boundary
        click.echo(f"internal error: {exc}", err=True)
        return EXIT_INTERNAL


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
