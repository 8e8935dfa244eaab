"""faqrank: hybrid lexical+dense FAQ retrieval with an evaluation harness.

The package covers the full retrieval-experiment loop: corpus ingestion,
Devanagari-aware text normalization, BM25 over an inverted index, dense
cosine-similarity retrieval over a vector store, score/rank fusion of the
two, binary-relevance IR metrics, and paired significance tests between
systems.
"""

__version__ = "0.1.0"

from faqrank.errors import ConfigError, DataError, FaqrankError, StageError

__all__ = [
    "ConfigError",
    "DataError",
    "FaqrankError",
    "StageError",
    "__version__",
]
