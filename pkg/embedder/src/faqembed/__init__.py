"""faqembed: trainable sentence embeddings for retrieval.

Fine-tunes a compact hash-bucket embedding model with the in-batch
softmax ranking loss, exports vectors in the retrieval engine's vector
file format, and can serve embeddings over HTTP. The retrieval engine is
a separate package; the two meet only at file formats and the /embed
endpoint.
"""

__version__ = "0.1.0"


class EmbedderError(Exception):
    """Base error for this package."""


class ConfigError(EmbedderError):
    """Invalid configuration value."""


class DataError(EmbedderError):
    """Malformed or inconsistent input data."""
