"""Dense retrieval: cosine similarity over a flat vector store.

Search is exhaustive (no ANN structure) so rankings are exact and
deterministic. The module also houses the in-batch softmax ranking loss
used for embedding training and the embedding-provider abstractions:
a deterministic hash-bucket mock, vector-file import, and a remote HTTP
provider speaking the ``POST /embed`` contract.

Vector file format: first line a JSON header
``{"dim": int, "count": int, "normalized": bool, "model": str}``, then one
``{"_id": ..., "vector": [...]}`` object per line.
"""

from __future__ import annotations

import hashlib
import json
import urllib.request
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from faqrank.errors import ConfigError, DataError
from faqrank.text import normalize, tokenize

MOCK_MIN_DIM = 8
PROVIDER_KINDS = ("mock", "file", "remote")


def _as_vector(value, name: str) -> np.ndarray:
    vec = np.asarray(value, dtype=np.float64)
    if vec.ndim != 1:
        raise DataError(f"{name} must be a 1-d vector")
    if not np.all(np.isfinite(vec)):
        raise DataError(f"{name} contains non-finite values")
    return vec


def cosine_similarity(a, b) -> float:
    """Cosine of the angle between two vectors, clamped to [-1, 1]."""
    va = _as_vector(a, "a")
    vb = _as_vector(b, "b")
    if va.shape[0] != vb.shape[0]:
        raise DataError(f"dimension mismatch: {va.shape[0]} vs {vb.shape[0]}")
    na = float(np.linalg.norm(va))
    nb = float(np.linalg.norm(vb))
    if na == 0.0 or nb == 0.0:
        raise DataError("cosine similarity is undefined for a zero vector")
    return float(np.clip(float(va @ vb) / (na * nb), -1.0, 1.0))


def _stable_bucket(token: str, dim: int) -> int:
    digest = hashlib.blake2b(token.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "big") % dim


def ensure_unit_rows(matrix) -> np.ndarray:
    """Row-normalize a matrix, leaving rows already unit within 1e-6 bit-exact."""
    out = np.asarray(matrix, dtype=np.float64).copy()
    norms = np.linalg.norm(out, axis=1)
    if np.any(norms == 0.0):
        raise DataError("cannot normalize a zero vector")
    off = np.abs(norms - 1.0) > 1e-6
    out[off] = out[off] / norms[off, None]
    return out


def mock_embed(text: str, dim: int, canonical_map: dict[str, str] | None = None) -> np.ndarray:
    """Deterministic bag-of-tokens embedding.

    Tokens are hashed into ``dim`` buckets (stable across processes), bucket
    counts accumulated, and the vector L2-normalized. ``canonical_map``
    rewrites tokens before hashing, which lets callers fold a synonym table
    into the embedding space.
    """
    if dim < MOCK_MIN_DIM:
        raise ConfigError(f"mock embedding dim must be >= {MOCK_MIN_DIM}, got {dim}")
    tokens = tokenize(normalize(text))
    if not tokens:
        raise DataError("cannot embed text with no tokens")
    vec = np.zeros(dim, dtype=np.float64)
    for tok in tokens:
        if canonical_map:
            tok = canonical_map.get(tok, tok)
        vec[_stable_bucket(tok, dim)] += 1.0
    return vec / np.linalg.norm(vec)


class VectorStore:
    """Fixed-dimension embedding table keyed by id.

    Entries are held in ascending-id order so that similarity ties resolve
    to the smaller id under a stable sort. Zero vectors are rejected:
    they have no direction to compare against.
    """

    def __init__(self, entries: dict[str, np.ndarray] | dict[str, list[float]], normalized: bool):
        if not entries:
            raise DataError("vector store needs at least one entry")
        self.ids = sorted(entries)
        rows = []
        dim = None
        for vid in self.ids:
            vec = _as_vector(entries[vid], f"vector '{vid}'")
            if dim is None:
                dim = vec.shape[0]
            elif vec.shape[0] != dim:
                raise DataError(f"vector '{vid}' has dim {vec.shape[0]}, expected {dim}")
            rows.append(vec)
        self.dim = int(dim)
        self.matrix = np.vstack(rows)
        self.normalized = normalized
        self._norms = np.linalg.norm(self.matrix, axis=1)
        if np.any(self._norms == 0.0):
            zero_id = self.ids[int(np.argmax(self._norms == 0.0))]
            raise DataError(f"vector '{zero_id}' has zero norm")
        if normalized and np.any(np.abs(self._norms - 1.0) > 1e-6):
            bad = self.ids[int(np.argmax(np.abs(self._norms - 1.0) > 1e-6))]
            raise DataError(f"vector '{bad}' is not unit-norm but the store claims normalized")
        self._row = {vid: i for i, vid in enumerate(self.ids)}

    def __len__(self) -> int:
        return len(self.ids)

    def __contains__(self, vec_id: str) -> bool:
        return vec_id in self._row

    def vector(self, vec_id: str) -> np.ndarray:
        try:
            return self.matrix[self._row[vec_id]]
        except KeyError:
            raise DataError(f"unknown vector id '{vec_id}'") from None


def dense_search(store: VectorStore, query_vec, k: int) -> list[tuple[str, float]]:
    """Top-k store entries by cosine similarity to the query vector."""
    if k < 1:
        raise ConfigError(f"k must be >= 1, got {k}")
    q = _as_vector(query_vec, "query vector")
    if q.shape[0] != store.dim:
        raise DataError(f"query dim {q.shape[0]} does not match store dim {store.dim}")
    qn = float(np.linalg.norm(q))
    if qn == 0.0:
        raise DataError("cosine similarity is undefined for a zero vector")
    sims = np.clip((store.matrix @ q) / (store._norms * qn), -1.0, 1.0)
    # ids are stored ascending, so a stable sort breaks ties toward them
    order = np.argsort(-sims, kind="stable")[:k]
    return [(store.ids[i], float(sims[i])) for i in order]


@dataclass(frozen=True)
class MnrlConfig:
    """Scale on the similarity logits of the in-batch ranking loss."""

    scale: float = 20.0

    def __post_init__(self):
        if self.scale <= 0:
            raise ConfigError(f"scale must be > 0, got {self.scale}")


def mnrl_loss(query_vecs, positive_vecs, config: MnrlConfig = MnrlConfig()) -> float:
    """In-batch softmax cross-entropy over query/positive cosine similarities.

    Row i's positive is column i; the other columns act as negatives.
    Returns the batch mean: -(1/B) sum_i log softmax(s * cos(q_i, p_j))[i].
    """
    Q = np.asarray(query_vecs, dtype=np.float64)
    P = np.asarray(positive_vecs, dtype=np.float64)
    if Q.ndim != 2 or P.ndim != 2:
        raise DataError("batches must be 2-d arrays")
    if Q.shape != P.shape:
        raise DataError(f"batch shape mismatch: {Q.shape} vs {P.shape}")
    if Q.shape[0] < 1:
        raise DataError("batch must contain at least one pair")
    if not (np.all(np.isfinite(Q)) and np.all(np.isfinite(P))):
        raise DataError("batch contains non-finite values")
    qn = np.linalg.norm(Q, axis=1, keepdims=True)
    pn = np.linalg.norm(P, axis=1, keepdims=True)
    if np.any(qn == 0.0) or np.any(pn == 0.0):
        raise DataError("batch contains a zero vector")
    sims = np.clip((Q / qn) @ (P / pn).T, -1.0, 1.0)
    logits = config.scale * sims
    # row-wise log-sum-exp, max-shifted for stability
    m = logits.max(axis=1, keepdims=True)
    lse = m[:, 0] + np.log(np.exp(logits - m).sum(axis=1))
    losses = lse - np.diag(logits)
    return float(losses.mean())


def import_vectors(path: str | Path, expected_dim: int | None = None) -> VectorStore:
    """Load and validate a vector file.

    The header's dim and normalization claim are enforced: a claimed-
    normalized vector may deviate from unit norm by at most 1e-4. Vectors
    outside the store's tighter 1e-6 tolerance are re-normalized; vectors
    already inside it keep their exact bits.
    """
    with open(path, "r", encoding="utf-8") as f:
        header_line = f.readline()
        if not header_line.strip():
            raise DataError(f"{path}: missing vector file header")
        try:
            header = json.loads(header_line)
        except json.JSONDecodeError as exc:
            raise DataError(f"{path}: malformed header: {exc}") from None
        if not isinstance(header, dict):
            raise DataError(f"{path}: header must be a JSON object")
        for key, kind in (("dim", int), ("count", int), ("normalized", bool), ("model", str)):
            if not isinstance(header.get(key), kind):
                raise DataError(f"{path}: header field '{key}' missing or wrong type")
        dim = header["dim"]
        if dim < 1:
            raise DataError(f"{path}: header dim must be positive")
        if expected_dim is not None and dim != expected_dim:
            raise DataError(f"{path}: header dim {dim} does not match expected {expected_dim}")
        claimed_normalized = header["normalized"]

        entries: dict[str, np.ndarray] = {}
        for lineno, line in enumerate(f, 2):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}: malformed record at line {lineno}: {exc}") from None
            vec_id = obj.get("_id")
            if not isinstance(vec_id, str) or not vec_id:
                raise DataError(f"{path}: record at line {lineno} missing '_id'")
            if vec_id in entries:
                raise DataError(f"{path}: duplicate vector id '{vec_id}'")
            values = obj.get("vector")
            if not isinstance(values, list):
                raise DataError(f"{path}: record '{vec_id}' missing 'vector'")
            if len(values) != dim:
                raise DataError(f"{path}: record '{vec_id}' has {len(values)} values, header dim is {dim}")
            vec = _as_vector(values, f"vector '{vec_id}'")
            if claimed_normalized:
                norm = float(np.linalg.norm(vec))
                if abs(norm - 1.0) > 1e-4:
                    raise DataError(f"{path}: vector '{vec_id}' has norm {norm:.6f}, header claims normalized")
                if abs(norm - 1.0) > 1e-6:
                    vec = vec / norm
            entries[vec_id] = vec

    if len(entries) != header["count"]:
        raise DataError(f"{path}: header count {header['count']} but file has {len(entries)} records")
    return VectorStore(entries, normalized=claimed_normalized)


def write_vector_file(
    path: str | Path,
    ids: Sequence[str],
    vectors: np.ndarray,
    model: str,
    normalized: bool,
) -> None:
    """Write vectors in the file format above; floats keep full precision."""
    vectors = np.asarray(vectors, dtype=np.float64)
    if len(ids) != vectors.shape[0]:
        raise DataError("ids and vectors disagree in length")
    if len(set(ids)) != len(ids):
        raise DataError("duplicate ids in vector export")
    header = {
        "dim": int(vectors.shape[1]),
        "count": len(ids),
        "normalized": bool(normalized),
        "model": model,
    }
    with open(path, "w", encoding="utf-8") as f:
        f.write(json.dumps(header, ensure_ascii=False) + "\n")
        for vec_id, row in zip(ids, vectors):
            record = {"_id": vec_id, "vector": [float(x) for x in row]}
            f.write(json.dumps(record, ensure_ascii=False) + "\n")


@dataclass(frozen=True)
class EmbeddingProviderSpec:
    """How query/passage embeddings are obtained.

    ``mock`` hashes tokens locally; ``file`` reads precomputed vector files;
    ``remote`` calls an embedding endpoint. Prefixes, when set, are glued
    onto the text before embedding (some model families expect them).
    """

    kind: str = "mock"
    dim: int = 256
    model_name: str | None = None
    query_prefix: str = ""
    passage_prefix: str = ""
    synonyms_path: str | None = None
    url: str | None = None

    def __post_init__(self):
        if self.kind not in PROVIDER_KINDS:
            raise ConfigError(f"provider kind must be one of {PROVIDER_KINDS}, got '{self.kind}'")
        if self.dim < 1:
            raise ConfigError(f"provider dim must be positive, got {self.dim}")
        if self.kind == "remote" and not self.url:
            raise ConfigError("remote provider needs a url")


class MockEmbedder:
    """Deterministic local embedder built on ``mock_embed``."""

    def __init__(
        self,
        dim: int,
        canonical_map: dict[str, str] | None = None,
        query_prefix: str = "",
        passage_prefix: str = "",
    ):
        if dim < MOCK_MIN_DIM:
            raise ConfigError(f"mock embedding dim must be >= {MOCK_MIN_DIM}, got {dim}")
        self.dim = dim
        self.canonical_map = dict(canonical_map) if canonical_map else {}
        self.query_prefix = query_prefix
        self.passage_prefix = passage_prefix

    def _prefix(self, kind: str) -> str:
        if kind == "query":
            return self.query_prefix
        if kind == "passage":
            return self.passage_prefix
        raise ConfigError(f"kind must be 'query' or 'passage', got '{kind}'")

    def embed_texts(self, texts: Iterable[str], kind: str) -> np.ndarray:
        prefix = self._prefix(kind)
        rows = [mock_embed(prefix + t, self.dim, self.canonical_map) for t in texts]
        if not rows:
            return np.zeros((0, self.dim), dtype=np.float64)
        return np.vstack(rows)


class RemoteEmbedder:
    """Client for the embedding endpoint contract.

    ``POST <url>/embed`` with ``{"texts": [...], "kind": "query"|"passage"}``
    returns ``{"dim": int, "vectors": [[...], ...]}`` in request order.
    """

    def __init__(self, url: str, dim: int, query_prefix: str = "", passage_prefix: str = "", timeout: float = 30.0):
        self.url = url.rstrip("/")
        self.dim = dim
        self.query_prefix = query_prefix
        self.passage_prefix = passage_prefix
        self.timeout = timeout

    def embed_texts(self, texts: Iterable[str], kind: str) -> np.ndarray:
        if kind not in ("query", "passage"):
            raise ConfigError(f"kind must be 'query' or 'passage', got '{kind}'")
        prefix = self.query_prefix if kind == "query" else self.passage_prefix
        payload = {"texts": [prefix + t for t in texts], "kind": kind}
        body = json.dumps(payload).encode("utf-8")
        request = urllib.request.Request(
            self.url + "/embed", data=body, headers={"Content-Type": "application/json"}
        )
        with urllib.request.urlopen(request, timeout=self.timeout) as response:
            reply = json.loads(response.read().decode("utf-8"))
        if reply.get("dim") != self.dim:
            raise DataError(f"remote embedder returned dim {reply.get('dim')}, expected {self.dim}")
        vectors = np.asarray(reply["vectors"], dtype=np.float64)
        if vectors.shape != (len(payload["texts"]), self.dim):
            raise DataError(f"remote embedder returned shape {vectors.shape}")
        return vectors


def load_synonyms(path: str | Path) -> dict[str, str]:
    """Token canonicalization table: surface token -> canonical token."""
    with open(path, "r", encoding="utf-8") as f:
        table = json.load(f)
    if not isinstance(table, dict) or not all(
        isinstance(k, str) and isinstance(v, str) for k, v in table.items()
    ):
        raise DataError(f"{path}: synonym table must map strings to strings")
    return table


def build_provider(spec: EmbeddingProviderSpec):
    """Instantiate the embedder named by a provider spec.

    ``file`` providers have no text embedder; their vectors are imported
    from disk by the caller, so this returns None for them.
    """
    if spec.kind == "mock":
        canonical = load_synonyms(spec.synonyms_path) if spec.synonyms_path else None
        return MockEmbedder(
            spec.dim,
            canonical_map=canonical,
            query_prefix=spec.query_prefix,
            passage_prefix=spec.passage_prefix,
        )
    if spec.kind == "remote":
        return RemoteEmbedder(
            spec.url, spec.dim, query_prefix=spec.query_prefix, passage_prefix=spec.passage_prefix
        )
    return None
