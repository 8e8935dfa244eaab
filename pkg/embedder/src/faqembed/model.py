"""Hash-bucket sentence embedding model.

Tokens are hashed into a fixed number of buckets; a sentence embedding is
the mean of its token-bucket vectors, L2-normalized. The bucket table is
the only trainable parameter set, which keeps CPU fine-tuning fast while
preserving the training dynamics that matter here: cosine similarities,
in-batch negatives, and a softmax ranking loss.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import torch
from torch import nn

from faqembed import DataError
from faqembed.textprep import tokens_of


def bucket_of(token: str, n_buckets: int) -> int:
    digest = hashlib.blake2b(token.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "big") % n_buckets


class HashEmbedder(nn.Module):
    def __init__(self, n_buckets: int = 4096, dim: int = 384,
                 query_prefix: str = "", passage_prefix: str = "", model_name: str = "hash-embedder"):
        super().__init__()
        if n_buckets < 16:
            raise DataError(f"n_buckets must be >= 16, got {n_buckets}")
        if dim < 8:
            raise DataError(f"dim must be >= 8, got {dim}")
        self.n_buckets = n_buckets
        self.dim = dim
        self.query_prefix = query_prefix
        self.passage_prefix = passage_prefix
        self.model_name = model_name
        self.buckets = nn.Embedding(n_buckets, dim)
        nn.init.normal_(self.buckets.weight, std=0.1)

    def prefix_for(self, kind: str) -> str:
        if kind == "query":
            return self.query_prefix
        if kind == "passage":
            return self.passage_prefix
        raise DataError(f"kind must be 'query' or 'passage', got '{kind}'")

    def _bucket_ids(self, text: str) -> list[int]:
        toks = tokens_of(text)
        if not toks:
            raise DataError(f"cannot embed text with no tokens: {text!r}")
        return [bucket_of(t, self.n_buckets) for t in toks]

    def forward(self, texts: list[str]) -> torch.Tensor:
        """Embed raw texts (prefixes already applied) to unit vectors."""
        rows = []
        for text in texts:
            ids = torch.tensor(self._bucket_ids(text), dtype=torch.long)
            rows.append(self.buckets(ids).mean(dim=0))
        stacked = torch.stack(rows)
        return nn.functional.normalize(stacked, dim=1)

    @torch.no_grad()
    def encode(self, texts: list[str], kind: str) -> torch.Tensor:
        """Inference-mode embeddings with the kind's prefix applied."""
        prefix = self.prefix_for(kind)
        self.eval()
        return self.forward([prefix + t for t in texts])


def save_model(model: HashEmbedder, out_dir: str | Path) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    meta = {
        "model_name": model.model_name,
        "n_buckets": model.n_buckets,
        "dim": model.dim,
        "query_prefix": model.query_prefix,
        "passage_prefix": model.passage_prefix,
    }
    (out / "config.json").write_text(json.dumps(meta, indent=2) + "\n", encoding="utf-8")
    torch.save(model.state_dict(), out / "weights.pt")
    return out


def load_model(checkpoint_dir: str | Path) -> HashEmbedder:
    root = Path(checkpoint_dir)
    config_path = root / "config.json"
    weights_path = root / "weights.pt"
    if not config_path.exists() or not weights_path.exists():
        raise DataError(f"{root}: not a model checkpoint (config.json/weights.pt missing)")
    meta = json.loads(config_path.read_text(encoding="utf-8"))
    model = HashEmbedder(
        n_buckets=meta["n_buckets"],
        dim=meta["dim"],
        query_prefix=meta.get("query_prefix", ""),
        passage_prefix=meta.get("passage_prefix", ""),
        model_name=meta.get("model_name", "hash-embedder"),
    )
    model.load_state_dict(torch.load(weights_path, weights_only=True))
    model.eval()
    return model
