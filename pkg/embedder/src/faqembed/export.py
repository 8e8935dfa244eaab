"""Vector file export.

File format (shared with the retrieval engine): first line a JSON header
``{"dim", "count", "normalized", "model"}``, then one JSON object per line
``{"_id": ..., "vector": [...]}``. Vectors are L2-normalized; floats are
serialized at full round-trip precision.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Sequence

import torch

from faqembed import DataError
from faqembed.model import HashEmbedder


def encode_texts(model: HashEmbedder, texts: Sequence[str], kind: str, batch_size: int = 64) -> torch.Tensor:
    rows = []
    for start in range(0, len(texts), batch_size):
        rows.append(model.encode(list(texts[start : start + batch_size]), kind))
    if not rows:
        return torch.zeros((0, model.dim))
    return torch.cat(rows)


def export_vectors(
    model: HashEmbedder,
    ids: Sequence[str],
    texts: Sequence[str],
    kind: str,
    out_path: str | Path,
    batch_size: int = 64,
) -> int:
    """Embed the texts and write them as a vector file; returns the count."""
    if len(ids) != len(texts):
        raise DataError("ids and texts disagree in length")
    if len(set(ids)) != len(ids):
        raise DataError("duplicate ids in export")
    vectors = encode_texts(model, texts, kind, batch_size)
    header = {
        "dim": model.dim,
        "count": len(ids),
        "normalized": True,
        "model": model.model_name,
    }
    with open(out_path, "w", encoding="utf-8") as f:
        f.write(json.dumps(header, ensure_ascii=False) + "\n")
        for text_id, row in zip(ids, vectors):
            record = {"_id": text_id, "vector": [float(x) for x in row]}
            f.write(json.dumps(record, ensure_ascii=False) + "\n")
    return len(ids)
