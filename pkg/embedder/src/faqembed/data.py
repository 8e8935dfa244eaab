"""Pairs-file reading and batching.

Pairs files hold one JSON object per line with ``query`` and ``positive``
fields, both non-empty strings.
"""

from __future__ import annotations

import json
import random
from pathlib import Path

from faqembed import DataError


def load_pairs(path: str | Path) -> list[tuple[str, str]]:
    pairs: list[tuple[str, str]] = []
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}: malformed JSON at line {lineno}: {exc}") from None
            query = obj.get("query")
            positive = obj.get("positive")
            if not isinstance(query, str) or not query or not isinstance(positive, str) or not positive:
                raise DataError(f"{path}: line {lineno} needs non-empty 'query' and 'positive'")
            pairs.append((query, positive))
    return pairs


def batches(pairs: list[tuple[str, str]], batch_size: int, rng: random.Random | None = None):
    """Yield batches; shuffled when an rng is given, in order otherwise."""
    order = list(range(len(pairs)))
    if rng is not None:
        rng.shuffle(order)
    for start in range(0, len(order), batch_size):
        chunk = order[start : start + batch_size]
        yield [pairs[i] for i in chunk]
