"""Minimal text preparation for the embedding model.

Tokens are maximal runs of letters, combining marks, and digits, then
lowercased. Combining marks must count as word characters or Devanagari
words fall apart at their vowel signs.
"""

from __future__ import annotations

import unicodedata

_cache: dict[str, bool] = {}


def _is_word_char(ch: str) -> bool:
    hit = _cache.get(ch)
    if hit is None:
        hit = unicodedata.category(ch)[0] in ("L", "M", "N")
        _cache[ch] = hit
    return hit


def tokens_of(text: str) -> list[str]:
    text = unicodedata.normalize("NFC", text)
    out: list[str] = []
    word: list[str] = []
    for ch in text:
        if _is_word_char(ch):
            word.append(ch)
        elif word:
            out.append("".join(word).lower())
            word = []
    if word:
        out.append("".join(word).lower())
    return out
