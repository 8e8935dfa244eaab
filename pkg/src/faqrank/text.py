"""Normalization and tokenization for Devanagari/Nepali text.

Nepali needs care in two places: Unicode normalization (the same visible
character can arrive composed or decomposed) and tokenization (Devanagari
vowel signs are combining marks, so a naive ``\\w+`` regex shreds words
at every matra). Both are handled here; everything downstream operates on
the output of these functions.
"""

from __future__ import annotations

import re
import unicodedata
from dataclasses import dataclass

_TAG_RE = re.compile(r"<[^>]*>")
# Scheme-prefixed URLs only; a bare trailing "www." is still swallowed so
# no URL prefix survives in the output.
_URL_RE = re.compile(r"(?:https?://|www\.)\S*", re.IGNORECASE)

# Zero-width space acts as a (invisible) word separator in Devanagari text;
# other control/format characters are rendering artifacts and are dropped.
_SPECIAL_TO_SPACE = {"​"}


@dataclass(frozen=True)
class NormalizationConfig:
    """Cleanup switches. Canonical composition is always applied."""

    strip_html: bool = True
    strip_urls: bool = True
    strip_special: bool = True


DEFAULT_NORMALIZATION = NormalizationConfig()


def _strip_special(text: str) -> str:
    out = []
    for ch in text:
        if ch in _SPECIAL_TO_SPACE:
            out.append(" ")
            continue
        cat = unicodedata.category(ch)
        if cat in ("Cc", "Cf") and ch not in ("\t", "\n", "\r"):
            continue
        out.append(ch)
    return "".join(out)


def normalize(text: str, config: NormalizationConfig = DEFAULT_NORMALIZATION) -> str:
    """Clean a raw string: markup, URLs, control characters, whitespace.

    Composition (NFC) runs after the stripping passes so that marks made
    adjacent by a removal still compose; whitespace is collapsed to single
    spaces and trimmed. Idempotent: normalizing twice changes nothing.
    """
    if config.strip_html:
        text = _TAG_RE.sub(" ", text)
    if config.strip_urls:
        text = _URL_RE.sub(" ", text)
    if config.strip_special:
        text = _strip_special(text)
    text = unicodedata.normalize("NFC", text)
    return " ".join(text.split())


_word_char_cache: dict[str, bool] = {}


def _is_word_char(ch: str) -> bool:
    cached = _word_char_cache.get(ch)
    if cached is None:
        # Letters, combining marks, and digits form tokens. Marks must be
        # kept: Devanagari matras are category Mc/Mn and sit inside words.
        cached = unicodedata.category(ch)[0] in ("L", "M", "N")
        _word_char_cache[ch] = cached
    return cached


def tokenize(text: str) -> list[str]:
    """Split normalized text into tokens.

    A token is a maximal run of letters/marks/digits in any script.
    Punctuation (including the Devanagari danda) and symbols separate
    tokens and are discarded. Cased scripts are lowercased; Devanagari
    has no case and passes through unchanged.
    """
    tokens = []
    current: list[str] = []
    for ch in text:
        if _is_word_char(ch):
            current.append(ch)
        elif current:
            tokens.append("".join(current).lower())
            current = []
    if current:
        tokens.append("".join(current).lower())
    return tokens


def token_count(text: str, config: NormalizationConfig = DEFAULT_NORMALIZATION) -> int:
    """Number of tokens in the text after normalization."""
    return len(tokenize(normalize(text, config)))
