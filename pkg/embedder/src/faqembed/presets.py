"""Named training presets.

Each preset carries the batch size and learning rate tuned for the model
family it stands in for, plus the embedding width and the text prefixes
that family expects. The e5 family prepends "query: " and "passage: ";
the others take raw text.
"""

from __future__ import annotations

from dataclasses import dataclass

from faqembed import ConfigError


@dataclass(frozen=True)
class ModelPreset:
    name: str
    batch_size: int
    learning_rate: float
    dim: int
    query_prefix: str = ""
    passage_prefix: str = ""


MODEL_PRESETS = {
    preset.name: preset
    for preset in (
        ModelPreset("Yunika/sentence-transformer-nepali", 8, 1e-5, 768),
        ModelPreset("Syubraj/sentence_similarity_nepali", 8, 2e-5, 768),
        ModelPreset("universalml/Nepali_Embedding_Model", 8, 1e-5, 768),
        ModelPreset("jangedoo/all-MiniLM-L6-v2-nepali", 8, 1e-5, 384),
        ModelPreset("intfloat/e5-small", 8, 4e-5, 384, "query: ", "passage: "),
        ModelPreset("intfloat/e5-base", 8, 3e-5, 768, "query: ", "passage: "),
        ModelPreset("intfloat/e5-large", 8, 1e-5, 1024, "query: ", "passage: "),
    )
}


def get_preset(model_name: str) -> ModelPreset:
    try:
        return MODEL_PRESETS[model_name]
    except KeyError:
        known = ", ".join(sorted(MODEL_PRESETS))
        raise ConfigError(f"unknown model '{model_name}'; available: {known}") from None
