"""Confidence-gated fusion of the MLP prediction with the keyword sets."""

from __future__ import annotations

import enum
import json
from collections.abc import Sequence
from dataclasses import dataclass, field

from .classifier import MlpModel, ModelPrediction, predict, predict_batch
from .embedding import ConcatEmbedder, concat_embed, embed_batch
from .keywords import KeywordSets, match_keywords
from .preprocess import PreprocessConfig, SpellCorrection, SpellCorrector, load_lexicon, normalize

DEFAULT_THRESHOLD = 0.80


class DecisionPath(str, enum.Enum):
    MODEL_CONFIDENT = "MODEL_CONFIDENT"
    KEYWORD_ACCESSIBILITY = "KEYWORD_ACCESSIBILITY"
    KEYWORD_DEVELOPER = "KEYWORD_DEVELOPER"
    MODEL_FALLBACK = "MODEL_FALLBACK"


@dataclass(frozen=True)
class HybridConfig:
    confidence_threshold: float = DEFAULT_THRESHOLD
    keywords_enabled: bool = True

    def __post_init__(self) -> None:
        if not 0.5 < self.confidence_threshold <= 1.0:
            raise ValueError("confidence_threshold must be in (0.5, 1]")


@dataclass(frozen=True)
class HybridPrediction:
    label: int
    confidence: float
    decision_path: DecisionPath
    matched_keywords: tuple[str, ...]
    model_probabilities: tuple[float, float]

    def to_record(self, review_id: str) -> dict:
        p0, p1 = self.model_probabilities
        return {
            "id": review_id,
            "label": self.label,
            "confidence": self.confidence,
            "decision_path": self.decision_path.value,
            "matched_keywords": list(self.matched_keywords),
            "p0": p0,
            "p1": p1,
        }


def decide(
    model_pred: ModelPrediction, text: str, sets: KeywordSets, config: HybridConfig | None = None
) -> HybridPrediction:
    """Keep a confident model label; otherwise let the keyword sets overrule it.

    "Confident" means strictly above the threshold. The accessibility set is
    consulted before the developer set.
    """
    config = config or HybridConfig()

    def result(label: int, path: DecisionPath, matched: Sequence[str] = ()) -> HybridPrediction:
        return HybridPrediction(label, model_pred.confidence, path, tuple(matched), model_pred.probabilities)

    if model_pred.confidence > config.confidence_threshold:
        return result(model_pred.label, DecisionPath.MODEL_CONFIDENT)
    if config.keywords_enabled:
        hits = match_keywords(text, sets.accessibility_terms)
        if hits:
            return result(1, DecisionPath.KEYWORD_ACCESSIBILITY, hits)
        hits = match_keywords(text, sets.developer_terms)
        if hits:
            return result(0, DecisionPath.KEYWORD_DEVELOPER, hits)
    return result(model_pred.label, DecisionPath.MODEL_FALLBACK)


class EmptyReviewError(ValueError):
    pass


@dataclass
class Pipeline:
    embedder: ConcatEmbedder
    model: MlpModel
    keywords: KeywordSets
    hybrid: HybridConfig = field(default_factory=HybridConfig)
    preprocess: PreprocessConfig = field(default_factory=PreprocessConfig)

    def __post_init__(self) -> None:
        self._corrector = None
        if self.preprocess.spell_correction is SpellCorrection.LEXICON:
            self._corrector = SpellCorrector(load_lexicon(self.preprocess.lexicon_path))

    def clean(self, raw_text: str) -> str:
        if self._corrector is not None:
            raw_text = self._corrector.correct(raw_text)
        text = normalize(raw_text)
        if not text:
            raise EmptyReviewError(f"review reduces to empty text: {raw_text[:40]!r}")
        return text


def classify_review(raw_text: str, pipeline: Pipeline) -> HybridPrediction:
    """Clean -> embed -> MLP -> decide, for a single review."""
    text = pipeline.clean(raw_text)
    pred = predict(pipeline.model, concat_embed(pipeline.embedder, text))
    return decide(pred, text, pipeline.keywords, pipeline.hybrid)


def classify_many(raw_texts: Sequence[str], pipeline: Pipeline) -> list[HybridPrediction]:
    """Batched ``classify_review``; results match the one-at-a-time path."""
    texts = [pipeline.clean(t) for t in raw_texts]
    if not texts:
        return []
    preds = predict_batch(pipeline.model, embed_batch(pipeline.embedder, texts))
    return [decide(p, t, pipeline.keywords, pipeline.hybrid) for p, t in zip(preds, texts)]


def write_predictions(path, ids: Sequence[str], predictions: Sequence[HybridPrediction]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rid, pred in zip(ids, predictions, strict=True):
            fh.write(json.dumps(pred.to_record(rid)) + "\n")
