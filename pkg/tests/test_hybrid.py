from __future__ import annotations

import itertools
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from _support import decide_oracle, probabilities_for, synthetic_dataset
from a11yreviews.classifier import ModelPrediction, TrainConfig, init_model, predict, train
from a11yreviews.embedding import concat_embed, embed_batch, hash_embedder
from a11yreviews.hybrid import (
    DEFAULT_THRESHOLD,
    DecisionPath,
    EmptyReviewError,
    HybridConfig,
    Pipeline,
    classify_many,
    classify_review,
    decide,
    write_predictions,
)
from a11yreviews.preprocess import normalize


def _pred(confidence: float, label: int) -> ModelPrediction:
    return ModelPrediction(label, confidence, probabilities_for(confidence, label))


@pytest.mark.parametrize(
    "confidence, model_label, text, label, path",
    [
        (0.93, 0, "the screen reader skips this button", 0, "MODEL_CONFIDENT"),
        (0.62, 0, "the screen reader skips this button", 1, "KEYWORD_ACCESSIBILITY"),
        (0.70, 1, "the database api times out", 0, "KEYWORD_DEVELOPER"),
        (0.70, 1, "nice tool overall", 1, "MODEL_FALLBACK"),
    ],
)
def test_decide_examples(small_keywords, confidence, model_label, text, label, path):
    out = decide(_pred(confidence, model_label), text, small_keywords)
    assert (out.label, out.decision_path.value) == (label, path)
    assert out.confidence == confidence


def test_decide_reports_matches(small_keywords):
    out = decide(_pred(0.6, 0), "font size and screen reader both broken", small_keywords)
    assert out.matched_keywords == ("screen reader", "font size")


TEXTS = {
    (False, False): "nice tool overall",
    (True, False): "font size is off",
    (False, True): "the api is down",
    (True, True): "font size panel breaks the api",
}


@pytest.mark.parametrize(
    "confidence, model_label, a11y, dev",
    list(itertools.product([0.5, 0.62, 0.80, 0.8000001, 0.97], [0, 1], [False, True], [False, True])),
)
def test_decide_truth_table(small_keywords, confidence, model_label, a11y, dev):
    out = decide(_pred(confidence, model_label), TEXTS[a11y, dev], small_keywords)
    assert (out.label, out.decision_path.value) == decide_oracle(confidence, model_label, a11y, dev)


def test_threshold_is_strict(small_keywords):
    assert DEFAULT_THRESHOLD == 0.80
    out = decide(_pred(0.80, 0), "screen reader", small_keywords)
    assert out.decision_path is DecisionPath.KEYWORD_ACCESSIBILITY


def test_threshold_one_always_consults_keywords(small_keywords):
    out = decide(_pred(1.0, 0), "screen reader", small_keywords, HybridConfig(confidence_threshold=1.0))
    assert out.label == 1


@pytest.mark.parametrize("bad", [0.5, 0.3, 1.01])
def test_threshold_range(bad):
    with pytest.raises(ValueError):
        HybridConfig(confidence_threshold=bad)


@settings(max_examples=300)
@given(
    st.floats(0.5, 1.0),
    st.integers(0, 1),
    st.sampled_from(sorted(TEXTS.values())),
    st.floats(0.51, 1.0),
)
def test_keywords_disabled_returns_model_label(confidence, model_label, text, threshold):
    from a11yreviews.keywords import KeywordSets

    sets = KeywordSets(("screen reader", "font size"), ("api", "database"))
    out = decide(_pred(confidence, model_label), text, sets, HybridConfig(threshold, keywords_enabled=False))
    assert out.label == model_label
    assert out.decision_path in (DecisionPath.MODEL_CONFIDENT, DecisionPath.MODEL_FALLBACK)


@pytest.fixture(scope="module")
def pipeline_parts():
    ds = synthetic_dataset(40, seed=3)
    embedder = hash_embedder()
    x = embed_batch(embedder, [r.text for r in ds.reviews])
    model, _ = train(init_model(0), x, np.array(ds.labels), TrainConfig(epochs=1))
    return embedder, model


def test_classify_review_is_composition(pipeline_parts, small_keywords):
    embedder, model = pipeline_parts
    pipe = Pipeline(embedder, model, small_keywords)
    raw = "The Screen-Reader skips every API button!"
    text = normalize(raw)
    expected = decide(predict(model, concat_embed(embedder, text)), text, small_keywords)
    assert classify_review(raw, pipe) == expected


def test_classify_many_matches_single(pipeline_parts, small_keywords):
    pipe = Pipeline(*pipeline_parts, small_keywords)
    raws = ["font size too small", "api errors everywhere", "pleasant weekly report tool"]
    batch = classify_many(raws, pipe)
    for raw, out in zip(raws, batch):
        single = classify_review(raw, pipe)
        assert (out.label, out.decision_path) == (single.label, single.decision_path)
        assert out.confidence == pytest.approx(single.confidence, abs=1e-12)
    assert classify_many([], pipe) == []


def test_punctuation_only_review_rejected(pipeline_parts, small_keywords):
    with pytest.raises(EmptyReviewError):
        classify_review("?!... --", Pipeline(*pipeline_parts, small_keywords))


def test_keywords_disabled_equals_model(pipeline_parts, small_keywords):
    embedder, model = pipeline_parts
    pipe = Pipeline(embedder, model, small_keywords, HybridConfig(keywords_enabled=False))
    for raw in ["screen reader broken", "api database failure", "a plain review"]:
        assert classify_review(raw, pipe).label == predict(model, concat_embed(embedder, normalize(raw))).label


def test_write_predictions(tmp_path, small_keywords):
    preds = [decide(_pred(0.6, 0), "screen reader", small_keywords), decide(_pred(0.9, 1), "x", small_keywords)]
    path = tmp_path / "p.jsonl"
    write_predictions(path, ["a", "b"], preds)
    rows = [json.loads(line) for line in path.read_text().splitlines()]
    assert rows[0] == {
        "id": "a",
        "label": 1,
        "confidence": 0.6,
        "decision_path": "KEYWORD_ACCESSIBILITY",
        "matched_keywords": ["screen reader"],
        "p0": 0.6,
        "p1": pytest.approx(0.4),
    }
    assert rows[1]["decision_path"] == "MODEL_CONFIDENT"
