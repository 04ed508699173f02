"""Independent oracles and synthetic corpora shared by the unit and acceptance tests.

Nothing here calls into the code path it is used to check.
"""

from __future__ import annotations

import random

import numpy as np

from a11yreviews.classifier import MlpModel, init_model, loss_and_gradients
from a11yreviews.corpus import LabeledDataset, Review

# Disjoint vocabularies for synthetic corpora.
A11Y_VOCAB = "font contrast tiny unreadable cluttered blurry squint glare faded overlapping cramped illegible".split()
OTHER_VOCAB = "pricing renewal invoice contract sales licensing quote vendor budget billing discount seats".split()
NEUTRAL_VOCAB = "monday team project weekly report office meeting colleague dashboard morning update record".split()

SMALL_DIMS = (6, 5, 4, 3, 2, 2)


def templated(rng: random.Random, vocab: list[str], lo: int = 5, hi: int = 9) -> str:
    return " ".join(rng.choice(vocab) for _ in range(rng.randint(lo, hi)))


def synthetic_dataset(n_per_class: int, seed: int, prefix: str = "r") -> LabeledDataset:
    rng = random.Random(seed)
    reviews = []
    for i in range(n_per_class):
        reviews.append(Review(f"{prefix}{2 * i}", templated(rng, A11Y_VOCAB), label=1))
        reviews.append(Review(f"{prefix}{2 * i + 1}", templated(rng, OTHER_VOCAB), label=0))
    return LabeledDataset(tuple(reviews), provenance=f"synthetic seed={seed}")


def forward_oracle(model: MlpModel, x) -> list[float]:
    """Plain-Python forward pass: ReLU, PReLU, ReLU, ReLU, identity."""
    h = [float(v) for v in x]
    acts = ("relu", "prelu", "relu", "relu", "identity")
    for w, b, act in zip(model.weights, model.biases, acts):
        out = []
        for row, bias in zip(w.tolist(), b.tolist()):
            z = bias
            for wij, hj in zip(row, h):
                z += wij * hj
            if act == "relu":
                z = z if z > 0 else 0.0
            elif act == "prelu":
                z = z if z >= 0 else model.prelu_alpha * z
            out.append(z)
        h = out
    return h


def central_difference_check(trial: int, h: float = 1e-5) -> float:
    """Worst relative error between backprop and central differences on a small model.

    Biases are randomized so no hidden unit sits exactly on a ReLU kink.
    The relative error uses max(|analytic|, |numeric|, 1e-6) as denominator.
    """
    rng = np.random.default_rng(1000 + trial)
    model = init_model(trial, SMALL_DIMS)
    for b in model.biases:
        b[:] = rng.uniform(-0.5, 0.5, size=b.shape)
    model.prelu_alpha = float(rng.uniform(0.05, 0.5))
    x = rng.normal(size=(8, SMALL_DIMS[0]))
    y = rng.integers(0, 2, size=8)

    _, d_w, d_b, d_alpha = loss_and_gradients(model, x, y)

    def loss() -> float:
        return loss_and_gradients(model, x, y)[0]

    worst = 0.0
    for params, grads in ((model.weights, d_w), (model.biases, d_b)):
        for arr, grad in zip(params, grads):
            for idx in np.ndindex(arr.shape):
                orig = arr[idx]
                arr[idx] = orig + h
                up = loss()
                arr[idx] = orig - h
                down = loss()
                arr[idx] = orig
                numeric = (up - down) / (2 * h)
                worst = max(worst, abs(numeric - grad[idx]) / max(abs(numeric), abs(grad[idx]), 1e-6))
    alpha = model.prelu_alpha
    model.prelu_alpha = alpha + h
    up = loss()
    model.prelu_alpha = alpha - h
    down = loss()
    model.prelu_alpha = alpha
    numeric = (up - down) / (2 * h)
    worst = max(worst, abs(numeric - d_alpha) / max(abs(numeric), abs(d_alpha), 1e-6))
    return worst


def brute_force_metrics(preds, golds) -> dict:
    """One-pass tally with its own formulas, independent of the evaluation module."""
    tp = fp = tn = fn = 0
    for p, g in zip(preds, golds):
        if p and g:
            tp += 1
        elif p and not g:
            fp += 1
        elif not p and not g:
            tn += 1
        else:
            fn += 1
    n = tp + fp + tn + fn
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return {"tp": tp, "fp": fp, "tn": tn, "fn": fn, "accuracy": (tp + tn) / n,
            "precision": precision, "recall": recall, "f1": f1}


def decide_oracle(confidence: float, model_label: int, a11y_match: bool, dev_match: bool,
                  threshold: float = 0.80, keywords_enabled: bool = True) -> tuple[int, str]:
    if confidence > threshold:
        return model_label, "MODEL_CONFIDENT"
    if keywords_enabled and a11y_match:
        return 1, "KEYWORD_ACCESSIBILITY"
    if keywords_enabled and dev_match:
        return 0, "KEYWORD_DEVELOPER"
    return model_label, "MODEL_FALLBACK"


def probabilities_for(confidence: float, label: int) -> tuple[float, float]:
    return (confidence, 1 - confidence) if label == 0 else (1 - confidence, confidence)

