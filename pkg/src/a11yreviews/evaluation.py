"""Positive-class metrics, variant evaluation and the keyword ablation table.

Label 1 (accessibility issue) is the positive class. A zero denominator
yields 0 and a flag instead of raising.
"""

from __future__ import annotations

import enum
import json
from collections.abc import Sequence
from dataclasses import asdict, dataclass, field, replace

from .classifier import predict_batch
from .corpus import DatasetError, LabeledDataset, require_labels
from .embedding import embed_batch
from .hybrid import Pipeline, decide

METRIC_ORDER = ("accuracy", "recall", "precision", "f1")

# Published test-set rows (percent), shipped for context next to our own numbers.
REFERENCE_ROWS = {
    "Fine-tuned BERT": {"accuracy": 59.21, "recall": 54.79, "precision": 90.48, "f1": 68.26},
    "Fine-tuned RoBERTa": {"accuracy": 70.53, "recall": 64.46, "precision": 87.31, "f1": 74.17},
    "Fine-tuned DistilBERT": {"accuracy": 62.04, "recall": 62.04, "precision": 83.86, "f1": 71.32},
    "Hybrid Model": {"accuracy": 78.07, "recall": 82.70, "precision": 74.73, "f1": 78.52},
    "Hybrid (No Keywords)": {"accuracy": 74.67, "recall": 77.82, "precision": 74.06, "f1": 75.89},
}


class Variant(str, enum.Enum):
    HYBRID = "hybrid"
    NO_KEYWORDS = "no-keywords"
    MODEL_ONLY = "model-only"


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fp: int
    tn: int
    fn: int

    def __post_init__(self) -> None:
        if min(self.tp, self.fp, self.tn, self.fn) < 0:
            raise ValueError("confusion counts must be non-negative")

    @property
    def n(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


@dataclass(frozen=True)
class MetricsReport:
    accuracy: float
    precision: float
    recall: float
    f1: float
    n: int
    degenerate_flags: frozenset[str] = field(default_factory=frozenset)
    confusion: ConfusionMatrix | None = None

    def percent(self, metric: str) -> float:
        return round(100.0 * getattr(self, metric), 2)

    def to_dict(self) -> dict:
        out = {m: getattr(self, m) for m in METRIC_ORDER}
        out["n"] = self.n
        out["degenerate_flags"] = sorted(self.degenerate_flags)
        if self.confusion is not None:
            out["confusion"] = asdict(self.confusion)
        return out


def confusion(predictions: Sequence[int], golds: Sequence[int]) -> ConfusionMatrix:
    if len(predictions) != len(golds):
        raise ValueError(f"{len(predictions)} predictions but {len(golds)} gold labels")
    if not predictions:
        raise ValueError("nothing to evaluate")
    counts = {(1, 1): 0, (1, 0): 0, (0, 0): 0, (0, 1): 0}
    for pair in zip(predictions, golds):
        if pair not in counts:
            raise ValueError(f"labels must be 0 or 1, got {pair}")
        counts[pair] += 1
    return ConfusionMatrix(tp=counts[1, 1], fp=counts[1, 0], tn=counts[0, 0], fn=counts[0, 1])


def metrics(cm: ConfusionMatrix) -> MetricsReport:
    n = cm.n
    if n == 0:
        raise ValueError("empty confusion matrix")
    flags = set()

    def ratio(num: int, den: int, flag: str) -> float:
        if den == 0:
            flags.add(flag)
            return 0.0
        return num / den

    precision = ratio(cm.tp, cm.tp + cm.fp, "precision_undefined")
    recall = ratio(cm.tp, cm.tp + cm.fn, "recall_undefined")
    if precision + recall > 0:
        f1 = 2 * precision * recall / (precision + recall)
    else:
        flags.add("f1_undefined")
        f1 = 0.0
    return MetricsReport(
        accuracy=(cm.tp + cm.tn) / n,
        precision=precision,
        recall=recall,
        f1=f1,
        n=n,
        degenerate_flags=frozenset(flags),
        confusion=cm,
    )


def variant_labels(variant: Variant | str, pipeline: Pipeline, test: LabeledDataset) -> list[int]:
    variant = Variant(variant)
    if len(test) == 0:
        raise DatasetError("test set is empty")
    texts = [pipeline.clean(r.text) for r in test.reviews]
    preds = predict_batch(pipeline.model, embed_batch(pipeline.embedder, texts))
    if variant is Variant.MODEL_ONLY:
        return [p.label for p in preds]
    config = pipeline.hybrid
    if variant is Variant.NO_KEYWORDS:
        config = replace(config, keywords_enabled=False)
    return [decide(p, t, pipeline.keywords, config).label for p, t in zip(preds, texts)]


def evaluate_variant(variant: Variant | str, pipeline: Pipeline, test: LabeledDataset) -> MetricsReport:
    require_labels(test)
    labels = variant_labels(variant, pipeline, test)
    return metrics(confusion(labels, test.labels))


@dataclass(frozen=True)
class AblationRow:
    metric: str
    hybrid: float
    no_keywords: float

    @property
    def delta(self) -> float:
        return self.hybrid - self.no_keywords


def ablation_report(hybrid: MetricsReport, no_keywords: MetricsReport) -> list[AblationRow]:
    if hybrid.n != no_keywords.n:
        raise ValueError(f"reports cover different test sets (n={hybrid.n} vs n={no_keywords.n})")
    return [AblationRow(m, getattr(hybrid, m), getattr(no_keywords, m)) for m in METRIC_ORDER]


def format_table(rows: dict[str, MetricsReport], include_reference: bool = False) -> str:
    """Plain-text table in Accuracy / Recall / Precision / F1 order, percent to 2 decimals."""
    header = ["Classification Model", "Accuracy", "Recall", "Precision", "F1"]
    body = [[name] + [f"{r.percent(m):.2f}%" for m in METRIC_ORDER] for name, r in rows.items()]
    if include_reference:
        body += [
            [f"{name} (published)"] + [f"{vals[m]:.2f}%" for m in METRIC_ORDER]
            for name, vals in REFERENCE_ROWS.items()
        ]
    widths = [max(len(row[i]) for row in [header] + body) for i in range(len(header))]

    def line(cells):
        return " | ".join(c.ljust(w) if i == 0 else c.rjust(w) for i, (c, w) in enumerate(zip(cells, widths)))

    sep = "-+-".join("-" * w for w in widths)
    return "\n".join([line(header), sep] + [line(r) for r in body])


def format_ablation(rows: Sequence[AblationRow]) -> str:
    out = [f"{'metric':<10} {'hybrid':>8} {'no-kw':>8} {'delta':>8}"]
    for r in rows:
        out.append(
            f"{r.metric:<10} {100 * r.hybrid:>7.2f}% {100 * r.no_keywords:>7.2f}% {100 * r.delta:>+7.2f}"
        )
    return "\n".join(out)


def ablation_json(hybrid: MetricsReport, no_keywords: MetricsReport) -> str:
    rows = ablation_report(hybrid, no_keywords)
    return json.dumps(
        {
            "hybrid": hybrid.to_dict(),
            "no_keywords": no_keywords.to_dict(),
            "ablation": [
                {"metric": r.metric, "hybrid": r.hybrid, "no_keywords": r.no_keywords, "delta": r.delta}
                for r in rows
            ],
        },
        indent=2,
        sort_keys=True,
    )


__all__ = [
    "AblationRow",
    "ConfusionMatrix",
    "MetricsReport",
    "REFERENCE_ROWS",
    "Variant",
    "ablation_json",
    "ablation_report",
    "confusion",
    "evaluate_variant",
    "format_ablation",
    "format_table",
    "metrics",
]
