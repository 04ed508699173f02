"""Review records, dataset I/O, stratified splitting and class balance.

Two on-disk formats are supported:

* ``DELIMITED_TABLE`` -- CSV with header ``id,app_name,source,text,label``
  (plus a trailing ``raw_text`` column when raw and normalized text differ).
* ``LINE_RECORDS`` -- one JSON object per line with the same keys.

Labelling rulebook used for the shipped data (kept here because label
validation lives in this module):

* label 1 -- end users of the built app struggle with or cannot reach some
  part of it, for example text that is too small to read or a control that
  cannot be found;
* label 0 -- anything else, including praise and complaints that only
  affect whoever assembles the app, such as a connector to an external
  service that keeps failing.
"""

from __future__ import annotations

import csv
import enum
import json
import random
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from pathlib import Path

BASE_COLUMNS = ("id", "app_name", "source", "text", "label")


class DatasetError(ValueError):
    """Raised for unreadable, malformed or unusable datasets."""


class Source(str, enum.Enum):
    CRAWLED = "CRAWLED"
    IMPORTED = "IMPORTED"


class Format(str, enum.Enum):
    DELIMITED_TABLE = "DELIMITED_TABLE"
    LINE_RECORDS = "LINE_RECORDS"

    @classmethod
    def from_path(cls, path: str | Path) -> Format:
        suffix = Path(path).suffix.lower()
        if suffix in (".csv", ".tsv"):
            return cls.DELIMITED_TABLE
        if suffix in (".jsonl", ".ndjson", ".json"):
            return cls.LINE_RECORDS
        raise DatasetError(f"cannot infer dataset format from extension {suffix!r}")


@dataclass(frozen=True)
class Review:
    id: str
    raw_text: str
    text: str = ""
    source: Source = Source.IMPORTED
    app_name: str = ""
    label: int | None = None

    def __post_init__(self) -> None:
        if not self.raw_text:
            raise DatasetError(f"review {self.id!r}: raw_text is empty")
        if self.label is not None and self.label not in (0, 1):
            raise DatasetError(f"review {self.id!r}: label {self.label!r} not in {{0, 1}}")
        if not self.text:
            object.__setattr__(self, "text", self.raw_text)


@dataclass(frozen=True)
class LabeledDataset:
    reviews: tuple[Review, ...]
    provenance: str = ""

    def __post_init__(self) -> None:
        object.__setattr__(self, "reviews", tuple(self.reviews))
        seen: set[str] = set()
        for review in self.reviews:
            if review.id in seen:
                raise DatasetError(f"duplicate review id {review.id!r}")
            seen.add(review.id)

    def __len__(self) -> int:
        return len(self.reviews)

    def __iter__(self):
        return iter(self.reviews)

    @property
    def labels(self) -> list[int]:
        require_labels(self)
        return [r.label for r in self.reviews]  # type: ignore[misc]

    @property
    def is_labeled(self) -> bool:
        return all(r.label is not None for r in self.reviews)


@dataclass(frozen=True)
class ClassBalance:
    total: int
    positives: int
    negatives: int

    @property
    def positive_rate(self) -> float:
        return self.positives / self.total if self.total else 0.0


def require_labels(dataset: LabeledDataset) -> None:
    for index, review in enumerate(dataset.reviews):
        if review.label is None:
            raise DatasetError(f"review {review.id!r} (row {index}) has no label")


def _parse_label(value, row: int) -> int | None:
    if value is None:
        return None
    if isinstance(value, bool):
        raise DatasetError(f"row {row}: malformed label {value!r}")
    if isinstance(value, int):
        label = value
    else:
        text = str(value).strip()
        if text == "":
            return None
        try:
            label = int(text)
        except ValueError:
            raise DatasetError(f"row {row}: malformed label {value!r}") from None
    if label not in (0, 1):
        raise DatasetError(f"row {row}: malformed label {value!r}, expected 0 or 1")
    return label


def _parse_source(value, row: int) -> Source:
    if value is None or str(value).strip() == "":
        return Source.IMPORTED
    try:
        return Source(str(value).strip().upper())
    except ValueError:
        raise DatasetError(f"row {row}: unknown source {value!r}") from None


def _review_from_mapping(record: dict, row: int) -> Review:
    text = record.get("text")
    raw_text = record.get("raw_text") or text
    if not isinstance(raw_text, str) or not raw_text:
        raise DatasetError(f"row {row}: missing or empty text")
    rid = record.get("id")
    rid = str(row) if rid is None or str(rid) == "" else str(rid)
    return Review(
        id=rid,
        raw_text=raw_text,
        text=text if isinstance(text, str) and text else raw_text,
        source=_parse_source(record.get("source"), row),
        app_name=str(record.get("app_name") or ""),
        label=_parse_label(record.get("label"), row),
    )


def load_reviews(path: str | Path, format: Format | str | None = None) -> LabeledDataset:
    """Read a dataset; ids default to the 0-based row index when absent."""
    path = Path(path)
    fmt = Format(format) if format is not None else Format.from_path(path)
    try:
        content = path.read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise DatasetError(f"cannot read {path}: {exc}") from exc

    reviews: list[Review] = []
    if fmt is Format.DELIMITED_TABLE:
        reader = csv.DictReader(content.splitlines(keepends=True))
        if reader.fieldnames is None or "text" not in reader.fieldnames:
            raise DatasetError(f"{path}: header must contain a 'text' column")
        for row, record in enumerate(reader):
            if None in record:
                raise DatasetError(f"row {row}: too many fields")
            reviews.append(_review_from_mapping(record, row))
    else:
        for row, line in enumerate(content.splitlines()):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DatasetError(f"row {row}: invalid JSON ({exc.msg})") from None
            if not isinstance(record, dict):
                raise DatasetError(f"row {row}: expected a JSON object")
            reviews.append(_review_from_mapping(record, row))
    return LabeledDataset(tuple(reviews), provenance=str(path))


def save_reviews(dataset: LabeledDataset, path: str | Path, format: Format | str | None = None) -> None:
    if len(dataset) == 0:
        raise DatasetError("refusing to save an empty dataset")
    path = Path(path)
    fmt = Format(format) if format is not None else Format.from_path(path)
    try:
        with path.open("w", encoding="utf-8", newline="") as fh:
            if fmt is Format.DELIMITED_TABLE:
                _write_csv(dataset, fh)
            else:
                for r in dataset.reviews:
                    record = {
                        "id": r.id,
                        "app_name": r.app_name,
                        "source": r.source.value,
                        "text": r.text,
                        "label": r.label,
                        "raw_text": r.raw_text,
                    }
                    fh.write(json.dumps(record, ensure_ascii=False) + "\n")
    except OSError as exc:
        raise DatasetError(f"cannot write {path}: {exc}") from exc


def _write_csv(dataset: LabeledDataset, fh) -> None:
    with_raw = any(r.raw_text != r.text for r in dataset.reviews)
    columns = BASE_COLUMNS + (("raw_text",) if with_raw else ())
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(columns)
    for r in dataset.reviews:
        row = [r.id, r.app_name, r.source.value, r.text, "" if r.label is None else r.label]
        if with_raw:
            row.append(r.raw_text)
        writer.writerow(row)


def class_balance(dataset: LabeledDataset | Iterable[Review]) -> ClassBalance:
    reviews = dataset.reviews if isinstance(dataset, LabeledDataset) else tuple(dataset)
    if not reviews:
        raise DatasetError("no labeled reviews to tally")
    positives = negatives = 0
    for review in reviews:
        if review.label == 1:
            positives += 1
        elif review.label == 0:
            negatives += 1
        else:
            raise DatasetError(f"review {review.id!r} has no label")
    return ClassBalance(total=positives + negatives, positives=positives, negatives=negatives)


def _positive_test_quota(test_count: int, positives: int, total: int) -> int:
    quota = round(test_count * positives / total)
    negatives = total - positives
    return min(max(quota, test_count - negatives, 0), positives, test_count)


def stratified_split(
    dataset: LabeledDataset, test_count: int, seed: int = 0
) -> tuple[LabeledDataset, LabeledDataset]:
    """Split into (train_val, test) with per-class proportional test counts.

    Both partitions keep the input order of their members.
    """
    total = len(dataset)
    if not 0 < test_count < total:
        raise DatasetError(f"test_count must be in (0, {total}), got {test_count}")
    require_labels(dataset)

    by_class: dict[int, list[int]] = {0: [], 1: []}
    for index, review in enumerate(dataset.reviews):
        by_class[review.label].append(index)  # type: ignore[index]

    quota_pos = _positive_test_quota(test_count, len(by_class[1]), total)
    quotas = {1: quota_pos, 0: test_count - quota_pos}
    rng = random.Random(seed)
    test_idx: set[int] = set()
    for label in (0, 1):
        test_idx.update(rng.sample(by_class[label], quotas[label]))

    train = tuple(r for i, r in enumerate(dataset.reviews) if i not in test_idx)
    test = tuple(r for i, r in enumerate(dataset.reviews) if i in test_idx)
    prov = dataset.provenance
    return (
        LabeledDataset(train, provenance=f"{prov} [train_val seed={seed}]".strip()),
        LabeledDataset(test, provenance=f"{prov} [test n={test_count} seed={seed}]".strip()),
    )


def with_reviews(dataset: LabeledDataset, reviews: Sequence[Review], note: str = "") -> LabeledDataset:
    provenance = f"{dataset.provenance} {note}".strip() if note else dataset.provenance
    return LabeledDataset(tuple(reviews), provenance=provenance)


__all__ = [
    "ClassBalance",
    "DatasetError",
    "Format",
    "LabeledDataset",
    "Review",
    "Source",
    "class_balance",
    "load_reviews",
    "require_labels",
    "save_reviews",
    "stratified_split",
    "with_reviews",
]
