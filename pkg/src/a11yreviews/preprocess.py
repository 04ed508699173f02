"""Review cleaning: spell correction, normalization, short filter, dedup.

Stage order is fixed: spell-correct (optional) -> normalize -> drop reviews
under ``min_words`` -> drop exact duplicates of the normalized text, keeping
the first occurrence.
"""

from __future__ import annotations

import enum
import json
import re
import unicodedata
from collections.abc import Iterable
from dataclasses import asdict, dataclass, replace
from functools import lru_cache
from pathlib import Path

from .corpus import DatasetError, LabeledDataset, with_reviews

_WORD_RE = re.compile(r"[^\W\d_]+")


class SpellCorrection(str, enum.Enum):
    OFF = "OFF"
    LEXICON = "LEXICON"


@dataclass(frozen=True)
class PreprocessConfig:
    min_words: int = 5
    spell_correction: SpellCorrection = SpellCorrection.OFF
    lexicon_path: str | None = None
    dedup: bool = True

    def __post_init__(self) -> None:
        if self.min_words < 1:
            raise ValueError("min_words must be >= 1")
        object.__setattr__(self, "spell_correction", SpellCorrection(self.spell_correction))
        if self.spell_correction is SpellCorrection.LEXICON and not self.lexicon_path:
            raise ValueError("LEXICON spell correction requires lexicon_path")


@dataclass(frozen=True)
class PreprocessReport:
    input_count: int
    corrected_count: int
    removed_short: int
    removed_duplicate: int
    output_count: int

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2)


@lru_cache(maxsize=4096)
def _is_punct_or_symbol(ch: str) -> bool:
    return unicodedata.category(ch)[0] in "PS"


def normalize(text: str) -> str:
    """Lowercase, blank out punctuation/symbol characters, squeeze whitespace."""
    lowered = text.lower()
    blanked = "".join(" " if _is_punct_or_symbol(ch) else ch for ch in lowered)
    return " ".join(blanked.split())


def word_count(text: str) -> int:
    return len(normalize(text).split())


def load_lexicon(path: str | Path) -> frozenset[str]:
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except (OSError, UnicodeDecodeError) as exc:
        raise DatasetError(f"cannot read lexicon {path}: {exc}") from exc
    words = frozenset(
        line.strip() for line in lines if line.strip() and not line.lstrip().startswith("#")
    )
    if not words:
        raise DatasetError(f"lexicon {path} is empty")
    return words


def _edits1(word: str, alphabet: Iterable[str]) -> set[str]:
    splits = [(word[:i], word[i:]) for i in range(len(word) + 1)]
    deletes = {a + b[1:] for a, b in splits if b}
    replaces = {a + c + b[1:] for a, b in splits if b for c in alphabet if c != b[0]}
    inserts = {a + c + b for a, b in splits for c in alphabet}
    return deletes | replaces | inserts


class SpellCorrector:
    """Edit-distance-1 corrector over a fixed lexicon.

    Words are maximal runs of letters; everything between them is preserved,
    so the whitespace token count never changes. An out-of-lexicon word is
    replaced only when exactly one lexicon word is one edit away.
    """

    def __init__(self, lexicon: Iterable[str]) -> None:
        self.lexicon = frozenset(lexicon)
        self.alphabet = sorted({ch for word in self.lexicon for ch in word})
        self.corrected = 0

    def _fix(self, match: re.Match) -> str:
        token = match.group(0)
        lowered = token.lower()
        if lowered in self.lexicon:
            return token
        hits = [w for w in _edits1(lowered, self.alphabet) if w in self.lexicon]
        if len(hits) != 1:
            return token
        self.corrected += 1
        return hits[0]

    def correct(self, text: str) -> str:
        return _WORD_RE.sub(self._fix, text)


def correct_spelling(text: str, lexicon: Iterable[str]) -> str:
    return SpellCorrector(lexicon).correct(text)


def preprocess_dataset(
    dataset: LabeledDataset, config: PreprocessConfig | None = None
) -> tuple[LabeledDataset, PreprocessReport]:
    config = config or PreprocessConfig()
    if len(dataset) == 0:
        raise DatasetError("cannot preprocess an empty dataset")
    corrector = None
    if config.spell_correction is SpellCorrection.LEXICON:
        corrector = SpellCorrector(load_lexicon(config.lexicon_path))  # type: ignore[arg-type]

    kept = []
    seen: set[str] = set()
    corrected = removed_short = removed_dup = 0
    for review in dataset.reviews:
        source_text = review.raw_text
        if corrector is not None:
            before = corrector.corrected
            source_text = corrector.correct(source_text)
            corrected += corrector.corrected > before
        text = normalize(source_text)
        if len(text.split()) < config.min_words:
            removed_short += 1
            continue
        if config.dedup:
            if text in seen:
                removed_dup += 1
                continue
            seen.add(text)
        kept.append(replace(review, text=text))

    report = PreprocessReport(
        input_count=len(dataset),
        corrected_count=corrected,
        removed_short=removed_short,
        removed_duplicate=removed_dup,
        output_count=len(kept),
    )
    return with_reviews(dataset, kept, note="[preprocessed]"), report
