"""Keyword sets for the rule layer and a discriminative n-gram ranker for curating them.

``accessibility.txt`` holds phrases that push a review to label 1;
``developer.txt`` holds developer-side phrases that push it to label 0.
The shipped defaults are hand-curated from the labelling rulebook
vocabulary.
"""

from __future__ import annotations

import math
from collections import Counter
from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .preprocess import normalize

ACCESSIBILITY_FILE = "accessibility.txt"
DEVELOPER_FILE = "developer.txt"


class KeywordError(ValueError):
    pass


@dataclass(frozen=True)
class KeywordSets:
    accessibility_terms: tuple[str, ...]
    developer_terms: tuple[str, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "accessibility_terms", tuple(self.accessibility_terms))
        object.__setattr__(self, "developer_terms", tuple(self.developer_terms))
        for phrase in self.accessibility_terms + self.developer_terms:
            if not phrase or normalize(phrase) != phrase:
                raise KeywordError(f"phrase {phrase!r} is not normalized")
            if len(phrase.split()) > 3:
                raise KeywordError(f"phrase {phrase!r} is longer than 3 tokens")
        overlap = sorted(set(self.accessibility_terms) & set(self.developer_terms))
        if overlap:
            raise KeywordError(f"phrases in both keyword sets: {', '.join(overlap)}")


@dataclass(frozen=True)
class KeywordCandidate:
    phrase: str
    score: float
    pos_freq: int
    neg_freq: int


def match_keywords(text: str, terms: Iterable[str]) -> list[str]:
    """Terms whose tokens occur contiguously in ``text`` (already normalized).

    Returned in term order, without repeats.
    """
    tokens = text.split()
    matched: list[str] = []
    seen: set[str] = set()
    windows: dict[int, set[tuple[str, ...]]] = {}
    for term in terms:
        if term in seen:
            continue
        parts = tuple(term.split())
        n = len(parts)
        if n == 0:
            continue
        if n not in windows:
            windows[n] = {tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1)}
        if parts in windows[n]:
            matched.append(term)
            seen.add(term)
    return matched


def _ngrams(tokens: Sequence[str], max_n: int):
    for n in range(1, max_n + 1):
        for i in range(len(tokens) - n + 1):
            yield " ".join(tokens[i : i + n])


def candidate_score(pos_freq: int, neg_freq: int) -> float:
    return pos_freq / (neg_freq + 1) * math.log1p(pos_freq)


def extract_candidates(
    pos_texts: Sequence[str], neg_texts: Sequence[str], max_n: int = 3, top_k: int = 50
) -> list[KeywordCandidate]:
    """Rank n-grams of the positive corpus by how specific they are to it.

    Frequencies are total occurrence counts over the normalized texts.
    """
    if not pos_texts:
        raise KeywordError("positive corpus is empty")
    if top_k <= 0:
        return []
    pos = Counter(g for t in pos_texts for g in _ngrams(normalize(t).split(), max_n))
    neg = Counter(g for t in neg_texts for g in _ngrams(normalize(t).split(), max_n))
    ranked = sorted(
        (KeywordCandidate(p, candidate_score(f, neg[p]), f, neg[p]) for p, f in pos.items()),
        key=lambda c: (-c.score, c.phrase),
    )
    return ranked[:top_k]


def _read_terms(path: Path) -> tuple[str, ...]:
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except FileNotFoundError:
        raise KeywordError(f"keyword file not found: {path}") from None
    terms = []
    for lineno, line in enumerate(lines, start=1):
        phrase = line.strip()
        if not phrase or phrase.startswith("#"):
            continue
        if normalize(phrase) != phrase:
            raise KeywordError(f"{path}:{lineno}: phrase {phrase!r} is not normalized")
        terms.append(phrase)
    return tuple(terms)


def load_keyword_sets(directory: str | Path) -> KeywordSets:
    directory = Path(directory)
    return KeywordSets(
        _read_terms(directory / ACCESSIBILITY_FILE), _read_terms(directory / DEVELOPER_FILE)
    )


def save_keyword_sets(sets: KeywordSets, directory: str | Path) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for name, terms in ((ACCESSIBILITY_FILE, sets.accessibility_terms), (DEVELOPER_FILE, sets.developer_terms)):
        (directory / name).write_text("".join(t + "\n" for t in terms), encoding="utf-8")


def default_keyword_dir() -> Path:
    return Path(str(resources.files("a11yreviews") / "data" / "keywords"))


def default_keyword_sets() -> KeywordSets:
    return load_keyword_sets(default_keyword_dir())
