"""Lexicon-based sentence sentiment plus clause-level aspect scoring.

Scores live in [-1, 1]: the summed token valence v is squashed by
v / sqrt(v^2 + 15).  A negator ("not", "no", "never") within the two preceding
tokens flips a token's valence.  Scoring runs on raw text, not cleaned tokens.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import IO, Iterable

from .errors import DataError

_PUNCT = ".,;:!?"
_CONJUNCTIONS = ("and", "but", "or", "because", "so", "while", "although", "however")
_CONJ_RE = re.compile(r"\b(?:" + "|".join(_CONJUNCTIONS) + r")\b", re.IGNORECASE)
_WORD_RE = re.compile(r"[^\W_]+", re.UNICODE)
_NEGATORS = {"not", "no", "never"}
_NEGATION_WINDOW = 2
_NORMALIZATION = 15.0


@dataclass(frozen=True)
class Clause:
    """A clause's text and its position within the input."""

    text: str
    position: int


def load_lexicon(source: str | Path | IO[str]) -> dict[str, float]:
    """Load ``token<TAB>valence`` lines; ``#`` comments ignored.

    This accepts the common sentiment-lexicon file layout where extra
    tab-separated columns may follow the valence; they are ignored.
    """
    own = isinstance(source, (str, Path))
    fh = open(source, "r", encoding="utf-8") if own else source
    try:
        lexicon: dict[str, float] = {}
        for lineno, line in enumerate(fh, start=1):
            text = line.strip()
            if not text or text.startswith("#"):
                continue
            parts = text.split("\t")
            if len(parts) < 2:
                raise DataError(f"lexicon line {lineno}: expected token<TAB>valence")
            try:
                valence = float(parts[1])
            except ValueError as exc:
                raise DataError(f"lexicon line {lineno}: bad valence {parts[1]!r}") from exc
            if not math.isfinite(valence):
                raise DataError(f"lexicon line {lineno}: valence must be finite")
            lexicon[parts[0].lower()] = valence
        return lexicon
    finally:
        if own:
            fh.close()


def demo_lexicon() -> dict[str, float]:
    """The small lexicon bundled with the package."""
    with resources.files("covkg.data").joinpath("lexicon_demo.txt").open(
        "r", encoding="utf-8"
    ) as fh:
        return load_lexicon(fh)


def split_clauses(text: str) -> list[Clause]:
    """Split text into clauses on punctuation and conjunctions.

    Punctuation (.,;:!?) stays with the preceding clause; a conjunction starts
    the following clause.  Clauses containing no content characters (only
    separators or whitespace) are dropped.
    """
    clauses: list[Clause] = []
    current: list[str] = []

    def flush() -> None:
        chunk = "".join(current).strip()
        current.clear()
        if any(ch not in _PUNCT and not ch.isspace() for ch in chunk):
            clauses.append(Clause(chunk, len(clauses)))

    for piece in re.split(r"([" + re.escape(_PUNCT) + r"])", text):
        if len(piece) == 1 and piece in _PUNCT:
            current.append(piece)
            flush()
            continue
        last = 0
        for match in _CONJ_RE.finditer(piece):
            current.append(piece[last : match.start()])
            flush()
            last = match.start()
        current.append(piece[last:])
    flush()
    return clauses


def _tokens(text: str) -> list[str]:
    return [t.lower() for t in _WORD_RE.findall(text)]


def score_text(text: str, lexicon: dict[str, float]) -> float:
    """Sentiment score in (-1, 1); 0 for empty or fully neutral text."""
    tokens = _tokens(text)
    valence = 0.0
    for i, token in enumerate(tokens):
        value = lexicon.get(token)
        if value is None:
            continue
        window = tokens[max(0, i - _NEGATION_WINDOW) : i]
        if any(w in _NEGATORS for w in window):
            value = -value
        valence += value
    if valence == 0.0:
        return 0.0
    return valence / math.sqrt(valence * valence + _NORMALIZATION)


def aspect_scores(
    text: str, aspects: Iterable[str], lexicon: dict[str, float]
) -> dict[str, float]:
    """Per-aspect mean score over the clauses containing the aspect token.

    Aspects occurring in no clause are absent from the result.
    """
    clauses = split_clauses(text)
    clause_tokens = [set(_tokens(c.text)) for c in clauses]
    scores: dict[int, float] = {}
    out: dict[str, float] = {}
    for aspect in aspects:
        hits = [i for i, toks in enumerate(clause_tokens) if aspect in toks]
        if not hits:
            continue
        total = 0.0
        for i in hits:
            if i not in scores:
                scores[i] = score_text(clauses[i].text, lexicon)
            total += scores[i]
        out[aspect] = total / len(hits)
    return out
