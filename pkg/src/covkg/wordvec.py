"""Pretrained word vectors: loading, cosine similarity, best keyword links."""

from __future__ import annotations

import gzip
from pathlib import Path
from typing import IO, Iterable

import numpy as np

from .errors import DataError


class WordVectors:
    """Token -> fixed-dimension vector map."""

    def __init__(self) -> None:
        self._vectors: dict[str, np.ndarray] = {}
        self.dim: int | None = None

    def __len__(self) -> int:
        return len(self._vectors)

    def __contains__(self, token: str) -> bool:
        return token in self._vectors

    def __getitem__(self, token: str) -> np.ndarray:
        try:
            return self._vectors[token]
        except KeyError:
            raise DataError(f"no vector for token {token!r}") from None

    def add(self, token: str, vector: np.ndarray) -> None:
        if not token:
            raise DataError("zero-length token")
        vector = np.asarray(vector, dtype=np.float64)
        if vector.ndim != 1:
            raise DataError(f"vector for {token!r} is not 1-dimensional")
        if self.dim is None:
            self.dim = vector.shape[0]
        elif vector.shape[0] != self.dim:
            raise DataError(
                f"vector for {token!r} has dimension {vector.shape[0]}, expected {self.dim}"
            )
        self._vectors[token] = vector


def load_vectors(source: str | Path | IO[str]) -> WordVectors:
    """Load text-format vectors: optional ``count dim`` header, then
    ``token v1 ... vd`` rows.  ``.gz`` paths are decompressed transparently.
    """
    own = isinstance(source, (str, Path))
    if own:
        path = str(source)
        fh = gzip.open(path, "rt", encoding="utf-8") if path.endswith(".gz") else open(
            path, "r", encoding="utf-8"
        )
    else:
        fh = source
    vectors = WordVectors()
    try:
        first = True
        for lineno, line in enumerate(fh, start=1):
            parts = line.split()
            if not parts:
                continue
            if first:
                first = False
                # A two-field all-integer line is the count/dimension header.
                if len(parts) == 2:
                    try:
                        int(parts[0]), int(parts[1])
                        continue
                    except ValueError:
                        pass
            token = parts[0]
            try:
                values = np.array([float(x) for x in parts[1:]], dtype=np.float64)
            except ValueError as exc:
                raise DataError(f"line {lineno}: non-numeric vector component") from exc
            if values.size == 0:
                raise DataError(f"line {lineno}: no vector components")
            try:
                vectors.add(token, values)
            except DataError as exc:
                raise DataError(f"line {lineno}: {exc}") from exc
    finally:
        if own:
            fh.close()
    return vectors


def cosine(a: str, b: str, vectors: WordVectors) -> float:
    """Cosine similarity of two tokens' vectors, in [-1, 1]."""
    va, vb = vectors[a], vectors[b]
    na, nb = np.linalg.norm(va), np.linalg.norm(vb)
    if na == 0.0 or nb == 0.0:
        raise DataError(f"zero vector for {a if na == 0.0 else b!r}")
    return float(np.dot(va, vb) / (na * nb))


def best_keyword_link(
    tokens: Iterable[str], keywords: Iterable[str], vectors: WordVectors
) -> tuple[str, float] | None:
    """The (keyword, weight) pair maximizing token-keyword cosine similarity.

    Ties break to the lexicographically smallest keyword, then token.  The
    weight is the cosine clamped into [0, 1].  Returns None when no
    (token, keyword) pair has vectors on both sides.
    """
    usable_tokens = sorted({t for t in tokens if t in vectors})
    usable_keywords = sorted({k for k in keywords if k in vectors})
    if not usable_tokens or not usable_keywords:
        return None
    best: tuple[str, float] | None = None
    best_cos = -np.inf
    for keyword in usable_keywords:
        for token in usable_tokens:
            try:
                c = cosine(token, keyword, vectors)
            except DataError:
                continue
            if c > best_cos:
                best_cos = c
                best = (keyword, min(max(c, 0.0), 1.0))
    return best
