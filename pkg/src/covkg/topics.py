"""TF-IDF vectorization and multiplicative-update NMF topic modeling.

The TF-IDF convention is pinned: tf is the raw in-document count,
idf(t) = ln((1 + m) / (1 + df(t))) + 1, and nonzero rows are L2-normalized.
NMF minimizes the Frobenius reconstruction error with the classic
multiplicative updates, whose error sequence is provably non-increasing.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import IO, Sequence

import numpy as np
import scipy.sparse as sp

from .errors import DataError

NMF_MAGIC = b"covkg-nmf v1"

#: Vocabulary size cap used throughout the pipeline by default.
DEFAULT_VOCAB_CAP = 2000
#: Default number of topics fitted on a full corpus.
DEFAULT_TOPIC_COUNT = 100
#: Default number of keywords surfaced per topic.
DEFAULT_KEYWORDS_PER_TOPIC = 10

_EPS = 1e-12


@dataclass(frozen=True)
class Vocabulary:
    """Ordered term list with term -> column lookup."""

    terms: tuple[str, ...]

    def __post_init__(self) -> None:
        if len(set(self.terms)) != len(self.terms):
            raise DataError("vocabulary contains duplicate terms")

    def __len__(self) -> int:
        return len(self.terms)

    def index(self) -> dict[str, int]:
        return {t: i for i, t in enumerate(self.terms)}


@dataclass
class NmfModel:
    """Nonnegative factor pair: W (documents x topics), H (topics x terms)."""

    W: np.ndarray
    H: np.ndarray
    vocabulary: Vocabulary

    def __post_init__(self) -> None:
        if self.W.ndim != 2 or self.H.ndim != 2 or self.W.shape[1] != self.H.shape[0]:
            raise DataError("inconsistent factor dimensions")
        if self.H.shape[1] != len(self.vocabulary):
            raise DataError("H column count does not match vocabulary size")
        if (self.W < 0).any() or (self.H < 0).any():
            raise DataError("factors must be nonnegative")

    @property
    def topic_count(self) -> int:
        return self.W.shape[1]


def build_vocabulary(docs: Sequence[Sequence[str]], cap: int = DEFAULT_VOCAB_CAP) -> Vocabulary:
    """The ``cap`` highest document-frequency terms, ties broken lexicographically."""
    df: dict[str, int] = {}
    for doc in docs:
        for term in set(doc):
            df[term] = df.get(term, 0) + 1
    ranked = sorted(df, key=lambda t: (-df[t], t))
    return Vocabulary(tuple(ranked[:cap]))


def build_tfidf(docs: Sequence[Sequence[str]], vocab: Vocabulary) -> sp.csr_matrix:
    """Sparse TF-IDF matrix, one L2-normalized row per document.

    Documents containing no vocabulary term produce an all-zero row, which is
    left unnormalized.
    """
    if len(vocab) == 0:
        raise DataError("vocabulary is empty")
    index = vocab.index()
    m = len(docs)
    df = np.zeros(len(vocab), dtype=np.int64)
    for doc in docs:
        for term in set(doc):
            col = index.get(term)
            if col is not None:
                df[col] += 1
    idf = np.log((1.0 + m) / (1.0 + df)) + 1.0

    rows: list[int] = []
    cols: list[int] = []
    vals: list[float] = []
    for r, doc in enumerate(docs):
        counts: dict[int, int] = {}
        for term in doc:
            col = index.get(term)
            if col is not None:
                counts[col] = counts.get(col, 0) + 1
        if not counts:
            continue
        entries = sorted(counts.items())
        weights = np.array([tf * idf[c] for c, tf in entries], dtype=np.float64)
        norm = np.linalg.norm(weights)
        if norm > 0:
            weights = weights / norm
        rows.extend([r] * len(entries))
        cols.extend(c for c, _ in entries)
        vals.extend(weights)
    return sp.csr_matrix(
        (np.array(vals), (np.array(rows, dtype=np.int64), np.array(cols, dtype=np.int64))),
        shape=(m, len(vocab)),
    )


def _frobenius_error(X, W: np.ndarray, H: np.ndarray) -> float:
    """||X - WH||_F, computed directly on small problems, via a trace identity
    (cheaper but cancellation-prone) on large ones."""
    m, n = X.shape
    if m * n <= 4_000_000:
        dense = X.toarray() if sp.issparse(X) else np.asarray(X)
        return float(np.linalg.norm(dense - W @ H))
    x_sq = float((X.multiply(X)).sum()) if sp.issparse(X) else float((X * X).sum())
    cross = float(np.sum(np.asarray(X @ H.T) * W))
    wh_sq = float(np.sum((W.T @ W) * (H @ H.T)))
    return float(np.sqrt(max(x_sq - 2.0 * cross + wh_sq, 0.0)))


def nmf_fit(
    X,
    u: int,
    max_iters: int = 500,
    tol: float = 1e-6,
    seed: int = 0,
    vocabulary: Vocabulary | None = None,
) -> tuple[NmfModel, list[float]]:
    """Fit X ~ WH by multiplicative updates; returns the model and error trace.

    Stops after ``max_iters`` updates or when the relative change in the
    Frobenius error drops below ``tol``.  Initialization is seeded uniform
    noise scaled to the data, so identical seeds give identical models.
    """
    m, n = X.shape
    if not (1 <= u <= min(m, n)):
        raise DataError(f"topic count {u} outside [1, min({m}, {n})]")
    if vocabulary is None:
        vocabulary = Vocabulary(tuple(f"term{i}" for i in range(n)))
    rng = np.random.default_rng(seed)
    mean = float(X.mean())
    scale = float(np.sqrt(mean / u)) if mean > 0 else 1.0
    W = rng.random((m, u)) * scale
    H = rng.random((u, n)) * scale

    sparse = sp.issparse(X)
    errors = [_frobenius_error(X, W, H)]
    for _ in range(max_iters):
        # Lee-Seung updates for the Frobenius objective: H with the current W,
        # then W with the updated H.
        numer_h = np.asarray((X.T @ W).T if sparse else W.T @ X)
        H *= numer_h / (W.T @ W @ H + _EPS)
        numer_w = np.asarray(X @ H.T)
        W *= numer_w / (W @ (H @ H.T) + _EPS)
        err = _frobenius_error(X, W, H)
        errors.append(err)
        if errors[-2] > 0 and abs(errors[-2] - err) / max(errors[-2], _EPS) < tol:
            break
    return NmfModel(W=W, H=H, vocabulary=vocabulary), errors


def topic_keywords(model: NmfModel, k: int = DEFAULT_KEYWORDS_PER_TOPIC) -> list[list[tuple[str, float]]]:
    """Per topic, the k largest-weight terms with weights scaled so max = 1.

    Ties break to the lexicographically first term.  A topic whose row is all
    zero yields an empty list.
    """
    if k > len(model.vocabulary):
        raise DataError(f"k={k} exceeds vocabulary size {len(model.vocabulary)}")
    terms = model.vocabulary.terms
    out: list[list[tuple[str, float]]] = []
    for row in model.H:
        top = row.max()
        if top <= 0:
            out.append([])
            continue
        order = sorted(range(len(terms)), key=lambda j: (-row[j], terms[j]))[:k]
        out.append([(terms[j], float(row[j] / top)) for j in order])
    return out


def assign_topics(
    model: NmfModel, dominance: float = 0.5
) -> tuple[list[list[tuple[int, float]]], list[int]]:
    """Soft topic memberships per document.

    Document d always gets its argmax topic (weight 1.0) plus every topic whose
    W entry is at least ``dominance`` times the row max; membership weight is
    the entry divided by the row max.  Documents with an all-zero row get no
    topics and are returned in the skip list.
    """
    if not (0.0 < dominance <= 1.0):
        raise DataError(f"dominance {dominance} outside (0, 1]")
    assignments: list[list[tuple[int, float]]] = []
    skipped: list[int] = []
    for d, row in enumerate(model.W):
        top = row.max()
        if top <= 0:
            assignments.append([])
            skipped.append(d)
            continue
        members = [
            (i, float(value / top)) for i, value in enumerate(row) if value >= dominance * top
        ]
        assignments.append(members)
    return assignments, skipped


# -- model persistence ---------------------------------------------------------


def save_vocabulary(vocab: Vocabulary, sink: str | Path | IO[str]) -> None:
    own = isinstance(sink, (str, Path))
    fh = open(sink, "w", encoding="utf-8") if own else sink
    try:
        for term in vocab.terms:
            fh.write(term + "\n")
    finally:
        if own:
            fh.close()


def load_vocabulary(source: str | Path | IO[str]) -> Vocabulary:
    own = isinstance(source, (str, Path))
    fh = open(source, "r", encoding="utf-8") if own else source
    try:
        return Vocabulary(tuple(line.rstrip("\n") for line in fh if line.rstrip("\n")))
    finally:
        if own:
            fh.close()


def save_nmf(model: NmfModel, path: str | Path) -> None:
    """Binary container: magic, dimension header, then W and H as little-endian
    float64 in row-major order."""
    m, u = model.W.shape
    n = model.H.shape[1]
    with open(path, "wb") as fh:
        fh.write(NMF_MAGIC + b"\n")
        fh.write(struct.pack("<3q", m, u, n))
        fh.write(np.ascontiguousarray(model.W, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(model.H, dtype="<f8").tobytes())


def load_nmf(path: str | Path, vocabulary: Vocabulary) -> NmfModel:
    with open(path, "rb") as fh:
        magic = fh.readline().rstrip(b"\n")
        if magic != NMF_MAGIC:
            raise DataError(f"bad model magic {magic!r}")
        header = fh.read(24)
        if len(header) != 24:
            raise DataError("truncated model header")
        m, u, n = struct.unpack("<3q", header)
        w_bytes = fh.read(m * u * 8)
        h_bytes = fh.read(u * n * 8)
        if len(w_bytes) != m * u * 8 or len(h_bytes) != u * n * 8:
            raise DataError("truncated model payload")
        W = np.frombuffer(w_bytes, dtype="<f8").reshape(m, u).copy()
        H = np.frombuffer(h_bytes, dtype="<f8").reshape(u, n).copy()
    return NmfModel(W=W, H=H, vocabulary=vocabulary)
