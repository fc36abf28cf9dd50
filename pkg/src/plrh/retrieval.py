"""Exhaustive cosine-similarity selection of in-context examples.

Two implementations on purpose: select_examples is the vectorized path used
by the pipeline, select_examples_oracle is a slow scalar re-derivation
(fsum dot products, plain sorted()) kept as an independent cross-check.
Both rank by descending score with ties broken by ascending sample id.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .data_model import Dataset, Sample
from .errors import RetrievalError


@dataclass(frozen=True)
class SelectionResult:
    """Ranked pool samples for one query, best match first."""

    query_id: str
    selected: tuple[tuple[str, float], ...]  # (sample_id, score), descending score
    n_requested: int

    def ids(self) -> tuple[str, ...]:
        return tuple(sid for sid, _ in self.selected)

    def scores(self) -> tuple[float, ...]:
        return tuple(score for _, score in self.selected)


def cosine_similarity(a: Sequence[float] | np.ndarray, b: Sequence[float] | np.ndarray) -> float:
    """Cosine of the angle between two vectors, computed in float64."""
    va = np.asarray(a, dtype=np.float64)
    vb = np.asarray(b, dtype=np.float64)
    if va.ndim != 1 or vb.ndim != 1:
        raise RetrievalError("cosine_similarity expects one-dimensional vectors")
    if va.shape[0] != vb.shape[0]:
        raise RetrievalError(f"dimension mismatch: {va.shape[0]} vs {vb.shape[0]}")
    if not (np.all(np.isfinite(va)) and np.all(np.isfinite(vb))):
        raise RetrievalError("vectors must be finite")
    na = float(np.linalg.norm(va))
    nb = float(np.linalg.norm(vb))
    if na == 0.0 or nb == 0.0:
        raise RetrievalError("cosine similarity undefined for zero-norm vectors")
    return float(min(1.0, max(-1.0, float(va @ vb) / (na * nb))))


def _query_vector(query: Sequence[float] | np.ndarray, dim: int) -> np.ndarray:
    q = np.asarray(query, dtype=np.float64)
    if q.ndim != 1 or q.shape[0] != dim:
        raise RetrievalError(f"query must have shape ({dim},), got {q.shape}")
    if not np.all(np.isfinite(q)):
        raise RetrievalError("query vector must be finite")
    if float(np.linalg.norm(q)) == 0.0:
        raise RetrievalError("query vector has zero norm")
    return q


def _pool(dataset: Dataset) -> list[Sample]:
    train = dataset.train_samples()
    if not train:
        raise RetrievalError("selection pool has no train samples")
    return train


def select_examples(
    query: Sequence[float] | np.ndarray,
    pool: Dataset,
    n: int,
    query_id: str = "",
) -> SelectionResult:
    """Top-n pool samples by cosine similarity against the query vector."""
    if n < 1:
        raise RetrievalError(f"n must be at least 1, got {n}")
    train = _pool(pool)
    q = _query_vector(query, pool.feature_dim)

    mat = np.stack([s.feature for s in train]).astype(np.float64)
    norms = np.linalg.norm(mat, axis=1)
    if np.any(norms == 0.0):
        raise RetrievalError("selection pool contains a zero-norm feature")
    scores = (mat @ q) / (norms * float(np.linalg.norm(q)))
    np.clip(scores, -1.0, 1.0, out=scores)

    ids = np.array([s.id for s in train])
    # Primary key: descending score. Secondary: ascending id. lexsort reads
    # its keys last-first, so the score key goes last.
    order = np.lexsort((ids, -scores))
    top = order[: min(n, len(train))]
    selected = tuple((str(ids[i]), float(scores[i])) for i in top)
    return SelectionResult(query_id=query_id, selected=selected, n_requested=n)


def select_examples_oracle(
    query: Sequence[float] | np.ndarray,
    pool: Dataset,
    n: int,
    query_id: str = "",
) -> SelectionResult:
    """Scalar reference implementation of select_examples.

    Deliberately avoids numpy for the ranking math: compensated sums via
    math.fsum, one pairwise cosine at a time, stdlib sort.
    """
    if n < 1:
        raise RetrievalError(f"n must be at least 1, got {n}")
    train = _pool(pool)
    q = [float(x) for x in _query_vector(query, pool.feature_dim)]
    qn = math.sqrt(math.fsum(x * x for x in q))

    scored: list[tuple[float, str]] = []
    for s in train:
        v = [float(x) for x in np.asarray(s.feature, dtype=np.float64)]
        vn = math.sqrt(math.fsum(x * x for x in v))
        if vn == 0.0:
            raise RetrievalError("selection pool contains a zero-norm feature")
        dot = math.fsum(a * b for a, b in zip(q, v))
        score = min(1.0, max(-1.0, dot / (vn * qn)))
        scored.append((score, s.id))
    scored.sort(key=lambda t: (-t[0], t[1]))
    selected = tuple((sid, score) for score, sid in scored[: min(n, len(train))])
    return SelectionResult(query_id=query_id, selected=selected, n_requested=n)
