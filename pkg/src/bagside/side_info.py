"""Alias and entity-type side information: cosine matching and embedding means.

All operations are pure functions over immutable tables. The alias/type
tables used at train time live in ``ModelParams``; the wrapper classes here
also serve the offline matching path where alias phrase vectors arrive as
an EMB1 file aligned with aliases.txt.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .corpus import EmbeddingMatrix
from .errors import (
    BadAliasIdError,
    BadTypeIdError,
    DimMismatchError,
    EmptyTypesError,
    NonFiniteError,
    ZeroVectorError,
)


def _as_rows(table) -> np.ndarray:
    if isinstance(table, (AliasTable, TypeTable)):
        table = table.matrix
    if isinstance(table, EmbeddingMatrix):
        table = table.data
    rows = np.asarray(table, dtype=np.float64)
    if rows.ndim != 2:
        raise DimMismatchError(f"table must be 2-d, got ndim={rows.ndim}")
    return rows


@dataclass(frozen=True)
class AliasTable:
    """|aliases| x d_a matrix; row 0 is the NO_ALIAS fallback."""

    matrix: np.ndarray

    def __post_init__(self):
        rows = _as_rows(self.matrix)
        if not np.all(np.isfinite(rows)):
            raise NonFiniteError("alias table contains NaN or Inf")
        object.__setattr__(self, "matrix", rows)

    @property
    def rows(self) -> int:
        return self.matrix.shape[0]

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]


@dataclass(frozen=True)
class TypeTable:
    """|types| x d_t matrix; row 0 is the NO_TYPE fallback."""

    matrix: np.ndarray

    def __post_init__(self):
        rows = _as_rows(self.matrix)
        if not np.all(np.isfinite(rows)):
            raise NonFiniteError("type table contains NaN or Inf")
        object.__setattr__(self, "matrix", rows)

    @property
    def rows(self) -> int:
        return self.matrix.shape[0]

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]


def cosine(u, v) -> float:
    """u.v / (|u||v|), undefined for zero-norm inputs."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape or u.ndim != 1:
        raise DimMismatchError(f"shapes {u.shape} and {v.shape} do not match")
    nu = np.linalg.norm(u)
    nv = np.linalg.norm(v)
    if nu == 0.0 or nv == 0.0:
        raise ZeroVectorError("cosine is undefined for a zero vector")
    return float(np.dot(u, v) / (nu * nv))


def match_aliases(phrase_vec, table, threshold: float) -> list[int]:
    """Alias ids whose rows reach the cosine threshold, best first.

    Row 0 (NO_ALIAS) never matches; zero-norm rows are skipped. Ties on
    similarity break toward the lower id.
    """
    if not 0.0 <= threshold <= 1.0:
        raise ValueError(f"threshold must be in [0, 1], got {threshold}")
    rows = _as_rows(table)
    phrase = np.asarray(phrase_vec, dtype=np.float64)
    if phrase.ndim != 1 or phrase.shape[0] != rows.shape[1]:
        raise DimMismatchError(
            f"phrase dim {phrase.shape} does not match table dim {rows.shape[1]}"
        )
    pnorm = np.linalg.norm(phrase)
    if pnorm == 0.0:
        raise ZeroVectorError("phrase vector has zero norm")
    norms = np.linalg.norm(rows, axis=1)
    scored = []
    for i in range(1, rows.shape[0]):
        if norms[i] == 0.0:
            continue
        sim = float(np.dot(rows[i], phrase) / (norms[i] * pnorm))
        if sim >= threshold:
            scored.append((-sim, i))
    scored.sort()
    return [i for _, i in scored]


def alias_vector(alias_ids, table) -> np.ndarray:
    """Mean of the rows for alias_ids; the NO_ALIAS row when none matched."""
    rows = _as_rows(table)
    ids = list(alias_ids)
    if not ids:
        return rows[0].copy()
    for i in ids:
        if not 0 <= i < rows.shape[0]:
            raise BadAliasIdError(f"alias id {i} outside 0..{rows.shape[0] - 1}")
    return rows[ids].mean(axis=0)


def type_vector(type_ids, table) -> np.ndarray:
    """Mean of the rows for type_ids; the list must be non-empty."""
    rows = _as_rows(table)
    ids = list(type_ids)
    if not ids:
        raise EmptyTypesError("type id list is empty")
    for i in ids:
        if not 0 <= i < rows.shape[0]:
            raise BadTypeIdError(f"type id {i} outside 0..{rows.shape[0] - 1}")
    return rows[ids].mean(axis=0)
