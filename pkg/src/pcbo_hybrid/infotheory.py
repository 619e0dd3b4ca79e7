"""Plug-in Shannon entropy family over columns of a :class:`FeatureMatrix`.

All quantities are in bits. The label is addressed with the pseudo-column
index :data:`LABEL`.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .dataset import FeatureMatrix

LABEL = -1


@dataclass(frozen=True)
class JointDistribution:
    """Sparse empirical joint distribution: observed value tuples and their counts."""

    counts: dict[tuple[int, ...], int]
    total: int
    arity: int


def _canonical(matrix: FeatureMatrix, columns: Sequence[int]) -> tuple[int, ...]:
    cols = tuple(int(c) for c in columns)
    if not cols:
        raise ValueError("column list must be non-empty")
    for c in cols:
        if c != LABEL and not 0 <= c < matrix.num_features:
            raise IndexError(f"column {c} out of range")
    if len(set(cols)) != len(cols):
        raise ValueError("duplicate columns")
    return tuple(sorted(cols))


def _column(matrix: FeatureMatrix, c: int) -> tuple[np.ndarray, int]:
    if c == LABEL:
        return matrix.labels, matrix.label_alphabet
    return matrix.values[:, c], int(matrix.alphabets[c])


def _joint_codes(matrix: FeatureMatrix, cols: tuple[int, ...]) -> np.ndarray:
    radix = 1
    for c in cols:
        radix *= _column(matrix, c)[1]
    if radix < 2**62:
        codes = np.zeros(matrix.num_samples, dtype=np.int64)
        for c in cols:
            col, size = _column(matrix, c)
            codes = codes * size + col
        return codes
    stacked = np.stack([_column(matrix, c)[0] for c in cols], axis=1)
    return np.unique(stacked, axis=0, return_inverse=True)[1].ravel()


def _counts(matrix: FeatureMatrix, cols: tuple[int, ...]) -> np.ndarray:
    if matrix.num_samples < 1:
        raise ValueError("empty matrix")
    _, counts = np.unique(_joint_codes(matrix, cols), return_counts=True)
    return counts


def joint_distribution(matrix: FeatureMatrix, columns: Sequence[int]) -> JointDistribution:
    cols = tuple(int(c) for c in columns)
    _canonical(matrix, cols)
    stacked = np.stack([_column(matrix, c)[0] for c in cols], axis=1)
    keys, counts = np.unique(stacked, axis=0, return_counts=True)
    return JointDistribution(
        {tuple(int(v) for v in k): int(n) for k, n in zip(keys, counts)},
        int(counts.sum()),
        len(cols),
    )


def _entropy_from_counts(counts: np.ndarray) -> float:
    total = counts.sum()
    p = counts / total
    return float(-(p * np.log2(p)).sum())


def entropy(matrix: FeatureMatrix, columns: Sequence[int]) -> float:
    """Joint entropy ``H(columns)`` of the empirical distribution."""
    h = _entropy_from_counts(_counts(matrix, _canonical(matrix, columns)))
    return h if h > 0.0 else 0.0


def _disjoint(*groups: Sequence[int]) -> None:
    seen: set[int] = set()
    for g in groups:
        for c in g:
            if c in seen:
                raise ValueError(f"column {c} appears in more than one argument")
            seen.add(c)


def conditional_entropy(matrix: FeatureMatrix, columns, given) -> float:
    """``H(columns | given) = H(columns, given) - H(given)``."""
    columns, given = list(columns), list(given)
    if not columns or not given:
        raise ValueError("columns and given must be non-empty")
    _disjoint(columns, given)
    return entropy(matrix, columns + given) - entropy(matrix, given)


def mutual_information(matrix: FeatureMatrix, a, b) -> float:
    """``I(a; b) = H(a) - H(a | b)``, evaluated symmetrically as ``H(a)+H(b)-H(a,b)``."""
    a, b = list(a), list(b)
    if not a or not b:
        raise ValueError("both column groups must be non-empty")
    _disjoint(a, b)
    ha, hb = entropy(matrix, a), entropy(matrix, b)
    lo, hi = sorted((ha, hb))
    return (lo + hi) - entropy(matrix, a + b)


def conditional_mutual_information(matrix: FeatureMatrix, a, b, given) -> float:
    """``I(a; b | z) = H(a|z) + H(b|z) - H(a,b|z)``; ``given`` must be non-empty."""
    a, b, given = list(a), list(b), list(given)
    if not given:
        raise ValueError("given must be non-empty; use mutual_information instead")
    if not a or not b:
        raise ValueError("both column groups must be non-empty")
    _disjoint(a, b, given)
    ha, hb = conditional_entropy(matrix, a, given), conditional_entropy(matrix, b, given)
    lo, hi = sorted((ha, hb))
    return (lo + hi) - conditional_entropy(matrix, a + b, given)


def _conditional_interaction(matrix, columns: list[int], given: list[int]) -> float:
    if len(columns) == 2:
        if given:
            return conditional_mutual_information(matrix, [columns[0]], [columns[1]], given)
        return mutual_information(matrix, [columns[0]], [columns[1]])
    head, last = columns[:-1], columns[-1]
    return (_conditional_interaction(matrix, head, given)
            - _conditional_interaction(matrix, head, given + [last]))


def interaction_information(matrix: FeatureMatrix, columns: Sequence[int]) -> float:
    """Interaction information ``I(X1;...;Xk)`` via the conditioning recursion.

    ``I(X1;...;Xk) = I(X1;...;Xk-1) - I(X1;...;Xk-1 | Xk)`` with mutual
    information as the ``k = 2`` base case. Negative values indicate synergy.
    """
    cols = [int(c) for c in columns]
    if len(cols) < 2:
        raise ValueError("interaction information needs at least two columns")
    _canonical(matrix, cols)
    return _conditional_interaction(matrix, cols, [])
