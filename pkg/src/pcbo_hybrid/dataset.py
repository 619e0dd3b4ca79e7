"""Small-alphabet tabular data: loading, quantile binning and synthetic fixtures."""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DataError
from .seeding import spawn_rng


@dataclass(frozen=True)
class FeatureMatrix:
    """Samples x features matrix of small non-negative integers plus a label column.

    ``alphabets[j]`` is the number of symbols column ``j`` may take; every value
    of that column lies in ``[0, alphabets[j])``.
    """

    values: np.ndarray
    alphabets: np.ndarray
    labels: np.ndarray
    label_alphabet: int
    feature_names: list[str] = field(default_factory=list)

    def __post_init__(self):
        values = np.asarray(self.values)
        labels = np.asarray(self.labels)
        if values.ndim != 2:
            raise DataError("values must be a 2-D matrix")
        n_rows, n_cols = values.shape
        if n_rows < 1 or n_cols < 1:
            raise DataError("feature matrix must have at least one row and one column")
        if not np.issubdtype(values.dtype, np.integer) or not np.issubdtype(labels.dtype, np.integer):
            raise DataError("values and labels must be integer arrays")
        if labels.shape != (n_rows,):
            raise DataError(f"labels length {labels.shape} does not match {n_rows} rows")
        alphabets = np.asarray(self.alphabets, dtype=np.int64)
        if alphabets.shape != (n_cols,):
            raise DataError("one alphabet size per column is required")
        if values.min() < 0 or np.any(values.max(axis=0) >= alphabets):
            raise DataError("feature value outside its column alphabet")
        if labels.min() < 0 or labels.max() >= self.label_alphabet:
            raise DataError("label outside the label alphabet")
        names = list(self.feature_names) or [f"f{j}" for j in range(n_cols)]
        if len(names) != n_cols:
            raise DataError("one feature name per column is required")
        object.__setattr__(self, "values", values.astype(np.int64, copy=False))
        object.__setattr__(self, "labels", labels.astype(np.int64, copy=False))
        object.__setattr__(self, "alphabets", alphabets)
        object.__setattr__(self, "label_alphabet", int(self.label_alphabet))
        object.__setattr__(self, "feature_names", names)

    @property
    def num_samples(self) -> int:
        return self.values.shape[0]

    @property
    def num_features(self) -> int:
        return self.values.shape[1]

    def select(self, columns: Sequence[int]) -> "FeatureMatrix":
        """Sub-matrix restricted to ``columns`` (in the given order)."""
        cols = list(columns)
        return FeatureMatrix(
            self.values[:, cols],
            self.alphabets[cols],
            self.labels,
            self.label_alphabet,
            [self.feature_names[c] for c in cols],
        )

    @classmethod
    def from_arrays(cls, values, labels, feature_names=None) -> "FeatureMatrix":
        """Build a matrix inferring every alphabet as ``max + 1``."""
        values = np.asarray(values, dtype=np.int64)
        labels = np.asarray(labels, dtype=np.int64)
        if values.size == 0 or labels.size == 0:
            raise DataError("empty table")
        return cls(values, values.max(axis=0) + 1, labels, int(labels.max()) + 1,
                   list(feature_names) if feature_names is not None else [])


@dataclass(frozen=True)
class BinSpec:
    """Cut points of a quantile discretization; ``levels`` bins, ``levels - 1`` edges."""

    edges: tuple[float, ...]
    levels: int

    def __post_init__(self):
        edges = tuple(float(e) for e in self.edges)
        if self.levels < 2:
            raise ValueError("levels must be >= 2")
        if len(edges) != self.levels - 1:
            raise ValueError("edges length must equal levels - 1")
        if any(b <= a for a, b in zip(edges, edges[1:])):
            raise ValueError("edges must be strictly increasing")
        object.__setattr__(self, "edges", edges)

    def to_dict(self) -> dict:
        return {"levels": self.levels, "edges": list(self.edges)}

    @classmethod
    def from_dict(cls, data: dict) -> "BinSpec":
        return cls(tuple(data["edges"]), int(data["levels"]))


# --------------------------------------------------------------------------- tables


def _delimiter_for(path: Path, delimiter: str | None) -> str:
    if delimiter is not None:
        return delimiter
    return "\t" if path.suffix.lower() in {".tsv", ".tab"} else ","


def read_table(path, label_column: str, delimiter: str | None = None):
    """Read a delimited table with a header row.

    Returns ``(feature_names, rows, labels)`` where ``rows`` is a list of raw
    string rows for the feature columns and ``labels`` the raw label strings.
    """
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh, delimiter=_delimiter_for(path, delimiter))
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path}: empty table") from None
        if label_column not in header:
            raise DataError(f"{path}: label column {label_column!r} not found")
        label_idx = header.index(label_column)
        names = [h for i, h in enumerate(header) if i != label_idx]
        rows, labels = [], []
        for line_no, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise DataError(f"{path}: row {line_no} has {len(row)} cells, expected {len(header)}")
            labels.append(row[label_idx].strip())
            rows.append([c.strip() for i, c in enumerate(row) if i != label_idx])
    if not rows:
        raise DataError(f"{path}: empty table")
    if not names:
        raise DataError(f"{path}: no feature columns")
    return names, rows, labels


def _parse_cells(rows, names, label_column, labels, path, kind):
    parse = int if kind == "int" else float
    out = np.empty((len(rows), len(names)), dtype=np.int64 if kind == "int" else np.float64)
    for r, row in enumerate(rows):
        for c, cell in enumerate(row):
            try:
                out[r, c] = parse(cell)
            except ValueError:
                raise DataError(
                    f"{path}: cannot parse {cell!r} at row {r + 2}, column {names[c]!r}"
                ) from None
    lab = np.empty(len(labels), dtype=np.int64)
    for r, cell in enumerate(labels):
        try:
            lab[r] = int(cell)
        except ValueError:
            raise DataError(
                f"{path}: cannot parse label {cell!r} at row {r + 2}, column {label_column!r}"
            ) from None
    return out, lab


def load_table(path, label_column: str = "label", delimiter: str | None = None) -> FeatureMatrix:
    """Load an integer table; each column's alphabet is its maximum plus one."""
    names, rows, labels = read_table(path, label_column, delimiter)
    values, lab = _parse_cells(rows, names, label_column, labels, path, "int")
    if values.min() < 0 or lab.min() < 0:
        raise DataError(f"{path}: negative values are not allowed")
    return FeatureMatrix.from_arrays(values, lab, names)


def load_real_table(path, label_column: str = "label", delimiter: str | None = None):
    """Load a table of real-valued features (for discretization) and integer labels."""
    names, rows, labels = read_table(path, label_column, delimiter)
    values, lab = _parse_cells(rows, names, label_column, labels, path, "float")
    if not np.all(np.isfinite(values)):
        raise DataError(f"{path}: non-finite values are not supported")
    return names, values, lab


def write_table(path, matrix: FeatureMatrix, label_column: str = "label") -> None:
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, delimiter=_delimiter_for(path, None), lineterminator="\n")
        writer.writerow([*matrix.feature_names, label_column])
        for row, lab in zip(matrix.values.tolist(), matrix.labels.tolist()):
            writer.writerow([*row, lab])


# --------------------------------------------------------------------------- binning


def _linear_quantiles(sorted_values: np.ndarray, levels: int) -> list[float]:
    # Position j*(n-1)/levels split into an exact integer part and fraction so that
    # edges falling on a sample reproduce that sample bit-for-bit.
    n = len(sorted_values)
    edges = []
    for j in range(1, levels):
        num = j * (n - 1)
        k, rem = divmod(num, levels)
        lo = float(sorted_values[k])
        if rem == 0:
            edges.append(lo)
        else:
            hi = float(sorted_values[k + 1])
            edges.append(lo + (rem / levels) * (hi - lo))
    return edges


def quantile_discretize(values, levels: int) -> tuple[np.ndarray, BinSpec]:
    """Map reals to ``{0..levels-1}`` by empirical quantiles at ``j/levels``.

    Edges use linear interpolation between order statistics. A value's level is
    the number of edges strictly below it. Coinciding edges (ties in the data)
    are merged, so heavily tied columns may use fewer levels; a constant column
    maps entirely to level 0.
    """
    if levels < 2:
        raise ValueError("levels must be >= 2")
    arr = np.asarray(values, dtype=np.float64).ravel()
    if arr.size == 0:
        raise ValueError("values must be non-empty")
    edges = sorted(set(_linear_quantiles(np.sort(arr), levels)))
    spec = BinSpec(tuple(edges), len(edges) + 1)
    return apply_bins(arr, spec), spec


def apply_bins(values, spec: BinSpec) -> np.ndarray:
    """Discretize with frozen edges; values beyond the edges land in the end bins."""
    arr = np.asarray(values, dtype=np.float64)
    return np.searchsorted(np.asarray(spec.edges), arr, side="left").astype(np.int64)


def save_binspecs(path, specs: dict[str, BinSpec]) -> None:
    payload = {name: spec.to_dict() for name, spec in specs.items()}
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def load_binspecs(path) -> dict[str, BinSpec]:
    try:
        payload = json.loads(Path(path).read_text())
        return {name: BinSpec.from_dict(d) for name, d in payload.items()}
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"{path}: invalid bin sidecar ({exc})") from None


# --------------------------------------------------------------------------- synthetic data


def synthesize_planted(
    samples: int,
    features: int,
    informative: int,
    alphabet: int = 5,
    classes: int = 3,
    noise: float = 0.1,
    seed: int = 0,
) -> tuple[FeatureMatrix, list[int]]:
    """Random matrix with ``informative`` columns that encode the label.

    Each informative column applies a random injective code (or a wrapped code
    when ``classes > alphabet``) to the label, then each cell is replaced by a
    uniform random symbol with probability ``noise``. Remaining columns are
    uniform and independent of the label.
    """
    if samples < 1 or features < 1 or alphabet < 2 or classes < 2:
        raise ValueError("samples, features >= 1 and alphabet, classes >= 2 are required")
    if not 0 <= informative <= features:
        raise ValueError("informative must lie in [0, features]")
    if not 0.0 <= noise <= 1.0:
        raise ValueError("noise must lie in [0, 1]")
    rng = spawn_rng(seed, "synthesize_planted")
    labels = rng.integers(0, classes, size=samples)
    values = rng.integers(0, alphabet, size=(samples, features))
    planted = sorted(int(i) for i in rng.choice(features, size=informative, replace=False))
    for col in planted:
        code = rng.permutation(alphabet)[np.arange(classes) % alphabet]
        clean = code[labels]
        flip = rng.random(samples) < noise
        values[:, col] = np.where(flip, rng.integers(0, alphabet, size=samples), clean)
    matrix = FeatureMatrix(values, np.full(features, alphabet), labels, classes)
    return matrix, planted
