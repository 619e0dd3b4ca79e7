"""Polynomial binary problems, their spin (Pauli-Z) form, and the feature-selection builders."""
from __future__ import annotations

import io
import itertools
from dataclasses import dataclass, replace
from functools import cached_property
from math import comb
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from .dataset import FeatureMatrix
from .errors import DataError
from .infotheory import LABEL, conditional_mutual_information, entropy, mutual_information

ZERO_TOL = 1e-12
DEFAULT_LAMBDA_C = 5.0

Term = tuple[int, ...]


def _canonical_terms(terms: Mapping[Iterable[int], float], num_vars: int) -> dict[Term, float]:
    out: dict[Term, float] = {}
    for key, coeff in terms.items():
        t = tuple(int(i) for i in key)
        if not t:
            raise ValueError("empty term; put scalars in the constant/offset")
        if any(b <= a for a, b in zip(t, t[1:])):
            raise ValueError(f"term {t} must be strictly increasing")
        if t[0] < 0 or t[-1] >= num_vars:
            raise ValueError(f"term {t} out of range for {num_vars} variables")
        if t in out:
            raise ValueError(f"duplicate term {t}")
        c = float(coeff)
        if abs(c) >= ZERO_TOL:
            out[t] = c
    return dict(sorted(out.items(), key=lambda kv: (len(kv[0]), kv[0])))


def _accumulate(acc: dict[Term, float], key: Term, value: float) -> None:
    acc[key] = acc.get(key, 0.0) + value


@dataclass(frozen=True)
class PolyBinaryProblem:
    """``Q(x) = sum_T c_T prod_{i in T} x_i + constant`` over ``x in {0,1}^n``.

    ``cardinality`` holds the hard constraint ``|x|_1 = n`` when set.
    """

    num_vars: int
    terms: dict[Term, float]
    constant: float = 0.0
    cardinality: int | None = None

    def __post_init__(self):
        if self.num_vars < 0:
            raise ValueError("num_vars must be non-negative")
        object.__setattr__(self, "terms", _canonical_terms(self.terms, self.num_vars))
        object.__setattr__(self, "constant", float(self.constant))
        if self.cardinality is not None and not 0 <= self.cardinality <= self.num_vars:
            raise ValueError("cardinality must lie in [0, num_vars]")

    @property
    def max_order(self) -> int:
        return max((len(t) for t in self.terms), default=0)


@dataclass(frozen=True)
class SpinHamiltonian:
    """``H(s) = sum_T c_T prod_{i in T} s_i + offset`` over spins ``s in {+1,-1}^n``.

    Spin ``i`` is the Pauli-Z eigenvalue of qubit ``i``; basis state ``|x>`` with
    bit ``i`` of the integer label ``x`` equal to ``x_i`` has ``s_i = 1 - 2 x_i``.
    """

    num_vars: int
    terms: dict[Term, float]
    offset: float = 0.0

    def __post_init__(self):
        if self.num_vars < 0:
            raise ValueError("num_vars must be non-negative")
        object.__setattr__(self, "terms", _canonical_terms(self.terms, self.num_vars))
        object.__setattr__(self, "offset", float(self.offset))

    @property
    def max_order(self) -> int:
        return max((len(t) for t in self.terms), default=0)

    @cached_property
    def diagonal(self) -> np.ndarray:
        """Energies of all ``2**num_vars`` basis states (read-only array)."""
        table = spin_energy_table(self)
        table.setflags(write=False)
        return table


@dataclass(frozen=True)
class AlphaWeights:
    """Weights of the first/second/third-order blocks; they must sum to one."""

    a1: float
    a2: float
    a3: float

    def __post_init__(self):
        if abs(self.a1 + self.a2 + self.a3 - 1.0) > 1e-12:
            raise ValueError("alpha weights must sum to 1")

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.a1, self.a2, self.a3)


# --------------------------------------------------------------------------- evaluation


def evaluate_binary(problem: PolyBinaryProblem, bits) -> float:
    bits = [int(b) for b in bits]
    if len(bits) != problem.num_vars:
        raise ValueError(f"expected {problem.num_vars} bits, got {len(bits)}")
    if any(b not in (0, 1) for b in bits):
        raise ValueError("bits must be 0 or 1")
    total = problem.constant
    for t, c in problem.terms.items():
        if all(bits[i] for i in t):
            total += c
    return total


def evaluate_spin(hamiltonian: SpinHamiltonian, spins) -> float:
    spins = [int(s) for s in spins]
    if len(spins) != hamiltonian.num_vars:
        raise ValueError(f"expected {hamiltonian.num_vars} spins, got {len(spins)}")
    if any(s not in (1, -1) for s in spins):
        raise ValueError("spins must be +1 or -1")
    total = hamiltonian.offset
    for t, c in hamiltonian.terms.items():
        sign = 1
        for i in t:
            sign *= spins[i]
        total += c * sign
    return total


def term_mask(term: Term) -> int:
    mask = 0
    for i in term:
        mask |= 1 << i
    return mask


def walsh_hadamard(vec: np.ndarray) -> np.ndarray:
    """Unnormalized fast Walsh-Hadamard transform (returns a new array)."""
    out = np.array(vec, dtype=np.float64, copy=True)
    n = out.size
    if n & (n - 1):
        raise ValueError("length must be a power of two")
    h = 1
    while h < n:
        view = out.reshape(-1, 2, h)
        a = view[:, 0, :].copy()
        view[:, 0, :] += view[:, 1, :]
        view[:, 1, :] = a - view[:, 1, :]
        h *= 2
    return out


def spin_energy_table(hamiltonian: SpinHamiltonian) -> np.ndarray:
    """Energy of every basis state, little-endian bit order.

    ``E(x) = sum_S c_S (-1)^{popcount(x & S)}`` is the Walsh-Hadamard transform
    of the coefficient vector indexed by term bitmask.
    """
    coeffs = np.zeros(1 << hamiltonian.num_vars, dtype=np.float64)
    coeffs[0] = hamiltonian.offset
    for t, c in hamiltonian.terms.items():
        coeffs[term_mask(t)] += c
    return walsh_hadamard(coeffs)


def bits_to_spins(bits) -> np.ndarray:
    return 1 - 2 * np.asarray(bits, dtype=np.int64)


def spins_to_bits(spins) -> np.ndarray:
    return (1 - np.asarray(spins, dtype=np.int64)) // 2


# --------------------------------------------------------------------------- transforms


def apply_cardinality_penalty(problem: PolyBinaryProblem, lambda_c: float = DEFAULT_LAMBDA_C) -> PolyBinaryProblem:
    """Add ``lambda_c * (sum_i x_i - n)^2`` and drop the hard constraint.

    With ``x_i^2 = x_i`` the square expands to ``n^2`` plus ``(1 - 2n)`` per
    variable plus ``2`` per unordered pair.
    """
    if problem.cardinality is None:
        raise ValueError("problem has no cardinality constraint")
    if lambda_c <= 0:
        raise ValueError("lambda_c must be positive")
    n, N = problem.cardinality, problem.num_vars
    terms = dict(problem.terms)
    for i in range(N):
        _accumulate(terms, (i,), lambda_c * (1 - 2 * n))
    for i, j in itertools.combinations(range(N), 2):
        _accumulate(terms, (i, j), 2.0 * lambda_c)
    return PolyBinaryProblem(N, terms, problem.constant + lambda_c * n * n, None)


def to_spin(problem: PolyBinaryProblem) -> SpinHamiltonian:
    """Substitute ``x_i = (1 - s_i) / 2`` and expand every monomial."""
    if problem.cardinality is not None:
        raise ValueError("apply the cardinality penalty before converting to spins")
    acc: dict[Term, float] = {}
    offset = problem.constant
    for t, c in problem.terms.items():
        scale = c / (1 << len(t))
        for r in range(len(t) + 1):
            for sub in itertools.combinations(t, r):
                value = scale if r % 2 == 0 else -scale
                if sub:
                    _accumulate(acc, sub, value)
                else:
                    offset += value
    return SpinHamiltonian(problem.num_vars, acc, offset)


def binary_to_spin_hamiltonian(problem: PolyBinaryProblem, lambda_c: float = DEFAULT_LAMBDA_C) -> SpinHamiltonian:
    """Penalize the cardinality constraint when present, then convert to spins."""
    if problem.cardinality is not None:
        problem = apply_cardinality_penalty(problem, lambda_c)
    return to_spin(problem)


# --------------------------------------------------------------------------- builders


class _Scores:
    """Memoized information scores for one matrix."""

    def __init__(self, matrix: FeatureMatrix):
        self.m = matrix
        self._h: dict[tuple[int, ...], float] = {}

    def h(self, cols) -> float:
        key = tuple(sorted(cols))
        if key not in self._h:
            self._h[key] = entropy(self.m, key)
        return self._h[key]

    def info_about_label(self, cols) -> float:
        # H(S) - H(S | y) = H(S) + H(y) - H(S, y)
        cols = list(cols)
        lo, hi = sorted((self.h(cols), self.h([LABEL])))
        return (lo + hi) - self.h(cols + [LABEL])


def build_mrmr(matrix: FeatureMatrix, lam: float) -> PolyBinaryProblem:
    """Relevance ``-lam I(f_i; y)`` per feature plus redundancy ``I(f_i; f_j)``.

    The ordered double sum is collapsed onto sorted pairs, so each pair carries
    ``I(f_i; f_j) + I(f_j; f_i)``. Diagonal terms are excluded.
    """
    F = matrix.num_features
    terms: dict[Term, float] = {}
    for i in range(F):
        _accumulate(terms, (i,), -lam * mutual_information(matrix, [i], [LABEL]))
    for i, j in itertools.combinations(range(F), 2):
        mi = mutual_information(matrix, [i], [j])
        _accumulate(terms, (i, j), mi + mi)
    return PolyBinaryProblem(F, terms)


def _cond_relevance(matrix: FeatureMatrix, i: int, j: int) -> float:
    return conditional_mutual_information(matrix, [i], [LABEL], [j])


def build_miqubo(matrix: FeatureMatrix, lam: float) -> PolyBinaryProblem:
    """``-lam I(f_i; y) x_i - I(f_i; y | f_j) x_i x_j`` summed over ordered pairs."""
    F = matrix.num_features
    terms: dict[Term, float] = {}
    for i in range(F):
        _accumulate(terms, (i,), -lam * mutual_information(matrix, [i], [LABEL]))
    for i, j in itertools.combinations(range(F), 2):
        _accumulate(terms, (i, j), -(_cond_relevance(matrix, i, j) + _cond_relevance(matrix, j, i)))
    return PolyBinaryProblem(F, terms)


def build_full_qubo(matrix: FeatureMatrix, lam: float) -> PolyBinaryProblem:
    """mRmR redundancy combined with miqubo conditional relevance."""
    F = matrix.num_features
    terms: dict[Term, float] = {}
    for i in range(F):
        _accumulate(terms, (i,), -lam * mutual_information(matrix, [i], [LABEL]))
    for i, j in itertools.combinations(range(F), 2):
        mi = mutual_information(matrix, [i], [j])
        rel = _cond_relevance(matrix, i, j) + _cond_relevance(matrix, j, i)
        _accumulate(terms, (i, j), (mi + mi) - rel)
    return PolyBinaryProblem(F, terms)


def build_entropy_cubo(matrix: FeatureMatrix, alpha: AlphaWeights, k: int) -> PolyBinaryProblem:
    """Third-order formulation: subsets of size 1, 2 and 3 scored by ``H(S) - H(S|y)``.

    Block ``r`` is weighted ``-alpha_r / C(k, r)``. The cardinality is set to ``k``.
    """
    F = matrix.num_features
    a = alpha.as_tuple()
    if not 1 <= k <= F:
        raise ValueError(f"k must lie in [1, {F}]")
    for order in (2, 3):
        if a[order - 1] != 0 and k < order:
            raise ValueError(f"k must be >= {order} when alpha_{order} is non-zero")
    scores = _Scores(matrix)
    terms: dict[Term, float] = {}
    for order in (1, 2, 3):
        weight = a[order - 1]
        if weight == 0:
            continue
        scale = weight / comb(k, order)
        for subset in itertools.combinations(range(F), order):
            value = scores.info_about_label(subset)
            # plug-in estimates of I(S; y) are non-negative up to rounding
            _accumulate(terms, subset, -scale * max(value, 0.0))
    return PolyBinaryProblem(F, terms, 0.0, k)


FORMULATIONS = ("mrmr", "miqubo", "full-qubo", "entropy-cubo")


# --------------------------------------------------------------------------- text format


def _format_float(x: float) -> str:
    return repr(float(x))


def dumps_problem(obj: PolyBinaryProblem | SpinHamiltonian) -> str:
    """Serialize to the line format ``vars N offset C [kind K] [cardinality n]``.

    One line per term follows: comma-separated indices then the coefficient.
    """
    buf = io.StringIO()
    if isinstance(obj, SpinHamiltonian):
        buf.write(f"vars {obj.num_vars} offset {_format_float(obj.offset)} kind spin\n")
    else:
        head = f"vars {obj.num_vars} offset {_format_float(obj.constant)} kind binary"
        if obj.cardinality is not None:
            head += f" cardinality {obj.cardinality}"
        buf.write(head + "\n")
    for t, c in obj.terms.items():
        buf.write(f"{','.join(str(i) for i in t)} {_format_float(c)}\n")
    return buf.getvalue()


def loads_problem(text: str, source: str = "<string>") -> PolyBinaryProblem | SpinHamiltonian:
    lines = [ln.strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln and not ln.startswith("#")]
    if not lines:
        raise DataError(f"{source}: empty problem file")
    head = lines[0].split()
    if len(head) < 4 or head[0] != "vars" or head[2] != "offset" or len(head) % 2:
        raise DataError(f"{source}: bad header {lines[0]!r}")
    try:
        fields = dict(zip(head[::2], head[1::2]))
        num_vars = int(fields["vars"])
        offset = float(fields["offset"])
        kind = fields.get("kind", "binary")
        cardinality = int(fields["cardinality"]) if "cardinality" in fields else None
    except ValueError as exc:
        raise DataError(f"{source}: bad header ({exc})") from None
    terms: dict[Term, float] = {}
    for n, line in enumerate(lines[1:], start=2):
        parts = line.split()
        if len(parts) != 2:
            raise DataError(f"{source}: line {n}: expected 'indices coefficient'")
        try:
            key = tuple(int(i) for i in parts[0].split(","))
            terms[key] = terms.get(key, 0.0) + float(parts[1])
        except ValueError:
            raise DataError(f"{source}: line {n}: cannot parse {line!r}") from None
    try:
        if kind == "spin":
            if cardinality is not None:
                raise ValueError("spin Hamiltonians carry no cardinality")
            return SpinHamiltonian(num_vars, terms, offset)
        if kind != "binary":
            raise ValueError(f"unknown kind {kind!r}")
        return PolyBinaryProblem(num_vars, terms, offset, cardinality)
    except ValueError as exc:
        raise DataError(f"{source}: {exc}") from None


def write_problem(path, obj: PolyBinaryProblem | SpinHamiltonian) -> None:
    Path(path).write_text(dumps_problem(obj))


def read_problem(path) -> PolyBinaryProblem | SpinHamiltonian:
    path = Path(path)
    return loads_problem(path.read_text(), str(path))


def with_terms(obj, terms: Mapping[Term, float]):
    """Copy of a problem or Hamiltonian with its term map replaced."""
    return replace(obj, terms=dict(terms))


def subsample_features(matrix: FeatureMatrix, columns) -> FeatureMatrix:
    """Restrict a matrix to a feature group before building (e.g. one cluster)."""
    cols = [int(c) for c in columns]
    if not cols or len(set(cols)) != len(cols):
        raise ValueError("columns must be non-empty and distinct")
    return matrix.select(cols)
