"""Classical solvers used as oracles, finishers and baselines."""
from __future__ import annotations

import itertools
import math
import time
from collections import Counter
from dataclasses import dataclass, field

import numba
import numpy as np

from .errors import CapacityError
from .hrqaoa import EdgeFix, ReductionTrace, RoundRecord, substitute
from .pcbo import PolyBinaryProblem, SpinHamiltonian, evaluate_spin, term_mask, walsh_hadamard
from .seeding import spawn_rng

BRUTE_FORCE_CAP = 24
_CHUNK_BITS = 16


@dataclass
class SolveResult:
    spins: np.ndarray
    energy: float
    timed_out: bool = False
    elapsed: float = 0.0
    history: list[float] = field(default_factory=list)


# --------------------------------------------------------------------------- brute force


def _bits_of(indices: np.ndarray, n: int) -> np.ndarray:
    return ((indices[:, None] >> np.arange(n, dtype=np.int64)) & 1).astype(np.int64)


def _lex_key(indices: np.ndarray, n: int) -> np.ndarray:
    # bit 0 is the most significant position in spin-vector lexicographic order
    key = np.zeros(indices.shape, dtype=np.int64)
    for i in range(n):
        key |= ((indices >> i) & 1) << (n - 1 - i)
    return key


def run_brute_force(hamiltonian: SpinHamiltonian, cap: int = BRUTE_FORCE_CAP,
                    improvement_timeout: float | None = None) -> SolveResult:
    """Exhaustive minimum over all ``2**N`` spin vectors.

    States are scanned in chunks of ``2**16``: per chunk the high bits are
    fixed and the remaining coefficients are folded into one Walsh-Hadamard
    transform. With ``improvement_timeout`` the scan stops once the incumbent
    has not improved for that many seconds and the result is flagged.
    Ties resolve to the lexicographically smallest spin vector, ``+1`` first.
    """
    n = hamiltonian.num_vars
    if n > cap:
        raise CapacityError(f"{n} variables exceeds the brute-force cap of {cap}")
    start = time.monotonic()
    if n == 0:
        return SolveResult(np.zeros(0, dtype=np.int64), hamiltonian.offset)
    low = min(n, _CHUNK_BITS)
    high = n - low
    keys = list(hamiltonian.terms)
    masks = np.array([term_mask(t) for t in keys], dtype=np.int64)
    coeffs = np.array([hamiltonian.terms[t] for t in keys], dtype=np.float64)
    low_masks = masks & ((1 << low) - 1)
    high_masks = masks >> low

    best = math.inf
    candidates = np.zeros(0, dtype=np.int64)
    last_improvement = start
    timed_out = False
    for h in range(1 << high):
        signs = 1.0 - 2.0 * (np.bitwise_count(high_masks & h) & 1)
        folded = np.bincount(low_masks, weights=coeffs * signs, minlength=1 << low)
        folded[0] += hamiltonian.offset
        energies = walsh_hadamard(folded)
        chunk_min = float(energies.min())
        tol = 1e-9 * (1.0 + abs(min(chunk_min, best)))
        if chunk_min < best - tol:
            best = chunk_min
            candidates = np.flatnonzero(energies <= best + tol) + (h << low)
            last_improvement = time.monotonic()
        elif chunk_min <= best + tol:
            best = min(best, chunk_min)
            candidates = np.concatenate([candidates, np.flatnonzero(energies <= best + tol) + (h << low)])
        if improvement_timeout is not None and time.monotonic() - last_improvement > improvement_timeout:
            timed_out = h < (1 << high) - 1
            break
    winner = int(candidates[np.argmin(_lex_key(candidates, n))])
    spins = 1 - 2 * _bits_of(np.array([winner]), n)[0]
    energy = float(_energy_at(hamiltonian, winner))
    return SolveResult(spins, energy, timed_out, time.monotonic() - start)


def _energy_at(hamiltonian: SpinHamiltonian, index: int) -> float:
    """Energy of one basis state given by its integer label."""
    total = hamiltonian.offset
    for t, c in hamiltonian.terms.items():
        total += -c if bin(index & term_mask(t)).count("1") & 1 else c
    return total


def brute_force(hamiltonian: SpinHamiltonian, cap: int = BRUTE_FORCE_CAP) -> tuple[np.ndarray, float]:
    result = run_brute_force(hamiltonian, cap)
    return result.spins, result.energy


def brute_force_feasible(problem: PolyBinaryProblem) -> tuple[np.ndarray, float]:
    """Exact minimum of a binary problem over its cardinality-feasible set.

    Enumerates all ``C(N, n)`` subsets, so the penalty is never needed. Ties go
    to the subset listed first in lexicographic combination order.
    """
    if problem.cardinality is None:
        raise ValueError("problem has no cardinality constraint")
    n, k = problem.num_vars, problem.cardinality
    if math.comb(n, k) > 20_000_000:
        raise CapacityError(f"C({n},{k}) subsets is too many to enumerate")
    if k == 0:
        return np.zeros(n, dtype=np.int64), problem.constant
    combos = np.fromiter(itertools.chain.from_iterable(itertools.combinations(range(n), k)),
                         dtype=np.int64).reshape(-1, k)
    energy = np.full(len(combos), problem.constant)
    by_order: dict[int, dict] = {}
    for t, c in problem.terms.items():
        by_order.setdefault(len(t), {})[t] = c
    for order, terms in by_order.items():
        if order > k:
            continue
        if order <= 3:
            dense = np.zeros((n,) * order)
            for t, c in terms.items():
                dense[t] = c
            for pos in itertools.combinations(range(k), order):
                energy += dense[tuple(combos[:, p] for p in pos)]
        else:
            combo_masks = np.zeros(len(combos), dtype=np.int64)
            for j in range(k):
                combo_masks |= np.int64(1) << combos[:, j]
            for t, c in terms.items():
                m = term_mask(t)
                energy += c * ((combo_masks & m) == m)
    best = int(np.argmin(energy))
    bits = np.zeros(n, dtype=np.int64)
    bits[combos[best]] = 1
    return bits, float(energy[best])


# --------------------------------------------------------------------------- tabu search


@dataclass(frozen=True)
class TabuConfig:
    """``None`` fields take size-dependent defaults: tenure ``ceil(N/4)``, ``500 N`` iterations."""

    iterations: int | None = None
    tenure: int | None = None
    restarts: int = 20
    seed: int = 0

    def resolved(self, n: int) -> tuple[int, int]:
        iters = self.iterations if self.iterations is not None else 500 * n
        tenure = self.tenure if self.tenure is not None else math.ceil(n / 4)
        return iters, tenure


@numba.njit(cache=True)
def _tabu_kernel(spins, offset, term_vars, term_len, coeffs, var_ptr, var_terms,
                 iterations, tenure, history):
    n = spins.size
    n_terms = coeffs.size
    tv = np.empty(n_terms)
    energy = offset
    for t in range(n_terms):
        prod = 1.0
        for q in range(term_len[t]):
            prod *= spins[term_vars[t, q]]
        tv[t] = coeffs[t] * prod
        energy += tv[t]
    g = np.zeros(n)
    for t in range(n_terms):
        for q in range(term_len[t]):
            g[term_vars[t, q]] += tv[t]
    best_energy = energy
    best_spins = spins.copy()
    tabu_until = np.zeros(n, dtype=np.int64)
    for it in range(1, iterations + 1):
        move = -1
        move_delta = np.inf
        fallback = -1
        fallback_delta = np.inf
        for i in range(n):
            delta = -2.0 * g[i]
            if delta < fallback_delta:
                fallback, fallback_delta = i, delta
            allowed = tabu_until[i] <= it or energy + delta < best_energy - 1e-12
            if allowed and delta < move_delta:
                move, move_delta = i, delta
        if move < 0:
            move, move_delta = fallback, fallback_delta
        spins[move] = -spins[move]
        for p in range(var_ptr[move], var_ptr[move + 1]):
            t = var_terms[p]
            tv[t] = -tv[t]
            for q in range(term_len[t]):
                j = term_vars[t, q]
                if j != move:
                    g[j] += 2.0 * tv[t]
        g[move] = -g[move]
        energy += move_delta
        tabu_until[move] = it + tenure
        if energy < best_energy - 1e-12:
            best_energy = energy
            best_spins[:] = spins
        if history.size > 0:
            history[it - 1] = best_energy
    return best_spins, best_energy


def _flatten(hamiltonian: SpinHamiltonian):
    n = hamiltonian.num_vars
    keys = list(hamiltonian.terms)
    width = max((len(t) for t in keys), default=1)
    term_vars = np.zeros((len(keys), width), dtype=np.int64)
    term_len = np.array([len(t) for t in keys], dtype=np.int64)
    coeffs = np.array([hamiltonian.terms[t] for t in keys], dtype=np.float64)
    incidence: list[list[int]] = [[] for _ in range(n)]
    for idx, t in enumerate(keys):
        term_vars[idx, : len(t)] = t
        for i in t:
            incidence[i].append(idx)
    var_ptr = np.zeros(n + 1, dtype=np.int64)
    var_ptr[1:] = np.cumsum([len(v) for v in incidence])
    var_terms = np.array([t for v in incidence for t in v], dtype=np.int64)
    return term_vars, term_len, coeffs, var_ptr, var_terms


def run_tabu(hamiltonian: SpinHamiltonian, config: TabuConfig = TabuConfig(),
             improvement_timeout: float | None = None, record_history: bool = False) -> SolveResult:
    """Single-flip tabu search with aspiration, restarted from random spins.

    ``history`` (when recorded) holds the best-so-far energy after every move
    across all restarts. The improvement timeout is checked between restarts.
    """
    n = hamiltonian.num_vars
    start = time.monotonic()
    if n == 0:
        return SolveResult(np.zeros(0, dtype=np.int64), hamiltonian.offset)
    iters, tenure = config.resolved(n)
    flat = _flatten(hamiltonian)
    best_spins, best_energy = None, math.inf
    history: list[float] = []
    last_improvement = start
    timed_out = False
    for r in range(max(config.restarts, 1)):
        rng = spawn_rng(config.seed, "tabu", r)
        init = np.where(rng.random(n) < 0.5, 1.0, -1.0)
        buf = np.empty(iters if record_history else 0)
        spins, energy = _tabu_kernel(init, hamiltonian.offset, *flat, iters, tenure, buf)
        if record_history:
            history.extend(np.minimum(buf, best_energy).tolist())
        if energy < best_energy - 1e-12:
            best_spins, best_energy = spins, energy
            last_improvement = time.monotonic()
        if (improvement_timeout is not None and r < config.restarts - 1
                and time.monotonic() - last_improvement > improvement_timeout):
            timed_out = True
            break
    spins = best_spins.astype(np.int64)
    # recompute to shed accumulated floating-point drift
    return SolveResult(spins, evaluate_spin(hamiltonian, spins), timed_out,
                       time.monotonic() - start, history)


def tabu_search(hamiltonian: SpinHamiltonian, config: TabuConfig = TabuConfig()) -> tuple[np.ndarray, float]:
    result = run_tabu(hamiltonian, config)
    return result.spins, result.energy


# --------------------------------------------------------------------------- random edge fixing


def random_edge_fix(hamiltonian: SpinHamiltonian, cutoff: int, seed: int) -> ReductionTrace:
    """Fix uniformly random terms with random signs until ``cutoff`` variables remain."""
    if not 1 <= cutoff < hamiltonian.num_vars:
        raise ValueError("cutoff must lie in [1, num_vars)")
    trace = ReductionTrace(hamiltonian.num_vars)
    h = hamiltonian
    var_map = tuple(range(h.num_vars))
    r = 0
    while h.num_vars > cutoff:
        if not h.terms:
            trace.stop_reason = "no_terms"
            break
        rng = spawn_rng(seed, "random_fix", r)
        keys = list(h.terms)
        term = keys[int(rng.integers(len(keys)))]
        sign = 1 if rng.random() < 0.5 else -1
        eliminated = int(term[int(rng.integers(len(term)))])
        h, _ = substitute(h, term, eliminated, sign)
        fix = EdgeFix(tuple(var_map[i] for i in term), var_map[eliminated], sign, r)
        var_map = tuple(v for i, v in enumerate(var_map) if i != eliminated)
        trace.fixes.append(fix)
        trace.variable_maps.append(var_map)
        trace.rounds.append(RoundRecord(r, len(var_map) + 1, fix))
        r += 1
    trace.final_problem = h
    trace.counters = Counter()
    return trace


# --------------------------------------------------------------------------- order reduction


def reduce_order(problem: PolyBinaryProblem, penalty: float) -> PolyBinaryProblem:
    """Quadratize a cubic binary problem with ancillas ``a = x_i x_j``.

    Pairs are chosen greedily, most frequent among the remaining cubic terms
    first (ties to the smallest pair). Each ancilla adds
    ``penalty * (x_i x_j - 2 a x_i - 2 a x_j + 3 a)``, which is zero when
    ``a = x_i x_j`` and at least ``penalty`` otherwise. Ancillas take indices
    ``N, N+1, ...`` in creation order.
    """
    if problem.max_order > 3:
        raise ValueError("reduce_order supports terms up to order 3")
    if penalty <= 0:
        raise ValueError("penalty must be positive")
    if problem.cardinality is not None:
        raise ValueError("apply the cardinality penalty first")
    cubic = {t: c for t, c in problem.terms.items() if len(t) == 3}
    if not cubic:
        return problem
    terms: dict[tuple[int, ...], float] = {t: c for t, c in problem.terms.items() if len(t) < 3}

    def add(key, value):
        key = tuple(sorted(key))
        terms[key] = terms.get(key, 0.0) + value

    next_var = problem.num_vars
    while cubic:
        freq = Counter(pair for t in cubic for pair in itertools.combinations(t, 2))
        top = max(freq.values())
        i, j = min(p for p, f in freq.items() if f == top)
        a = next_var
        next_var += 1
        for t in [t for t in cubic if i in t and j in t]:
            (k,) = [v for v in t if v not in (i, j)]
            add((a, k), cubic.pop(t))
        add((i, j), penalty)
        add((a, i), -2.0 * penalty)
        add((a, j), -2.0 * penalty)
        add((a,), 3.0 * penalty)
    return PolyBinaryProblem(next_var, terms, problem.constant)
