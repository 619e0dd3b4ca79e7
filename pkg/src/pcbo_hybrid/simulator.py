"""Exact statevector simulation of QAOA for diagonal Pauli-Z cost Hamiltonians.

Qubit ``i`` is bit ``i`` of the basis-state index (little-endian).
"""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import CapacityError
from .pcbo import SpinHamiltonian, Term, term_mask, walsh_hadamard

MAX_QUBITS = 24


@dataclass(frozen=True)
class StateVector:
    amplitudes: np.ndarray
    num_qubits: int

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=np.complex128)
        if amps.shape != (1 << self.num_qubits,):
            raise ValueError("amplitude vector length must be 2**num_qubits")
        object.__setattr__(self, "amplitudes", amps)

    @property
    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def norm(self) -> float:
        return float(np.sqrt(np.sum(self.probabilities)))


@dataclass(frozen=True)
class QaoaParams:
    gammas: tuple[float, ...]
    betas: tuple[float, ...]

    def __post_init__(self):
        gammas = tuple(float(g) for g in self.gammas)
        betas = tuple(float(b) for b in self.betas)
        if len(gammas) != len(betas) or not gammas:
            raise ValueError("gammas and betas must have equal, non-zero length")
        object.__setattr__(self, "gammas", gammas)
        object.__setattr__(self, "betas", betas)

    @property
    def p(self) -> int:
        return len(self.gammas)

    def to_vector(self) -> np.ndarray:
        return np.array(self.gammas + self.betas)

    @classmethod
    def from_vector(cls, vec) -> "QaoaParams":
        vec = np.asarray(vec, dtype=np.float64)
        p = vec.size // 2
        return cls(tuple(vec[:p]), tuple(vec[p:]))


def _check_size(n: int, cap: int) -> None:
    if n < 1:
        raise ValueError("at least one qubit is required")
    if n > cap:
        raise CapacityError(f"{n} qubits exceeds the simulation cap of {cap}")


def prepare_plus_state(num_qubits: int, cap: int = MAX_QUBITS) -> StateVector:
    _check_size(num_qubits, cap)
    dim = 1 << num_qubits
    return StateVector(np.full(dim, 1.0 / np.sqrt(dim), dtype=np.complex128), num_qubits)


def _diagonal(hamiltonian: SpinHamiltonian, num_qubits: int) -> np.ndarray:
    if hamiltonian.num_vars != num_qubits:
        raise ValueError(
            f"Hamiltonian has {hamiltonian.num_vars} variables, state has {num_qubits} qubits"
        )
    return hamiltonian.diagonal


def apply_cost_layer(state: StateVector, hamiltonian: SpinHamiltonian, gamma: float) -> StateVector:
    """Multiply each amplitude by ``exp(-i gamma E(x))``."""
    energies = _diagonal(hamiltonian, state.num_qubits)
    return StateVector(state.amplitudes * np.exp(-1j * gamma * energies), state.num_qubits)


def _mix_inplace(amps: np.ndarray, num_qubits: int, beta: float) -> None:
    c, s = np.cos(beta), -1j * np.sin(beta)
    for q in range(num_qubits):
        view = amps.reshape(-1, 2, 1 << q)
        a = view[:, 0, :].copy()
        b = view[:, 1, :]
        view[:, 0, :] = c * a + s * b
        view[:, 1, :] = s * a + c * b


def apply_mixer_layer(state: StateVector, beta: float) -> StateVector:
    """Apply ``exp(-i beta sum_i X_i)`` as one X rotation per qubit."""
    amps = state.amplitudes.copy()
    _mix_inplace(amps, state.num_qubits, beta)
    return StateVector(amps, state.num_qubits)


def run_qaoa(hamiltonian: SpinHamiltonian, params: QaoaParams, cap: int = MAX_QUBITS) -> StateVector:
    """Prepare ``prod_l exp(-i b_l M) exp(-i g_l H) |+>^n``."""
    n = hamiltonian.num_vars
    _check_size(n, cap)
    energies = hamiltonian.diagonal
    amps = np.full(1 << n, 1.0 / np.sqrt(1 << n), dtype=np.complex128)
    for gamma, beta in zip(params.gammas, params.betas):
        amps *= np.exp(-1j * gamma * energies)
        _mix_inplace(amps, n, beta)
    return StateVector(amps, n)


def _parity(num_qubits: int, mask: int) -> np.ndarray:
    idx = np.arange(1 << num_qubits, dtype=np.uint64)
    bits = np.bitwise_count(idx & np.uint64(mask))
    return 1.0 - 2.0 * (bits & 1)


def expectation(state: StateVector, term: Sequence[int]) -> float:
    """``<psi| prod_{i in term} Z_i |psi>``."""
    for i in term:
        if not 0 <= i < state.num_qubits:
            raise IndexError(f"qubit {i} out of range")
    return float(state.probabilities @ _parity(state.num_qubits, term_mask(tuple(term))))


def energy_expectation(state: StateVector, hamiltonian: SpinHamiltonian,
                       counter: Counter | None = None) -> float:
    """``<psi|H|psi>`` including the offset.

    When ``counter`` is given its ``"energy_evals"`` entry is incremented.
    """
    energies = _diagonal(hamiltonian, state.num_qubits)
    if counter is not None:
        counter["energy_evals"] += 1
    return float(state.probabilities @ energies)


def all_parities(state: StateVector) -> np.ndarray:
    """``<Z_S>`` for every subset mask ``S`` at once (Walsh-Hadamard of probabilities)."""
    return walsh_hadamard(state.probabilities)


def correlation_dictionary(state: StateVector, hamiltonian: SpinHamiltonian) -> dict[Term, float]:
    """Expectation of every Pauli term present in ``hamiltonian``."""
    if hamiltonian.num_vars != state.num_qubits:
        raise ValueError("dimension mismatch")
    parities = all_parities(state)
    return {t: float(parities[term_mask(t)]) for t in hamiltonian.terms}


def sample_bitstrings(state: StateVector, shots: int, seed: int) -> np.ndarray:
    """Draw ``shots`` basis states (PCG64 stream); rows are little-endian bit vectors."""
    if shots < 1:
        raise ValueError("shots must be >= 1")
    probs = state.probabilities
    probs = probs / probs.sum()
    rng = np.random.Generator(np.random.PCG64(seed))
    idx = rng.choice(probs.size, size=shots, p=probs)
    return ((idx[:, None] >> np.arange(state.num_qubits)) & 1).astype(np.uint8)


def sampled_correlations(samples: np.ndarray, terms) -> dict[Term, float]:
    """Average parity of each term over sampled bit vectors."""
    spins = 1 - 2 * samples.astype(np.int64)
    return {t: float(np.prod(spins[:, list(t)], axis=1).mean()) for t in terms}
