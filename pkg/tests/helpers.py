"""Random instance generators and independent reference evaluators for the tests."""
import itertools

import numpy as np

from pcbo_hybrid.dataset import FeatureMatrix
from pcbo_hybrid.pcbo import PolyBinaryProblem, SpinHamiltonian


def random_spin(n, seed, orders=(1, 2, 3), density=1.0, scale=1.0, offset=None):
    rng = np.random.default_rng(seed)
    terms = {}
    for k in orders:
        for t in itertools.combinations(range(n), k):
            if rng.random() < density:
                terms[t] = scale * rng.normal()
    off = rng.normal() if offset is None else offset
    return SpinHamiltonian(n, terms, off)


def random_binary(n, seed, orders=(1, 2, 3), density=0.6, cardinality=None):
    rng = np.random.default_rng(seed)
    terms = {}
    for k in orders:
        for t in itertools.combinations(range(n), k):
            if rng.random() < density:
                terms[t] = rng.uniform(-1, 1)
    return PolyBinaryProblem(n, terms, rng.normal(), cardinality)


def naive_spin_energy(h, spins):
    """Straight product-sum, no shared code with the package."""
    e = h.offset
    for t, c in h.terms.items():
        e += c * np.prod([spins[i] for i in t])
    return e


def all_spin_vectors(n):
    """Rows in basis-index order: row x has spin_i = 1 - 2*bit_i(x)."""
    idx = np.arange(1 << n)
    return 1 - 2 * ((idx[:, None] >> np.arange(n)) & 1)


def naive_min(h):
    best, arg = np.inf, None
    for s in itertools.product((1, -1), repeat=h.num_vars):
        e = naive_spin_energy(h, s)
        if e < best - 1e-9:
            best, arg = e, s
    return np.array(arg), best


def matrix_from_cells(cells, label_index):
    """FeatureMatrix from a list of tuples; column ``label_index`` becomes the label."""
    arr = np.array(cells, dtype=np.int64)
    labels = arr[:, label_index]
    feats = np.delete(arr, label_index, axis=1)
    return FeatureMatrix.from_arrays(feats, labels)


def xor_cells():
    """Uniform ``(a, b, a xor b)`` over fair independent bits, 8 rows."""
    rows = []
    for a, b in itertools.product((0, 1), repeat=2):
        rows.append((a, b, a ^ b))
        rows.append((a, b, a ^ b))
    return rows
