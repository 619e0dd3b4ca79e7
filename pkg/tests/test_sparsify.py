import networkx as nx
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from helpers import random_spin
from pcbo_hybrid.classical import brute_force
from pcbo_hybrid.errors import CapacityError
from pcbo_hybrid.pcbo import SpinHamiltonian
from pcbo_hybrid.resource import random_entropy_cubo
from pcbo_hybrid.sparsify import (
    Layout,
    MappedTerm,
    estimate_depth,
    heavy_hex_for,
    heavy_hex_graph,
    map_heavy_hex,
    randomized_tail,
    swap_budget_sweep,
    tail_mass,
    truncate_by_weight,
)


def _toy():
    return SpinHamiltonian(3, {(0,): 0.5, (1,): -2.0, (0, 1): 1.0, (0, 1, 2): -3.0}, 0.25)


def test_truncate_identity():
    h = random_spin(5, 0)
    out, report = truncate_by_weight(h, 1.0)
    assert out == h
    assert report.retained_weight_fraction == 1.0


def test_truncate_keeps_two_largest():
    out, report = truncate_by_weight(_toy(), 2)
    assert set(out.terms) == {(1,), (0, 1, 2)}
    assert out.offset == 0.25
    assert report.kept_by_order == {1: 1, 2: 0, 3: 1}
    assert report.dropped_by_order == {1: 1, 2: 1, 3: 0}
    assert report.retained_weight_fraction == pytest.approx(5.0 / 6.5)


def test_truncate_ties_go_to_smaller_tuple():
    h = SpinHamiltonian(3, {(0,): 1.0, (1,): -1.0, (2,): 1.0})
    assert list(truncate_by_weight(h, 2)[0].terms) == [(0,), (1,)]


@pytest.mark.parametrize("fraction, expected", [(0.5, 10), (0.2, 4)])
def test_truncate_operating_points(fraction, expected):
    # 50% and 80% sparsification on 20 terms
    h = SpinHamiltonian(20, {(i,): float(i + 1) for i in range(20)})
    assert len(truncate_by_weight(h, fraction)[0].terms) == expected


def test_truncate_errors():
    for bad in (0, 0.0, 1.5, -1):
        with pytest.raises(ValueError):
            truncate_by_weight(_toy(), bad)


@given(st.integers(2, 7), st.integers(0, 10**6), st.floats(0.05, 1.0))
def test_truncation_minimality(n, seed, keep):
    h = random_spin(n, seed)
    out, report = truncate_by_weight(h, keep)
    dropped = [abs(c) for t, c in h.terms.items() if t not in out.terms]
    if dropped:
        assert min(abs(c) for c in out.terms.values()) >= max(dropped)
    for order in report.kept_by_order:
        total = sum(1 for t in h.terms if len(t) == order)
        assert report.kept_by_order[order] + report.dropped_by_order[order] == total
    assert 0.0 <= report.retained_weight_fraction <= 1.0


def test_tail_budget_zero_is_threshold_truncation():
    h = _toy()
    out, report = randomized_tail(h, 1.0, 0.7, 0, seed=1)
    assert out.terms == {(1,): -2.0, (0, 1): 1.0, (0, 1, 2): -3.0}
    assert report.surrogate_insertions == 0


def test_tail_budget_covers_whole_tail():
    h = random_spin(5, 2)
    out, report = randomized_tail(h, 0.8, 0.3, 10**6, seed=1)
    for t, c in h.terms.items():
        expected = c if abs(c) >= 0.8 else np.sign(c) * 0.3
        assert out.terms[t] == pytest.approx(expected)
    assert report.surrogate_insertions == sum(abs(c) < 0.8 for c in h.terms.values())


def test_tail_errors():
    with pytest.raises(ValueError):
        randomized_tail(_toy(), 0.0, 0.1, 1, 0)
    with pytest.raises(ValueError):
        randomized_tail(_toy(), 1.0, 0.1, -1, 0)


def test_tail_sampling_statistics():
    # single draws are exactly proportional to |c|, so the mean sampled weight
    # equals sum c^2 / sum |c| over the tail
    h = random_spin(6, 4)
    threshold = 0.5
    tail = {t: abs(c) for t, c in h.terms.items() if abs(c) < threshold}
    expected = sum(w * w for w in tail.values()) / sum(tail.values())
    draws = []
    for s in range(4000):
        out, _ = randomized_tail(h, threshold, 1.0, 1, seed=s)
        (picked,) = [t for t in out.terms if t in tail]
        draws.append(tail[picked])
    sigma = np.std(draws) / np.sqrt(len(draws))
    assert abs(np.mean(draws) - expected) <= 5 * sigma


def test_sampled_tail_weight_approaches_tail_mass():
    h = random_spin(6, 5)
    threshold = 0.6
    tail = {t: abs(c) for t, c in h.terms.items() if abs(c) < threshold}
    mass = tail_mass(h, threshold)
    assert mass == pytest.approx(sum(tail.values()))
    means = []
    for budget in range(1, len(tail) + 1):
        totals = []
        for s in range(200):
            out, _ = randomized_tail(h, threshold, 1.0, budget, seed=s)
            totals.append(sum(tail[t] for t in out.terms if t in tail))
        means.append(np.mean(totals))
    # more draws capture more of the mass, and the full budget captures all of it
    assert all(a < b for a, b in zip(means, means[1:]))
    assert means[-1] == pytest.approx(mass, abs=1e-12)
    assert means[0] < mass


def test_tail_deterministic():
    h = random_spin(6, 1)
    assert randomized_tail(h, 0.7, 0.2, 5, 3)[0] == randomized_tail(h, 0.7, 0.2, 5, 3)[0]


# --------------------------------------------------------------------------- heavy-hex


def _hex_counts(m, n):
    # hexagon lattice of m x n cells before subdivision
    return 2 * (m + 1) * (n + 1) - 2, 3 * m * n + 2 * m + 2 * n - 1


@pytest.mark.parametrize("m, n", [(1, 1), (1, 2), (2, 2), (2, 3), (3, 4)])
def test_heavy_hex_closed_form_counts(m, n):
    g = heavy_hex_graph(m, n)
    v, e = _hex_counts(m, n)
    assert len(g.nodes) == v + e
    assert len(g.edges) == 2 * e
    nxg = g.to_networkx()
    assert nx.is_connected(nxg)
    assert max(d for _, d in nxg.degree) <= 3


def test_heavy_hex_smallest_tiling_with_branching():
    # a single cell is a ring, two cells share an edge and create degree-3 nodes
    degrees = dict(heavy_hex_graph(1, 2).to_networkx().degree)
    assert max(degrees.values()) == 3
    with pytest.raises(ValueError):
        heavy_hex_graph(0, 1)


def test_heavy_hex_for_size():
    g = heavy_hex_for(30)
    assert len(g.nodes) >= 30


def test_map_capacity_error():
    h = random_spin(13, 0, orders=(1,))
    with pytest.raises(CapacityError):
        map_heavy_hex(h, heavy_hex_graph(1, 1), 0)


def _chains_ok(h, graph, budget):
    layout, retained, _ = map_heavy_hex(h, graph, budget)
    nxg = graph.to_networkx()
    assert len(set(layout.placement.values())) == len(layout.placement)
    for m in layout.mapped_terms:
        if m.retained and len(m.term) >= 2 and m.routing_cost == 0:
            assert nxg.subgraph(m.nodes).number_of_edges() == len(m.nodes) - 1
            assert nx.is_connected(nxg.subgraph(m.nodes))
    return layout, retained


def test_budget_zero_keeps_connected_chains():
    # V,W,X,Y,Z = 0..4 with triplets (V,W,Z), (W,X,Z), (X,Y,Z)
    h = SpinHamiltonian(5, {(0, 1, 4): 1.0, (1, 2, 4): 0.9, (2, 3, 4): 0.8})
    layout, retained = _chains_ok(h, heavy_hex_graph(2, 2), 0)
    assert len(retained.terms) >= 1
    for m in layout.mapped_terms:
        if m.retained:
            assert m.routing_cost == 0


def test_large_budget_keeps_everything():
    h = random_spin(8, 3)
    layout, retained, report = map_heavy_hex(h, heavy_hex_for(8), 10**6)
    assert retained == h
    assert report.ratio(2) == 1.0 and report.ratio(3) == 1.0


@given(st.integers(4, 9), st.integers(0, 10**6))
def test_sweep_monotone_and_valid(n, seed):
    h = random_spin(n, seed, density=0.5)
    graph = heavy_hex_for(n)
    _chains_ok(h, graph, 0)
    rows = swap_budget_sweep(h, graph, [0, 1, 2, 4, 8, 100])
    for key in ("ratio_order2", "ratio_order3", "kept_terms", "depth"):
        values = [r[key] for r in rows]
        assert all(a <= b for a, b in zip(values, values[1:])), key


def test_first_order_always_retained():
    h = random_spin(6, 7)
    _, retained, _ = map_heavy_hex(h, heavy_hex_for(6), 0)
    assert all(t in retained.terms for t in h.terms if len(t) == 1)


def test_layout_text():
    layout, _, _ = map_heavy_hex(_toy(), heavy_hex_graph(1, 1), 0)
    text = layout.to_text()
    assert text.startswith("# variable node\n0 ")
    assert text.rstrip().endswith(f"# depth_estimate {layout.depth_estimate}")


# --------------------------------------------------------------------------- depth


def _layout(entries):
    mapped = [MappedTerm(t, occ, occ, cost, True) for t, occ, cost in entries]
    placement = {v: v for t, _, _ in entries for v in t}
    return Layout(placement, mapped)


def test_depth_empty():
    assert estimate_depth(Layout({}), SpinHamiltonian(0, {})) == 0


def test_depth_single_chain_is_five():
    h = SpinHamiltonian(3, {(0, 1, 2): 1.0})
    assert estimate_depth(_layout([((0, 1, 2), (0, 1, 2), 0)]), h) == 5


def test_depth_disjoint_terms_share_layers():
    h = SpinHamiltonian(6, {(0, 1, 2): 1.0, (3, 4, 5): 0.5})
    layout = _layout([((0, 1, 2), (0, 1, 2), 0), ((3, 4, 5), (3, 4, 5), 0)])
    assert estimate_depth(layout, h) == 5


def test_depth_overlapping_terms_serialize():
    h = SpinHamiltonian(4, {(0, 1, 2): 1.0, (2, 3): 0.5})
    layout = _layout([((0, 1, 2), (0, 1, 2), 0), ((2, 3), (2, 3), 1)])
    assert estimate_depth(layout, h) == 5 + 4


def test_truncation_ground_state_preservation_rate():
    # measured and reported only; no threshold is asserted
    preserved = 0
    trials = 10
    for seed in range(trials):
        h = random_entropy_cubo(12, seed)
        out, _ = truncate_by_weight(h, 0.5)
        preserved += np.array_equal(brute_force(h)[0], brute_force(out)[0])
    rate = preserved / trials
    print(f"ground state preserved under 50% truncation: {rate:.2f}")
    assert 0.0 <= rate <= 1.0
