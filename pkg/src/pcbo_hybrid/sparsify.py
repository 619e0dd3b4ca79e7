"""Term-count reduction for depth-limited circuits.

Weight-ordered truncation, randomized replacement of the small-weight tail,
and greedy placement of variables on a heavy-hex coupling graph with a routing
budget per term.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import networkx as nx
import numpy as np

from .errors import CapacityError
from .pcbo import SpinHamiltonian, Term
from .seeding import spawn_rng


@dataclass
class SparsifyReport:
    kept_by_order: dict[int, int]
    dropped_by_order: dict[int, int]
    retained_weight_fraction: float
    surrogate_insertions: int = 0

    def ratio(self, order: int) -> float:
        total = self.kept_by_order.get(order, 0) + self.dropped_by_order.get(order, 0)
        return 1.0 if total == 0 else self.kept_by_order.get(order, 0) / total

    def to_dict(self) -> dict:
        return {
            "kept_by_order": {str(k): v for k, v in sorted(self.kept_by_order.items())},
            "dropped_by_order": {str(k): v for k, v in sorted(self.dropped_by_order.items())},
            "retained_weight_fraction": self.retained_weight_fraction,
            "surrogate_insertions": self.surrogate_insertions,
        }


def _report(original: SpinHamiltonian, kept: Sequence[Term], surrogates: int = 0) -> SparsifyReport:
    kept_set = set(kept)
    kept_by, dropped_by = {}, {}
    for t in original.terms:
        bucket = kept_by if t in kept_set else dropped_by
        bucket[len(t)] = bucket.get(len(t), 0) + 1
    for order in set(kept_by) | set(dropped_by):
        kept_by.setdefault(order, 0)
        dropped_by.setdefault(order, 0)
    total = math.fsum(abs(c) for c in original.terms.values())
    retained = math.fsum(abs(original.terms[t]) for t in kept_set)
    return SparsifyReport(kept_by, dropped_by, 1.0 if total == 0 else retained / total, surrogates)


# --------------------------------------------------------------------------- truncation


def _by_weight(h: SpinHamiltonian) -> list[Term]:
    return sorted(h.terms, key=lambda t: (-abs(h.terms[t]), t))


def truncate_by_weight(hamiltonian: SpinHamiltonian, keep) -> tuple[SpinHamiltonian, SparsifyReport]:
    """Keep the largest-magnitude terms.

    ``keep`` is a fraction in ``(0, 1]`` when given as a float and a term count
    when given as an int. A fraction keeps ``round(keep * T)`` terms (at least
    one). Ties in magnitude go to the lexicographically smaller term.
    """
    total = len(hamiltonian.terms)
    if isinstance(keep, (bool, np.bool_)):
        raise TypeError("keep must be a number")
    if isinstance(keep, (int, np.integer)):
        if not 1 <= keep:
            raise ValueError("keep count must be >= 1")
        count = min(int(keep), total)
    else:
        keep = float(keep)
        if not 0.0 < keep <= 1.0:
            raise ValueError("keep fraction must lie in (0, 1]")
        count = min(total, max(1, int(np.floor(keep * total + 0.5))))
    kept = _by_weight(hamiltonian)[:count]
    out = SpinHamiltonian(hamiltonian.num_vars, {t: hamiltonian.terms[t] for t in kept},
                          hamiltonian.offset)
    return out, _report(hamiltonian, kept)


def randomized_tail(hamiltonian: SpinHamiltonian, threshold: float, surrogate_angle: float,
                    budget: int, seed: int) -> tuple[SpinHamiltonian, SparsifyReport]:
    """Keep heavy terms, replace a weighted sample of the light tail by a fixed angle.

    Terms with ``|c| >= threshold`` stay as they are. ``budget`` tail terms are
    drawn without replacement with probability proportional to ``|c|`` and
    re-weighted to ``sign(c) * surrogate_angle``; the rest of the tail is dropped.
    """
    if threshold <= 0:
        raise ValueError("threshold must be positive")
    if budget < 0:
        raise ValueError("budget must be >= 0")
    heavy = {t: c for t, c in hamiltonian.terms.items() if abs(c) >= threshold}
    tail = [t for t in hamiltonian.terms if abs(hamiltonian.terms[t]) < threshold]
    m = min(budget, len(tail))
    sampled: list[Term] = []
    if m:
        weights = np.array([abs(hamiltonian.terms[t]) for t in tail])
        rng = spawn_rng(seed, "randomized_tail")
        picks = rng.choice(len(tail), size=m, replace=False, p=weights / weights.sum())
        sampled = [tail[i] for i in sorted(picks)]
    terms = dict(heavy)
    for t in sampled:
        terms[t] = float(np.sign(hamiltonian.terms[t])) * surrogate_angle
    out = SpinHamiltonian(hamiltonian.num_vars, terms, hamiltonian.offset)
    return out, _report(hamiltonian, list(heavy) + sampled, len(sampled))


def tail_mass(hamiltonian: SpinHamiltonian, threshold: float) -> float:
    return float(sum(abs(c) for c in hamiltonian.terms.values() if abs(c) < threshold))


# --------------------------------------------------------------------------- heavy-hex


@dataclass(frozen=True)
class HeavyHexGraph:
    nodes: tuple[int, ...]
    edges: tuple[tuple[int, int], ...]
    dimensions: tuple[int, int]

    def to_networkx(self) -> nx.Graph:
        g = nx.Graph()
        g.add_nodes_from(self.nodes)
        g.add_edges_from(self.edges)
        return g


def heavy_hex_graph(rows: int, cols: int) -> HeavyHexGraph:
    """Hexagonal ``rows x cols`` tiling with a coupler qubit on every hexagon edge.

    Nodes are numbered row by row (bottom to top, left to right) from their
    drawing positions.
    """
    if rows < 1 or cols < 1:
        raise ValueError("rows and cols must be >= 1")
    hexes = nx.hexagonal_lattice_graph(rows, cols, with_positions=True)
    pos = nx.get_node_attributes(hexes, "pos")
    points = {("v", u): pos[u] for u in hexes.nodes}
    for u, v in hexes.edges:
        points[("e", u, v)] = ((pos[u][0] + pos[v][0]) / 2, (pos[u][1] + pos[v][1]) / 2)
    order = sorted(points, key=lambda k: (round(points[k][1], 9), round(points[k][0], 9)))
    ids = {k: i for i, k in enumerate(order)}
    edges = []
    for u, v in hexes.edges:
        mid = ids[("e", u, v)]
        edges.append(tuple(sorted((ids[("v", u)], mid))))
        edges.append(tuple(sorted((ids[("v", v)], mid))))
    return HeavyHexGraph(tuple(range(len(order))), tuple(sorted(edges)), (rows, cols))


def heavy_hex_for(num_vars: int) -> HeavyHexGraph:
    """Smallest square-ish tiling with at least ``num_vars`` nodes."""
    size = 1
    while True:
        for rows, cols in ((size, size), (size, size + 1)):
            g = heavy_hex_graph(rows, cols)
            if len(g.nodes) >= num_vars:
                return g
        size += 1


@dataclass(frozen=True)
class MappedTerm:
    term: Term
    nodes: tuple[int, ...]
    occupied: tuple[int, ...]
    routing_cost: int
    retained: bool


@dataclass
class Layout:
    placement: dict[int, int]
    mapped_terms: list[MappedTerm] = field(default_factory=list)
    depth_estimate: int = 0

    def to_text(self) -> str:
        lines = ["# variable node"]
        lines += [f"{v} {n}" for v, n in sorted(self.placement.items())]
        lines.append("# term nodes routing_cost retained")
        for m in self.mapped_terms:
            lines.append(f"{','.join(map(str, m.term))} {','.join(map(str, m.nodes))} "
                         f"{m.routing_cost} {int(m.retained)}")
        lines.append(f"# depth_estimate {self.depth_estimate}")
        return "\n".join(lines) + "\n"


def _route(graph: nx.Graph, dist: dict, nodes: Sequence[int]) -> tuple[int, tuple[int, ...]]:
    """Routing cost (metric-closure spanning tree minus ``k - 1``) and nodes touched."""
    if len(nodes) < 2:
        return 0, tuple(nodes)
    closure = nx.Graph()
    for a, b in itertools.combinations(nodes, 2):
        closure.add_edge(a, b, weight=dist[a][b])
    tree = nx.minimum_spanning_tree(closure, algorithm="kruskal")
    weight = int(sum(d["weight"] for _, _, d in tree.edges(data=True)))
    touched = set(nodes)
    for a, b in sorted(tuple(sorted(e)) for e in tree.edges):
        touched.update(nx.shortest_path(graph, a, b))
    return weight - (len(nodes) - 1), tuple(sorted(touched))


def _place_terms(h: SpinHamiltonian, graph: nx.Graph, dist: dict) -> dict[int, int]:
    placement: dict[int, int] = {}
    used: set[int] = set()
    free = sorted(graph.nodes)
    degree = dict(graph.degree)
    cubic = [t for t in _by_weight(h) if len(t) == 3]
    freq: dict[int, int] = {}
    for t in cubic:
        for v in t:
            freq[v] = freq.get(v, 0) + 1

    def take(var: int, node: int):
        placement[var] = node
        used.add(node)

    def best_free(anchors: list[int]) -> int:
        candidates = [n for n in free if n not in used]
        if not anchors:
            if used:
                return min(candidates, key=lambda n: (min(dist[n][u] for u in used), degree[n] != 3, n))
            return min(candidates, key=lambda n: (degree[n] != 3, n))
        return min(candidates, key=lambda n: (sum(dist[n][a] for a in anchors), degree[n] != 3, n))

    ordered = cubic + [t for t in _by_weight(h) if len(t) == 2]
    for t in ordered:
        todo = [v for v in t if v not in placement]
        if not todo:
            continue
        if len(todo) == len(t):
            # most connected variable goes in the middle of the chain
            centre = min(todo, key=lambda v: (-freq.get(v, 0), v))
            take(centre, best_free([]))
            todo.remove(centre)
        for v in todo:
            anchors = [placement[u] for u in t if u in placement]
            take(v, best_free(anchors))
    for v in range(h.num_vars):
        if v not in placement:
            take(v, min(n for n in free if n not in used))
    return placement


def map_heavy_hex(hamiltonian: SpinHamiltonian, graph: HeavyHexGraph,
                  max_swap_cost: int) -> tuple[Layout, SpinHamiltonian, SparsifyReport]:
    """Place variables on ``graph`` and keep the terms that are cheap to route.

    Placement is greedy in descending third-order weight, then second order,
    and does not depend on ``max_swap_cost``; a multi-qubit term survives iff
    its routing cost is at most ``max_swap_cost``. First-order terms always
    survive. Retention and depth are therefore non-decreasing in the budget.
    """
    if max_swap_cost < 0:
        raise ValueError("max_swap_cost must be >= 0")
    if len(graph.nodes) < hamiltonian.num_vars:
        raise CapacityError(f"graph has {len(graph.nodes)} nodes, need {hamiltonian.num_vars}")
    g = graph.to_networkx()
    dist = dict(nx.all_pairs_shortest_path_length(g))
    placement = _place_terms(hamiltonian, g, dist)
    mapped, kept = [], []
    for t in hamiltonian.terms:
        nodes = tuple(placement[v] for v in t)
        cost, occupied = _route(g, dist, nodes)
        keep = len(t) == 1 or cost <= max_swap_cost
        mapped.append(MappedTerm(t, nodes, occupied, cost, keep))
        if keep:
            kept.append(t)
    retained = SpinHamiltonian(hamiltonian.num_vars, {t: hamiltonian.terms[t] for t in kept},
                               hamiltonian.offset)
    layout = Layout(placement, mapped)
    layout.depth_estimate = estimate_depth(layout, retained)
    return layout, retained, _report(hamiltonian, kept)


def term_duration(weight: int, routing_cost: int) -> int:
    """Two-qubit layers of one phase gadget: CNOT ladder down, phase, ladder up, plus SWAP passes."""
    if weight < 2:
        return 0
    return 2 * (weight - 1) + 1 + routing_cost


def estimate_depth(layout: Layout, retained: SpinHamiltonian) -> int:
    """As-soon-as-possible schedule of the retained terms on their occupied nodes.

    Terms are scheduled in descending ``|c|`` (ties by term); terms on disjoint
    nodes share layers. Single-qubit rotations are absorbed.
    """
    by_term = {m.term: m for m in layout.mapped_terms}
    ready: dict[int, int] = {}
    depth = 0
    for t in _by_weight(retained):
        if t not in by_term:
            raise ValueError(f"term {t} is not part of the layout")
        m = by_term[t]
        dur = term_duration(len(t), m.routing_cost)
        if dur == 0:
            continue
        start = max((ready.get(n, 0) for n in m.occupied), default=0)
        for n in m.occupied:
            ready[n] = start + dur
        depth = max(depth, start + dur)
    return depth


def swap_budget_sweep(hamiltonian: SpinHamiltonian, graph: HeavyHexGraph,
                      budgets: Sequence[int]) -> list[dict]:
    """Retention ratios per order and depth for each routing budget."""
    rows = []
    for b in budgets:
        layout, retained, report = map_heavy_hex(hamiltonian, graph, b)
        rows.append({
            "max_swap_cost": b,
            "ratio_order2": report.ratio(2),
            "ratio_order3": report.ratio(3),
            "kept_terms": len(retained.terms),
            "depth": layout.depth_estimate,
        })
    return rows
