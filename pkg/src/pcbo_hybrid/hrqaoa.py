"""Recursive QAOA with parameter transfer from small donor subproblems.

Each round prepares a QAOA state on the current Hamiltonian, builds the
correlation dictionary ``{P_l: <P_l>}``, and eliminates one variable of the
strongest term through ``Z_e = sign * prod(other members)``. The reduced problem
is finished classically and the full assignment is rebuilt from the trace.
"""
from __future__ import annotations

import json
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy.optimize import minimize

from .errors import DataError
from .pcbo import SpinHamiltonian, Term, evaluate_spin
from .seeding import derive_seed, spawn_rng
from .simulator import MAX_QUBITS, QaoaParams, correlation_dictionary, energy_expectation, run_qaoa

TIE_TOL = 1e-12


@dataclass(frozen=True)
class OptimizerConfig:
    """COBYLA settings.

    ``max_iter`` bounds objective evaluations across all starts. With
    ``exhaust_budget`` the optimizer keeps restarting from random points until
    the budget is spent.
    """

    max_iter: int = 5000
    restarts: int = 0
    tol: float = 1e-6
    rhobeg: float = 0.5
    exhaust_budget: bool = False

    def __post_init__(self):
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if self.restarts < 0:
            raise ValueError("restarts must be >= 0")


@dataclass(frozen=True)
class DonorResult:
    variable_subset: tuple[int, ...]
    params: QaoaParams
    trained_energy: float
    optimizer_iterations: int


@dataclass(frozen=True)
class EdgeFix:
    """``Z_eliminated = sign * prod(Z_o for o in term if o != eliminated)``."""

    term: Term
    eliminated: int
    sign: int
    round: int
    correlation: float = 0.0

    def __post_init__(self):
        if self.eliminated not in self.term:
            raise ValueError("eliminated index must belong to the term")
        if self.sign not in (1, -1):
            raise ValueError("sign must be +1 or -1")


@dataclass
class RoundRecord:
    round: int
    num_vars: int
    fix: EdgeFix
    donor_subsets: list[tuple[int, ...]] = field(default_factory=list)
    donor_energies: list[float] = field(default_factory=list)
    transferred_energies: list[float] = field(default_factory=list)
    selected_donor: int | None = None
    params: QaoaParams | None = None
    counters: dict[str, int] = field(default_factory=dict)


@dataclass
class ReductionTrace:
    """Everything needed to rebuild a full solution from the reduced one.

    ``fixes`` use original variable indices. ``variable_maps[r]`` lists, for the
    Hamiltonian left after round ``r``, the original index of each local variable.
    """

    num_vars: int
    fixes: list[EdgeFix] = field(default_factory=list)
    variable_maps: list[tuple[int, ...]] = field(default_factory=list)
    final_problem: SpinHamiltonian | None = None
    counters: Counter = field(default_factory=Counter)
    rounds: list[RoundRecord] = field(default_factory=list)
    stop_reason: str = "completed"

    @property
    def final_map(self) -> tuple[int, ...]:
        return self.variable_maps[-1] if self.variable_maps else tuple(range(self.num_vars))

    def to_dict(self) -> dict:
        def fix_dict(f: EdgeFix) -> dict:
            return {"round": f.round, "term": list(f.term), "eliminated": f.eliminated,
                    "sign": f.sign, "correlation": f.correlation}

        rounds = []
        for r in self.rounds:
            rounds.append({
                "round": r.round,
                "num_vars": r.num_vars,
                "fix": fix_dict(r.fix),
                "donor_subsets": [list(s) for s in r.donor_subsets],
                "donor_energies": r.donor_energies,
                "transferred_energies": r.transferred_energies,
                "selected_donor": r.selected_donor,
                "params": None if r.params is None else
                {"gammas": list(r.params.gammas), "betas": list(r.params.betas)},
                "counters": dict(sorted(r.counters.items())),
            })
        return {
            "num_vars": self.num_vars,
            "stop_reason": self.stop_reason,
            "fixes": [fix_dict(f) for f in self.fixes],
            "variable_maps": [list(m) for m in self.variable_maps],
            "counters": dict(sorted(self.counters.items())),
            "rounds": rounds,
            "final_problem": None if self.final_problem is None else {
                "num_vars": self.final_problem.num_vars,
                "offset": self.final_problem.offset,
                "terms": [[list(t), c] for t, c in self.final_problem.terms.items()],
            },
        }

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    @classmethod
    def from_dict(cls, data: Mapping) -> "ReductionTrace":
        try:
            fixes = [EdgeFix(tuple(f["term"]), f["eliminated"], f["sign"], f["round"],
                             f.get("correlation", 0.0)) for f in data["fixes"]]
            fp = data.get("final_problem")
            final = None if fp is None else SpinHamiltonian(
                fp["num_vars"], {tuple(t): c for t, c in fp["terms"]}, fp["offset"])
            return cls(
                num_vars=data["num_vars"],
                fixes=fixes,
                variable_maps=[tuple(m) for m in data["variable_maps"]],
                final_problem=final,
                counters=Counter(data.get("counters", {})),
                stop_reason=data.get("stop_reason", "completed"),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise DataError(f"invalid trace ({exc})") from None


@dataclass(frozen=True)
class HrqaoaConfig:
    """Settings shared by HRQAOA and plain RQAOA.

    Give either ``rounds`` (number of edge fixes) or ``cutoff`` (stop once the
    problem has this many variables).
    """

    d_s: int = 8
    n_s: int = 3
    p: int = 1
    rounds: int | None = None
    cutoff: int | None = None
    optimizer: OptimizerConfig = OptimizerConfig()
    seed: int = 0
    deterministic_elimination: bool = False
    reuse_donors: bool = False
    donor_retry_cap: int = 20
    workers: int = 1
    cap: int = MAX_QUBITS

    def __post_init__(self):
        if (self.rounds is None) == (self.cutoff is None):
            raise ValueError("give exactly one of rounds or cutoff")
        if self.rounds is not None and self.rounds < 0:
            raise ValueError("rounds must be >= 0")
        if self.cutoff is not None and self.cutoff < 1:
            raise ValueError("cutoff must be >= 1")
        if self.d_s < 1 or self.n_s < 1 or self.p < 1:
            raise ValueError("d_s, n_s and p must be >= 1")

    def num_rounds(self, num_vars: int) -> int:
        rounds = self.rounds if self.rounds is not None else num_vars - self.cutoff
        if not 0 <= rounds < max(num_vars, 1):
            raise ValueError(f"rounds/cutoff incompatible with {num_vars} variables")
        return rounds


# --------------------------------------------------------------------------- substitution


def substitute(hamiltonian: SpinHamiltonian, term: Sequence[int], eliminated: int,
               sign: int) -> tuple[SpinHamiltonian, tuple[int, ...]]:
    """Replace ``Z_eliminated`` by ``sign * prod(other members of term)``.

    Returns the reduced Hamiltonian (densely reindexed) and the map from new
    local indices to the old ones.
    """
    others = frozenset(term) - {eliminated}
    acc: dict[frozenset, float] = {}
    offset = hamiltonian.offset
    for t, c in hamiltonian.terms.items():
        if eliminated in t:
            key = (frozenset(t) - {eliminated}) ^ others
            c = c * sign
        else:
            key = frozenset(t)
        if key:
            acc[key] = acc.get(key, 0.0) + c
        else:
            offset += c
    keep = tuple(i for i in range(hamiltonian.num_vars) if i != eliminated)
    new_index = {old: new for new, old in enumerate(keep)}
    terms = {tuple(sorted(new_index[i] for i in key)): c for key, c in acc.items()}
    return SpinHamiltonian(len(keep), terms, offset), keep


def strongest_term(corr: Mapping[Term, float]) -> Term:
    """Term with the largest ``|<P>|``; ties go to the lexicographically smallest."""
    if not corr:
        raise ValueError("empty correlation dictionary")
    top = max(abs(v) for v in corr.values())
    return min(t for t, v in corr.items() if abs(v) >= top - TIE_TOL)


def fix_edge(hamiltonian: SpinHamiltonian, corr: Mapping[Term, float],
             rng: np.random.Generator | None = None, deterministic: bool = False,
             round_index: int = 0) -> tuple[SpinHamiltonian, EdgeFix]:
    """Fix the sign of the strongest correlated term and eliminate one of its variables.

    The eliminated member is drawn uniformly with ``rng`` (or is the smallest
    index when ``deterministic``). The returned fix uses the indices of
    ``hamiltonian``; the reduced problem drops the eliminated index and shifts
    the later ones down by one.
    """
    if hamiltonian.num_vars < 2:
        raise ValueError("need at least two variables to fix an edge")
    term = strongest_term(corr)
    value = corr[term]
    sign = 1 if value >= 0 else -1
    if deterministic or len(term) == 1:
        eliminated = term[0]
    else:
        if rng is None:
            raise ValueError("rng is required unless deterministic")
        eliminated = int(term[int(rng.integers(len(term)))])
    reduced, _ = substitute(hamiltonian, term, eliminated, sign)
    return reduced, EdgeFix(tuple(term), eliminated, sign, round_index, float(value))


def reconstruct_solution(trace: ReductionTrace, reduced_solution) -> np.ndarray:
    """Walk the fixes backwards to rebuild a full ``+-1`` assignment."""
    reduced = [int(s) for s in reduced_solution]
    final_map = trace.final_map
    if len(reduced) != len(final_map):
        raise ValueError(f"expected {len(final_map)} reduced spins, got {len(reduced)}")
    if any(s not in (1, -1) for s in reduced):
        raise ValueError("spins must be +1 or -1")
    full = np.zeros(trace.num_vars, dtype=np.int64)
    for local, orig in enumerate(final_map):
        full[orig] = reduced[local]
    for fix in reversed(trace.fixes):
        if full[fix.eliminated] != 0:
            raise DataError(f"inconsistent trace: variable {fix.eliminated} assigned twice")
        value = fix.sign
        for o in fix.term:
            if o == fix.eliminated:
                continue
            if full[o] == 0:
                raise DataError(f"inconsistent trace: variable {o} unresolved at round {fix.round}")
            value *= int(full[o])
        full[fix.eliminated] = value
    if np.any(full == 0):
        raise DataError("inconsistent trace: some variables were never assigned")
    return full


def finish(trace: ReductionTrace, original: SpinHamiltonian,
           solver: Callable[[SpinHamiltonian], tuple]) -> tuple[np.ndarray, float]:
    """Solve the reduced problem with ``solver`` and score the rebuilt solution."""
    reduced_spins, _ = solver(trace.final_problem)
    full = reconstruct_solution(trace, reduced_spins)
    return full, evaluate_spin(original, full)


# --------------------------------------------------------------------------- optimization


class _BudgetExhausted(Exception):
    pass


def coefficient_norm(hamiltonian: SpinHamiltonian) -> float:
    """``sqrt(sum c_T^2)``; 1 for an empty Hamiltonian."""
    norm = float(np.sqrt(sum(c * c for c in hamiltonian.terms.values())))
    return norm if norm > 0 else 1.0


def _ramp_candidates(p: int) -> list[np.ndarray]:
    # linear ramp in scaled units (gamma grows, beta shrinks), all four sign patterns
    frac = (np.arange(p) + 0.5) / p
    out = []
    for sg, sb in ((1, 1), (-1, 1), (1, -1), (-1, -1)):
        out.append(np.concatenate([sg * frac, sb * (np.pi / 8) * (1.0 - frac + 0.5 / p)]))
    return out


def optimize_qaoa(hamiltonian: SpinHamiltonian, p: int, config: OptimizerConfig,
                  rng: np.random.Generator, counter: Counter | None = None,
                  cap: int = MAX_QUBITS, history: list | None = None) -> tuple[QaoaParams, float, int]:
    """Minimize ``<H>`` over the ``2p`` QAOA angles with COBYLA.

    The search runs on ``(gamma * ||H||, beta)`` with ``||H||`` the coefficient
    norm, so one trust radius suits instances of any energy scale. The first
    start is the best of four signed linear ramps; further starts are random.
    Returns the best parameters seen (unscaled), their energy, and the number of
    objective evaluations. ``history``, when given, receives the best-so-far
    energy after every evaluation.
    """
    local = Counter()
    scale = coefficient_norm(hamiltonian)
    best = [np.inf, None]

    def unscale(u):
        u = np.asarray(u, dtype=np.float64)
        return np.concatenate([u[:p] / scale, u[p:]])

    def objective(u):
        if local["energy_evals"] >= config.max_iter:
            raise _BudgetExhausted
        theta = unscale(u)
        state = run_qaoa(hamiltonian, QaoaParams.from_vector(theta), cap)
        energy = energy_expectation(state, hamiltonian, local)
        if energy < best[0]:
            best[0], best[1] = energy, theta
        if history is not None:
            history.append(best[0])
        return energy

    attempt = 0
    try:
        candidates = _ramp_candidates(p)
        start = min(candidates, key=objective)
        while True:
            remaining = config.max_iter - local["energy_evals"]
            if remaining <= 0:
                break
            minimize(objective, start, method="COBYLA", tol=config.tol,
                     options={"maxiter": int(remaining), "rhobeg": config.rhobeg})
            attempt += 1
            if not config.exhaust_budget and attempt > config.restarts:
                break
            start = np.concatenate([rng.uniform(-2.0, 2.0, size=p), rng.uniform(-np.pi / 4, np.pi / 4, size=p)])
    except _BudgetExhausted:
        pass
    if counter is not None:
        counter["energy_evals"] += local["energy_evals"]
    return QaoaParams.from_vector(best[1]), float(best[0]), int(local["energy_evals"])


# --------------------------------------------------------------------------- donors


def restrict(hamiltonian: SpinHamiltonian, subset: Sequence[int]) -> SpinHamiltonian:
    """Terms fully inside ``subset``, reindexed to ``0..len(subset)-1``; offset kept."""
    index = {v: i for i, v in enumerate(sorted(subset))}
    terms = {tuple(index[i] for i in t): c for t, c in hamiltonian.terms.items()
             if all(i in index for i in t)}
    return SpinHamiltonian(len(index), terms, hamiltonian.offset)


def subsample_donor(hamiltonian: SpinHamiltonian, d_s: int, seed) -> tuple[SpinHamiltonian, tuple[int, ...]]:
    """Uniformly random ``d_s``-variable sub-Hamiltonian.

    ``seed`` may be an integer or a :class:`numpy.random.Generator`.
    """
    if not 1 <= d_s < hamiltonian.num_vars:
        raise ValueError(f"donor size must lie in [1, {hamiltonian.num_vars - 1}]")
    rng = seed if isinstance(seed, np.random.Generator) else spawn_rng(seed, "donor")
    subset = tuple(sorted(int(i) for i in rng.choice(hamiltonian.num_vars, size=d_s, replace=False)))
    return restrict(hamiltonian, subset), subset


def train_donor(donor: SpinHamiltonian, p: int = 1, optimizer: OptimizerConfig = OptimizerConfig(),
                seed: int = 0, subset: Sequence[int] = (), cap: int = MAX_QUBITS) -> DonorResult:
    params, energy, iters = optimize_qaoa(donor, p, optimizer, spawn_rng(seed, "train"), cap=cap)
    return DonorResult(tuple(subset) or tuple(range(donor.num_vars)), params, energy, iters)


def select_donor_params(target: SpinHamiltonian, donors: Sequence[DonorResult],
                        counter: Counter | None = None,
                        cap: int = MAX_QUBITS) -> tuple[QaoaParams, list[float]]:
    """Evaluate every donor's angles on the target; return the lowest-energy set."""
    if not donors:
        raise ValueError("no donors")
    energies = []
    for d in donors:
        state = run_qaoa(target, d.params, cap)
        energies.append(energy_expectation(state, target, counter))
    best = min(range(len(energies)), key=lambda i: (energies[i], i))
    return donors[best].params, energies


# --------------------------------------------------------------------------- recursion


def _round_donors(h: SpinHamiltonian, config: HrqaoaConfig, round_index: int) -> list[DonorResult]:
    d_s = min(config.d_s, h.num_vars - 1)

    def one(i: int) -> DonorResult:
        rng = spawn_rng(config.seed, "hrqaoa", round_index, "subsample", i)
        for _ in range(config.donor_retry_cap):
            donor, subset = subsample_donor(h, d_s, rng)
            if donor.terms:
                break
        return train_donor(donor, config.p, config.optimizer,
                           derive_seed(config.seed, "hrqaoa", round_index, "train", i),
                           subset, config.cap)

    if config.workers > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            return list(pool.map(one, range(config.n_s)))
    return [one(i) for i in range(config.n_s)]


def _reduce(hamiltonian: SpinHamiltonian, config: HrqaoaConfig, variational: bool) -> ReductionTrace:
    total_rounds = config.num_rounds(hamiltonian.num_vars)
    trace = ReductionTrace(hamiltonian.num_vars)
    h = hamiltonian
    var_map: tuple[int, ...] = tuple(range(h.num_vars))
    donors: list[DonorResult] | None = None
    for r in range(total_rounds):
        if h.num_vars < 2:
            trace.stop_reason = "too_few_variables"
            break
        if not h.terms:
            trace.stop_reason = "no_terms"
            break
        counts: Counter = Counter()
        record_kwargs: dict = {}
        if variational:
            evals = Counter()
            params, _, iters = optimize_qaoa(
                h, config.p, config.optimizer, spawn_rng(config.seed, "rqaoa", r), evals, config.cap)
            counts["target_energy_evals"] += evals["energy_evals"]
            counts["state_preparations"] += evals["energy_evals"]
            counts["optimizer_iterations"] += iters
        else:
            if donors is None or not config.reuse_donors:
                donors = _round_donors(h, config, r)
                for d in donors:
                    counts["donor_energy_evals"] += d.optimizer_iterations
                    counts["optimizer_iterations"] += d.optimizer_iterations
            evals = Counter()
            params, transferred = select_donor_params(h, donors, evals, config.cap)
            counts["target_energy_evals"] += evals["energy_evals"]
            counts["state_preparations"] += evals["energy_evals"]
            record_kwargs = dict(
                donor_subsets=[d.variable_subset for d in donors],
                donor_energies=[d.trained_energy for d in donors],
                transferred_energies=transferred,
                selected_donor=min(range(len(transferred)), key=lambda i: (transferred[i], i)),
            )
        state = run_qaoa(h, params, config.cap)
        counts["state_preparations"] += 1
        corr = correlation_dictionary(state, h)
        h, local_fix = fix_edge(h, corr, spawn_rng(config.seed, "eliminate", r),
                                config.deterministic_elimination, r)
        fix = EdgeFix(tuple(var_map[i] for i in local_fix.term), var_map[local_fix.eliminated],
                      local_fix.sign, r, local_fix.correlation)
        var_map = tuple(v for i, v in enumerate(var_map) if i != local_fix.eliminated)
        trace.fixes.append(fix)
        trace.variable_maps.append(var_map)
        trace.counters.update(counts)
        trace.rounds.append(RoundRecord(r, len(var_map) + 1, fix, params=params,
                                        counters=dict(counts), **record_kwargs))
    trace.final_problem = h
    return trace


def run_hrqaoa(hamiltonian: SpinHamiltonian, config: HrqaoaConfig) -> ReductionTrace:
    """Edge-fixing rounds driven by parameters transferred from trained donors.

    Per round: ``n_s`` donors of ``d_s`` variables are sampled and trained, each
    donor's angles are evaluated once on the target (``n_s`` target-sized
    ``<H>`` evaluations), the best angles prepare the state whose correlation
    dictionary decides the fix.
    """
    return _reduce(hamiltonian, config, variational=False)


def run_rqaoa(hamiltonian: SpinHamiltonian, config: HrqaoaConfig) -> ReductionTrace:
    """Plain recursive QAOA: full variational optimization on the target every round."""
    return _reduce(hamiltonian, config, variational=True)


def params_to_dict(params: QaoaParams) -> dict:
    return asdict(params)
