"""Runtime models for recursive QAOA, exponential fits of classical runtimes,
hybrid crossover estimates, and the classical scaling harness."""
from __future__ import annotations

import csv
import io
import math
import time
import warnings
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np
from scipy.optimize import least_squares

from .classical import BRUTE_FORCE_CAP, TabuConfig, run_brute_force, run_tabu
from .dataset import synthesize_planted
from .pcbo import AlphaWeights, SpinHamiltonian, binary_to_spin_hamiltonian, build_entropy_cubo
from .seeding import derive_seed


@dataclass(frozen=True)
class RuntimeModelParams:
    """Hardware/time model inputs.

    Defaults are placeholders, not measured device values. Times are seconds
    and may be zero to model free quantum execution.
    """

    t_g: float = 1e-7
    t_p: float = 1e-4
    t_opt: float = 1.0
    epsilon: float = 0.1
    delta: float = 0.05
    p: int = 1

    def __post_init__(self):
        if min(self.t_g, self.t_p, self.t_opt) < 0:
            raise ValueError("times must be non-negative")
        if not (0 < self.epsilon < 1 and 0 < self.delta < 1):
            raise ValueError("epsilon and delta must lie in (0, 1)")
        if self.p < 1:
            raise ValueError("p must be >= 1")


@dataclass(frozen=True)
class ExponentialFit:
    """``y = a exp(b x) + c`` over ``domain = (min x, max x)``."""

    a: float
    b: float
    c: float
    rms: float = 0.0
    relative_rms: float = 0.0
    domain: tuple[float, float] = (0.0, 0.0)

    def __call__(self, x):
        return self.a * np.exp(self.b * np.asarray(x, dtype=np.float64)) + self.c


# --------------------------------------------------------------------------- closed forms


def shots_bound(n: int, epsilon: float, delta: float) -> float:
    """Uncapped ``ln(2 N^3 / delta) / (2 epsilon^2)``."""
    if n < 1:
        raise ValueError("N must be >= 1")
    if not (0 < epsilon < 1 and 0 < delta < 1):
        raise ValueError("epsilon and delta must lie in (0, 1)")
    return math.log(2.0 * n**3 / delta) / (2.0 * epsilon**2)


def shots_required(n: int, epsilon: float, delta: float) -> int:
    """Shots so every weight-1..3 correlator is within ``epsilon`` with probability ``1 - delta``.

    Hoeffding per observable plus a union bound over ``2 N^3`` of them.
    """
    return math.ceil(shots_bound(n, epsilon, delta))


def time_per_shot(n: int, params: RuntimeModelParams) -> float:
    return params.p * n**3 * params.t_g + params.t_p


def single_round_time(n: int, params: RuntimeModelParams) -> float:
    return shots_required(n, params.epsilon, params.delta) * time_per_shot(n, params) + params.t_opt


def rqaoa_total_time(n: int, n_c: int, params: RuntimeModelParams) -> float:
    """Exact sum of round times while shrinking from ``n`` to ``n_c`` variables."""
    if not 0 <= n_c < n:
        raise ValueError("need 0 <= N_c < N")
    return sum(single_round_time(n - i, params) for i in range(n - n_c))


def rqaoa_asymptotic_time(n: int, params: RuntimeModelParams) -> float:
    """Leading-order ``p N^4 t_g / epsilon^2`` for comparison with the exact sum."""
    return params.p * n**4 * params.t_g / params.epsilon**2


def hybrid_speedup_ratio(n: int, n_c: int, fit: ExponentialFit, params: RuntimeModelParams) -> float:
    """``(T_quantum(N -> N_c) + T_classical(N_c)) / T_classical(N)``; ``N_c = N`` means no rounds."""
    if not 0 <= n_c <= n:
        raise ValueError("need 0 <= N_c <= N")
    quantum = 0.0 if n_c == n else rqaoa_total_time(n, n_c, params)
    return (quantum + float(fit(n_c))) / float(fit(n))


def crossover_size(fit: ExponentialFit, params: RuntimeModelParams, reduction_rounds: int,
                   n_max: int = 200) -> int | None:
    """Smallest ``N`` with ``hybrid_speedup_ratio(N, N - rounds) < 1``, or ``None``."""
    if reduction_rounds < 1:
        raise ValueError("reduction_rounds must be >= 1")
    if fit.b <= 0 or fit.a <= 0:
        return None
    for n in range(reduction_rounds + 1, n_max + 1):
        if hybrid_speedup_ratio(n, n - reduction_rounds, fit, params) < 1.0:
            return n
    return None


# --------------------------------------------------------------------------- fitting


def fit_exponential(sizes, runtimes) -> ExponentialFit:
    """Least-squares ``a exp(b x) + c`` fit.

    Initialized from a straight-line fit of ``log(y - c0)`` and refined with a
    trust-region solver in coordinates centred on the smallest size. Constant
    data gives ``b = 0`` with a warning. ``relative_rms`` is the residual RMS
    divided by the RMS of the data.
    """
    x = np.asarray(sizes, dtype=np.float64)
    y = np.asarray(runtimes, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("sizes and runtimes must be 1-D arrays of equal length")
    if x.size < 3:
        raise ValueError("at least 3 points are required")
    if len(np.unique(x)) != x.size:
        raise ValueError("sizes must be distinct")
    if not np.all(np.isfinite(y)):
        raise ValueError("runtimes must be finite")
    order = np.argsort(x)
    x, y = x[order], y[order]
    domain = (float(x[0]), float(x[-1]))
    y_rms = float(np.sqrt(np.mean(y**2)))
    if np.ptp(y) == 0:
        warnings.warn("constant runtimes; returning a flat fit with b = 0", RuntimeWarning, stacklevel=2)
        return ExponentialFit(0.0, 0.0, float(y[0]), 0.0, 0.0, domain)

    x0 = x[0]
    u = x - x0
    span = np.ptp(y)
    increasing = y[-1] >= y[0]
    sign = 1.0 if increasing else -1.0
    c0 = (y.min() - 1e-3 * span) if increasing else (y.max() + 1e-3 * span)
    slope, intercept = np.polyfit(u, np.log(sign * (y - c0)), 1)
    start = np.array([sign * np.exp(intercept), slope, c0])

    def residual(theta):
        a, b, c = theta
        return a * np.exp(b * u) + c - y

    best = None
    for init in (start, np.array([start[0], start[1], 0.0])):
        sol = least_squares(residual, init, method="trf", xtol=1e-15, ftol=1e-15, gtol=1e-15,
                            max_nfev=20000)
        if best is None or sol.cost < best.cost:
            best = sol
    a_c, b, c = best.x
    a = a_c * math.exp(-b * x0)
    rms = float(np.sqrt(np.mean(best.fun**2)))
    return ExponentialFit(float(a), float(b), float(c), rms, rms / y_rms if y_rms else 0.0, domain)


# --------------------------------------------------------------------------- harness


@dataclass(frozen=True)
class GeneratorConfig:
    """Random entropy-cubo instances built from synthetic planted data."""

    samples: int = 200
    alphabet: int = 4
    classes: int = 2
    noise: float = 0.1
    lambda_c: float = 5.0


def random_entropy_cubo(num_features: int, seed: int,
                        config: GeneratorConfig = GeneratorConfig()) -> SpinHamiltonian:
    """Spin form of an entropy-cubo instance with ``alpha = (0, 0, 1)`` and ``k = N / 2``."""
    informative = max(1, num_features // 5)
    matrix, _ = synthesize_planted(config.samples, num_features, informative, config.alphabet,
                                   config.classes, config.noise, derive_seed(seed, "instance", num_features))
    problem = build_entropy_cubo(matrix, AlphaWeights(0.0, 0.0, 1.0), max(1, num_features // 2))
    return binary_to_spin_hamiltonian(problem, config.lambda_c)


HARNESS_COLUMNS = ("size", "seed", "solver", "time", "energy", "gap", "timeout_hit", "gap_is_absolute")
SOLVERS = ("brute", "tabu")


def _gap(energy: float, best: float) -> tuple[float, bool]:
    if abs(best) < 1e-12:
        return abs(energy - best), True
    return abs(energy - best) / abs(best), False


def scaling_harness(sizes: Sequence[int], seeds: Sequence[int], solvers: Sequence[str] = SOLVERS,
                    improvement_timeout: float | None = 10.0, generator: GeneratorConfig = GeneratorConfig(),
                    tabu: TabuConfig = TabuConfig(restarts=5), repeats: int = 1,
                    brute_cap: int = BRUTE_FORCE_CAP) -> list[dict]:
    """Run each solver on one generated instance per ``(size, seed)``.

    ``time`` is the fastest of ``repeats`` runs on a monotonic clock. The gap
    is measured against the brute-force optimum when it completed, otherwise
    against the best energy any solver found.
    """
    unknown = set(solvers) - set(SOLVERS)
    if unknown:
        raise ValueError(f"unknown solver(s): {sorted(unknown)}")
    rows = []
    for n in sizes:
        for seed in seeds:
            h = random_entropy_cubo(n, seed, generator)
            results = {}
            for solver in solvers:
                if solver == "brute" and n > brute_cap:
                    continue
                times, res = [], None
                for _ in range(max(repeats, 1)):
                    t0 = time.perf_counter()
                    if solver == "brute":
                        res = run_brute_force(h, brute_cap, improvement_timeout)
                    else:
                        cfg = TabuConfig(tabu.iterations, tabu.tenure, tabu.restarts,
                                         derive_seed(seed, "tabu", n))
                        res = run_tabu(h, cfg, improvement_timeout)
                    times.append(time.perf_counter() - t0)
                results[solver] = (min(times), res)
            exact = results.get("brute")
            if exact is not None and not exact[1].timed_out:
                reference = exact[1].energy
            else:
                reference = min(r.energy for _, r in results.values())
            for solver, (elapsed, res) in results.items():
                gap, absolute = _gap(res.energy, reference)
                rows.append({"size": n, "seed": seed, "solver": solver, "time": elapsed,
                             "energy": res.energy, "gap": gap, "timeout_hit": res.timed_out,
                             "gap_is_absolute": absolute})
    return rows


def rows_to_csv(rows: Sequence[dict], columns: Sequence[str] = HARNESS_COLUMNS,
                exclude: Sequence[str] = ()) -> str:
    cols = [c for c in columns if c not in exclude]
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(cols)
    for row in rows:
        writer.writerow([_cell(row[c]) for c in cols])
    return buf.getvalue()


def _cell(value) -> str:
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, float):
        return repr(value)
    return str(value)


def fit_to_dict(fit: ExponentialFit) -> dict:
    d = asdict(fit)
    d["domain"] = list(fit.domain)
    return d


def fit_from_dict(data: dict) -> ExponentialFit:
    return ExponentialFit(float(data["a"]), float(data["b"]), float(data["c"]),
                          float(data.get("rms", 0.0)), float(data.get("relative_rms", 0.0)),
                          tuple(data.get("domain", (0.0, 0.0))))
