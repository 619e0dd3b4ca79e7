"""``pcbo-hybrid`` command-line interface.

Each subcommand reads files, writes files, and is a pure function of its
inputs, flags and ``--seed``. Exit codes: 0 success, 2 usage, 3 data error,
4 resource cap exceeded.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .classical import TabuConfig, brute_force, random_edge_fix, tabu_search
from .dataset import (FeatureMatrix, apply_bins, load_binspecs, load_real_table, load_table,
                      quantile_discretize, save_binspecs, write_table)
from .errors import CapacityError, DataError
from .hrqaoa import HrqaoaConfig, OptimizerConfig, finish, run_hrqaoa, run_rqaoa
from .pcbo import (DEFAULT_LAMBDA_C, FORMULATIONS, AlphaWeights, PolyBinaryProblem, SpinHamiltonian,
                   binary_to_spin_hamiltonian, build_entropy_cubo, build_full_qubo, build_miqubo,
                   build_mrmr, evaluate_binary, read_problem, spins_to_bits, write_problem)
from .resource import (ExponentialFit, RuntimeModelParams, crossover_size, fit_exponential,
                       fit_from_dict, fit_to_dict, hybrid_speedup_ratio, rows_to_csv,
                       rqaoa_asymptotic_time, rqaoa_total_time, scaling_harness, shots_required,
                       single_round_time)
from .seeding import derive_seed
from .sparsify import (heavy_hex_for, heavy_hex_graph, map_heavy_hex, randomized_tail,
                       swap_budget_sweep, tail_mass, truncate_by_weight)

EXIT_USAGE, EXIT_DATA, EXIT_CAP = 2, 3, 4


class UsageError(Exception):
    pass


def _dump_json(path, payload) -> None:
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _int_list(text: str) -> list[int]:
    """``"10-14"`` or ``"10,12,14"``."""
    out = []
    for part in str(text).split(","):
        part = part.strip()
        if "-" in part[1:]:
            lo, hi = part.split("-", 1)
            out.extend(range(int(lo), int(hi) + 1))
        elif part:
            out.append(int(part))
    return out


def _as_spin(problem, lambda_c: float) -> SpinHamiltonian:
    if isinstance(problem, SpinHamiltonian):
        return problem
    return binary_to_spin_hamiltonian(problem, lambda_c)


# --------------------------------------------------------------------------- discretize


def cmd_discretize(args) -> int:
    names, values, labels = load_real_table(args.input, args.label_column)
    if args.apply_bins:
        specs = load_binspecs(args.apply_bins)
        missing = [n for n in names if n not in specs]
        if missing:
            raise DataError(f"{args.apply_bins}: no bins for columns {missing}")
        cols = [apply_bins(values[:, j], specs[n]) for j, n in enumerate(names)]
        alphabets = [specs[n].levels for n in names]
    else:
        specs, cols, alphabets = {}, [], []
        for j, n in enumerate(names):
            col, spec = quantile_discretize(values[:, j], args.levels)
            specs[n] = spec
            cols.append(col)
            alphabets.append(spec.levels)
    matrix = FeatureMatrix(np.stack(cols, axis=1), np.array(alphabets), labels,
                           int(labels.max()) + 1, names)
    write_table(args.output, matrix, args.label_column)
    save_binspecs(args.bins or f"{args.output}.bins.json", specs)
    return 0


# --------------------------------------------------------------------------- build


def _alpha(text: str) -> AlphaWeights:
    parts = [float(x) for x in str(text).split(",")]
    if len(parts) != 3:
        raise UsageError("--alpha takes three comma-separated weights")
    return AlphaWeights(*parts)


def cmd_build(args) -> int:
    matrix = load_table(args.matrix, args.label_column)
    if args.formulation == "entropy-cubo":
        if args.k is None:
            raise UsageError("entropy-cubo requires --k")
        problem = build_entropy_cubo(matrix, _alpha(args.alpha), args.k)
    else:
        builder = {"mrmr": build_mrmr, "miqubo": build_miqubo, "full-qubo": build_full_qubo}[args.formulation]
        problem = builder(matrix, args.lam)
        if args.select is not None:
            problem = replace(problem, cardinality=args.select)
    if args.spin:
        problem = _as_spin(problem, args.lambda_c)
    write_problem(args.output, problem)
    return 0


# --------------------------------------------------------------------------- solve


def _finisher(args):
    if args.finisher == "brute":
        return lambda h: brute_force(h)
    cfg = TabuConfig(args.tabu_iterations, args.tenure, args.tabu_restarts, derive_seed(args.seed, "finisher"))
    return lambda h: tabu_search(h, cfg)


def _hrqaoa_config(args) -> HrqaoaConfig:
    if (args.rounds is None) == (args.cutoff is None):
        raise UsageError(f"{args.method} requires exactly one of --rounds or --cutoff")
    opt = OptimizerConfig(args.max_iter, args.restarts, args.tol, args.rhobeg, args.exhaust_budget)
    return HrqaoaConfig(d_s=args.d_s, n_s=args.n_s, p=args.p, rounds=args.rounds, cutoff=args.cutoff,
                        optimizer=opt, seed=derive_seed(args.seed, "solve", args.method),
                        deterministic_elimination=args.deterministic_elimination,
                        reuse_donors=args.reuse_donors, workers=max(1, args.threads))


def cmd_solve(args) -> int:
    problem = read_problem(args.problem)
    h = _as_spin(problem, args.lambda_c)
    trace = None
    if args.method == "brute":
        spins, energy = brute_force(h)
    elif args.method == "tabu":
        spins, energy = tabu_search(h, TabuConfig(args.tabu_iterations, args.tenure, args.tabu_restarts,
                                                  derive_seed(args.seed, "solve", "tabu")))
    else:
        if args.method == "random-fix":
            if args.cutoff is None:
                if args.rounds is None:
                    raise UsageError("random-fix requires --rounds or --cutoff")
                cutoff = h.num_vars - args.rounds
            else:
                cutoff = args.cutoff
            trace = random_edge_fix(h, cutoff, derive_seed(args.seed, "solve", "random-fix"))
        else:
            runner = run_hrqaoa if args.method == "hrqaoa" else run_rqaoa
            trace = runner(h, _hrqaoa_config(args))
        spins, energy = finish(trace, h, _finisher(args))
    spins = np.asarray(spins, dtype=np.int64)
    bits = spins_to_bits(spins)
    selected = [int(i) for i in np.flatnonzero(bits)]
    payload = {"method": args.method, "energy": float(energy), "spins": spins.tolist(),
               "bits": bits.tolist(), "selected": selected, "seed": args.seed}
    if isinstance(problem, PolyBinaryProblem):
        payload["objective"] = evaluate_binary(replace(problem, cardinality=None), bits)
        if problem.cardinality is not None:
            payload["cardinality"] = problem.cardinality
            payload["feasible"] = len(selected) == problem.cardinality
    if args.matrix:
        names = load_table(args.matrix, args.label_column).feature_names
        if len(names) != h.num_vars:
            raise DataError(f"{args.matrix}: {len(names)} features but problem has {h.num_vars} variables")
        payload["selected_names"] = [names[i] for i in selected]
    _dump_json(args.output, payload)
    if trace is not None and args.trace:
        Path(args.trace).write_text(trace.dumps())
    if payload.get("selected_names") is not None:
        print(" ".join(payload["selected_names"]))
    return 0


# --------------------------------------------------------------------------- sparsify


def _budgets(text: str | None) -> list[int]:
    return _int_list(text) if text else []


def cmd_sparsify(args) -> int:
    h = _as_spin(read_problem(args.problem), args.lambda_c)
    extra = {}
    if args.method == "truncate":
        keep = args.keep
        keep = int(keep) if float(keep).is_integer() and float(keep) > 1 else float(keep)
        out, report = truncate_by_weight(h, keep)
    elif args.method == "random-tail":
        if args.threshold is None:
            raise UsageError("random-tail requires --threshold")
        surrogate = args.surrogate
        if surrogate is None:
            surrogate = tail_mass(h, args.threshold) / max(args.budget, 1)
        out, report = randomized_tail(h, args.threshold, surrogate, args.budget,
                                      derive_seed(args.seed, "sparsify"))
        extra["surrogate_angle"] = surrogate
    else:
        graph = heavy_hex_graph(args.rows, args.cols) if args.rows else heavy_hex_for(h.num_vars)
        layout, out, report = map_heavy_hex(h, graph, args.max_swap_cost)
        extra["depth_estimate"] = layout.depth_estimate
        extra["graph"] = {"rows": graph.dimensions[0], "cols": graph.dimensions[1],
                          "nodes": len(graph.nodes), "edges": len(graph.edges)}
        if args.layout:
            Path(args.layout).write_text(layout.to_text())
        if args.sweep:
            rows = swap_budget_sweep(h, graph, _budgets(args.sweep))
            cols = ("max_swap_cost", "ratio_order2", "ratio_order3", "kept_terms", "depth")
            Path(args.table or f"{args.output}.sweep.csv").write_text(rows_to_csv(rows, cols))
    write_problem(args.output, out)
    if args.report:
        _dump_json(args.report, {"method": args.method, **report.to_dict(), **extra})
    return 0


# --------------------------------------------------------------------------- bench


def cmd_bench(args) -> int:
    rows = scaling_harness(_int_list(args.sizes), _int_list(args.seeds), args.solvers.split(","),
                           None if args.timeout <= 0 else args.timeout,
                           tabu=TabuConfig(args.tabu_iterations, args.tenure, args.tabu_restarts),
                           repeats=args.repeats)
    exclude = ("time",) if args.no_timing else ()
    Path(args.output).write_text(rows_to_csv(rows, exclude=exclude))
    return 0


# --------------------------------------------------------------------------- resources


def _load_fit(args) -> ExponentialFit:
    if args.fit:
        return fit_from_dict(json.loads(Path(args.fit).read_text()))
    if args.bench:
        with open(args.bench, newline="") as fh:
            rows = [r for r in csv.DictReader(fh) if r["solver"] == "brute"]
        if not rows or "time" not in rows[0]:
            raise DataError(f"{args.bench}: no brute-force timings")
        by_size: dict[int, float] = {}
        for r in rows:
            n = int(r["size"])
            by_size[n] = min(by_size.get(n, float("inf")), float(r["time"]))
        sizes = sorted(by_size)
        return fit_exponential(sizes, [by_size[n] for n in sizes])
    if args.a is None or args.b is None or args.c is None:
        raise UsageError("give --fit, --bench, or all of -a/-b/-c")
    return ExponentialFit(args.a, args.b, args.c)


def cmd_resources(args) -> int:
    params = RuntimeModelParams(args.t_g, args.t_p, args.t_opt, args.epsilon, args.delta, args.p)
    fit = _load_fit(args)
    lines = ["# inputs",
             f"t_g {params.t_g!r}", f"t_p {params.t_p!r}", f"t_opt {params.t_opt!r}",
             f"epsilon {params.epsilon!r}", f"delta {params.delta!r}", f"p {params.p}",
             f"rounds {args.rounds}", f"n_max {args.n_max}",
             f"fit a={fit.a!r} b={fit.b!r} c={fit.c!r} relative_rms={fit.relative_rms!r}",
             "# per-size model"]
    for n in _int_list(args.sizes):
        shots = shots_required(n, params.epsilon, params.delta)
        n_c = max(n - args.rounds, 0)
        total = rqaoa_total_time(n, n_c, params) if n_c < n else 0.0
        ratio = hybrid_speedup_ratio(n, n_c, fit, params) if fit.a * np.exp(fit.b * n) + fit.c != 0 else float("nan")
        lines.append(f"N={n} epsilon={params.epsilon!r} delta={params.delta!r} shots={shots} "
                     f"round={single_round_time(n, params)!r} total={total!r} "
                     f"asymptotic={rqaoa_asymptotic_time(n, params)!r} ratio={ratio!r}")
    star = crossover_size(fit, params, args.rounds, args.n_max)
    lines.append("# crossover")
    lines.append("no crossover" if star is None else f"crossover N*={star}")
    Path(args.output).write_text("\n".join(lines) + "\n")
    if args.fit_out:
        _dump_json(args.fit_out, fit_to_dict(fit))
    return 0


# --------------------------------------------------------------------------- parser


def build_parser() -> tuple[argparse.ArgumentParser, dict[str, argparse.ArgumentParser]]:
    parser = argparse.ArgumentParser(prog="pcbo-hybrid", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    subs: dict[str, argparse.ArgumentParser] = {}

    def add(name, func, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="JSON file of option defaults; flags override it")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--threads", type=int, default=1)
        p.set_defaults(func=func)
        subs[name] = p
        return p

    p = add("discretize", cmd_discretize, "quantile-bin a real-valued table")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--levels", type=int, default=5)
    p.add_argument("--label-column", default="label")
    p.add_argument("--bins", help="sidecar path (default: OUTPUT.bins.json)")
    p.add_argument("--apply-bins", help="re-use frozen edges from an existing sidecar")

    p = add("build", cmd_build, "build a PCBO problem file from a discrete table")
    p.add_argument("--matrix", required=True)
    p.add_argument("--formulation", required=True, choices=FORMULATIONS)
    p.add_argument("--output", required=True)
    p.add_argument("--label-column", default="label")
    p.add_argument("--lam", type=float, default=1.0, help="relevance weight for quadratic forms")
    p.add_argument("--alpha", default="0,0,1")
    p.add_argument("--k", type=int)
    p.add_argument("--select", type=int, help="cardinality constraint for quadratic forms")
    p.add_argument("--spin", action="store_true", help="write the penalized spin Hamiltonian")
    p.add_argument("--lambda-c", type=float, default=DEFAULT_LAMBDA_C)

    p = add("solve", cmd_solve, "solve a problem file")
    p.add_argument("--problem", required=True)
    p.add_argument("--method", required=True, choices=("brute", "tabu", "rqaoa", "hrqaoa", "random-fix"))
    p.add_argument("--finisher", choices=("brute", "tabu"), default="brute")
    p.add_argument("--output", required=True)
    p.add_argument("--trace")
    p.add_argument("--matrix", help="discrete table whose header names the selected features")
    p.add_argument("--label-column", default="label")
    p.add_argument("--lambda-c", type=float, default=DEFAULT_LAMBDA_C)
    p.add_argument("--rounds", type=int)
    p.add_argument("--cutoff", type=int)
    p.add_argument("--d-s", type=int, default=8)
    p.add_argument("--n-s", type=int, default=3)
    p.add_argument("--p", type=int, default=1)
    p.add_argument("--max-iter", type=int, default=5000)
    p.add_argument("--restarts", type=int, default=0)
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--rhobeg", type=float, default=0.5)
    p.add_argument("--exhaust-budget", action="store_true")
    p.add_argument("--deterministic-elimination", action="store_true")
    p.add_argument("--reuse-donors", action="store_true")
    p.add_argument("--tabu-iterations", type=int)
    p.add_argument("--tenure", type=int)
    p.add_argument("--tabu-restarts", type=int, default=20)

    p = add("sparsify", cmd_sparsify, "reduce the term count of a problem")
    p.add_argument("--problem", required=True)
    p.add_argument("--method", required=True, choices=("truncate", "random-tail", "heavy-hex"))
    p.add_argument("--output", required=True)
    p.add_argument("--report")
    p.add_argument("--lambda-c", type=float, default=DEFAULT_LAMBDA_C)
    p.add_argument("--keep", type=float, default=0.5, help="fraction in (0,1] or integer count")
    p.add_argument("--threshold", type=float)
    p.add_argument("--surrogate", type=float, help="default: tail mass / budget")
    p.add_argument("--budget", type=int, default=0)
    p.add_argument("--max-swap-cost", type=int, default=0)
    p.add_argument("--rows", type=int)
    p.add_argument("--cols", type=int, default=1)
    p.add_argument("--layout")
    p.add_argument("--sweep", help="budgets, e.g. 0-4")
    p.add_argument("--table")

    p = add("bench", cmd_bench, "classical runtime scaling harness")
    p.add_argument("--sizes", default="10-16")
    p.add_argument("--seeds", default="0")
    p.add_argument("--solvers", default="brute,tabu")
    p.add_argument("--timeout", type=float, default=10.0, help="improvement timeout; <= 0 disables")
    p.add_argument("--repeats", type=int, default=1)
    p.add_argument("--tabu-iterations", type=int)
    p.add_argument("--tenure", type=int)
    p.add_argument("--tabu-restarts", type=int, default=5)
    p.add_argument("--no-timing", action="store_true", help="omit the wall-time column")
    p.add_argument("--output", required=True)

    p = add("resources", cmd_resources, "runtime models and crossover estimate")
    p.add_argument("--sizes", default="20")
    p.add_argument("--epsilon", type=float, default=0.1)
    p.add_argument("--delta", type=float, default=0.05)
    p.add_argument("--t-g", type=float, default=1e-7)
    p.add_argument("--t-p", type=float, default=1e-4)
    p.add_argument("--t-opt", type=float, default=1.0)
    p.add_argument("--p", type=int, default=1)
    p.add_argument("--rounds", type=int, default=6)
    p.add_argument("--n-max", type=int, default=200)
    p.add_argument("--fit", help="JSON file with a, b, c")
    p.add_argument("--bench", help="bench CSV to fit brute-force timings from")
    p.add_argument("-a", type=float)
    p.add_argument("-b", type=float)
    p.add_argument("-c", type=float)
    p.add_argument("--fit-out")
    p.add_argument("--output", required=True)
    return parser, subs


def parse_args(argv=None) -> argparse.Namespace:
    parser, subs = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        try:
            config = json.loads(Path(args.config).read_text())
        except (OSError, ValueError) as exc:
            raise DataError(f"{args.config}: cannot read config ({exc})") from None
        if not isinstance(config, dict):
            raise DataError(f"{args.config}: config must be a JSON object")
        known = vars(args)
        defaults = {}
        for key, value in config.items():
            dest = key.replace("-", "_")
            if dest not in known or dest in ("func", "command", "config"):
                raise UsageError(f"{args.config}: unknown option {key!r}")
            defaults[dest] = value
        subs[args.command].set_defaults(**defaults)
        args = parser.parse_args(argv)
    return args


def main(argv=None) -> int:
    try:
        args = parse_args(argv)
        if args.threads < 1:
            raise UsageError("--threads must be >= 1")
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except CapacityError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CAP
    except (DataError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
