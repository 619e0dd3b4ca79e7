import json
import subprocess
import sys

import numpy as np
import pytest

from pcbo_hybrid.cli import main
from pcbo_hybrid.dataset import load_table, synthesize_planted, write_table
from pcbo_hybrid.pcbo import (PolyBinaryProblem, SpinHamiltonian, binary_to_spin_hamiltonian, read_problem,
                             write_problem)


def _real_table(path, rows=60, cols=6, seed=0):
    rng = np.random.default_rng(seed)
    labels = rng.integers(0, 2, rows)
    values = rng.normal(size=(rows, cols)) + labels[:, None] * np.arange(cols)[None, :] * 0.3
    lines = [",".join([f"g{j}" for j in range(cols)] + ["label"])]
    lines += [",".join([repr(float(v)) for v in row] + [str(y)]) for row, y in zip(values, labels)]
    path.write_text("\n".join(lines) + "\n")
    return path


@pytest.fixture
def matrix_file(tmp_path):
    m, _ = synthesize_planted(80, 8, 2, alphabet=4, seed=1)
    path = tmp_path / "matrix.csv"
    write_table(path, m)
    return path


@pytest.fixture
def cubo_file(tmp_path, matrix_file):
    out = tmp_path / "cubo.txt"
    assert main(["build", "--matrix", str(matrix_file), "--formulation", "entropy-cubo",
                 "--k", "3", "--output", str(out)]) == 0
    return out


def test_discretize_writes_table_and_sidecar(tmp_path):
    src = _real_table(tmp_path / "raw.csv")
    out = tmp_path / "disc.csv"
    assert main(["discretize", "--input", str(src), "--output", str(out)]) == 0
    m = load_table(out)
    assert m.values.max() == 4 and m.num_features == 6
    sidecar = tmp_path / "disc.csv.bins.json"
    assert sidecar.exists()
    again = tmp_path / "again.csv"
    assert main(["discretize", "--input", str(src), "--output", str(again),
                 "--apply-bins", str(sidecar), "--bins", str(tmp_path / "b2.json")]) == 0
    assert again.read_text() == out.read_text()


def test_discretize_four_levels(tmp_path):
    src = _real_table(tmp_path / "raw.csv")
    out = tmp_path / "disc.csv"
    assert main(["discretize", "--input", str(src), "--output", str(out), "--levels", "4"]) == 0
    assert load_table(out).values.max() == 3


def test_build_formulations(tmp_path, matrix_file):
    for form in ("mrmr", "miqubo", "full-qubo"):
        out = tmp_path / f"{form}.txt"
        assert main(["build", "--matrix", str(matrix_file), "--formulation", form,
                     "--select", "2", "--output", str(out)]) == 0
        p = read_problem(out)
        assert isinstance(p, PolyBinaryProblem) and p.cardinality == 2
    spin = tmp_path / "spin.txt"
    assert main(["build", "--matrix", str(matrix_file), "--formulation", "entropy-cubo", "--k", "3",
                 "--spin", "--output", str(spin)]) == 0
    assert isinstance(read_problem(spin), SpinHamiltonian)


def test_build_mrmr_two_features_three_terms(tmp_path):
    m, _ = synthesize_planted(100, 2, 1, seed=4)
    path = tmp_path / "m.csv"
    write_table(path, m)
    out = tmp_path / "p.txt"
    assert main(["build", "--matrix", str(path), "--formulation", "mrmr", "--output", str(out)]) == 0
    assert len(read_problem(out).terms) == 3


def test_build_forty_features_select_ten(tmp_path):
    m, _ = synthesize_planted(120, 40, 5, seed=2)
    path = tmp_path / "m.csv"
    write_table(path, m)
    out = tmp_path / "p.txt"
    assert main(["build", "--matrix", str(path), "--formulation", "entropy-cubo", "--k", "10",
                 "--output", str(out)]) == 0
    p = read_problem(out)
    assert p.num_vars == 40 and p.cardinality == 10 and p.max_order == 3


def test_build_errors(tmp_path, matrix_file):
    out = str(tmp_path / "x.txt")
    with pytest.raises(SystemExit) as exc:
        main(["build", "--matrix", str(matrix_file), "--formulation", "nope", "--output", out])
    assert exc.value.code == 2
    assert main(["build", "--matrix", str(matrix_file), "--formulation", "entropy-cubo", "--output", out]) == 2
    assert main(["build", "--matrix", str(tmp_path / "missing.csv"), "--formulation", "mrmr",
                 "--output", out]) == 3


@pytest.mark.parametrize("method, extra", [
    ("brute", []),
    ("tabu", ["--tabu-restarts", "3"]),
    ("random-fix", ["--rounds", "3"]),
    ("hrqaoa", ["--rounds", "3", "--d-s", "4", "--max-iter", "60"]),
    ("rqaoa", ["--rounds", "2", "--max-iter", "40"]),
])
def test_solve_methods(tmp_path, cubo_file, matrix_file, method, extra, capsys):
    out = tmp_path / "sol.json"
    trace = tmp_path / "trace.json"
    argv = ["solve", "--problem", str(cubo_file), "--method", method, "--output", str(out),
            "--trace", str(trace), "--matrix", str(matrix_file), *extra]
    assert main(argv) == 0
    sol = json.loads(out.read_text())
    assert len(sol["spins"]) == 8 and set(sol["spins"]) <= {1, -1}
    assert sol["selected_names"] == [f"f{i}" for i in sol["selected"]]
    assert capsys.readouterr().out.split() == sol["selected_names"]
    if method in ("random-fix", "hrqaoa", "rqaoa"):
        assert len(json.loads(trace.read_text())["fixes"]) == int(extra[1])


def test_solve_brute_is_feasible_optimum(tmp_path, cubo_file):
    out = tmp_path / "sol.json"
    assert main(["solve", "--problem", str(cubo_file), "--method", "brute", "--output", str(out)]) == 0
    sol = json.loads(out.read_text())
    assert sol["feasible"] and len(sol["selected"]) == 3


def test_solve_hrqaoa_twenty_variables_six_rounds(tmp_path):
    rng = np.random.default_rng(0)
    terms = {(i,): float(rng.normal()) for i in range(20)}
    terms.update({tuple(sorted((i, (i + 1) % 20))): float(rng.normal()) for i in range(20)})
    problem = tmp_path / "h.txt"
    write_problem(problem, SpinHamiltonian(20, terms))
    trace = tmp_path / "t.json"
    out = tmp_path / "s.json"
    assert main(["solve", "--problem", str(problem), "--method", "hrqaoa", "--rounds", "6",
                 "--max-iter", "80", "--output", str(out), "--trace", str(trace)]) == 0
    data = json.loads(trace.read_text())
    assert len(data["fixes"]) == 6 and len(data["rounds"]) == 6
    assert data["final_problem"]["num_vars"] == 14


def test_solve_errors(tmp_path, cubo_file):
    out = str(tmp_path / "s.json")
    big = tmp_path / "big.txt"
    write_problem(big, SpinHamiltonian(25, {(i,): 1.0 for i in range(25)}))
    assert main(["solve", "--problem", str(big), "--method", "brute", "--output", out]) == 4
    assert main(["solve", "--problem", str(cubo_file), "--method", "hrqaoa", "--output", out]) == 2
    assert main(["solve", "--problem", str(cubo_file), "--method", "hrqaoa", "--rounds", "1",
                 "--cutoff", "3", "--output", out]) == 2
    bad = tmp_path / "bad.txt"
    bad.write_text("vars two\n")
    assert main(["solve", "--problem", str(bad), "--method", "brute", "--output", out]) == 3


def test_sparsify_truncate_halves(tmp_path, cubo_file):
    out = tmp_path / "s.txt"
    report = tmp_path / "r.json"
    assert main(["sparsify", "--problem", str(cubo_file), "--method", "truncate", "--keep", "0.5",
                 "--output", str(out), "--report", str(report)]) == 0
    full = binary_to_spin_hamiltonian(read_problem(cubo_file))
    assert abs(len(read_problem(out).terms) - len(full.terms) / 2) <= 1
    assert "retained_weight_fraction" in json.loads(report.read_text())


def test_sparsify_random_tail(tmp_path, cubo_file):
    out = tmp_path / "s.txt"
    assert main(["sparsify", "--problem", str(cubo_file), "--method", "random-tail", "--threshold", "0.05",
                 "--budget", "4", "--output", str(out)]) == 0
    assert main(["sparsify", "--problem", str(cubo_file), "--method", "random-tail",
                 "--output", str(out)]) == 2


def test_sparsify_heavy_hex_sweep(tmp_path, cubo_file):
    out = tmp_path / "s.txt"
    table = tmp_path / "sweep.csv"
    layout = tmp_path / "layout.txt"
    assert main(["sparsify", "--problem", str(cubo_file), "--method", "heavy-hex", "--sweep", "0-5",
                 "--table", str(table), "--layout", str(layout), "--output", str(out)]) == 0
    lines = table.read_text().splitlines()
    assert lines[0] == "max_swap_cost,ratio_order2,ratio_order3,kept_terms,depth"
    rows = [list(map(float, line.split(","))) for line in lines[1:]]
    for col in range(1, 5):
        assert all(a[col] <= b[col] for a, b in zip(rows, rows[1:]))
    assert layout.read_text().startswith("# variable node")


def test_sparsify_invalid_method(tmp_path, cubo_file):
    with pytest.raises(SystemExit) as exc:
        main(["sparsify", "--problem", str(cubo_file), "--method", "magic", "--output", str(tmp_path / "o")])
    assert exc.value.code == 2


def test_bench_and_resources_from_bench(tmp_path):
    bench = tmp_path / "bench.csv"
    assert main(["bench", "--sizes", "8-11", "--seeds", "0", "--solvers", "brute", "--timeout", "0",
                 "--output", str(bench)]) == 0
    header = bench.read_text().splitlines()[0]
    assert header == "size,seed,solver,time,energy,gap,timeout_hit,gap_is_absolute"
    report = tmp_path / "res.txt"
    fit = tmp_path / "fit.json"
    assert main(["resources", "--bench", str(bench), "--output", str(report), "--fit-out", str(fit)]) == 0
    assert set(json.loads(fit.read_text())) >= {"a", "b", "c"}


def test_resources_report(tmp_path):
    out = tmp_path / "res.txt"
    assert main(["resources", "--sizes", "20", "-a", "1e-6", "-b", "0.7", "-c", "0",
                 "--output", str(out)]) == 0
    text = out.read_text()
    assert "N=20 epsilon=0.1 delta=0.05 shots=634 " in text
    for key in ("t_g", "t_p", "t_opt", "epsilon", "delta", "rounds"):
        assert f"\n{key} " in text
    flat = tmp_path / "flat.txt"
    assert main(["resources", "-a", "1", "-b", "0", "-c", "1", "--output", str(flat)]) == 0
    assert "no crossover" in flat.read_text()
    assert main(["resources", "--output", str(flat)]) == 2


def test_config_file_and_override(tmp_path, cubo_file):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"method": "random-fix", "rounds": 2, "seed": 5}))
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert main(["solve", "--config", str(cfg), "--problem", str(cubo_file), "--method", "random-fix",
                 "--output", str(a), "--trace", str(tmp_path / "ta.json")]) == 0
    assert main(["solve", "--config", str(cfg), "--problem", str(cubo_file), "--method", "random-fix",
                 "--rounds", "4", "--output", str(b), "--trace", str(tmp_path / "tb.json")]) == 0
    assert len(json.loads((tmp_path / "ta.json").read_text())["fixes"]) == 2
    assert len(json.loads((tmp_path / "tb.json").read_text())["fixes"]) == 4
    assert json.loads(a.read_text())["seed"] == 5
    cfg.write_text(json.dumps({"bogus": 1}))
    assert main(["solve", "--config", str(cfg), "--problem", str(cubo_file), "--method", "brute",
                 "--output", str(a)]) == 2


def test_threads_must_be_positive(tmp_path, cubo_file):
    assert main(["solve", "--problem", str(cubo_file), "--method", "brute", "--threads", "0",
                 "--output", str(tmp_path / "s.json")]) == 2


def test_module_entry_point(tmp_path, cubo_file):
    out = tmp_path / "s.json"
    proc = subprocess.run([sys.executable, "-m", "pcbo_hybrid", "solve", "--problem", str(cubo_file),
                           "--method", "brute", "--output", str(out)], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert json.loads(out.read_text())["method"] == "brute"
