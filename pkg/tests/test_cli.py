import csv
import io
import json
import subprocess
import sys

import numpy as np
import pytest

from mcqm import cli
from mcqm.errors import ObstructionFailure
from mcqm.models import problem_to_dict, random_problem, two_level
from mcqm.perturbation import build_problem, corrections


def _write(tmp_path, name, h0, v):
    path = tmp_path / name
    path.write_text(json.dumps(problem_to_dict(h0, v)))
    return str(path)


def run(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def _error_record(err):
    lines = err.strip().splitlines()
    assert len(lines) == 1
    return json.loads(lines[0])


def test_perturb_two_level_file(tmp_path, capsys):
    path = _write(tmp_path, "two.json", *two_level())
    code, out, _ = run(capsys, "perturb", "--problem", path, "--order", "4", "--format", "json")
    assert code == 0
    doc = json.loads(out)
    energies = [complex(*row["energy"]) for row in doc["orders"]]
    assert np.allclose(energies, [0, 0, -0.5, 0, 0.125], atol=1e-14)
    assert [row["k"] for row in doc["orders"]] == [0, 1, 2, 3, 4]
    assert doc["normalization"] == "intermediate"


def test_perturb_oscillator(capsys):
    code, out, _ = run(capsys, "perturb", "--model", "oscillator-quartic", "--n", "200",
                       "--order", "1", "--format", "json")
    assert code == 0
    e1 = json.loads(out)["orders"][1]["energy"][0]
    assert e1 == pytest.approx(0.75, abs=1e-6)


def test_perturb_degenerate_exit_code(tmp_path, capsys):
    path = _write(tmp_path, "deg.json", np.eye(2), np.diag([1.0, 2.0]))
    code, out, err = run(capsys, "perturb", "--problem", path)
    assert code == 2 and out == ""
    rec = _error_record(err)
    assert rec["error"] == "DegenerateLevel" and rec["exit_code"] == 2


def test_obstruction_exit_code(monkeypatch, capsys):
    def boom(p, K, **kw):
        raise ObstructionFailure("forced", order=1, norm=1.0)

    monkeypatch.setattr(cli, "corrections", boom)
    code, _, err = run(capsys, "perturb", "--model", "two-level")
    assert code == 3 and _error_record(err)["error"] == "ObstructionFailure"


def test_io_and_usage_errors(tmp_path, capsys):
    cases = [
        ("perturb", "--problem", str(tmp_path / "missing.json")),
        ("perturb", "--model", "random", "--n", "4"),
        ("perturb", "--model", "two-level", "--order", "0"),
        ("perturb", "--model", "two-level", "--select", "index:7"),
        ("perturb", "--model", "two-level", "--select", "bogus"),
        ("perturb",),
        ("frobnicate",),
        ("perturb", "--model", "two-level", "--format", "xml"),
    ]
    for argv in cases:
        code, _, err = run(capsys, *argv)
        assert code == 1, argv
        assert _error_record(err)["exit_code"] == 1


def test_select_by_energy(capsys):
    code, out, _ = run(capsys, "perturb", "--model", "two-level", "--select", "energy:1.9",
                       "--order", "2", "--format", "json")
    doc = json.loads(out)
    assert code == 0 and doc["base_index"] == 1
    assert doc["orders"][2]["energy"][0] == pytest.approx(0.5)


def test_json_roundtrip_full_precision(tmp_path, capsys):
    out_path = tmp_path / "series.json"
    code, _, _ = run(capsys, "perturb", "--model", "random", "--n", "6", "--seed", "9",
                     "--order", "5", "--format", "json", "--out", str(out_path))
    assert code == 0
    loaded = cli.load_series(json.loads(out_path.read_text()))
    p = build_problem(*random_problem(6, 9))
    series = corrections(p, 5)
    assert loaded[0][0] == p.eigendatum.energy
    for (e, psi), (e_ref, psi_ref) in zip(loaded[1:], series.orders):
        assert e == e_ref
        assert np.array_equal(psi, psi_ref)


def test_csv_output(capsys):
    code, out, _ = run(capsys, "perturb", "--model", "random", "--n", "5", "--seed", "1",
                       "--order", "3", "--format", "csv")
    rows = list(csv.DictReader(io.StringIO(out)))
    assert code == 0 and len(rows) == 4
    series = corrections(build_problem(*random_problem(5, 1)), 3)
    assert float(rows[2]["energy_re"]) == series.energies[1].real
    assert "," not in rows[0]["energy_re"]


def test_determinism(tmp_path, capsys):
    outs = []
    for i in range(2):
        path = tmp_path / f"o{i}.txt"
        for fmt in ("json", "csv", "text"):
            run(capsys, "oracle", "--model", "random", "--n", "6", "--seed", "5", "--order", "3",
                "--format", fmt, "--out", f"{path}.{fmt}")
        outs.append([open(f"{path}.{fmt}", "rb").read() for fmt in ("json", "csv", "text")])
    assert outs[0] == outs[1]


def test_verify_seed_42(capsys):
    code, out, _ = run(capsys, "verify", "--model", "random", "--n", "6", "--seed", "42",
                       "--format", "json")
    doc = json.loads(out)
    assert code == 0 and doc["passed"]
    assert max(r["max_residual"] for r in doc["invariants"]) <= 1e-11


def test_verify_default_model_and_missing_seed(capsys):
    assert run(capsys, "verify", "--seed", "42")[0] == 0
    assert run(capsys, "verify", "--model", "two-level")[0] == 1


def test_verify_one_dimensional(capsys):
    code, out, _ = run(capsys, "verify", "--model", "random", "--n", "1", "--seed", "3")
    assert code == 0
    code, out, _ = run(capsys, "perturb", "--model", "random", "--n", "1", "--seed", "3",
                       "--order", "3", "--format", "json")
    orders = json.loads(out)["orders"]
    assert orders[1]["energy"][0] != 0
    assert all(row["energy"] == [0.0, 0.0] for row in orders[2:])
    assert all(row["psi_norm"] == 0 for row in orders[1:])


def test_verify_rejects_non_hermitian(tmp_path, capsys):
    h0 = np.diag([0.0, 1.0, 3.0]).astype(complex)
    h0[1, 2] = 1e-3
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(problem_to_dict(h0, np.eye(3))))
    code, _, err = run(capsys, "verify", "--problem", str(path), "--seed", "1")
    rec = _error_record(err)
    assert code == 1 and rec["error"] == "HermiticityError"
    assert sorted(rec["location"]) == [1, 2]


def test_diagrams_order_three(capsys):
    code, out, _ = run(capsys, "diagrams", "--order", "3", "--format", "json")
    doc = json.loads(out)
    assert code == 0 and doc["count"] == 4 and doc["expansion_terms"] == 6
    assert sum(abs(d["coefficient"]) == 2 for d in doc["diagrams"]) == 2


def test_diagrams_with_problem(tmp_path, capsys):
    path = _write(tmp_path, "two.json", *two_level())
    code, out, _ = run(capsys, "diagrams", "--order", "2", "--problem", path, "--format", "json")
    doc = json.loads(out)
    assert code == 0 and doc["sum_residual"] <= 1e-11
    assert doc["energy_filter_residual"] <= 1e-11


def test_diagrams_range_and_dot(capsys):
    code, _, err = run(capsys, "diagrams", "--order", "9")
    assert code == 1 and "1..8" in _error_record(err)["message"]
    code, out, _ = run(capsys, "diagrams", "--order", "2", "--render", "dot")
    assert code == 0 and out.count("digraph diagram") == 2
    code, out, _ = run(capsys, "diagrams", "--order", "2", "--format", "csv")
    assert out.splitlines()[0] == "order,coefficient,energy_contributing,diagram"


def test_oracle_random_seed_7(capsys):
    code, out, _ = run(capsys, "oracle", "--model", "random", "--n", "8", "--seed", "7",
                       "--order", "4", "--format", "json")
    doc = json.loads(out)
    assert code == 0 and doc["passed"]
    assert doc["diagonalization"]["passed"] and doc["textbook"]["passed"]


def test_oracle_near_degenerate(tmp_path, capsys):
    v = np.array([[0, 1, 0], [1, 0, 0], [0, 0, 0]], dtype=float)
    path = _write(tmp_path, "near.json", np.diag([0.0, 1e-6, 5.0]), v)
    code, _, err = run(capsys, "oracle", "--problem", path)
    assert code == 4 and _error_record(err)["error"] == "TrackingFailure"


def test_oracle_zero_perturbation(tmp_path, capsys):
    h0, _ = random_problem(4, 2)
    path = _write(tmp_path, "zero.json", h0, np.zeros((4, 4)))
    code, out, _ = run(capsys, "oracle", "--problem", path, "--format", "json")
    doc = json.loads(out)
    assert code == 0
    assert all(o["engine"] == [0.0, 0.0] for o in doc["diagonalization"]["orders"])


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "mcqm", "diagrams", "--order", "1"],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0 and "R C L" in proc.stdout
