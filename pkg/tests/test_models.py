import json

import numpy as np
import pytest

from mcqm.errors import DimensionError, HermiticityError, ProblemFormatError
from mcqm.hilbert import HermitianOperator
from mcqm.models import (
    ModelSpec,
    build_model,
    dense_from_dict,
    dense_from_file,
    fd1d,
    grid,
    oscillator_polynomial,
    oscillator_quartic,
    problem_to_dict,
    random_problem,
    two_level,
)
from mcqm.perturbation import build_problem, corrections


def test_fd1d_stencil():
    h0, v = fd1d(3, 0.0, 4.0, np.zeros(3), np.ones(3))
    expected = [[1, -0.5, 0], [-0.5, 1, -0.5], [0, -0.5, 1]]
    assert np.allclose(h0.matrix, expected)
    assert np.array_equal(v.matrix, np.eye(3))


def test_fd1d_identity_perturbation_shifts_spectrum():
    h0, v = fd1d(12, -3.0, 3.0, lambda x: 0.5 * x ** 2, np.ones(12))
    for index in (0, 3, 11):
        s = corrections(build_problem(h0, v, index=index), 4)
        assert s.energies[0] == pytest.approx(1.0, abs=1e-12)
        assert np.all(np.abs(s.energies[1:]) <= 1e-12)
        assert np.all(np.abs(s.vectors) <= 1e-12)


def test_fd1d_rejections():
    with pytest.raises(ValueError):
        fd1d(3, 0.0, 1.0, np.array([0.0, np.inf, 0.0]), np.zeros(3))
    with pytest.raises(DimensionError):
        fd1d(3, 0.0, 1.0, np.zeros(4), np.zeros(3))
    with pytest.raises(ValueError):
        fd1d(1, 0.0, 1.0, np.zeros(1), np.zeros(1))
    with pytest.raises(ValueError):
        fd1d(3, 1.0, 1.0, np.zeros(3), np.zeros(3))


def test_fd1d_harmonic_ground_state():
    h0, _ = fd1d(400, -10.0, 10.0, lambda x: 0.5 * x ** 2, np.zeros(400))
    assert np.linalg.eigvalsh(h0.matrix)[0] == pytest.approx(0.5, abs=1e-4)


def test_fd1d_second_order_convergence():
    # free well on [0, pi]: lowest exact eigenvalue 1/2
    ns = np.array([20, 40, 80, 160])
    errs = []
    for n in ns:
        h0, _ = fd1d(int(n), 0.0, np.pi, np.zeros(n), np.zeros(n))
        errs.append(abs(np.linalg.eigvalsh(h0.matrix)[0] - 0.5))
    dx = np.pi / (ns + 1)
    slope = np.polyfit(np.log(dx), np.log(errs), 1)[0]
    assert 1.8 <= slope <= 2.2


def test_grid_interior():
    x = grid(4, 0.0, 5.0)
    assert np.allclose(x, [1, 2, 3, 4])


def test_oscillator_matrix_elements():
    h0, v = oscillator_quartic(10)
    assert np.allclose(np.diag(h0.matrix), np.arange(10) + 0.5)
    assert v.matrix[0, 0] == pytest.approx(0.75, abs=1e-15)
    assert v.matrix[0, 2] == np.conj(v.matrix[2, 0])
    i = np.arange(10)
    outside_band = np.abs(np.subtract.outer(i, i)) > 4
    assert np.all(v.matrix[outside_band] == 0)
    _, x2 = oscillator_polynomial(10, 2)
    assert x2.matrix[0, 0] == pytest.approx(0.5, abs=1e-15)


def test_oscillator_rejections():
    with pytest.raises(ValueError):
        oscillator_quartic(7)
    with pytest.raises(ValueError):
        oscillator_polynomial(10, 5)


def test_two_level():
    h0, v = two_level()
    assert np.array_equal(h0.matrix, np.diag([0, 2]))
    assert np.array_equal(v.matrix, [[0, 1], [1, 0]])


def test_random_problem_properties():
    h0, v = random_problem(7, 99, min_gap=0.5, v_scale=2.0)
    w = np.linalg.eigvalsh(h0.matrix)
    assert np.min(np.diff(w)) >= 0.5 - 1e-12
    assert np.linalg.norm(v.matrix, 2) == pytest.approx(2.0)
    h0b, vb = random_problem(7, 99, min_gap=0.5, v_scale=2.0)
    assert np.array_equal(h0.matrix, h0b.matrix) and np.array_equal(v.matrix, vb.matrix)


def test_problem_file_roundtrip(tmp_path):
    h0, v = random_problem(3, 5)
    path = tmp_path / "p.json"
    path.write_text(json.dumps(problem_to_dict(h0, v)))
    a, b = dense_from_file(path)
    assert np.array_equal(a.matrix, h0.matrix) and np.array_equal(b.matrix, v.matrix)


def test_problem_file_rejections(tmp_path):
    doc = problem_to_dict(*two_level())
    bad = dict(doc, h0=[[0, 0], [1e-3, 0], [0, 0], [2, 0]])
    with pytest.raises(HermiticityError) as info:
        dense_from_dict(bad)
    assert info.value.location in ((0, 1), (1, 0))
    with pytest.raises(DimensionError):
        dense_from_dict(dict(doc, v=[[0, 0]] * 9))
    with pytest.raises(ProblemFormatError):
        dense_from_dict(dict(doc, dim="2"))
    with pytest.raises(ProblemFormatError):
        dense_from_dict({"dim": 2, "h0": doc["h0"]})
    path = tmp_path / "broken.json"
    path.write_text("{not json")
    with pytest.raises(ProblemFormatError):
        dense_from_file(path)


def test_model_spec_validation():
    with pytest.raises(ValueError):
        ModelSpec("fd1d", {"n": 1})
    with pytest.raises(ValueError):
        ModelSpec("oscillator", {"N": 10, "p": 6})
    with pytest.raises(ValueError):
        ModelSpec("nope")
    h0, v = build_model(ModelSpec("oscillator", {"N": 12, "p": 3}))
    assert isinstance(h0, HermitianOperator) and v.dim == 12
    h0, v = build_model(ModelSpec("fd1d", {"n": 30, "a": -5.0, "b": 5.0, "p": 2}))
    assert h0.dim == 30
