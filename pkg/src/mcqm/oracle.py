"""Independent ground truth for the perturbation engine.

Two routes that share no code with the recurrence:

* exact diagonalization of ``H0 + lambda V`` on a small symmetric lambda grid,
  followed by a polynomial fit of the tracked eigenvalue (and of the
  eigenvector in intermediate normalization);
* the sum-over-states formulas written in the eigenbasis of H0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateLevel, TrackingFailure
from .hilbert import EigenDatum, as_operator

__all__ = [
    "DEFAULT_LAMBDA0",
    "DEFAULT_TOL_ABS",
    "DEFAULT_TOL_REL",
    "default_grid",
    "track_level",
    "series_by_diagonalization",
    "vector_series_by_diagonalization",
    "rs_textbook",
    "OrderComparison",
    "OracleReport",
    "compare",
    "vector_angle",
]

DEFAULT_LAMBDA0 = 1e-2
DEFAULT_TOL_ABS = 1e-8
DEFAULT_TOL_REL = 1e-6
OVERLAP_MIN = 0.9


def default_grid(K: int, lambda0: float = DEFAULT_LAMBDA0) -> np.ndarray:
    """``0, +-lambda0, ..., +-2K lambda0``: 4K+1 centred points."""
    j = np.arange(1, 2 * K + 1)
    return np.concatenate([-lambda0 * j[::-1], [0.0], lambda0 * j])


def track_level(h0, v, ed: EigenDatum, grid):
    """Follow the level of ``ed`` to each lambda in ``grid``.

    Walks outward from lambda = 0 in both directions, matching the nearest
    eigenvalue and confirming with ``|<previous, new>| >= 0.9``.  Returns
    ``(energies, vectors)`` aligned with ``grid``; vectors are scaled to
    ``(psi0, psi(lambda)) = 1``.
    """
    h0m, vm = as_operator(h0).matrix, as_operator(v).matrix
    grid = np.asarray(grid, dtype=float)
    energies = np.empty(len(grid))
    vectors = np.empty((len(grid), h0m.shape[0]), dtype=complex)
    order = np.argsort(np.abs(grid), kind="stable")
    last = {1: (ed.energy, ed.vector), -1: (ed.energy, ed.vector)}
    for i in order:
        lam = grid[i]
        side = 1 if lam >= 0 else -1
        prev_e, prev_v = last[side]
        evals, evecs = np.linalg.eigh(h0m + lam * vm)
        j = int(np.argmin(np.abs(evals - prev_e)))
        overlap = abs(np.vdot(prev_v, evecs[:, j]))
        if overlap < OVERLAP_MIN:
            raise TrackingFailure(
                f"lambda={lam:.3g}: nearest eigenvalue {evals[j]:.6g} has overlap "
                f"{overlap:.3f} < {OVERLAP_MIN} with the tracked state")
        vec = evecs[:, j]
        norm = np.vdot(ed.vector, vec)
        if abs(norm) < 1e-8:
            raise TrackingFailure(f"lambda={lam:.3g}: tracked state orthogonal to psi0")
        energies[i] = evals[j]
        vectors[i] = vec / norm
        last[side] = (evals[j], vec)
        if lam == 0:
            last = {1: (evals[j], vec), -1: (evals[j], vec)}
    return energies, vectors


def _fit(grid, values, degree):
    """Least-squares polynomial coefficients 0..degree, one fit per column."""
    grid = np.asarray(grid, dtype=float)
    values = np.asarray(values)
    scale = np.max(np.abs(grid))
    t = grid / scale
    tail = (1,) * (values.ndim - 1)
    symmetric = np.allclose(np.sort(grid), np.sort(-grid), rtol=0, atol=1e-12 * scale)
    if symmetric and np.any(grid == 0):
        # even and odd parts decouple into two half-size fits in t^2
        pos = grid > 0
        tp = t[pos]
        plus = values[pos]
        minus = values[[int(np.argmin(np.abs(grid + g))) for g in grid[pos]]]
        zero = values[int(np.argmin(np.abs(grid)))]
        coeffs = np.zeros((degree + 1,) + values.shape[1:], dtype=values.dtype)
        a = np.vander(np.concatenate([[0.0], tp]) ** 2, degree // 2 + 1, increasing=True)
        even = np.concatenate([np.asarray(zero)[None], (plus + minus) / 2])
        coeffs[0::2] = np.linalg.lstsq(a, even, rcond=None)[0]
        n_odd = (degree + 1) // 2
        if n_odd:
            a = np.vander(tp ** 2, n_odd, increasing=True)
            odd = (plus - minus) / 2 / tp.reshape((-1,) + tail)
            coeffs[1::2] = np.linalg.lstsq(a, odd, rcond=None)[0]
    else:
        a = np.vander(t, degree + 1, increasing=True)
        coeffs = np.linalg.lstsq(a, values, rcond=None)[0]
    return coeffs / (scale ** np.arange(degree + 1)).reshape((-1,) + tail)


def _grid(K, grid, lambda0):
    grid = default_grid(K, lambda0) if grid is None else np.asarray(grid, dtype=float)
    if len(np.unique(grid)) < 2 * K + 1:
        raise ValueError(f"need at least {2 * K + 1} distinct lambda values for order {K}")
    return grid


def _difference_quotients(h0, v, ed: EigenDatum, grid):
    """Samples of ``(E - E0)/lambda`` and ``(psi - psi0)/lambda`` along the grid.

    Both come from exact identities of the diagonalized problem, with psi in
    intermediate normalization and R0 the reduced resolvent of H0 (from
    its own eigendecomposition here)::

        (E - E0) / lambda     = (psi0, V psi)
        (psi - psi0) / lambda = R0 ((E - E0)/lambda - V) psi

    Neither subtracts nearly equal numbers, so fitting them loses one power
    of lambda less to rounding than fitting E and psi directly.
    """
    h0m, vm = as_operator(h0).matrix, as_operator(v).matrix
    _, vectors = track_level(h0m, vm, ed, grid)
    evals, evecs = np.linalg.eigh(h0m)
    k0 = int(np.argmax(np.abs(evecs.conj().T @ ed.vector)))
    inv = np.zeros_like(evals)
    mask = np.arange(len(evals)) != k0
    inv[mask] = 1.0 / (evals[mask] - ed.energy)
    r0 = (evecs * inv) @ evecs.conj().T
    v_psi = vectors @ vm.T
    de = v_psi @ ed.vector.conj()
    dpsi = (de[:, None] * vectors - v_psi) @ r0.T
    return de, dpsi


def series_by_diagonalization(h0, v, ed: EigenDatum, K: int, grid=None,
                              lambda0: float = DEFAULT_LAMBDA0) -> np.ndarray:
    """``[E(1), ..., E(K)]`` from a degree-2K fit of the tracked eigenvalue.

    The fit is done on ``(E - E0)/lambda`` (degree 2K-1), which carries the
    same coefficients shifted by one.
    """
    grid = _grid(K, grid, lambda0)
    de, _ = _difference_quotients(h0, v, ed, grid)
    return _fit(grid, de, 2 * K - 1)[:K].real


def vector_series_by_diagonalization(h0, v, ed: EigenDatum, K: int, grid=None,
                                     lambda0: float = DEFAULT_LAMBDA0):
    """``(energies, vectors)``; vectors of shape (K, n) in intermediate normalization."""
    grid = _grid(K, grid, lambda0)
    de, dpsi = _difference_quotients(h0, v, ed, grid)
    return _fit(grid, de, 2 * K - 1)[:K].real, _fit(grid, dpsi, 2 * K - 1)[:K]


def rs_textbook(h0, v, ed: EigenDatum, K: int):
    """Sum-over-states corrections ``[(E(k), psi(k))]`` for k = 1..K <= 3.

    With ``d_m = E0 - E_m`` and ``V_ml`` in the H0 eigenbasis (state 0 being
    the selected level, all sums over m, l, n != 0)::

        E1 = V_00
        E2 = sum_m |V_m0|^2 / d_m
        E3 = sum_ml V_0m V_ml V_l0 / (d_m d_l) - V_00 sum_m |V_m0|^2 / d_m^2
        c1_m = V_m0 / d_m
        c2_m = sum_l V_ml V_l0 / (d_m d_l) - V_00 V_m0 / d_m^2
        c3_m = sum_ln V_ml V_ln V_n0 / (d_m d_l d_n)
               - V_00 sum_l V_ml V_l0 / (d_m d_l^2) - V_00 sum_l V_ml V_l0 / (d_m^2 d_l)
               + V_00^2 V_m0 / d_m^3 - E2 V_m0 / d_m^2
    """
    if K not in (1, 2, 3):
        raise ValueError("textbook formulas are provided for K = 1, 2, 3")
    if ed.kernel_dim != 1:
        raise DegenerateLevel("textbook formulas need a non-degenerate level", ed.kernel_dim)
    evals, evecs = np.linalg.eigh(as_operator(h0).matrix)
    k0 = int(np.argmax(np.abs(evecs.conj().T @ ed.vector)))
    others = np.array([m for m in range(len(evals)) if m != k0], dtype=int)
    if np.any(np.abs(evals[others] - ed.energy) <= ed.kernel_tol):
        raise DegenerateLevel("level is degenerate", kernel_dim=2)
    basis = np.concatenate([[k0], others])
    u = evecs[:, basis]
    # phase of state 0 must match psi0 so the components map back consistently
    u[:, 0] = ed.vector
    vmat = u.conj().T @ as_operator(v).matrix @ u
    d = ed.energy - evals[others]
    v00 = vmat[0, 0]
    vm0 = vmat[1:, 0]
    vml = vmat[1:, 1:]

    e1 = v00
    c1 = vm0 / d
    out = [(e1, u[:, 1:] @ c1)]
    if K >= 2:
        e2 = np.sum(np.abs(vm0) ** 2 / d)
        c2 = (vml @ (vm0 / d)) / d - v00 * vm0 / d ** 2
        out.append((e2, u[:, 1:] @ c2))
    if K >= 3:
        e3 = (np.einsum("m,ml,l->", vmat[0, 1:] / d, vml, vm0 / d)
              - v00 * np.sum(np.abs(vm0) ** 2 / d ** 2))
        c3 = (np.einsum("ml,l,ln,n,n->m", vml, 1 / d, vml, 1 / d, vm0) / d
              - v00 * (vml @ (vm0 / d ** 2)) / d
              - v00 * (vml @ (vm0 / d)) / d ** 2
              + v00 ** 2 * vm0 / d ** 3
              - e2 * vm0 / d ** 2)
        out.append((e3, u[:, 1:] @ c3))
    return out


def vector_angle(a, b, tol: float = 1e-300) -> float:
    """Angle between two complex vectors, phase-sensitive, stable near zero.

    Two (near) zero vectors are at angle 0; one zero and one not at pi/2.
    """
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na <= tol and nb <= tol:
        return 0.0
    if na <= tol or nb <= tol:
        return math.pi / 2
    ua, ub = a / na, b / nb
    return 2.0 * math.atan2(np.linalg.norm(ua - ub), np.linalg.norm(ua + ub))


@dataclass(frozen=True)
class OrderComparison:
    k: int
    oracle: complex
    engine: complex
    abs_err: float
    rel_err: float
    angle_err: float | None = None
    vector_err: float | None = None
    passed: bool = True


@dataclass(frozen=True)
class OracleReport:
    orders: list = field(default_factory=list)
    tol_abs: float = DEFAULT_TOL_ABS
    tol_rel: float = DEFAULT_TOL_REL

    @property
    def passed(self) -> bool:
        return all(o.passed for o in self.orders)

    @property
    def failed_orders(self):
        return [o.k for o in self.orders if not o.passed]

    def as_dict(self) -> dict:
        def cplx(z):
            return [float(np.real(z)), float(np.imag(z))]

        return {
            "passed": self.passed,
            "tol_abs": self.tol_abs,
            "tol_rel": self.tol_rel,
            "orders": [
                {"k": o.k, "oracle": cplx(o.oracle), "engine": cplx(o.engine),
                 "abs_err": o.abs_err, "rel_err": o.rel_err,
                 "angle_err": o.angle_err, "vector_err": o.vector_err, "passed": o.passed}
                for o in self.orders
            ],
        }


def compare(engine, oracle_energies, tol_abs: float = DEFAULT_TOL_ABS,
            tol_rel: float = DEFAULT_TOL_REL, oracle_vectors=None) -> OracleReport:
    """Per-order comparison of engine corrections against oracle values.

    ``engine`` is a PerturbationSeries (or anything with ``energies`` and
    ``vectors``).  An order passes when its error is within
    ``max(tol_abs, tol_rel * |oracle|)``; with vectors supplied, the norm of
    the difference must meet the same bound (scaled by the oracle vector
    norm) and the angle between them must be <= ``tol_rel`` unless both
    vectors are below ``tol_abs``.
    """
    e_eng = np.asarray(engine.energies)
    e_orc = np.asarray(oracle_energies)
    n = min(len(e_eng), len(e_orc))
    rows = []
    for i in range(n):
        err = float(abs(e_eng[i] - e_orc[i]))
        scale = float(abs(e_orc[i]))
        rel = err / scale if scale > 0 else (0.0 if err == 0 else math.inf)
        ok = err <= max(tol_abs, tol_rel * scale)
        angle = verr = None
        if oracle_vectors is not None:
            a, b = np.asarray(engine.vectors[i]), np.asarray(oracle_vectors[i])
            verr = float(np.linalg.norm(a - b))
            bscale = float(np.linalg.norm(b))
            small = max(np.linalg.norm(a), bscale) <= tol_abs
            angle = 0.0 if small else vector_angle(a, b)
            ok = ok and verr <= max(tol_abs, tol_rel * bscale) and angle <= tol_rel
        rows.append(OrderComparison(i + 1, complex(e_orc[i]), complex(e_eng[i]),
                                    err, rel, angle, verr, bool(ok)))
    return OracleReport(rows, tol_abs, tol_rel)
