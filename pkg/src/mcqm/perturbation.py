"""Rayleigh-Schroedinger corrections from the twisted Maurer-Cartan equation.

With ``Psi(k) = (theta psi(k) ; c E(k))`` the order-k correction solves

    Psi(k) = -h0 Q1 Psi(k-1) - 1/2 h0 sum_{m=1}^{k-1} [Psi(m), Psi(k-m)]

where ``Q1 = (cV, 0)`` and ``h0`` is the homotopy of the twisted unperturbed
differential.  Corrections come out in intermediate normalization,
``(psi(0), psi(k)) = 0`` for k >= 1.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, ObstructionFailure
from .hilbert import (
    EigenDatum,
    HermitianOperator,
    Homotopy,
    as_operator,
    homotopy_apply,
    reduced_resolvent,
    select_eigenpair,
    twisted_differential,
)
from .superspace import (
    DifferentialSpec,
    SuperElement,
    apply_differential,
    bracket,
    cohomology_project,
)

log = logging.getLogger(__name__)

__all__ = [
    "PerturbationProblem",
    "PerturbationSeries",
    "build_problem",
    "base_element",
    "recurrence_rhs",
    "recurrence_step",
    "corrections",
    "closed_form_order",
    "obstruction_norm",
    "evaluate_series",
    "truncated_element",
    "OBSTRUCTION_TOL",
    "OBSTRUCTION_EXPECTED",
]

OBSTRUCTION_TOL = 1e-8
OBSTRUCTION_EXPECTED = 1e-10


@dataclass(frozen=True, eq=False)
class PerturbationProblem:
    h0: HermitianOperator
    v: HermitianOperator
    eigendatum: EigenDatum
    homotopy: Homotopy
    q1: DifferentialSpec

    @property
    def dim(self) -> int:
        return self.h0.dim

    @property
    def q_tilde0(self) -> DifferentialSpec:
        return twisted_differential(self.h0, self.eigendatum)


def build_problem(h0, v, index=None, energy=None, kernel_tol=None) -> PerturbationProblem:
    """Select an unperturbed level (ground state by default) and set up h0, Q1."""
    h0, v = as_operator(h0), as_operator(v)
    if h0.dim != v.dim:
        raise DimensionError(f"H0 is {h0.dim}x{h0.dim} but V is {v.dim}x{v.dim}")
    if index is None and energy is None:
        index = 0
    ed = select_eigenpair(h0, index=index, energy=energy, kernel_tol=kernel_tol)
    return PerturbationProblem(h0, v, ed, reduced_resolvent(h0, ed), DifferentialSpec(v))


def base_element(p: PerturbationProblem) -> SuperElement:
    """``Psi(0) = (theta psi0 ; c E0)``."""
    ed = p.eigendatum
    return SuperElement.build(p.dim, vec_theta=ed.vector, scal_c=ed.energy)


@dataclass(frozen=True, eq=False)
class PerturbationSeries:
    base: EigenDatum
    elements: tuple  # Psi(1), ..., Psi(K) as SuperElements
    normalization: str = field(default="intermediate")

    @property
    def order(self) -> int:
        return len(self.elements)

    @property
    def orders(self):
        """``[(E(k), psi(k)) for k = 1..K]``."""
        return [(complex(x.scal_c), np.array(x.vec_theta)) for x in self.elements]

    @property
    def energies(self) -> np.ndarray:
        return np.array([x.scal_c for x in self.elements])

    @property
    def vectors(self) -> np.ndarray:
        return np.array([x.vec_theta for x in self.elements]).reshape(self.order, self.base.dim)


def recurrence_rhs(p: PerturbationProblem, history, psi0: SuperElement):
    """Split right-hand side ``(-Q1 Psi(k-1), -1/2 sum [Psi(m), Psi(k-m)])``."""
    k = len(history) + 1
    previous = history[-1] if history else psi0
    linear = -apply_differential(p.q1, previous)
    quadratic = SuperElement.zeros(p.dim)
    for m in range(1, k):
        quadratic = quadratic + bracket(history[m - 1], history[k - m - 1])
    return linear, -0.5 * quadratic


def obstruction_norm(p: PerturbationProblem, rhs: SuperElement) -> float:
    return cohomology_project(rhs, p.eigendatum.vector).norm()


def recurrence_step(p: PerturbationProblem, history, psi0: SuperElement,
                    bracket_energy: bool = True) -> SuperElement:
    """Next correction ``Psi(k)`` from ``Psi(1..k-1)``.

    ``bracket_energy=False`` drops the scalar output of the bracket term;
    it is a diagnostic switch and never changes the result.
    """
    k = len(history) + 1
    linear, quadratic = recurrence_rhs(p, history, psi0)
    rhs = linear + quadratic
    obs = obstruction_norm(p, rhs)
    scale = rhs.norm()
    log.debug("order %d obstruction %.3e (expected <= %.1e, fail > %.1e) of |rhs| = %.3e",
              k, obs, OBSTRUCTION_EXPECTED, OBSTRUCTION_TOL, scale)
    if obs > OBSTRUCTION_TOL * scale:
        raise ObstructionFailure(
            f"order {k}: obstruction {obs:.3e} exceeds {OBSTRUCTION_TOL:.0e} * |rhs| = "
            f"{OBSTRUCTION_TOL * scale:.3e}", order=k, norm=obs)
    out = homotopy_apply(p.homotopy, linear)
    from_bracket = homotopy_apply(p.homotopy, quadratic)
    if not bracket_energy:
        from_bracket = SuperElement(from_bracket.vec, np.zeros(2))
    return out + from_bracket


def corrections(p: PerturbationProblem, K: int, bracket_energy: bool = True) -> PerturbationSeries:
    if K < 1:
        raise ValueError("order K must be at least 1")
    psi0 = base_element(p)
    history = []
    for _ in range(K):
        history.append(recurrence_step(p, history, psi0, bracket_energy=bracket_energy))
    return PerturbationSeries(p.eigendatum, tuple(history))


def closed_form_order(p: PerturbationProblem, k: int):
    """Explicit ``(E(k), psi(k))`` for k = 1, 2, 3 in terms of G0 and V."""
    if k not in (1, 2, 3):
        raise ValueError("closed forms exist for k = 1, 2, 3 only")
    g = p.homotopy.resolvent
    v = p.v.matrix
    psi0 = p.eigendatum.vector

    def ev(vec):
        return np.vdot(psi0, vec)

    v0 = v @ psi0
    gv0 = g @ v0
    e1 = ev(v0)
    if k == 1:
        return e1, -gv0
    gvgv0 = g @ (v @ gv0)
    if k == 2:
        return -ev(v @ gv0), gvgv0 - e1 * (g @ gv0)
    gg_v0 = g @ gv0
    psi3 = (-(g @ (v @ gvgv0))
            + e1 * (g @ (v @ gg_v0))
            + ev(v @ gv0) * gg_v0
            + e1 * (g @ gvgv0)
            - e1 ** 2 * (g @ gg_v0))
    e3 = ev(v @ gvgv0) - e1 * ev(v @ gg_v0)
    return e3, psi3


def evaluate_series(s: PerturbationSeries, lam: complex, K: int | None = None):
    """Truncated sums ``E0 + sum lam^k E(k)`` and ``psi0 + sum lam^k psi(k)``."""
    if K is None:
        K = s.order
    if K > s.order:
        raise ValueError(f"requested {K} orders, series has {s.order}")
    if K < 0:
        raise ValueError("K must be non-negative")
    powers = lam ** np.arange(1, K + 1)
    energy = s.base.energy + np.sum(powers * s.energies[:K])
    vector = s.base.vector + powers @ s.vectors[:K] if K else np.array(s.base.vector)
    return energy, vector


def truncated_element(s: PerturbationSeries, lam: complex, K: int | None = None) -> SuperElement:
    """``Psi(0) + sum_{k<=K} lam^k Psi(k)`` as a superspace element."""
    energy, vector = evaluate_series(s, lam, K)
    return SuperElement.build(s.base.dim, vec_theta=vector, scal_c=energy)
