"""Finite-dimensional Hilbert space: eigenpairs, reduced resolvent, homotopy.

Inner products are conjugate-linear in the first argument, ``(a, b) = a^H b``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateLevel, DimensionError, HermiticityError
from .superspace import (
    DifferentialSpec,
    GrassmannMonomial,
    SuperElement,
    apply_differential,
    cohomology_project,
    left_derivative,
)

__all__ = [
    "HermitianOperator",
    "EigenDatum",
    "Homotopy",
    "as_operator",
    "select_eigenpair",
    "reduced_resolvent",
    "homotopy_apply",
    "twisted_differential",
    "homotopy_identity_residual",
]

DEFAULT_HERMITICITY_TOL = 1e-10
KERNEL_TOL_FACTOR = 1e-9


@dataclass(frozen=True, eq=False)
class HermitianOperator:
    """Dense self-adjoint matrix.

    Construction fails with :class:`HermiticityError` when
    ``max |M - M^H| > hermiticity_tol * max(1, max |M|)``; accepted input is
    stored symmetrized.
    """

    matrix: np.ndarray
    hermiticity_tol: float = DEFAULT_HERMITICITY_TOL

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] < 1:
            raise DimensionError(f"expected a square matrix, got shape {m.shape}")
        if not np.all(np.isfinite(m)):
            raise ValueError("matrix has non-finite entries")
        dev = np.abs(m - m.conj().T)
        worst = np.unravel_index(np.argmax(dev), dev.shape)
        limit = self.hermiticity_tol * max(1.0, float(np.max(np.abs(m))))
        if dev[worst] > limit:
            i, j = (int(k) for k in worst)
            raise HermiticityError(
                f"matrix is not Hermitian: |M[{i},{j}] - conj(M[{j},{i}])| = "
                f"{dev[worst]:.3e} > {limit:.3e}",
                location=(i, j), deviation=float(dev[worst]))
        m = 0.5 * (m + m.conj().T)
        m.flags.writeable = False
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def norm(self) -> float:
        return float(np.linalg.norm(self.matrix, 2))

    def __add__(self, other):
        return HermitianOperator(self.matrix + as_operator(other).matrix, self.hermiticity_tol)

    def scaled(self, factor: float) -> "HermitianOperator":
        return HermitianOperator(float(factor) * self.matrix, self.hermiticity_tol)


def as_operator(h) -> HermitianOperator:
    return h if isinstance(h, HermitianOperator) else HermitianOperator(h)


@dataclass(frozen=True, eq=False)
class EigenDatum:
    energy: float
    vector: np.ndarray
    kernel_dim: int
    kernel_tol: float
    index: int | None = None
    # full decomposition of H0, kept for the resolvent and the textbook oracle
    spectrum: np.ndarray | None = field(default=None, repr=False)
    basis: np.ndarray | None = field(default=None, repr=False)

    @property
    def dim(self) -> int:
        return self.vector.shape[0]


def _fix_phase(v: np.ndarray) -> np.ndarray:
    k = int(np.argmax(np.abs(v)))
    return v * (abs(v[k]) / v[k])


def select_eigenpair(h0, index: int | None = None, energy: float | None = None,
                     kernel_tol: float | None = None) -> EigenDatum:
    """Pick one eigenpair of ``h0`` by position in the ascending spectrum or
    as the eigenvalue nearest to ``energy``.

    The eigenvector phase is fixed so that its first largest-magnitude
    component is real and positive.  Raises :class:`DegenerateLevel` when
    more than one eigenvalue lies within ``kernel_tol`` of the selected one
    (default ``1e-9 * ||h0||_2``).
    """
    h0 = as_operator(h0)
    if (index is None) == (energy is None):
        raise ValueError("give exactly one of index or energy")
    evals, evecs = np.linalg.eigh(h0.matrix)
    if index is not None:
        if not -len(evals) <= index < len(evals):
            raise IndexError(f"eigenvalue index {index} out of range for dimension {len(evals)}")
        k = index % len(evals)
    else:
        k = int(np.argmin(np.abs(evals - energy)))
    if kernel_tol is None:
        kernel_tol = KERNEL_TOL_FACTOR * float(np.max(np.abs(evals)))
    kernel_dim = int(np.count_nonzero(np.abs(evals - evals[k]) <= kernel_tol))
    if kernel_dim > 1:
        raise DegenerateLevel(
            f"eigenvalue {evals[k]:.12g} has multiplicity {kernel_dim} "
            f"(kernel_tol={kernel_tol:.3e}); only non-degenerate levels are supported",
            kernel_dim=kernel_dim)
    vec = _fix_phase(evecs[:, k])
    vec = vec / np.linalg.norm(vec)
    evals.flags.writeable = False
    evecs.flags.writeable = False
    vec.flags.writeable = False
    return EigenDatum(float(evals[k]), vec, kernel_dim, kernel_tol, k, evals, evecs)


@dataclass(frozen=True, eq=False)
class Homotopy:
    """Reduced resolvent ``G0`` and the functional ``Y0 = (psi0, .)``."""

    resolvent: np.ndarray
    functional: np.ndarray
    source: EigenDatum

    @property
    def dim(self) -> int:
        return self.resolvent.shape[0]


def reduced_resolvent(h0, ed: EigenDatum) -> Homotopy:
    """``G0 = sum_{m != 0} |m><m| / (E_m - E0)``, zero on the kernel."""
    if ed.kernel_dim != 1:
        raise DegenerateLevel(f"kernel dimension {ed.kernel_dim}", kernel_dim=ed.kernel_dim)
    if ed.spectrum is not None and ed.basis is not None:
        evals, evecs, k = ed.spectrum, ed.basis, ed.index
    else:
        evals, evecs = np.linalg.eigh(as_operator(h0).matrix)
        k = int(np.argmin(np.abs(evals - ed.energy)))
    inv = np.zeros_like(evals)
    mask = np.arange(len(evals)) != k
    inv[mask] = 1.0 / (evals[mask] - ed.energy)
    g = (evecs * inv) @ evecs.conj().T
    g = 0.5 * (g + g.conj().T)
    y = ed.vector.conj().copy()
    g.flags.writeable = False
    y.flags.writeable = False
    return Homotopy(g, y, ed)


def homotopy_apply(h: Homotopy, x: SuperElement) -> SuperElement:
    """``h = (d/dc G, 0 ; d/dtheta Y, 0)`` acting on an element."""
    if x.dim != h.dim:
        raise DimensionError(f"homotopy of dimension {h.dim} applied to dimension {x.dim}")
    dc = left_derivative(GrassmannMonomial.C, x.vec)
    dtheta = left_derivative(GrassmannMonomial.THETA, x.vec)
    vec = dc @ h.resolvent.T
    y = dtheta @ h.functional
    # Y lands in C[c]: slots 1 and c
    scal = np.array([y[GrassmannMonomial.ONE], y[GrassmannMonomial.C]])
    return SuperElement(vec, scal)


def twisted_differential(h0, ed: EigenDatum) -> DifferentialSpec:
    return DifferentialSpec(as_operator(h0), shift=ed.energy, twist_vector=ed.vector)


def homotopy_identity_residual(h0, ed: EigenDatum, x: SuperElement,
                               homotopy: Homotopy | None = None) -> float:
    """``||(Q~ h + h Q~) x - (x - Pi x)||`` for the twist at ``ed``."""
    if homotopy is None:
        homotopy = reduced_resolvent(h0, ed)
    qt = twisted_differential(h0, ed)
    anti = (apply_differential(qt, homotopy_apply(homotopy, x))
            + homotopy_apply(homotopy, apply_differential(qt, x)))
    return (anti - (x - cohomology_project(x, ed.vector))).norm()
