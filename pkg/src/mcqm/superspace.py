"""Superspace of eigensystems and its differential graded Lie structure.

An element is a pair (vector part, scalar part) with the vector part
``psi_1 + theta psi_2 + c psi_3 + c theta psi_4`` in C[theta, c] (x) H and
the scalar part ``E_1 + c E_2`` in C[c].  Grassmann coefficients are kept in
the fixed order {1, theta, c, c theta}; every product is reduced to that
basis with an explicit sign, ``c theta`` meaning ``c * theta``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import DimensionError, GaugeDomainError, NotMaurerCartan

__all__ = [
    "GrassmannMonomial",
    "monomial_product",
    "SuperElement",
    "SYMPLECTIC_PAIRING",
    "DifferentialSpec",
    "GaugeElement",
    "bracket",
    "apply_differential",
    "mc_residual",
    "twist",
    "gauge_act",
    "group_product",
    "group_inverse",
    "cohomology_project",
    "left_derivative",
    "left_multiply",
    "random_element",
]


class GrassmannMonomial(enum.IntEnum):
    ONE = 0
    THETA = 1
    C = 2
    C_THETA = 3

    @property
    def degree(self) -> int:
        return (0, 1, 1, 2)[self]

    @property
    def parity(self) -> int:
        return self.degree % 2


_M = GrassmannMonomial

# (left, right) -> (sign, result); absent pairs multiply to zero.
_PRODUCTS = {
    (_M.ONE, _M.ONE): (1, _M.ONE),
    (_M.ONE, _M.THETA): (1, _M.THETA),
    (_M.ONE, _M.C): (1, _M.C),
    (_M.ONE, _M.C_THETA): (1, _M.C_THETA),
    (_M.THETA, _M.ONE): (1, _M.THETA),
    (_M.C, _M.ONE): (1, _M.C),
    (_M.C_THETA, _M.ONE): (1, _M.C_THETA),
    (_M.C, _M.THETA): (1, _M.C_THETA),
    (_M.THETA, _M.C): (-1, _M.C_THETA),
}

# slots of the scalar part, as monomials
_SCALAR_SLOTS = (_M.ONE, _M.C)

SYMPLECTIC_PAIRING = np.array([[0, 1], [-1, 0]])


def monomial_product(a, b):
    """Product ``a * b`` as ``(sign, monomial)``, or None when it vanishes."""
    return _PRODUCTS.get((GrassmannMonomial(a), GrassmannMonomial(b)))


def _gmul(left, right):
    """Grassmann product of two coefficient stacks of shape (4, ...).

    Coefficients commute with the generators, so only monomials are
    reordered; trailing shapes broadcast (vector times scalar and so on).
    """
    shape = np.broadcast_shapes(left.shape[1:], right.shape[1:])
    out = np.zeros((4,) + shape, dtype=complex)
    for (i, j), (sign, k) in _PRODUCTS.items():
        out[k] += sign * (left[i] * right[j])
    return out


def _lift_scalar(scal):
    full = np.zeros(4, dtype=complex)
    full[_M.ONE] = scal[0]
    full[_M.C] = scal[1]
    return full


def left_multiply(monomial, coeffs):
    """Multiply a (4, ...) coefficient stack from the left by a monomial."""
    unit = np.zeros(4, dtype=complex)
    unit[GrassmannMonomial(monomial)] = 1.0
    return _gmul(unit.reshape((4,) + (1,) * (coeffs.ndim - 1)), coeffs)


def left_derivative(generator, coeffs):
    """Left derivative with respect to ``theta`` or ``c``.

    For ``m = g * m'`` the derivative sends ``m`` to ``m'``; so
    ``d/dtheta (c theta) = -c`` and ``d/dc (c theta) = theta``.
    """
    g = GrassmannMonomial(generator)
    if g not in (_M.THETA, _M.C):
        raise ValueError("derivatives are defined for theta and c only")
    out = np.zeros_like(coeffs, dtype=complex)
    for (i, j), (sign, k) in _PRODUCTS.items():
        if i == g:
            out[j] += sign * coeffs[k]
    return out


@dataclass(frozen=True, eq=False)
class SuperElement:
    """Element of the superspace: ``vec`` is (4, n), ``scal`` is (2,)."""

    vec: np.ndarray
    scal: np.ndarray

    def __post_init__(self):
        vec = np.array(self.vec, dtype=complex)
        scal = np.array(self.scal, dtype=complex).reshape(-1)
        if vec.ndim != 2 or vec.shape[0] != 4 or vec.shape[1] < 1:
            raise DimensionError(f"vector part must have shape (4, n), got {vec.shape}")
        if scal.shape != (2,):
            raise DimensionError(f"scalar part must have shape (2,), got {scal.shape}")
        vec.flags.writeable = False
        scal.flags.writeable = False
        object.__setattr__(self, "vec", vec)
        object.__setattr__(self, "scal", scal)

    @classmethod
    def build(cls, n, vec_1=None, vec_theta=None, vec_c=None, vec_ctheta=None,
              scal_1=0.0, scal_c=0.0):
        vec = np.zeros((4, n), dtype=complex)
        for slot, value in enumerate((vec_1, vec_theta, vec_c, vec_ctheta)):
            if value is not None:
                value = np.asarray(value, dtype=complex)
                if value.shape != (n,):
                    raise DimensionError(f"expected a vector of length {n}, got {value.shape}")
                vec[slot] = value
        return cls(vec, np.array([scal_1, scal_c], dtype=complex))

    @classmethod
    def zeros(cls, n):
        return cls(np.zeros((4, n), dtype=complex), np.zeros(2, dtype=complex))

    @property
    def dim(self) -> int:
        return self.vec.shape[1]

    vec_1 = property(lambda self: self.vec[_M.ONE])
    vec_theta = property(lambda self: self.vec[_M.THETA])
    vec_c = property(lambda self: self.vec[_M.C])
    vec_ctheta = property(lambda self: self.vec[_M.C_THETA])
    scal_1 = property(lambda self: self.scal[0])
    scal_c = property(lambda self: self.scal[1])

    def degree_part(self, degree: int) -> "SuperElement":
        vec = np.zeros_like(self.vec)
        scal = np.zeros_like(self.scal)
        for m in GrassmannMonomial:
            if m.degree == degree:
                vec[m] = self.vec[m]
        for slot, m in enumerate(_SCALAR_SLOTS):
            if m.degree == degree:
                scal[slot] = self.scal[slot]
        return SuperElement(vec, scal)

    def parity_part(self, parity: int) -> "SuperElement":
        out = SuperElement.zeros(self.dim)
        for d in (0, 1, 2):
            if d % 2 == parity:
                out = out + self.degree_part(d)
        return out

    def parity(self):
        """0 or 1 for homogeneous elements, None for mixed ones (0 for zero)."""
        odd = self.parity_part(1).norm() > 0
        even = self.parity_part(0).norm() > 0
        if odd and even:
            return None
        return 1 if odd else 0

    def flat(self) -> np.ndarray:
        return np.concatenate([self.vec.reshape(-1), self.scal])

    def norm(self) -> float:
        return float(np.linalg.norm(self.flat()))

    def _check(self, other):
        if not isinstance(other, SuperElement):
            return NotImplemented
        if other.dim != self.dim:
            raise DimensionError(f"dimension mismatch: {self.dim} vs {other.dim}")
        return other

    def __add__(self, other):
        if self._check(other) is NotImplemented:
            return NotImplemented
        return SuperElement(self.vec + other.vec, self.scal + other.scal)

    def __sub__(self, other):
        if self._check(other) is NotImplemented:
            return NotImplemented
        return SuperElement(self.vec - other.vec, self.scal - other.scal)

    def __neg__(self):
        return SuperElement(-self.vec, -self.scal)

    def __mul__(self, factor):
        if not np.isscalar(factor):
            return NotImplemented
        return SuperElement(factor * self.vec, factor * self.scal)

    __rmul__ = __mul__

    def __repr__(self):
        return (f"SuperElement(n={self.dim}, |vec|={np.linalg.norm(self.vec):.3g}, "
                f"scal={self.scal.tolist()})")


def _matrix(h):
    return np.asarray(getattr(h, "matrix", h))


def _same_dim(*elements):
    dims = {x.dim for x in elements}
    if len(dims) != 1:
        raise DimensionError(f"dimension mismatch: {sorted(dims)}")


def bracket(a: SuperElement, b: SuperElement) -> SuperElement:
    """Graded bracket ``(a_vec * b_scal - a_scal * b_vec ; 0)``."""
    _same_dim(a, b)
    vec = (_gmul(a.vec, _lift_scalar(b.scal)[:, None])
           - _gmul(_lift_scalar(a.scal)[:, None], b.vec))
    return SuperElement(vec, np.zeros(2, dtype=complex))


@dataclass(frozen=True, eq=False)
class DifferentialSpec:
    """``Q = (cH, 0)`` or its twist ``Q + [(theta psi; c E), .]``."""

    hamiltonian: object
    shift: complex = 0.0
    twist_vector: np.ndarray | None = None

    @property
    def matrix(self):
        return _matrix(self.hamiltonian)

    @property
    def is_twisted(self) -> bool:
        return self.twist_vector is not None or self.shift != 0

    def mc_element(self) -> SuperElement:
        n = self.matrix.shape[0]
        return SuperElement.build(n, vec_theta=self.twist_vector, scal_c=self.shift)


def apply_differential(d: DifferentialSpec, x: SuperElement) -> SuperElement:
    h = d.matrix
    if h.shape != (x.dim, x.dim):
        raise DimensionError(f"operator of shape {h.shape} applied to dimension {x.dim}")
    out = SuperElement(left_multiply(_M.C, x.vec @ h.T), np.zeros(2, dtype=complex))
    if d.is_twisted:
        out = out + bracket(d.mc_element(), x)
    return out


def _require_degree_one(x: SuperElement):
    stray = x.degree_part(0).norm() + x.degree_part(2).norm()
    if stray > 0:
        raise ValueError("expected a degree-1 element (theta psi + c phi ; c E)")


def mc_residual(h, x: SuperElement) -> SuperElement:
    """``Q x + 1/2 [x, x]``; zero iff x is a Maurer-Cartan element."""
    _require_degree_one(x)
    return apply_differential(DifferentialSpec(h), x) + 0.5 * bracket(x, x)


def twist(h, mc: SuperElement, tol: float = 1e-10) -> DifferentialSpec:
    """Twist ``Q`` by a Maurer-Cartan element in normal form ``(theta psi; c E)``."""
    _require_degree_one(mc)
    if np.any(mc.vec_c != 0):
        raise NotMaurerCartan("twisting requires the normal form with zero c-component; "
                              "use gauge_act to remove it")
    hm = _matrix(h)
    if mc.dim != hm.shape[0]:
        raise DimensionError(f"element of dimension {mc.dim} vs operator {hm.shape}")
    res = mc_residual(hm, mc).norm()
    scale = max(1.0, (np.linalg.norm(hm, 2) + abs(mc.scal_c)) * np.linalg.norm(mc.vec_theta))
    if res > tol * scale:
        raise NotMaurerCartan(f"Maurer-Cartan residual {res:.3e} exceeds {tol * scale:.3e}")
    if mc.norm() == 0:
        return DifferentialSpec(h)
    return DifferentialSpec(h, shift=complex(mc.scal_c), twist_vector=np.array(mc.vec_theta))


# ---------------------------------------------------------------------------
# gauge group

_SERIES_CUTOFF = 1e-4


def expm1_ratio(z):
    """``(exp(-z) - 1) / z`` with the removable singularity at 0 filled in."""
    if abs(z) < _SERIES_CUTOFF:
        # -1 + z/2! - z^2/3! + ... , first 8 terms
        return sum((-1) ** (j + 1) * z ** j / math.factorial(j + 1) for j in range(8))
    return np.expm1(-z) / z


@dataclass(frozen=True, eq=False)
class GaugeElement:
    """Degree-0 element ``(phi ; E)`` viewed as a point of the gauge group."""

    vector: np.ndarray
    scalar: complex = 0.0

    def __post_init__(self):
        v = np.array(self.vector, dtype=complex).reshape(-1)
        v.flags.writeable = False
        object.__setattr__(self, "vector", v)
        object.__setattr__(self, "scalar", complex(self.scalar))

    @classmethod
    def identity(cls, n):
        return cls(np.zeros(n), 0.0)

    @property
    def dim(self):
        return self.vector.shape[0]

    def as_element(self) -> SuperElement:
        return SuperElement.build(self.dim, vec_1=self.vector, scal_1=self.scalar)

    @classmethod
    def from_element(cls, x: SuperElement):
        if x.degree_part(1).norm() + x.degree_part(2).norm() > 0:
            raise ValueError("gauge elements are degree-0")
        return cls(x.vec_1, x.scal_1)


def gauge_act(g: GaugeElement, mc: SuperElement, h) -> SuperElement:
    """Left action of the gauge group on ``(theta psi + c phi ; c E)``."""
    _require_degree_one(mc)
    hm = _matrix(h)
    if not (g.dim == mc.dim == hm.shape[0]):
        raise DimensionError(f"dimensions {g.dim}, {mc.dim}, {hm.shape}")
    e, energy = g.scalar, mc.scal_c
    decay = np.exp(-e)
    shifted = hm @ g.vector - energy * g.vector
    return SuperElement.build(
        mc.dim,
        vec_theta=decay * mc.vec_theta,
        vec_c=decay * mc.vec_c + expm1_ratio(e) * shifted,
        scal_c=energy,
    )


def _affine(g: GaugeElement) -> np.ndarray:
    # ad of (phi; E) on columns (psi; E'): [[-E 1, phi], [0, 0]]
    n = g.dim
    m = np.zeros((n + 1, n + 1), dtype=complex)
    m[:n, :n] = -g.scalar * np.eye(n)
    m[:n, n] = g.vector
    return m


def group_product(g1: GaugeElement, g2: GaugeElement) -> GaugeElement:
    """BCH product ``log(exp(g1) exp(g2))`` in the faithful adjoint representation."""
    if g1.dim != g2.dim:
        raise DimensionError(f"dimension mismatch: {g1.dim} vs {g2.dim}")
    total = g1.scalar + g2.scalar
    if abs(total.imag) >= math.pi:
        raise GaugeDomainError(
            f"exp(-(E1 + E2)) = exp({-total}) lies on or beyond the logarithm branch cut")
    prod = scipy.linalg.expm(_affine(g1)) @ scipy.linalg.expm(_affine(g2))
    log, err = scipy.linalg.logm(prod, disp=False)
    if not np.all(np.isfinite(log)) or err > 1e-8:
        raise GaugeDomainError(f"matrix logarithm failed (error estimate {err:.2e})")
    n = g1.dim
    return GaugeElement(log[:n, n], -np.trace(log[:n, :n]) / n)


def group_inverse(g: GaugeElement) -> GaugeElement:
    return GaugeElement(-g.vector, -g.scalar)


# ---------------------------------------------------------------------------


def cohomology_project(x: SuperElement, psi0) -> SuperElement:
    """Projector onto the cohomology ``K + c K`` of the twisted differential.

    Keeps the ``psi0`` components of the 1 and c coefficients; everything
    with a theta, and the whole scalar part, is exact or non-closed.
    """
    psi0 = np.asarray(psi0, dtype=complex)
    if psi0.shape != (x.dim,):
        raise DimensionError(f"psi0 of shape {psi0.shape} vs dimension {x.dim}")
    return SuperElement.build(
        x.dim,
        vec_1=psi0 * np.vdot(psi0, x.vec_1),
        vec_c=psi0 * np.vdot(psi0, x.vec_c),
    )


def random_element(rng, n, degree=None, parity=None, scale=1.0) -> SuperElement:
    """Random complex element, optionally restricted to one degree or parity."""
    vec = rng.standard_normal((4, n)) + 1j * rng.standard_normal((4, n))
    scal = rng.standard_normal(2) + 1j * rng.standard_normal(2)
    x = SuperElement(scale * vec, scale * scal)
    if degree is not None:
        x = x.degree_part(degree)
    if parity is not None:
        x = x.parity_part(parity)
    return x
