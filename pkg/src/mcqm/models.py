"""Concrete (H0, V) pairs.

Units are hbar = m = omega = 1 throughout.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, ProblemFormatError
from .hilbert import DEFAULT_HERMITICITY_TOL, HermitianOperator

__all__ = [
    "ModelSpec",
    "grid",
    "fd1d",
    "position_matrix",
    "oscillator_polynomial",
    "oscillator_quartic",
    "two_level",
    "random_problem",
    "dense_from_file",
    "dense_from_dict",
    "problem_to_dict",
    "build_model",
]


@dataclass(frozen=True)
class ModelSpec:
    """Named model plus its parameters, e.g. ``ModelSpec("oscillator", N=40, p=4)``."""

    kind: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        p = self.params
        if self.kind == "fd1d":
            if p.get("n", 2) < 2 or not p.get("b", 1.0) > p.get("a", 0.0):
                raise ValueError("fd1d needs n >= 2 and b > a")
        elif self.kind == "oscillator":
            if p.get("N", 8) < 4 or p.get("p", 4) not in (2, 3, 4):
                raise ValueError("oscillator needs N >= 4 and p in {2, 3, 4}")
        elif self.kind == "dense-file":
            if "path" not in p:
                raise ValueError("dense-file needs a path")
        elif self.kind not in ("two-level", "random"):
            raise ValueError(f"unknown model kind {self.kind!r}")


def grid(n: int, a: float, b: float) -> np.ndarray:
    """Interior points of [a, b] for a Dirichlet grid with spacing (b-a)/(n+1)."""
    dx = (b - a) / (n + 1)
    return a + dx * np.arange(1, n + 1)


def fd1d(n, a, b, v0, v1):
    """Central-difference ``-1/2 d^2/dx^2 + v0`` with Dirichlet walls at a and b.

    ``v0`` and ``v1`` are potential samples on :func:`grid` (arrays of length
    n) or callables evaluated there.  Returns ``(H0, V)`` with ``V = diag(v1)``.
    """
    if n < 2:
        raise ValueError("n must be at least 2")
    if not b > a:
        raise ValueError("need b > a")
    x = grid(n, a, b)
    v0, v1 = (np.asarray(v(x) if callable(v) else v, dtype=float) for v in (v0, v1))
    for name, v in (("v0", v0), ("v1", v1)):
        if v.shape != (n,):
            raise DimensionError(f"{name} must have {n} samples, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError(f"{name} has non-finite samples")
    dx = (b - a) / (n + 1)
    kinetic = (2 * np.eye(n) - np.eye(n, k=1) - np.eye(n, k=-1)) / (2 * dx ** 2)
    return HermitianOperator(kinetic + np.diag(v0)), HermitianOperator(np.diag(v1))


def position_matrix(N: int) -> np.ndarray:
    """``x = (a + a^dag) / sqrt 2`` truncated to the lowest N oscillator states."""
    off = np.sqrt(np.arange(1, N) / 2.0)
    return np.diag(off, 1) + np.diag(off, -1)


def oscillator_polynomial(N: int, p: int = 4):
    """``H0 = diag(k + 1/2)`` and ``V = x^p`` built by explicit matrix products.

    Truncation corrupts the last ~p rows of V; ground-state corrections of
    order k need roughly N >= 10 k.
    """
    if N < 4:
        raise ValueError("basis truncation N must be at least 4")
    if p not in (2, 3, 4):
        raise ValueError("power must be 2, 3 or 4")
    x = position_matrix(N)
    x2 = x @ x
    v = {2: x2, 3: x2 @ x, 4: x2 @ x2}[p]
    return HermitianOperator(np.diag(np.arange(N) + 0.5)), HermitianOperator(v)


def oscillator_quartic(N: int):
    if N < 8:
        raise ValueError("basis truncation N must be at least 8")
    return oscillator_polynomial(N, 4)


def two_level():
    """``H0 = diag(0, 2)``, ``V = sigma_x``; ground energy ``1 - sqrt(1 + lambda^2)``."""
    return (HermitianOperator(np.diag([0.0, 2.0])),
            HermitianOperator(np.array([[0.0, 1.0], [1.0, 0.0]])))


def random_problem(n: int, seed: int, min_gap: float = 0.5, v_scale: float = 1.0):
    """Random complex Hermitian pair from a seeded PCG64 generator.

    The spectrum of H0 has all nearest-neighbour gaps >= ``min_gap``; V is a
    GUE-like matrix rescaled to spectral norm ``v_scale``.
    """
    rng = np.random.Generator(np.random.PCG64(seed))
    gaps = min_gap + rng.exponential(min_gap, size=n - 1)
    evals = np.concatenate([[0.0], np.cumsum(gaps)]) + rng.uniform(-1.0, 1.0)
    z = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    q, r = np.linalg.qr(z)
    q = q * (np.diag(r) / np.abs(np.diag(r)))
    h0 = (q * evals) @ q.conj().T
    w = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    v = (w + w.conj().T) / 2
    v *= v_scale / np.linalg.norm(v, 2)
    return HermitianOperator(h0), HermitianOperator(v)


# ---------------------------------------------------------------------------
# problem JSON: {"dim": n, "h0": [[re, im], ...], "v": [[re, im], ...]}, row-major


def _parse_matrix(doc, key, n):
    try:
        pairs = np.asarray(doc[key], dtype=float)
    except KeyError:
        raise ProblemFormatError(f"missing key {key!r}") from None
    except (TypeError, ValueError) as exc:
        raise ProblemFormatError(f"{key!r} is not an array of [re, im] pairs: {exc}") from None
    if pairs.ndim != 2 or pairs.shape[1] != 2:
        raise ProblemFormatError(f"{key!r} must be a list of [re, im] pairs")
    if pairs.shape[0] != n * n:
        raise DimensionError(f"{key!r} has {pairs.shape[0]} entries, expected dim^2 = {n * n}")
    return (pairs[:, 0] + 1j * pairs[:, 1]).reshape(n, n)


def dense_from_dict(doc, hermiticity_tol=DEFAULT_HERMITICITY_TOL):
    if not isinstance(doc, dict):
        raise ProblemFormatError("problem document must be a JSON object")
    n = doc.get("dim")
    if not isinstance(n, int) or isinstance(n, bool) or n < 1:
        raise ProblemFormatError("'dim' must be a positive integer")
    h0 = _parse_matrix(doc, "h0", n)
    v = _parse_matrix(doc, "v", n)
    return (HermitianOperator(h0, hermiticity_tol), HermitianOperator(v, hermiticity_tol))


def dense_from_file(path, hermiticity_tol=DEFAULT_HERMITICITY_TOL):
    """Load ``(H0, V)`` from a problem JSON file."""
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ProblemFormatError(f"{path}: {exc}") from None
    return dense_from_dict(doc, hermiticity_tol)


def problem_to_dict(h0, v) -> dict:
    def pairs(m):
        m = np.asarray(getattr(m, "matrix", m), dtype=complex).reshape(-1)
        return [[float(z.real), float(z.imag)] for z in m]

    n = np.asarray(getattr(h0, "matrix", h0)).shape[0]
    return {"dim": n, "h0": pairs(h0), "v": pairs(v)}


def build_model(spec: ModelSpec):
    """Construct ``(H0, V)`` for a :class:`ModelSpec`."""
    p = spec.params
    if spec.kind == "dense-file":
        return dense_from_file(p["path"])
    if spec.kind == "two-level":
        return two_level()
    if spec.kind == "random":
        return random_problem(p["n"], p["seed"], p.get("min_gap", 0.5), p.get("v_scale", 1.0))
    if spec.kind == "oscillator":
        return oscillator_polynomial(p["N"], p.get("p", 4))
    if spec.kind == "fd1d":
        power = p.get("p", 4)
        return fd1d(p["n"], p["a"], p["b"], lambda x: 0.5 * x ** 2, lambda x: x ** power)
    raise ValueError(f"unknown model kind {spec.kind!r}")
