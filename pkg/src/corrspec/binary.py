"""Binary sources and binary encoder outputs.

With p_X1 = (a^2, 1 - a^2) and p_X2 = (b^2, 1 - b^2) every 2x2 tilde
matrix is fixed up to a single signed number lambda, the coefficient on
the outer product of the second singular pair.  This module gives three
interval bounds on lambda in terms of lambda_2(U, V): two outer bounds
(necessary conditions) and one inner bound (achievable by single-letter
product encoders).

The second outer bound is derived in the limit of many source letters;
it is reported unconditionally.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .errors import CapExceeded, DegenerateMarginal, NonIntegralCount, NotBinary
from .probcore import JointDist
from .spectral import TildeMatrix

CONTAIN_TOL = 1e-12
MAX_EXTREME_N = 12
CSV_HEADER = ("a", "b", "outer1_lo", "outer1_hi", "outer2_lo", "outer2_hi", "inner_lo", "inner_hi")


@dataclass(frozen=True)
class BinaryScenario:
    lambda2uv: float
    a: float
    b: float

    def __post_init__(self):
        if not 0.0 <= self.lambda2uv <= 1.0:
            raise ValueError(f"lambda2uv must lie in [0, 1], got {self.lambda2uv}")
        _check_open(self.a, "a")
        _check_open(self.b, "b")

    @classmethod
    def from_squares(cls, lambda2uv: float, a2: float, b2: float) -> "BinaryScenario":
        return cls(lambda2uv, math.sqrt(a2), math.sqrt(b2))


@dataclass(frozen=True)
class XiTriple:
    xi1: float
    xi2: float
    xi3: float


@dataclass(frozen=True)
class BoundSet:
    outer1: tuple[float, float]
    outer2: tuple[float, float]
    inner: tuple[float, float]

    def contains(self, lam: float, which: str = "outer2", tol: float = 0.0) -> bool:
        lo, hi = getattr(self, which)
        return lo - tol <= lam <= hi + tol


def _check_open(x: float, name: str) -> None:
    if not 0.0 < x < 1.0:
        raise DegenerateMarginal(f"{name} must lie strictly inside (0, 1), got {x}")


def xi_values(a: float, b: float) -> XiTriple:
    _check_open(a, "a")
    _check_open(b, "b")
    a2, b2 = a * a, b * b
    denom = a * b * math.sqrt((1 - a2) * (1 - b2))
    return XiTriple(
        min(a2, b2) * min(1 - a2, 1 - b2) / denom,
        min(1 - a2, b2) * min(a2, 1 - b2) / denom,
        min(a2, 1 - a2) * min(b2, 1 - b2) / denom,
    )


def _contained(inner, outer, tol=CONTAIN_TOL) -> bool:
    return outer[0] - tol <= inner[0] and inner[1] <= outer[1] + tol


def bounds(s: BinaryScenario) -> BoundSet:
    """Outer bound 1, outer bound 2 and the product-encoder inner bound for signed lambda."""
    xi = xi_values(s.a, s.b)
    lam = s.lambda2uv
    outer1 = (-min(xi.xi2, lam), min(xi.xi1, lam))
    outer2 = (-min(xi.xi2, lam * (1 + xi.xi2) / 2), min(xi.xi1, lam * (1 + xi.xi1) / 2))
    inner = (-lam * xi.xi3, lam * xi.xi3)
    if not (_contained(inner, outer2) and _contained(outer2, outer1)):
        raise ArithmeticError(f"bound nesting violated at {s}: {inner} {outer2} {outer1}")
    return BoundSet(outer1, outer2, inner)


def _second_vectors(a: float, b: float) -> tuple[np.ndarray, np.ndarray]:
    return (np.array([math.sqrt(1 - a * a), -a]), np.array([math.sqrt(1 - b * b), -b]))


def signed_lambda(p_x1x2: JointDist) -> float:
    """Signed coefficient of the second singular pair, measured against fixed reference vectors.

    The reference vectors are ``(sqrt(1-a^2), -a)`` and ``(sqrt(1-b^2), -b)``
    where ``a^2`` and ``b^2`` are the probabilities of the first symbol.
    """
    if p_x1x2.shape != (2, 2):
        raise NotBinary(f"expected a 2x2 joint, got shape {p_x1x2.shape}")
    px, py = p_x1x2.px, p_x1x2.py
    if np.any(px <= 1e-12) or np.any(py <= 1e-12):
        raise DegenerateMarginal("binary joint needs both marginals strictly positive")
    a, b = math.sqrt(px[0]), math.sqrt(py[0])
    t = p_x1x2.mass / np.sqrt(np.outer(px, py))
    mu, nu = _second_vectors(a, b)
    return float(mu @ t @ nu)


def parametrized_tilde(a: float, b: float, lam: float) -> TildeMatrix:
    """Tilde matrix with first-symbol masses a^2, b^2 and signed second coefficient ``lam``."""
    _check_open(a, "a")
    _check_open(b, "b")
    top_l = np.array([a, math.sqrt(1 - a * a)])
    top_r = np.array([b, math.sqrt(1 - b * b)])
    mu, nu = _second_vectors(a, b)
    mat = np.outer(top_l, top_r) + lam * np.outer(mu, nu)
    return TildeMatrix(mat, top_l**2, top_r**2)


def _grid_values(grid: int) -> np.ndarray:
    """Grid over squared marginals: a^2 = k/(grid+1), k = 1..grid."""
    if grid < 2:
        raise ValueError("grid resolution must be at least 2")
    return np.sqrt(np.arange(1, grid + 1) / (grid + 1))


def curve_rows(lambda2uv: float, grid: int = 99, full_grid: bool = False) -> Iterator[tuple[float, ...]]:
    values = _grid_values(grid)
    pairs = ((a, b) for a in values for b in values) if full_grid else ((a, a) for a in values)
    for a, b in pairs:
        bs = bounds(BinaryScenario(lambda2uv, float(a), float(b)))
        yield (float(a), float(b), *bs.outer1, *bs.outer2, *bs.inner)


def curve_data(lambda2uv: float, grid: int = 99, full_grid: bool = False) -> np.ndarray:
    """Bound table with columns ``CSV_HEADER``; diagonal a = b unless ``full_grid``."""
    return np.array(list(curve_rows(lambda2uv, grid, full_grid)), dtype=np.float64)


def _count(x2: float, n: int, name: str) -> int:
    k = x2 * 2**n
    r = round(k)
    if abs(k - r) > 1e-9:
        raise NonIntegralCount(f"2^n {name}^2 = {k} is not an integer")
    if not 0 < r < 2**n:
        raise DegenerateMarginal(f"2^n {name}^2 = {r} leaves an empty side")
    return int(r)


def extreme_point_max(a: float, b: float, n: int) -> float:
    """Largest inner product of two vertices of the box-and-sum polytopes, minus the constant part.

    A vertex of the ``a`` polytope has ``2^n a^2`` entries equal to
    ``1 / (2^(n/2) a sqrt(1-a^2))`` and zeros elsewhere, so the inner product
    of two vertices only depends on how many nonzero positions they share.
    """
    if n > MAX_EXTREME_N:
        raise CapExceeded(f"n={n} exceeds {MAX_EXTREME_N}")
    _check_open(a, "a")
    _check_open(b, "b")
    ka, kb = _count(a * a, n, "a"), _count(b * b, n, "b")
    height_a = 1.0 / (2 ** (n / 2) * a * math.sqrt(1 - a * a))
    height_b = 1.0 / (2 ** (n / 2) * b * math.sqrt(1 - b * b))
    dim = 2**n
    best = max(k * height_a * height_b for k in range(max(0, ka + kb - dim), min(ka, kb) + 1))
    return best - a * b / math.sqrt((1 - a * a) * (1 - b * b))


def signed_lambda_batch(mass: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized :func:`signed_lambda` over ``(..., 2, 2)`` joints.

    Returns ``(lam, a, b)``; entries whose marginals are degenerate get
    ``lam = 0`` and NaN for ``a`` and ``b``.
    """
    mass = np.asarray(mass, dtype=np.float64)
    tot = mass.sum(axis=(-2, -1), keepdims=True)
    mass = np.divide(mass, tot, out=np.zeros_like(mass), where=tot > 0)
    px, py = mass.sum(axis=-1), mass.sum(axis=-2)
    ok = (px.min(axis=-1) > 1e-12) & (py.min(axis=-1) > 1e-12)
    a2 = np.where(ok, px[..., 0], np.nan)
    b2 = np.where(ok, py[..., 0], np.nan)
    a, b = np.sqrt(a2), np.sqrt(b2)
    # mu^T P~ nu written out for the 2x2 case
    mu = np.stack([np.sqrt(1 - a2), -a], axis=-1)
    nu = np.stack([np.sqrt(1 - b2), -b], axis=-1)
    scale = np.sqrt(np.where(ok[..., None, None], px[..., :, None] * py[..., None, :], 1.0))
    t = mass / scale
    lam = np.einsum("...i,...ij,...j->...", mu, t, nu)
    return np.where(ok, lam, 0.0), a, b


def outer2_batch(a: np.ndarray, b: np.ndarray, lambda2uv: float) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized outer bound 2 interval ``(lo, hi)``; NaN inputs give ``(0, 0)``."""
    a2, b2 = a * a, b * b
    denom = a * b * np.sqrt((1 - a2) * (1 - b2))
    xi1 = np.minimum(a2, b2) * np.minimum(1 - a2, 1 - b2) / denom
    xi2 = np.minimum(1 - a2, b2) * np.minimum(a2, 1 - b2) / denom
    hi = np.minimum(xi1, lambda2uv * (1 + xi1) / 2)
    lo = -np.minimum(xi2, lambda2uv * (1 + xi2) / 2)
    return np.nan_to_num(lo), np.nan_to_num(hi)
