"""Markov chains, the spectral data-processing inequality and n-letter necessary conditions.

Along X -> Y -> Z the tilde matrices multiply, and every correlation
value of (X, Z) is at most the matching value of (X, Y) times lambda_2 of
(Y, Z).  Applied to X1 -> U^n -> V^n -> X2 this gives single-letter
bounds that any encoder pair, for any n, must respect: every
lambda_i(X1, X2) with i >= 2 is at most lambda_2(U, V), also after
conditioning on any finite set of source letters.

Constraint indices start at 2.  lambda_1 is identically 1, so an i = 1
constraint could only hold when lambda_2(U, V) = 1.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import AlphabetMismatch, SubsetExplosion
from .probcore import FactoredDist, JointDist, Kernel
from .spectral import (
    CorrelationSpectrum,
    batch_singular_values,
    correlation_spectrum,
    singular_values,
    tilde,
)

INEQ_TOL = 1e-8
FACTORIZATION_TOL = 1e-10
DEFAULT_SUBSET_CAP = 256


@dataclass(frozen=True)
class ChainSpec:
    """X -> Y -> Z given by the joint of (X, Y) and the kernel p(z|y)."""

    pxy: JointDist
    kzy: Kernel

    def __post_init__(self):
        if self.kzy.source.labels != self.pxy.cols.labels:
            raise AlphabetMismatch(
                f"kernel source {self.kzy.source.labels} does not match Y alphabet {self.pxy.cols.labels}"
            )

    @property
    def pyz(self) -> JointDist:
        return JointDist(self.pxy.cols, self.kzy.target, self.pxy.py[:, None] * self.kzy.rows)


@dataclass(frozen=True)
class Constraint:
    id: str
    value: float
    bound: float
    passed: bool


@dataclass(frozen=True)
class MembershipReport:
    name: str
    constraints: tuple[Constraint, ...]
    passed: bool
    worst: Constraint | None = None
    skipped: tuple[str, ...] = ()
    details: dict = field(default_factory=dict)

    @classmethod
    def build(cls, name, constraints, skipped=(), details=None) -> "MembershipReport":
        constraints = tuple(constraints)
        worst = max(constraints, key=lambda c: c.value - c.bound) if constraints else None
        return cls(name, constraints, all(c.passed for c in constraints), worst,
                   tuple(skipped), dict(details or {}))

    def merge(self, other: "MembershipReport", name: str | None = None) -> "MembershipReport":
        return MembershipReport.build(name or self.name, self.constraints + other.constraints,
                                      self.skipped + other.skipped, {**self.details, **other.details})


@dataclass(frozen=True)
class DPIReport:
    sigma_xy: CorrelationSpectrum
    sigma_yz: CorrelationSpectrum
    sigma_xz: CorrelationSpectrum
    slack: tuple[float, ...]
    holds: bool
    factorization_residual: float


def compose(chain: ChainSpec) -> JointDist:
    """Joint of (X, Z) by summing out Y.

    When every marginal involved is positive this also checks that the
    tilde matrices factor, tilde(XZ) = tilde(XY) tilde(YZ).
    """
    pxz = JointDist(chain.pxy.rows, chain.kzy.target, chain.pxy.mass @ chain.kzy.rows)
    resid = factorization_residual(chain, pxz)
    if resid > FACTORIZATION_TOL:
        raise ArithmeticError(f"tilde factorization residual {resid:.3e} exceeds {FACTORIZATION_TOL}")
    return pxz


def factorization_residual(chain: ChainSpec, pxz: JointDist | None = None) -> float:
    if pxz is None:
        pxz = JointDist(chain.pxy.rows, chain.kzy.target, chain.pxy.mass @ chain.kzy.rows)
    # zero-probability Z symbols are dropped on both sides
    lhs = tilde(pxz, restrict_support=True).mat
    rhs = tilde(chain.pxy, restrict_support=True).mat @ tilde(chain.pyz, restrict_support=True).mat
    return float(np.max(np.abs(lhs - rhs)))


def _padded(spec: CorrelationSpectrum, k: int) -> np.ndarray:
    out = np.zeros(k)
    vals = np.asarray(spec.lambdas[:k])
    out[: vals.size] = vals
    return out


def check_dpi(chain: ChainSpec, tol: float = INEQ_TOL) -> DPIReport:
    """Slack lambda_i(XY) * lambda_2(YZ) - lambda_i(XZ) for i = 2 .. rank(tilde XZ)."""
    pxz = JointDist(chain.pxy.rows, chain.kzy.target, chain.pxy.mass @ chain.kzy.rows)
    resid = factorization_residual(chain, pxz)
    s_xy = correlation_spectrum(chain.pxy, restrict_support=True)
    s_yz = correlation_spectrum(chain.pyz, restrict_support=True)
    full_xz = singular_values(pxz, restrict_support=True)
    s_xz = CorrelationSpectrum(tuple(float(x) for x in full_xz[1:]))
    rank = int(np.sum(full_xz > 1e-12))
    k = max(rank - 1, 0)
    slack = _padded(s_xy, k) * s_yz.lambda2 - _padded(s_xz, k)
    slack_t = tuple(float(x) for x in slack)
    return DPIReport(s_xy, s_yz, s_xz, slack_t, bool(np.all(slack >= -tol)), resid)


def _spectrum_constraints(prefix: str, lambdas: Sequence[float], bound: float, tol: float):
    return [Constraint(f"{prefix}i={i + 2}", float(v), float(bound), bool(v <= bound + tol))
            for i, v in enumerate(lambdas)]


def necc_check(p_x1x2: JointDist, lambda2_uv: float, tol: float = INEQ_TOL) -> MembershipReport:
    """lambda_i(tilde X1X2) <= lambda_2(UV) for every i >= 2."""
    if not 0.0 <= lambda2_uv <= 1.0 + tol:
        raise ValueError(f"lambda2_uv must lie in [0, 1], got {lambda2_uv}")
    spec = correlation_spectrum(p_x1x2, restrict_support=True)
    return MembershipReport.build("necc", _spectrum_constraints("", spec.lambdas, lambda2_uv, tol))


def source_axes(dist: FactoredDist, prefix: str) -> list[str]:
    return sorted((n for n in dist.names if n.startswith(prefix) and n[len(prefix):].isdigit()),
                  key=lambda n: int(n[len(prefix):]))


def conditional_necc_check(dist: FactoredDist, lambda2_uv: float, subset_u: Sequence[str] = (),
                           subset_v: Sequence[str] = (), x1: str = "x1", x2: str = "x2",
                           tol: float = INEQ_TOL, extra_given: Sequence[str] = ()) -> MembershipReport:
    """Bound lambda_i of p(x1, x2 | u', v') for every realizable assignment of the given letters.

    ``extra_given`` names further conditioning axes (e.g. a time-sharing
    variable) that are always conditioned on.  Zero-probability
    assignments are skipped and listed in the report.
    """
    given = list(extra_given) + list(subset_u) + list(subset_v)
    name = "cond[" + ",".join(given) + "]"
    t = dist.tensor(given + [x1, x2])
    alph = [dist.alphabet(g) for g in given]
    nx1, nx2 = t.shape[-2], t.shape[-1]
    flat = t.reshape(-1, nx1, nx2)
    weights = flat.sum(axis=(1, 2))
    cells = list(itertools.product(*[a.labels for a in alph])) if given else [()]
    live = weights >= 1e-12
    skipped = [_assign_id(given, c) for c, ok in zip(cells, live) if not ok]
    constraints = []
    if np.any(live):
        sv = batch_singular_values(flat[live])[:, 1:]
        for cell, row in zip((c for c, ok in zip(cells, live) if ok), sv):
            constraints += _spectrum_constraints(_assign_id(given, cell) + ":", row, lambda2_uv, tol)
    return MembershipReport.build(name, constraints, skipped)


def _assign_id(names, cell) -> str:
    if not names:
        return "{}"
    return "{" + ",".join(f"{n}={v}" for n, v in zip(names, cell)) + "}"


def _subsets(items):
    for r in range(len(items) + 1):
        yield from itertools.combinations(items, r)


def intersection_membership(dist: FactoredDist, lambda2_uv: float, u_axes: Sequence[str] | None = None,
                            v_axes: Sequence[str] | None = None, x1: str = "x1", x2: str = "x2",
                            cap: int = DEFAULT_SUBSET_CAP, tol: float = INEQ_TOL,
                            extra_given: Sequence[str] = ()) -> MembershipReport:
    """Run :func:`conditional_necc_check` for every pair of letter subsets, empty ones included."""
    u_axes = source_axes(dist, "u") if u_axes is None else list(u_axes)
    v_axes = source_axes(dist, "v") if v_axes is None else list(v_axes)
    count = 2 ** (len(u_axes) + len(v_axes))
    if count > cap:
        raise SubsetExplosion(f"{count} subset pairs exceed cap {cap}")
    per_subset = {}
    constraints = []
    skipped = []
    for su in _subsets(u_axes):
        for sv in _subsets(v_axes):
            rep = conditional_necc_check(dist, lambda2_uv, su, sv, x1, x2, tol, extra_given)
            key = "U'={" + ",".join(su) + "},V'={" + ",".join(sv) + "}"
            per_subset[key] = rep.passed
            worst = rep.worst.value if rep.worst else 0.0
            constraints.append(Constraint(key, worst, float(lambda2_uv), rep.passed))
            skipped += rep.skipped
    return MembershipReport.build("subset-conditional", constraints, tuple(dict.fromkeys(skipped)),
                                  {"per_subset": per_subset})
