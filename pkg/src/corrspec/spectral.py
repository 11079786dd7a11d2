"""Marginal-normalized joint matrices and their singular spectra.

For a joint pmf ``P`` with marginals ``px`` and ``py`` the tilde matrix is
``diag(px)^-1/2 P diag(py)^-1/2``.  Its singular values all lie in
[0, 1], the largest equals 1 with singular vectors ``sqrt(px)`` and
``sqrt(py)``, and the remaining ones measure how correlated X and Y are.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .errors import ConvergenceFailure, InvalidTilde, ZeroMarginal
from .probcore import POSITIVE_TOL, JointDist, validate_joint

SPECTRAL_TOL = 1e-8
ROUNDOFF_TOL = 1e-14
SUPPORT_TOL = 1e-12


@dataclass(frozen=True)
class TildeMatrix:
    mat: np.ndarray
    px: np.ndarray | None = None
    py: np.ndarray | None = None

    def __post_init__(self):
        m = np.array(self.mat, dtype=np.float64)
        m.setflags(write=False)
        object.__setattr__(self, "mat", m)
        for name in ("px", "py"):
            v = getattr(self, name)
            if v is not None:
                v = np.array(v, dtype=np.float64)
                v.setflags(write=False)
                object.__setattr__(self, name, v)

    @property
    def shape(self) -> tuple[int, int]:
        return self.mat.shape


@dataclass(frozen=True)
class SpectralDecomposition:
    sigma: np.ndarray
    left: np.ndarray
    right: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return (self.left * self.sigma) @ self.right.T


@dataclass(frozen=True)
class CorrelationSpectrum:
    """Singular values lambda_2 ... lambda_l of a tilde matrix."""

    lambdas: tuple[float, ...]

    @property
    def lambda2(self) -> float:
        return self.lambdas[0] if self.lambdas else 0.0

    def __len__(self) -> int:
        return len(self.lambdas)

    def __getitem__(self, i):
        return self.lambdas[i]


@dataclass(frozen=True)
class ValidityReport:
    checks: dict = field(default_factory=dict)
    accept: bool = False
    reasons: tuple[str, ...] = ()


def tilde(joint: JointDist, restrict_support: bool = False) -> TildeMatrix:
    """Normalize ``joint`` by the square roots of its marginals.

    With ``restrict_support`` zero-probability symbols are allowed and their
    rows/columns are left at zero; the nonzero spectrum is then that of the
    joint restricted to its support.
    """
    px, py = joint.px, joint.py
    if not restrict_support and (np.any(px <= POSITIVE_TOL) or np.any(py <= POSITIVE_TOL)):
        side, vec, alph = ("row", px, joint.rows) if np.any(px <= POSITIVE_TOL) else ("column", py, joint.cols)
        raise ZeroMarginal(f"{side} symbol {alph.labels[int(np.argmin(vec))]!r} has zero probability")
    return TildeMatrix(_safe_scale(joint.mass, px, py), px, py)


def _inv_sqrt(p: np.ndarray) -> np.ndarray:
    out = np.zeros_like(p)
    pos = p > POSITIVE_TOL
    out[pos] = 1.0 / np.sqrt(p[pos])
    return out


def _safe_scale(mass: np.ndarray, px: np.ndarray, py: np.ndarray) -> np.ndarray:
    return _inv_sqrt(px)[..., :, None] * mass * _inv_sqrt(py)[..., None, :]


def untilde(t: TildeMatrix) -> JointDist:
    """Recover the joint pmf from a tilde matrix.

    Uses the marginals carried by ``t`` when present; otherwise they come
    from a strictly positive top singular pair.
    """
    if t.px is not None and t.py is not None:
        sx, sy = np.sqrt(t.px), np.sqrt(t.py)
    else:
        pair = positive_top_pair(t.mat)
        if pair is None:
            raise InvalidTilde("no strictly positive singular pair for singular value 1")
        sx, sy = pair
    mass = sx[:, None] * t.mat * sy[None, :]
    # cells that are exactly zero in theory can land an ulp below it
    mass = np.where((mass < 0) & (mass > -ROUNDOFF_TOL), 0.0, mass)
    try:
        return validate_joint(mass)
    except ValueError as exc:
        raise InvalidTilde(f"recovered matrix is not a joint pmf: {exc}") from exc


def _sign_and_order(sigma, left, right):
    n = len(sigma)
    for i in range(n):
        col = left[:, i]
        nz = np.flatnonzero(np.abs(col) > 1e-12)
        if nz.size and col[nz[0]] < 0:
            left[:, i] = -col
            right[:, i] = -right[:, i]
    keys = [(-round(float(s), 12), tuple(-np.round(left[:, i], 12))) for i, s in enumerate(sigma)]
    order = sorted(range(n), key=lambda i: keys[i])
    return sigma[order], left[:, order], right[:, order]


def _complete_basis(v: np.ndarray, k: int) -> np.ndarray:
    """Extend orthonormal columns ``v`` (m x r) to ``k`` orthonormal columns."""
    m, r = v.shape
    if r >= k:
        return v[:, :k]
    q, _ = np.linalg.qr(np.hstack([v, np.eye(m)[:, :k]]))
    extra = q[:, r:k]
    return np.hstack([v, extra])


def svd(t: TildeMatrix | np.ndarray) -> SpectralDecomposition:
    """Thin SVD with a deterministic sign and tie-breaking convention.

    Wide matrices go through the eigendecomposition of the small Gram
    matrix ``T T^T``; everything else uses LAPACK's bidiagonal routine.
    """
    mat = np.asarray(t.mat if isinstance(t, TildeMatrix) else t, dtype=np.float64)
    if not np.all(np.isfinite(mat)):
        raise ConvergenceFailure("matrix has non-finite entries")
    m, n = mat.shape
    l = min(m, n)
    try:
        if n >= 256 and n > 8 * m:
            w, u = np.linalg.eigh(mat @ mat.T)
            w, u = w[::-1], u[:, ::-1]
            sigma = np.sqrt(np.clip(w, 0.0, None))
            good = sigma > 1e-10 * max(sigma[0], 1.0)
            v = (mat.T @ u[:, good]) / sigma[good]
            v = _complete_basis(v, l)
            sigma = np.where(good, sigma, 0.0)
            left = u
        else:
            left, sigma, vt = np.linalg.svd(mat, full_matrices=False)
            v = vt.T
    except np.linalg.LinAlgError as exc:
        raise ConvergenceFailure(str(exc)) from exc
    sigma, left, v = _sign_and_order(sigma.copy(), left.copy(), v.copy())
    return SpectralDecomposition(sigma, left, v)


def positive_top_pair(mat: np.ndarray, tol: float = SPECTRAL_TOL):
    """Strictly positive unit pair (mu, nu) with ``T nu = mu`` and ``T^T mu = nu``, or None.

    When singular value 1 is repeated the positive vector need not be a
    basis vector of the computed subspace, so a small LP searches the span.
    """
    dec = svd(mat)
    top = np.flatnonzero(np.abs(dec.sigma - 1.0) <= tol)
    if top.size == 0:
        return None
    basis = dec.left[:, top]
    if top.size == 1:
        mu = basis[:, 0]
        mu = mu if mu.sum() >= 0 else -mu
    else:
        k = top.size
        # maximize t subject to basis @ c >= t, |c_i| <= 1
        c_obj = np.zeros(k + 1)
        c_obj[-1] = -1.0
        a_ub = np.hstack([-basis, np.ones((basis.shape[0], 1))])
        res = linprog(c_obj, A_ub=a_ub, b_ub=np.zeros(basis.shape[0]),
                      bounds=[(-1, 1)] * k + [(None, None)], method="highs")
        if not res.success or res.x[-1] <= 1e-12:
            return None
        mu = basis @ res.x[:k]
        mu = mu / np.linalg.norm(mu)
    if np.any(mu <= 1e-12):
        return None
    nu = np.asarray(mat).T @ mu
    if np.any(nu <= 1e-12):
        return None
    return mu, nu


def check_tilde_validity(t: TildeMatrix | np.ndarray, tol: float = SPECTRAL_TOL) -> ValidityReport:
    """Check whether a candidate matrix is the tilde matrix of some joint pmf."""
    mat = np.asarray(t.mat if isinstance(t, TildeMatrix) else t, dtype=np.float64)
    dec = svd(mat)
    s = dec.sigma
    checks = {
        "sigma_in_unit_interval": bool(np.all(s >= -tol) and np.all(s <= 1 + tol)),
        "top_sigma_is_one": bool(abs(s[0] - 1.0) <= tol),
    }
    pair = positive_top_pair(mat, tol) if checks["top_sigma_is_one"] else None
    checks["positive_top_pair"] = pair is not None
    recovered_ok = False
    if isinstance(t, TildeMatrix) and t.px is not None and t.py is not None:
        try:
            untilde(t)
            recovered_ok = bool(np.all(mat >= 0))
        except InvalidTilde:
            recovered_ok = False
    elif pair is not None:
        try:
            untilde(TildeMatrix(mat, pair[0] ** 2, pair[1] ** 2))
            recovered_ok = True
        except InvalidTilde:
            recovered_ok = False
    checks["untilde_valid"] = recovered_ok
    reasons = tuple(k for k, v in checks.items() if not v)
    return ValidityReport(checks=checks, accept=not reasons, reasons=reasons)


def singular_values(joint: JointDist, restrict_support: bool = False) -> np.ndarray:
    """All singular values of the tilde matrix, clamped to [0, 1]."""
    return np.clip(svd(tilde(joint, restrict_support)).sigma, 0.0, 1.0)


def correlation_spectrum(joint: JointDist, restrict_support: bool = False) -> CorrelationSpectrum:
    s = singular_values(joint, restrict_support)
    return CorrelationSpectrum(tuple(float(x) for x in s[1:]))


def lambda2(joint: JointDist, restrict_support: bool = False) -> float:
    return correlation_spectrum(joint, restrict_support).lambda2


def batch_singular_values(mass: np.ndarray) -> np.ndarray:
    """Descending tilde singular values for a stack of joint matrices ``(..., r, c)``.

    Each matrix is normalized by its own total, and zero-probability
    symbols are dropped (their rows/columns are zeroed), so conditional
    slices with partial support can be passed directly.
    """
    mass = np.asarray(mass, dtype=np.float64)
    total = mass.sum(axis=(-2, -1), keepdims=True)
    mass = np.divide(mass, total, out=np.zeros_like(mass), where=total > 0)
    if mass.shape[-2:] == (2, 2):
        return _batch_2x2(mass)
    t = _safe_scale(mass, mass.sum(axis=-1), mass.sum(axis=-2))
    try:
        s = np.linalg.svd(t, compute_uv=False)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceFailure(str(exc)) from exc
    return np.clip(s, 0.0, 1.0)


def _batch_2x2(mass: np.ndarray) -> np.ndarray:
    # top value is 1 for any nonzero joint; the product of the two is |det| of the tilde matrix
    px, py = mass.sum(axis=-1), mass.sum(axis=-2)
    scale = px[..., 0] * px[..., 1] * py[..., 0] * py[..., 1]
    det = np.abs(mass[..., 0, 0] * mass[..., 1, 1] - mass[..., 0, 1] * mass[..., 1, 0])
    full = (px.min(axis=-1) > POSITIVE_TOL) & (py.min(axis=-1) > POSITIVE_TOL)
    s2 = np.divide(det, np.sqrt(scale), out=np.zeros_like(det), where=full)
    s1 = (mass.sum(axis=(-2, -1)) > 0).astype(np.float64)
    return np.clip(np.stack([s1, s2], axis=-1), 0.0, 1.0)


def decomposes(joint: JointDist):
    """Witness ``(S1, S2)`` that the joint splits into two positive-mass blocks, or None.

    S1 is a set of row labels and S2 a set of column labels with
    ``P((X-S1) x S2) = P(S1 x (Y-S2)) = 0`` and all four marginal masses
    positive.
    """
    m, n = joint.shape
    rr, cc = np.nonzero(joint.mass > SUPPORT_TOL)
    graph = coo_matrix((np.ones(rr.size), (rr, m + cc)), shape=(m + n, m + n))
    _, labels = connected_components(graph, directed=False)
    comp_mass: dict[int, float] = {}
    for i, j in zip(rr, cc):
        comp_mass[labels[i]] = comp_mass.get(labels[i], 0.0) + joint.mass[i, j]
    heavy = sorted(c for c, w in comp_mass.items() if w > SUPPORT_TOL)
    if len(heavy) < 2:
        return None
    first = heavy[0]
    s1 = frozenset(joint.rows.labels[i] for i in range(m) if labels[i] == first)
    s2 = frozenset(joint.cols.labels[j] for j in range(n) if labels[m + j] == first)
    return s1, s2
