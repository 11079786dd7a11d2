"""Kronecker-power spectra and a joint of (X1, U^n) whose lambda_2 tends to 1.

The tilde matrix of n i.i.d. letters is the n-th Kronecker power of the
single-letter one, so its singular values are all n-fold products of the
base values.  :func:`nletter_spectrum` lists the largest of them without
building the power.

:func:`construct_witsenhausen` couples X1 with U^n so that a subset S1 of
X1 symbols almost exactly shares its mass with a subset S2 of sequences.
The coupling is a small perturbation of one that decomposes, so lambda_2
is certified close to 1 through spectral-norm perturbation bounds.
"""
from __future__ import annotations

import heapq
import itertools
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import CapExceeded, DegenerateSource, SingularScaling, ZeroMarginal
from .probcore import Alphabet, JointDist, Marginal
from .spectral import singular_values

DEFAULT_TOPK_CAP = 1 << 16
DEFAULT_CELL_CAP = 2**22


@dataclass(frozen=True)
class NLetterSpectrum:
    base: tuple[float, ...]
    n: int
    values: tuple[float, ...]

    @property
    def lambda2(self) -> float:
        return self.values[1] if len(self.values) > 1 else 0.0


def _multinomial(counts: Iterable[int]) -> int:
    counts = list(counts)
    out = math.factorial(sum(counts))
    for c in counts:
        out //= math.factorial(c)
    return out


def nletter_spectrum(base, n: int, top_k: int, cap: int = DEFAULT_TOPK_CAP) -> NLetterSpectrum:
    """Largest ``top_k`` singular values of the n-fold Kronecker power.

    ``base`` is either a JointDist (its full tilde spectrum is used) or a
    sequence of base singular values.  Sorted index multisets are expanded
    best-first, each contributing its multinomial multiplicity.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if top_k > cap:
        raise CapExceeded(f"top_k={top_k} exceeds cap {cap}")
    sig = singular_values(base) if isinstance(base, JointDist) else np.asarray(base, dtype=np.float64)
    sig = np.sort(np.clip(sig, 0.0, None))[::-1]
    m = sig.size
    top_k = min(top_k, m**n)

    def value(idx):
        return float(np.prod(sig[list(idx)]))

    start = (0,) * n
    heap = [(-value(start), start)]
    seen = {start}
    out: list[float] = []
    while heap and len(out) < top_k:
        neg, idx = heapq.heappop(heap)
        mult = _multinomial(Counter(idx).values())
        out.extend([-neg] * min(mult, top_k - len(out)))
        for j in range(n):
            if idx[j] + 1 < m and (j == n - 1 or idx[j] + 1 <= idx[j + 1]):
                nxt = idx[:j] + (idx[j] + 1,) + idx[j + 1:]
                if nxt not in seen:
                    seen.add(nxt)
                    heapq.heappush(heap, (-value(nxt), nxt))
    return NLetterSpectrum(tuple(float(s) for s in sig), n, tuple(out))


@dataclass(frozen=True)
class WitsenhausenConstruction:
    p_x1: Marginal
    p_u: Marginal
    n: int
    s1: frozenset
    s2: np.ndarray
    joint: JointDist
    gap: float
    p_s1: float
    p_s2: float
    p_max: float
    mirrored: bool
    c1: float
    c2: float
    c3: float
    c4: float
    certified_lower: float
    perturbation: np.ndarray = field(repr=False, default=None)
    scaling: np.ndarray = field(repr=False, default=None)


@dataclass(frozen=True)
class CertificateReport:
    n: int
    gap: float
    gap_bound: float
    certified_lower: float
    lambda2: float
    passed: bool


def _sequence_masses(p_u: np.ndarray, n: int) -> np.ndarray:
    out = np.ones(1)
    for _ in range(n):
        out = np.kron(out, p_u)
    return out


def _pick_s2(masses: np.ndarray, target: float) -> np.ndarray:
    """Greedy in descending-mass order; returns the chosen sequence indices."""
    order = np.argsort(-masses, kind="stable")
    csum = np.cumsum(masses[order])
    k = int(np.searchsorted(csum, target + 1e-15, side="right"))
    below = csum[k - 1] if k > 0 else 0.0
    if k > 0 and abs(below - target) <= 1e-15:
        return order[:k]
    if k == 0:
        return order[:1]
    above = csum[k] if k < len(csum) - 1 else None
    if above is not None and abs(above - target) <= abs(below - target):
        return order[: k + 1]
    return order[:k]


def construct_witsenhausen(p_x1, p_u, n: int, s1: Iterable[int | str],
                           cap: int = DEFAULT_CELL_CAP) -> WitsenhausenConstruction:
    """Joint of (X1, U^n) with the given marginals that nearly decomposes along (S1, S2).

    Starting from the independent coupling, S1 x S2 and the complement
    block are rescaled and the leftover mass of S2 goes to (X1-S1) x S2
    (or, when P(S2) < P(S1), the leftover mass of S1 goes to
    S1 x (U^n-S2)).
    """
    px = np.asarray(p_x1.p if isinstance(p_x1, Marginal) else p_x1, dtype=np.float64)
    pu = np.asarray(p_u.p if isinstance(p_u, Marginal) else p_u, dtype=np.float64)
    mx = p_x1 if isinstance(p_x1, Marginal) else Marginal(Alphabet.of_size(px.size, "x"), px)
    mu = p_u if isinstance(p_u, Marginal) else Marginal(Alphabet.of_size(pu.size, "u"), pu)
    if np.any(px <= 1e-12):
        raise ZeroMarginal("p_x1 must be strictly positive")
    p_max = float(pu.max())
    if p_max >= 1 - 1e-12:
        raise DegenerateSource("source letter is deterministic, P_max = 1")
    cells = px.size * pu.size**n
    if cells > cap:
        raise CapExceeded(f"joint of X1 and U^{n} has {cells} cells, cap is {cap}")
    s1_idx = sorted({mx.alphabet.index(s) for s in s1})
    in_s1 = np.zeros(px.size, dtype=bool)
    in_s1[s1_idx] = True
    p_s1 = float(px[in_s1].sum())
    if not 0 < p_s1 < 1:
        raise ValueError(f"P(S1) must lie strictly between 0 and 1, got {p_s1}")

    seq = _sequence_masses(pu, n)
    chosen = _pick_s2(seq, p_s1)
    in_s2 = np.zeros(seq.size, dtype=bool)
    in_s2[chosen] = True
    p_s2 = float(seq[in_s2].sum())
    if not 0 < p_s2 < 1:
        raise DegenerateSource(f"no admissible S2 (P(S2)={p_s2})")
    gap = abs(p_s2 - p_s1)

    # P(S2) < P(S1) is the same construction applied to both complements
    mirrored = p_s2 < p_s1
    a_rows, a_cols = (~in_s1, ~in_s2) if mirrored else (in_s1, in_s2)
    a1 = 1 - p_s1 if mirrored else p_s1
    a2 = 1 - p_s2 if mirrored else p_s2

    indep = np.outer(px, seq)
    scale = np.zeros_like(indep)
    r, c = a_rows[:, None], a_cols[None, :]
    scale[r & c] = 1.0 / a2
    scale[~r & c] = (a2 - a1) / ((1 - a1) * a2)
    scale[~r & ~c] = 1.0 / (1 - a1)
    mass = indep * scale

    # moving the (X1-S1) x S2 block into S1 x S2 gives an exactly decomposing joint
    err = np.zeros_like(indep)
    err[r & c] = indep[r & c] * (a2 - a1) / (a1 * a2)
    err[~r & c] = -mass[~r & c]
    m_diag = np.where(a_rows, a2 / a1, (1 - a2) / (1 - a1))

    p1p = min(a1, 1 - a1)
    c1 = 1.0 / (p1p * a2)
    c2 = math.sqrt((1 - a1) / (1 - a2)) * c1
    c3 = 1.0 / math.sqrt(a1)
    c4 = 1.0 / math.sqrt(1 - a1)
    f1 = max(0.0, 1 - c4 * p_max ** (n / 2))
    f2 = max(0.0, 1 - c2 * p_max**n)

    cols = Alphabet(tuple("".join(t) for t in itertools.product(*[mu.alphabet.labels] * n))) \
        if all(len(s) == 1 for s in mu.alphabet.labels) else \
        Alphabet(tuple(",".join(t) for t in itertools.product(*[mu.alphabet.labels] * n)))
    joint = JointDist(mx.alphabet, cols, mass)
    return WitsenhausenConstruction(
        p_x1=mx, p_u=mu, n=n, s1=frozenset(mx.alphabet.labels[i] for i in s1_idx),
        s2=np.flatnonzero(in_s2), joint=joint, gap=gap, p_s1=p_s1, p_s2=p_s2, p_max=p_max,
        mirrored=mirrored, c1=c1, c2=c2, c3=c3, c4=c4, certified_lower=f1 * f2,
        perturbation=err, scaling=m_diag,
    )


def gram_lambda2(joint: JointDist, block: int = 1 << 14) -> float:
    """lambda_2 from the |X| x |X| Gram matrix of the tilde matrix, streamed over column blocks."""
    px, py = joint.px, joint.py
    if np.any(px <= 1e-12) or np.any(py <= 1e-12):
        raise ZeroMarginal("gram_lambda2 needs positive marginals")
    rs = 1.0 / np.sqrt(px)
    g = np.zeros((px.size, px.size))
    for start in range(0, py.size, block):
        stop = min(start + block, py.size)
        t = rs[:, None] * joint.mass[:, start:stop] / np.sqrt(py[start:stop])[None, :]
        g += t @ t.T
    w = np.sort(np.linalg.eigvalsh(g))[::-1]
    return float(math.sqrt(max(w[1], 0.0))) if w.size > 1 else 0.0


def verify_certificate(w: WitsenhausenConstruction, tol: float = 1e-8) -> CertificateReport:
    lam = gram_lambda2(w.joint)
    bound = w.p_max**w.n
    ok = (w.gap <= bound + 1e-15) and (w.certified_lower - tol <= lam <= 1 + tol)
    return CertificateReport(w.n, w.gap, bound, w.certified_lower, lam, bool(ok))


def witsenhausen_trajectory(p_x1, p_u, ns: Sequence[int], s1) -> list[CertificateReport]:
    return [verify_certificate(construct_witsenhausen(p_x1, p_u, n, s1)) for n in ns]


def attach_independent_letter(joint: JointDist, p_u) -> JointDist:
    """(X1, U^n) -> (X1, U^{n+1}) with the new letter independent of everything."""
    pu = np.asarray(p_u.p if isinstance(p_u, Marginal) else p_u, dtype=np.float64)
    cols = joint.cols.product(Alphabet.of_size(pu.size, "u"))
    return JointDist(joint.rows, cols, np.kron(joint.mass, pu[None, :]))


@dataclass(frozen=True)
class PerturbationReport:
    additive_slack: tuple[float, ...]
    ratio_lower: float
    ratio_upper: float
    ratios: tuple[float, ...]
    passed: bool


def perturbation_check(a, e, m, tol: float = 1e-9) -> PerturbationReport:
    """Check |s_i(A+E) - s_i(A)| <= ||E||_2 and ||M^-1||^-1 <= s_i(MA)/s_i(A) <= ||M||.

    ``m`` is a square matrix or the diagonal of one.
    """
    a = np.asarray(a, dtype=np.float64)
    e = np.asarray(e, dtype=np.float64)
    m = np.asarray(m, dtype=np.float64)
    if m.ndim == 1:
        m = np.diag(m)
    try:
        m_inv = np.linalg.inv(m)
    except np.linalg.LinAlgError as exc:
        raise SingularScaling("scaling matrix is singular") from exc
    if not np.all(np.isfinite(m_inv)) or np.linalg.cond(m) > 1e12:
        raise SingularScaling("scaling matrix is numerically singular")
    s_a = np.linalg.svd(a, compute_uv=False)
    s_ae = np.linalg.svd(a + e, compute_uv=False)
    e_norm = float(np.linalg.norm(e, 2)) if e.size else 0.0
    additive = tuple(float(e_norm - abs(x - y)) for x, y in zip(s_ae, s_a))
    s_ma = np.linalg.svd(m @ a, compute_uv=False)
    lo = 1.0 / float(np.linalg.norm(m_inv, 2))
    hi = float(np.linalg.norm(m, 2))
    pos = s_a > 1e-12
    ratios = tuple(float(x) for x in s_ma[pos] / s_a[pos])
    ok = all(s >= -tol for s in additive) and all(lo - tol <= r <= hi + tol for r in ratios)
    return PerturbationReport(additive, lo, hi, ratios, bool(ok))
