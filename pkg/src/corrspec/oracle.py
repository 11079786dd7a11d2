"""Brute-force encoder search over a few source letters.

Encoder pairs ``p(x1 | u^n)``, ``p(x2 | v^n)`` are enumerated (all
deterministic maps) or sampled (Dirichlet rows), and the resulting
correlation spectrum of ``(X1, X2)`` is compared against the bounds
in :mod:`corrspec.dpi` and :mod:`corrspec.binary`:

* every lambda_i(X1, X2), i >= 2, is at most lambda_2(U, V);
* the same holds after conditioning on any assignment of any subset of
  the source letters;
* for binary alphabets the signed lambda lies in outer bound 2.

Pairs are processed in fixed-size chunks, vectorized with einsum, and
each chunk's randomness depends only on ``(seed, chunk index)``.
"""
from __future__ import annotations

import itertools
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

from .binary import outer2_batch, signed_lambda_batch
from .errors import CapExceeded
from .probcore import Alphabet, FactoredDist, JointDist, Kernel, kron_power
from .spectral import batch_singular_values, lambda2 as spectral_lambda2

INEQ_TOL = 1e-8
DEFAULT_PAIR_CAP = 1 << 20
DEFAULT_CELL_CAP = 1 << 22
CHUNK = 2048


@dataclass(frozen=True)
class EncoderPair:
    enc1: Kernel
    enc2: Kernel
    n: int

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be >= 1")


@dataclass(frozen=True)
class FrontierResult:
    best_lambda: tuple[float, ...]
    argmax: tuple[EncoderPair | None, ...]
    samples_evaluated: int
    seed: int
    mode: str
    n: int
    lambda2_uv: float
    max_conditional: float
    necc_violations: int
    nec_violations: int
    outer2_violations: int
    outer2_checked: int
    details: dict = field(default_factory=dict)

    @property
    def violations(self) -> int:
        return self.necc_violations + self.nec_violations + self.outer2_violations

    @property
    def lambda2(self) -> float:
        return self.best_lambda[0] if self.best_lambda else 0.0


def _seq_alphabet(alph: Alphabet, n: int) -> Alphabet:
    return Alphabet(tuple(",".join(t) for t in itertools.product(alph.labels, repeat=n)))


def induced_joint(sources: JointDist, pair: EncoderPair, cap: int = DEFAULT_CELL_CAP) -> FactoredDist:
    """``p(u^n, v^n) p(x1 | u^n) p(x2 | v^n)`` over axes u1..un, v1..vn, x1, x2."""
    n = pair.n
    nu, nv = sources.shape
    n1, n2 = len(pair.enc1.target), len(pair.enc2.target)
    cells = nu**n * nv**n * n1 * n2
    if cells > cap:
        raise CapExceeded(f"induced joint has {cells} cells, cap is {cap}")
    if pair.enc1.rows.shape[0] != nu**n or pair.enc2.rows.shape[0] != nv**n:
        raise ValueError("encoder rows must be indexed by source sequences")
    puv = kron_power(sources, n, cap=cap).mass
    mass = puv[:, :, None, None] * pair.enc1.rows[:, None, :, None] * pair.enc2.rows[None, :, None, :]
    mass = mass.reshape((nu,) * n + (nv,) * n + (n1, n2))
    axes = ([(f"u{i + 1}", sources.rows) for i in range(n)] + [(f"v{i + 1}", sources.cols) for i in range(n)]
            + [("x1", pair.enc1.target), ("x2", pair.enc2.target)])
    return FactoredDist(axes, mass)


def _pair_count(sources: JointDist, n: int, sizes: tuple[int, int]) -> int:
    nu, nv = sources.shape
    return sizes[0] ** (nu**n) * sizes[1] ** (nv**n)


def _function_table(n_inputs: int, n_outputs: int) -> np.ndarray:
    """All maps as rows of outputs; row ``i`` lists outputs in lexicographic input order."""
    return np.array(list(itertools.product(range(n_outputs), repeat=n_inputs)), dtype=np.intp).reshape(-1, n_inputs)


def _det_kernel(table_row: np.ndarray, source: Alphabet, n_out: int) -> Kernel:
    return Kernel(source, Alphabet.of_size(n_out), np.eye(n_out)[table_row])


def enumerate_deterministic(sources: JointDist, n: int, sizes: tuple[int, int] = (2, 2),
                            cap: int = DEFAULT_PAIR_CAP) -> Iterator[EncoderPair]:
    """Every deterministic encoder pair once, enc1-major."""
    count = _pair_count(sources, n, sizes)
    if count > cap:
        raise CapExceeded(f"{count} deterministic pairs exceed cap {cap}")
    su, sv = _seq_alphabet(sources.rows, n), _seq_alphabet(sources.cols, n)
    t1 = _function_table(len(su), sizes[0])
    t2 = _function_table(len(sv), sizes[1])
    for r1 in t1:
        k1 = _det_kernel(r1, su, sizes[0])
        for r2 in t2:
            yield EncoderPair(k1, _det_kernel(r2, sv, sizes[1]), n)


def _subset_axes(n: int) -> list[tuple[tuple[int, ...], tuple[int, ...]]]:
    subsets = [c for r in range(n + 1) for c in itertools.combinations(range(n), r)]
    return [(su, sv) for su in subsets for sv in subsets]


@dataclass
class _Acc:
    """Running per-index maxima and violation counts for one chunk or a merge of chunks."""

    best: np.ndarray
    best_idx: np.ndarray
    max_cond: float = 0.0
    necc: int = 0
    nec: int = 0
    outer2: int = 0
    outer2_checked: int = 0
    count: int = 0
    worst_outer2: float = -np.inf

    def merge(self, other: "_Acc") -> "_Acc":
        better = (other.best > self.best) | ((other.best == self.best) & (other.best_idx < self.best_idx))
        return _Acc(np.where(better, other.best, self.best), np.where(better, other.best_idx, self.best_idx),
                    max(self.max_cond, other.max_cond), self.necc + other.necc, self.nec + other.nec,
                    self.outer2 + other.outer2, self.outer2_checked + other.outer2_checked,
                    self.count + other.count, max(self.worst_outer2, other.worst_outer2))


def _evaluate(puv: np.ndarray, e1: np.ndarray, e2: np.ndarray, ids: np.ndarray, n: int, shape_uv,
              lam_uv: float, conditional: bool, binary: bool, n_lambda: int) -> _Acc:
    """Spectra and bound checks for a batch of encoder pairs ``e1[p, u^n, x1]``, ``e2[p, v^n, x2]``."""
    full = np.einsum("uv,pux,pvy->puvxy", puv, e1, e2)
    joint = full.sum(axis=(1, 2))
    sv = batch_singular_values(joint)[:, 1:]
    lam = np.zeros((len(ids), n_lambda))
    lam[:, : sv.shape[1]] = sv[:, :n_lambda]
    acc = _Acc(np.full(n_lambda, -np.inf), np.full(n_lambda, np.iinfo(np.int64).max, dtype=np.int64))
    acc.count = len(ids)
    if len(ids):
        arg = lam.argmax(axis=0)  # first occurrence, i.e. smallest pair index
        acc.best = lam[arg, np.arange(n_lambda)]
        acc.best_idx = ids[arg].astype(np.int64)
    acc.necc = int(np.sum(np.any(sv > lam_uv + INEQ_TOL, axis=1)))
    if conditional:
        nu, nv = shape_uv
        n1, n2 = full.shape[-2:]
        tens = full.reshape((len(ids),) + (nu,) * n + (nv,) * n + (n1, n2))
        bad = np.zeros(len(ids), dtype=bool)
        for su, sv_ in _subset_axes(n):
            keep_u = {1 + i for i in su}
            keep_v = {1 + n + i for i in sv_}
            drop = tuple(ax for ax in range(1, 2 * n + 1) if ax not in keep_u | keep_v)
            sub = tens.sum(axis=drop) if drop else tens
            s = batch_singular_values(sub.reshape(len(ids), -1, n1, n2))[..., 1:]
            if s.size:
                acc.max_cond = max(acc.max_cond, float(s.max()))
                bad |= np.any(s > lam_uv + INEQ_TOL, axis=(1, 2))
        acc.nec = int(bad.sum())
    if binary:
        slam, a, b = signed_lambda_batch(joint)
        ok = ~np.isnan(a)
        lo, hi = outer2_batch(a, b, lam_uv)
        excess = np.where(ok, np.maximum(slam - hi, lo - slam), -np.inf)
        acc.outer2_checked = int(ok.sum())
        acc.outer2 = int(np.sum(excess > INEQ_TOL))
        if ok.any():
            acc.worst_outer2 = float(excess[ok].max())
    return acc


def _chunk_job(args) -> _Acc:
    (mode, sources_mass, n, sizes, start, stop, seed, chunk_idx, lam_uv, conditional, n_lambda) = args
    nu, nv = sources_mass.shape
    puv = sources_mass
    for _ in range(n - 1):
        puv = np.kron(puv, sources_mass)
    ids = np.arange(start, stop)
    if mode == "exhaustive":
        t1 = _function_table(nu**n, sizes[0])
        t2 = _function_table(nv**n, sizes[1])
        i1, i2 = np.divmod(ids, t2.shape[0])
        e1 = np.eye(sizes[0])[t1[i1]]
        e2 = np.eye(sizes[1])[t2[i2]]
    else:
        rng = np.random.default_rng(np.random.SeedSequence([seed, chunk_idx]))
        e1 = rng.dirichlet(np.ones(sizes[0]), size=(len(ids), nu**n))
        e2 = rng.dirichlet(np.ones(sizes[1]), size=(len(ids), nv**n))
    binary = sizes == (2, 2) and (nu, nv) == (2, 2)
    return _evaluate(puv, e1, e2, ids, n, (nu, nv), lam_uv, conditional, binary, n_lambda)


def _pair_at(sources: JointDist, n: int, sizes, mode: str, seed: int, index: int) -> EncoderPair:
    nu, nv = sources.shape
    su, sv = _seq_alphabet(sources.rows, n), _seq_alphabet(sources.cols, n)
    if mode == "exhaustive":
        t2_rows = sizes[1] ** (nv**n)
        i1, i2 = divmod(int(index), t2_rows)
        r1 = np.array(next(itertools.islice(itertools.product(range(sizes[0]), repeat=nu**n), i1, None)))
        r2 = np.array(next(itertools.islice(itertools.product(range(sizes[1]), repeat=nv**n), i2, None)))
        return EncoderPair(_det_kernel(r1, su, sizes[0]), _det_kernel(r2, sv, sizes[1]), n)
    chunk_idx, offset = divmod(int(index), CHUNK)
    rng = np.random.default_rng(np.random.SeedSequence([seed, chunk_idx]))
    e1 = rng.dirichlet(np.ones(sizes[0]), size=(CHUNK, nu**n))
    e2 = rng.dirichlet(np.ones(sizes[1]), size=(CHUNK, nv**n))
    return EncoderPair(Kernel(su, Alphabet.of_size(sizes[0]), e1[offset]),
                       Kernel(sv, Alphabet.of_size(sizes[1]), e2[offset]), n)


def frontier(sources: JointDist, n: int, sizes: Sequence[int] = (2, 2), budget: int = 100_000, seed: int = 0,
             mode: str = "exhaustive", conditional: bool = True, workers: int = 1,
             cap: int = DEFAULT_PAIR_CAP) -> FrontierResult:
    """Largest observed lambda_i(X1, X2) per index, with violation counts of every applicable bound.

    ``mode="exhaustive"`` sweeps all deterministic pairs (``budget`` must
    cover their number); ``mode="random"`` draws ``budget`` stochastic
    pairs.  ``conditional`` adds the subset-conditioned checks.
    """
    sizes = tuple(int(s) for s in sizes)
    if n < 1:
        raise ValueError("n must be >= 1")
    if mode not in ("exhaustive", "random"):
        raise ValueError("mode must be 'exhaustive' or 'random'")
    nu, nv = sources.shape
    cells = nu**n * nv**n * sizes[0] * sizes[1]
    if cells * CHUNK > DEFAULT_CELL_CAP * 64:
        raise CapExceeded(f"per-pair tensor of {cells} cells is too large for batched evaluation")
    if mode == "exhaustive":
        total = _pair_count(sources, n, sizes)
        if total > min(cap, budget):
            raise CapExceeded(f"{total} deterministic pairs exceed the budget/cap {min(cap, budget)}")
    else:
        total = int(budget)
        if total > cap:
            raise CapExceeded(f"budget {total} exceeds cap {cap}")
    lam_uv = spectral_lambda2(sources, restrict_support=True)
    n_lambda = min(sizes) - 1
    jobs = [(mode, np.asarray(sources.mass), n, sizes, s, min(s + CHUNK, total), seed, k, lam_uv, conditional, n_lambda)
            for k, s in enumerate(range(0, total, CHUNK))]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            parts = list(ex.map(_chunk_job, jobs))
    else:
        parts = [_chunk_job(j) for j in jobs]
    acc = parts[0]
    for p in parts[1:]:
        acc = acc.merge(p)
    best = tuple(float(max(b, 0.0)) for b in acc.best)
    argmax = tuple(_pair_at(sources, n, sizes, mode, seed, int(i)) if np.isfinite(b) else None
                   for b, i in zip(acc.best, acc.best_idx))
    details = {"argmax_index": [int(i) for i in acc.best_idx]}
    if acc.outer2_checked:
        details["worst_outer2_excess"] = acc.worst_outer2
    return FrontierResult(best, argmax, acc.count, seed, mode, n, float(lam_uv), acc.max_cond,
                          acc.necc, acc.nec, acc.outer2, acc.outer2_checked, details)
