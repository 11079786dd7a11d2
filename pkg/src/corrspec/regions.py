"""Membership tests for sets of test channels, rate functionals and the MAC check.

A candidate is a joint over axes ``q, u1, v1, x1, x2`` (``q`` optional),
built as ``p(q) p(u, v) p(x1, x2 | u, v, q)``.  The sets, from smallest to
largest:

* ``sin``: separate encoders, ``p(x1, x2 | u, v) = p(x1 | u) p(x2 | v)``.
* ``sout2``: separate encoders sharing a latent ``W`` independent of the
  sources.  Decided by a bounded search, so a negative answer only means
  no certificate was found.
* ``sout4``: the conditional spectral bounds on the four subset pairs of
  ``{u1} x {v1}``.
* ``sout1``: the two Markov conditions ``X1 - U - V`` and ``U - V - X2``.

When a ``q`` axis is present every test is applied conditionally on it.
"""
from __future__ import annotations

import itertools
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .dpi import Constraint, MembershipReport, intersection_membership
from .errors import BudgetExceeded, ShapeMismatch
from .probcore import Alphabet, FactoredDist, JointDist, Kernel, Marginal, entropy, mutual_information
from .spectral import lambda2 as spectral_lambda2

MARKOV_TOL = 1e-9
LATENT_TOL = 1e-6
PRUNE_TOL = 1e-3
RATE_SLACK = 1e-9
CHAIN_TOL = 1e-10
DEFAULT_RESTARTS = 32
DEFAULT_MAX_BUDGET = 100_000
PREDICATES = ("sin", "sout1", "sout2", "sout4", "sout2cap4")
# (smaller, larger) pairs whose sampled regions must nest
NESTED = (("sin", "sout1"), ("sin", "sout2"), ("sin", "sout4"), ("sout2", "sout1"),
          ("sout2cap4", "sout2"), ("sout2cap4", "sout4"))


@dataclass(frozen=True)
class TestChannel:
    """``p(q) p(u, v) p(x1, x2 | u, v, q)`` with the kernel indexed ``[q, u, v, x1, x2]``."""

    __test__ = False  # not a pytest class

    sources: JointDist
    pq: Marginal
    kernel: np.ndarray
    x1: Alphabet
    x2: Alphabet

    def __post_init__(self):
        k = np.array(self.kernel, dtype=np.float64)
        shape = (len(self.pq.alphabet), *self.sources.shape, len(self.x1), len(self.x2))
        if k.shape != shape:
            raise ShapeMismatch(f"kernel of shape {k.shape}, expected {shape}")
        if np.any(k < 0):
            raise ValueError("kernel has a negative entry")
        sums = k.sum(axis=(-2, -1))
        if np.any(np.abs(sums - 1) > 1e-9):
            raise ValueError("kernel slices must each sum to 1")
        k.setflags(write=False)
        object.__setattr__(self, "kernel", k)

    @classmethod
    def single(cls, sources: JointDist, kernel) -> "TestChannel":
        """Candidate without time sharing; ``kernel`` is indexed ``[u, v, x1, x2]``."""
        k = np.asarray(kernel, dtype=np.float64)[None]
        return cls(sources, Marginal(Alphabet(("0",)), np.ones(1)), k,
                   Alphabet.of_size(k.shape[-2]), Alphabet.of_size(k.shape[-1]))

    @classmethod
    def from_encoders(cls, sources: JointDist, enc1, enc2, pq=None) -> "TestChannel":
        """Separate encoders ``enc1[q, u, x1]`` and ``enc2[q, v, x2]`` (or without the q index)."""
        e1, e2 = np.asarray(enc1, dtype=np.float64), np.asarray(enc2, dtype=np.float64)
        if e1.ndim == 2:
            e1, e2 = e1[None], e2[None]
        q = e1.shape[0]
        pq = np.full(q, 1.0 / q) if pq is None else np.asarray(pq, dtype=np.float64)
        k = e1[:, :, None, :, None] * e2[:, None, :, None, :]
        return cls(sources, Marginal(Alphabet.of_size(q), pq), k,
                   Alphabet.of_size(e1.shape[-1]), Alphabet.of_size(e2.shape[-1]))

    @property
    def dist(self) -> FactoredDist:
        mass = self.pq.p[:, None, None, None, None] * self.sources.mass[None, :, :, None, None] * self.kernel
        return FactoredDist([("q", self.pq.alphabet), ("u1", self.sources.rows), ("v1", self.sources.cols),
                             ("x1", self.x1), ("x2", self.x2)], mass)


@dataclass(frozen=True)
class DistortionSpec:
    d1: np.ndarray
    d2: np.ndarray

    def __post_init__(self):
        for name in ("d1", "d2"):
            d = np.array(getattr(self, name), dtype=np.float64)
            if d.ndim != 2 or np.any(d < 0) or not np.all(np.isfinite(d)):
                raise ValueError(f"{name} must be a finite nonnegative matrix")
            d.setflags(write=False)
            object.__setattr__(self, name, d)

    @classmethod
    def hamming(cls, nu: int, nv: int) -> "DistortionSpec":
        return cls(1.0 - np.eye(nu), 1.0 - np.eye(nv))


@dataclass(frozen=True)
class RatePoint:
    r1: float
    r2: float
    rsum: float

    def corners(self) -> tuple[tuple[float, float], tuple[float, float]]:
        """The two corner points of the pentagon ``R1 >= r1, R2 >= r2, R1 + R2 >= rsum``."""
        return ((self.r1, max(self.r2, self.rsum - self.r1)), (max(self.r1, self.rsum - self.r2), self.r2))


@dataclass(frozen=True)
class EntropyTriple:
    h_u_given_v: float
    h_v_given_u: float
    h_uv: float


@dataclass(frozen=True)
class ReconstructionMap:
    """``u_hat[q, x1, x2]`` and ``v_hat[q, x1, x2]`` as reconstruction-alphabet indices."""

    u_hat: np.ndarray
    v_hat: np.ndarray


@dataclass(frozen=True)
class SetVerdict:
    member: bool
    residual: float
    skipped: tuple[str, ...] = ()

    def __bool__(self) -> bool:
        return self.member


@dataclass(frozen=True)
class LatentVerdict:
    """Outcome of the bounded search for a shared latent variable."""

    member: bool
    w: int | None
    residual: float
    w_max: int
    residuals: tuple[float, ...] = ()

    def __bool__(self) -> bool:
        return self.member

    @property
    def status(self) -> str:
        return "member" if self.member else f"notFoundUpTo({self.w_max})"


def _as_dist(p) -> FactoredDist:
    return p.dist if isinstance(p, TestChannel) else p


def _given(dist: FactoredDist) -> list[str]:
    return ["q"] if "q" in dist.names else []


def _cond(t: np.ndarray, axes: tuple[int, ...]) -> tuple[np.ndarray, np.ndarray]:
    """Normalize ``t`` over ``axes``; also returns the mask of positive conditioning cells."""
    tot = t.sum(axis=axes, keepdims=True)
    return np.divide(t, tot, out=np.zeros_like(t), where=tot > 1e-12), tot > 1e-12


def _skipped_cells(dist: FactoredDist, names: Sequence[str]) -> tuple[str, ...]:
    w = dist.tensor(names)
    labels = [dist.alphabet(n).labels for n in names]
    return tuple("{" + ",".join(f"{n}={v}" for n, v in zip(names, cell)) + "}"
                 for cell in itertools.product(*labels) if w[tuple(dist.alphabet(n).index(v)
                                                                for n, v in zip(names, cell))] < 1e-12)


def sin_residual(p) -> float:
    dist = _as_dist(p)
    g = _given(dist)
    t = dist.tensor(g + ["u1", "v1", "x1", "x2"])
    cond, pos = _cond(t, (-2, -1))
    p1, _ = _cond(t.sum(axis=(-3, -1)), (-1,))  # p(x1 | q, u)
    p2, _ = _cond(t.sum(axis=(-4, -2)), (-1,))  # p(x2 | q, v)
    model = p1[..., :, None, :, None] * p2[..., None, :, None, :]
    diff = np.where(pos, np.abs(cond - model), 0.0)
    return float(diff.max())


def membership_Sin(p, tol: float = MARKOV_TOL) -> SetVerdict:
    dist = _as_dist(p)
    r = sin_residual(dist)
    return SetVerdict(r < tol, r, _skipped_cells(dist, _given(dist) + ["u1", "v1"]))


def sout1_residual(p) -> float:
    dist = _as_dist(p)
    g = _given(dist)
    res = 0.0
    for x, own, other in (("x1", "u1", "v1"), ("x2", "v1", "u1")):
        t = dist.tensor(g + [own, other, x])
        full, pos = _cond(t, (-1,))
        short, _ = _cond(t.sum(axis=-2), (-1,))
        res = max(res, float(np.where(pos, np.abs(full - short[..., :, None, :]), 0.0).max()))
    return res


def membership_Sout1(p, tol: float = MARKOV_TOL) -> SetVerdict:
    dist = _as_dist(p)
    r = sout1_residual(dist)
    return SetVerdict(r < tol, r, _skipped_cells(dist, _given(dist) + ["u1", "v1"]))


def _latent_fit(p: np.ndarray, w: int, restarts: int, rng: np.random.Generator,
                max_iter: int, tol: float) -> float:
    """Best residual of ``p(x1,x2|u,v) ~ sum_w pi_w A[w,u,x1] B[w,v,x2]`` over EM restarts."""
    nu, nv, n1, n2 = p.shape
    cond, pos = _cond(p, (-2, -1))
    pos = np.broadcast_to(pos, p.shape)
    pi = rng.dirichlet(np.ones(w), size=restarts)
    a = rng.dirichlet(np.ones(n1), size=(restarts, w, nu))
    b = rng.dirichlet(np.ones(n2), size=(restarts, w, nv))
    best = np.inf
    for it in range(max_iter):
        comp = pi[:, :, None, None, None, None] * a[:, :, :, None, :, None] * b[:, :, None, :, None, :]
        mix = comp.sum(axis=1)
        if it % 20 == 0 or it == max_iter - 1:
            res = np.where(pos[None], np.abs(mix - cond[None]), 0.0).reshape(restarts, -1).max(axis=1)
            best = min(best, float(res.min()))
            if best < tol:
                break
        resp = np.divide(comp, mix[:, None], out=np.zeros_like(comp), where=mix[:, None] > 0)
        wt = resp * p[None, None]
        pi = wt.sum(axis=(2, 3, 4, 5))
        pi /= pi.sum(axis=1, keepdims=True)
        a, _ = _cond(wt.sum(axis=(3, 5)), (-1,))
        b, _ = _cond(wt.sum(axis=(2, 4)), (-1,))
        # rows that carry no mass stay uniform so they do not collapse to zero
        a = np.where(a.sum(-1, keepdims=True) > 0, a, 1.0 / n1)
        b = np.where(b.sum(-1, keepdims=True) > 0, b, 1.0 / n2)
    return best


def membership_Sout2(p, w_max: int | None = None, restarts: int = DEFAULT_RESTARTS, seed: int = 0,
                     max_iter: int = 2000, tol: float = LATENT_TOL, prune: bool = True) -> LatentVerdict:
    """Search for a latent ``W`` independent of the sources with separate encoders given ``W``.

    Sizes 1 .. ``w_max`` are tried with ``restarts`` seeded EM runs each.
    Any such factorization satisfies both Markov conditions, so with
    ``prune`` a candidate whose Markov residual exceeds 1e-3 is rejected
    without searching.
    """
    dist = _as_dist(p)
    n1, n2 = len(dist.alphabet("x1")), len(dist.alphabet("x2"))
    w_max = n1 * n2 + 2 if w_max is None else int(w_max)
    if w_max < 1:
        raise ValueError("w_max must be >= 1")
    if prune and sout1_residual(dist) > PRUNE_TOL:
        return LatentVerdict(False, None, float("inf"), w_max)
    g = _given(dist)
    t = dist.tensor(g + ["u1", "v1", "x1", "x2"])
    slices = [t[i] / t[i].sum() for i in range(t.shape[0]) if t[i].sum() > 1e-12] if g else [t]
    residuals = []
    for w in range(1, w_max + 1):
        worst = 0.0
        for k, sl in enumerate(slices):
            rng = np.random.default_rng(np.random.SeedSequence([seed, w, k]))
            worst = max(worst, _latent_fit(sl, w, 1 if w == 1 else restarts, rng,
                                           2 if w == 1 else max_iter, tol))
            if worst >= tol:
                break
        residuals.append(worst)
        if worst < tol:
            return LatentVerdict(True, w, worst, w_max, tuple(residuals))
    return LatentVerdict(False, None, min(residuals), w_max, tuple(residuals))


def membership_Sout4(p, lambda2_uv: float) -> MembershipReport:
    """Spectral bounds conditioned on nothing, on u1, on v1 and on both."""
    dist = _as_dist(p)
    return intersection_membership(dist, lambda2_uv, ["u1"], ["v1"], extra_given=_given(dist))


def rd_rates(tc, check: bool = True) -> RatePoint:
    """``(I(U,V; X1 | X2, Q), I(U,V; X2 | X1, Q), I(U,V; X1, X2 | Q))`` in bits."""
    dist = _as_dist(tc)
    g = _given(dist)
    uv = ["u1", "v1"]
    r1 = mutual_information(dist, uv, ["x1"], ["x2"] + g)
    r2 = mutual_information(dist, uv, ["x2"], ["x1"] + g)
    rs = mutual_information(dist, uv, ["x1", "x2"], g)
    if check:
        i12 = mutual_information(dist, ["x1"], ["x2"], g)
        if min(r1, r2, rs) < -CHAIN_TOL or rs > r1 + r2 + i12 + CHAIN_TOL:
            raise ArithmeticError(f"rate consistency violated: {(r1, r2, rs, i12)}")
    return RatePoint(max(r1, 0.0), max(r2, 0.0), max(rs, 0.0))


def reconstruction_map(tc: TestChannel, ds: DistortionSpec) -> tuple[ReconstructionMap, float, float]:
    """Per-cell argmin reconstruction (first index wins ties) and its expected distortions."""
    dist = tc.dist
    t = dist.tensor(["q", "x1", "x2", "u1", "v1"])
    pu = t.sum(axis=-1)  # p(q, x1, x2, u)
    pv = t.sum(axis=-2)
    if ds.d1.shape[0] != pu.shape[-1] or ds.d2.shape[0] != pv.shape[-1]:
        raise ShapeMismatch("distortion tables do not match the source alphabets")
    cost_u = pu @ ds.d1  # [q, x1, x2, u_hat]
    cost_v = pv @ ds.d2
    u_hat, v_hat = cost_u.argmin(axis=-1), cost_v.argmin(axis=-1)
    return ReconstructionMap(u_hat, v_hat), float(cost_u.min(axis=-1).sum()), float(cost_v.min(axis=-1).sum())


def best_distortion(tc: TestChannel, ds: DistortionSpec) -> tuple[float, float]:
    _, e1, e2 = reconstruction_map(tc, ds)
    return e1, e2


@dataclass(frozen=True)
class SamplerConfig:
    budget: int = 200
    seed: int = 0
    x1_size: int = 2
    x2_size: int = 2
    q_size: int = 2
    w_max: int | None = None
    restarts: int = DEFAULT_RESTARTS
    max_budget: int = DEFAULT_MAX_BUDGET
    workers: int = 1

    def __post_init__(self):
        if self.budget > self.max_budget:
            raise BudgetExceeded(f"budget {self.budget} exceeds {self.max_budget}")
        if max(self.x1_size, self.x2_size, self.q_size) > 4 or min(self.x1_size, self.x2_size, self.q_size) < 1:
            raise ValueError("alphabet sizes must lie in 1..4")


def _random_rows(rng, shape, deterministic: bool) -> np.ndarray:
    if deterministic:
        return np.eye(shape[-1])[rng.integers(shape[-1], size=shape[:-1])]
    return rng.dirichlet(np.ones(shape[-1]), size=shape[:-1])


def sample_candidate(sources: JointDist, cfg: SamplerConfig, index: int) -> tuple[str, TestChannel]:
    """Candidate number ``index`` of the stream seeded by ``cfg.seed``.

    The stream mixes separate encoders, encoders sharing a binary latent
    and unconstrained kernels in equal proportion; a third of the
    encoder draws are deterministic maps.
    """
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, index]))
    kind = ("product", "shared", "general")[int(rng.integers(3))]
    nq = int(rng.integers(1, cfg.q_size + 1))
    pq = rng.dirichlet(np.ones(nq))
    nu, nv = sources.shape
    n1, n2 = cfg.x1_size, cfg.x2_size
    det = bool(rng.random() < 1 / 3)
    if kind == "product":
        k = (_random_rows(rng, (nq, nu, n1), det)[:, :, None, :, None]
             * _random_rows(rng, (nq, nv, n2), det)[:, None, :, None, :])
    elif kind == "shared":
        pw = rng.dirichlet(np.ones(2))
        e1 = _random_rows(rng, (nq, 2, nu, n1), det)
        e2 = _random_rows(rng, (nq, 2, nv, n2), det)
        k = np.einsum("w,qwux,qwvy->quvxy", pw, e1, e2)
    else:
        k = rng.dirichlet(np.ones(n1 * n2), size=(nq, nu, nv)).reshape(nq, nu, nv, n1, n2)
    tc = TestChannel(sources, Marginal(Alphabet.of_size(nq), pq), k, Alphabet.of_size(n1), Alphabet.of_size(n2))
    return kind, tc


def evaluate_predicate(name: str, tc: TestChannel, lambda2_uv: float, cfg: SamplerConfig) -> bool:
    if name == "sin":
        return membership_Sin(tc).member
    if name == "sout1":
        return membership_Sout1(tc).member
    if name == "sout2":
        return membership_Sout2(tc, cfg.w_max, cfg.restarts, cfg.seed).member
    if name == "sout4":
        return membership_Sout4(tc, lambda2_uv).passed
    if name == "sout2cap4":
        return membership_Sout4(tc, lambda2_uv).passed and membership_Sout2(tc, cfg.w_max, cfg.restarts,
                                                                            cfg.seed).member
    raise ValueError(f"unknown set predicate {name!r}; choose from {PREDICATES}")


@dataclass(frozen=True)
class SampleRecord:
    id: int
    kind: str
    rates: RatePoint
    distortion: tuple[float, float]
    within_distortion: bool
    verdicts: Mapping[str, bool]


@dataclass(frozen=True)
class RegionSample:
    """Sampled inner approximation of rate regions for several set predicates on one stream."""

    predicates: tuple[str, ...]
    records: tuple[SampleRecord, ...]
    containment: Mapping[tuple[str, str], bool] = field(default_factory=dict)

    def accepted(self, name: str) -> tuple[int, ...]:
        return tuple(r.id for r in self.records if r.within_distortion and r.verdicts[name])

    def points(self, name: str) -> list[tuple[int, float, float]]:
        """Corner rate pairs ``(id, r1, r2)`` of accepted samples."""
        out = []
        for r in self.records:
            if r.within_distortion and r.verdicts[name]:
                for c in r.rates.corners():
                    out.append((r.id, *c))
        return out

    def cross_table(self, first: str = "sout2", second: str = "sout4") -> dict[tuple[bool, bool], int]:
        table = {k: 0 for k in itertools.product((True, False), repeat=2)}
        for r in self.records:
            table[(r.verdicts[first], r.verdicts[second])] += 1
        return table


def _evaluate_chunk(args) -> list[SampleRecord]:
    sources, ds, d_max, preds, cfg, lam, ids = args
    out = []
    for i in ids:
        kind, tc = sample_candidate(sources, cfg, i)
        e1, e2 = best_distortion(tc, ds)
        verdicts = {name: evaluate_predicate(name, tc, lam, cfg) for name in preds}
        ok = e1 <= d_max[0] + 1e-12 and e2 <= d_max[1] + 1e-12
        out.append(SampleRecord(i, kind, rd_rates(tc), (e1, e2), ok, verdicts))
    return out


def rd_region_sample(sources: JointDist, distortion: tuple[float, float], ds: DistortionSpec,
                     predicates: Sequence[str] = PREDICATES, cfg: SamplerConfig = SamplerConfig()) -> RegionSample:
    """Evaluate every predicate on the same candidate stream and check region nesting.

    Candidate ``i`` depends only on ``(cfg.seed, i)``, so results do not
    depend on how the stream is split across workers.
    """
    preds = tuple(dict.fromkeys(predicates))
    for p in preds:
        if p not in PREDICATES:
            raise ValueError(f"unknown set predicate {p!r}; choose from {PREDICATES}")
    lam = spectral_lambda2(sources, restrict_support=True)
    ids = list(range(cfg.budget))
    workers = max(1, int(cfg.workers))
    chunks = [ids[k::workers] for k in range(workers)]
    jobs = [(sources, ds, distortion, preds, cfg, lam, c) for c in chunks if c]
    if workers == 1:
        results = [_evaluate_chunk(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_evaluate_chunk, jobs))
    records = tuple(sorted((r for chunk in results for r in chunk), key=lambda r: r.id))
    sample = RegionSample(preds, records)
    containment = {}
    for small, large in NESTED:
        if small in preds and large in preds:
            containment[(small, large)] = set(sample.accepted(small)) <= set(sample.accepted(large))
    return RegionSample(preds, records, containment)


def source_entropies(sources: JointDist) -> EntropyTriple:
    h = entropy(sources)
    return EntropyTriple(h - entropy(sources.py), h - entropy(sources.px), h)


def mac_distribution(tc: TestChannel, channel: Kernel) -> FactoredDist:
    """Joint of ``(q, u1, v1, x1, x2, y)``; ``channel`` rows are indexed by ``(x1, x2)``, x1-major."""
    n1, n2 = len(tc.x1), len(tc.x2)
    if channel.rows.shape[0] != n1 * n2:
        raise ShapeMismatch(f"channel has {channel.rows.shape[0]} input rows, expected {n1 * n2}")
    w = channel.rows.reshape(n1, n2, -1)
    base = tc.dist
    mass = base.mass[..., None] * w[None, None, None]
    return FactoredDist(list(base.axes) + [("y", channel.target)], mass)


def mac_rates(tc: TestChannel, channel: Kernel) -> EntropyTriple:
    """``(I(X1; Y | X2, V, Q), I(X2; Y | X1, U, Q), I(X1, X2; Y | Q))`` for the induced joint."""
    d = mac_distribution(tc, channel)
    return EntropyTriple(
        mutual_information(d, ["x1"], ["y"], ["x2", "v1", "q"]),
        mutual_information(d, ["x2"], ["y"], ["x1", "u1", "q"]),
        mutual_information(d, ["x1", "x2"], ["y"], ["q"]),
    )


def mare_check(tc: TestChannel, channel: Kernel, lambda2_uv: float | None = None,
               slack: float = RATE_SLACK) -> MembershipReport:
    """Necessary conditions for sending the sources losslessly over a multiple-access channel.

    Passes when the candidate meets the conditional spectral bounds in
    every q-slice and each source entropy is at most the matching
    mutual information (with ``slack``).  Constraint values are source
    entropies and bounds are the information quantities, so the margin of
    each rate constraint is ``bound - value``.
    """
    if lambda2_uv is None:
        lambda2_uv = spectral_lambda2(tc.sources, restrict_support=True)
    spectral = membership_Sout4(tc, lambda2_uv)
    h = source_entropies(tc.sources)
    i = mac_rates(tc, channel)
    rate = [Constraint(name, float(hv), float(iv), bool(hv <= iv + slack))
            for name, hv, iv in (("H(U|V)<=I(X1;Y|X2,V,Q)", h.h_u_given_v, i.h_u_given_v),
                                 ("H(V|U)<=I(X2;Y|X1,U,Q)", h.h_v_given_u, i.h_v_given_u),
                                 ("H(U,V)<=I(X1,X2;Y|Q)", h.h_uv, i.h_uv))]
    details = {"spectral_passed": spectral.passed, "rates_passed": all(c.passed for c in rate),
               "margins": {c.id: c.bound - c.value for c in rate}, **spectral.details}
    return MembershipReport.build("mac", tuple(spectral.constraints) + tuple(rate), spectral.skipped, details)
