"""Finite discrete distributions: joints, marginals, kernels and tensors.

Everything is stored as float64 numpy arrays that are flagged read-only
after construction, so instances can be shared freely between threads.

Information measures are in bits and use the convention 0 log 0 = 0.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import (
    NegativeEntry,
    ShapeMismatch,
    SizeOverflow,
    SumNotOne,
    UnknownAxis,
    ZeroEvent,
    ZeroMarginal,
)

SUM_TOL = 1e-9
IDENTITY_TOL = 1e-12
POSITIVE_TOL = 1e-12
DEFAULT_CELL_CAP = 2**22


def _frozen(arr) -> np.ndarray:
    out = np.array(arr, dtype=np.float64)
    out.setflags(write=False)
    return out


def _check_mass(mass: np.ndarray) -> None:
    if not np.all(np.isfinite(mass)):
        raise NegativeEntry("mass contains non-finite entries")
    if np.any(mass < 0):
        idx = tuple(int(i) for i in np.argwhere(mass < 0)[0])
        raise NegativeEntry(f"negative probability {mass[idx]!r} at index {idx}")
    total = float(mass.sum())
    if abs(total - 1.0) > SUM_TOL:
        raise SumNotOne(f"total mass {total!r} differs from 1 by more than {SUM_TOL}")


@dataclass(frozen=True)
class Alphabet:
    labels: tuple[str, ...]

    def __post_init__(self):
        labels = tuple(str(s) for s in self.labels)
        if not labels:
            raise ShapeMismatch("alphabet must be nonempty")
        if len(set(labels)) != len(labels):
            raise ShapeMismatch(f"alphabet labels must be unique: {labels}")
        object.__setattr__(self, "labels", labels)

    @classmethod
    def of_size(cls, k: int, prefix: str = "") -> "Alphabet":
        return cls(tuple(f"{prefix}{i}" for i in range(k)))

    def __len__(self) -> int:
        return len(self.labels)

    def index(self, label) -> int:
        if isinstance(label, (int, np.integer)) and str(label) not in self.labels:
            if 0 <= int(label) < len(self):
                return int(label)
        try:
            return self.labels.index(str(label))
        except ValueError:
            raise UnknownAxis(f"symbol {label!r} not in alphabet {self.labels}") from None

    def product(self, other: "Alphabet") -> "Alphabet":
        return Alphabet(tuple(f"{a},{b}" for a, b in itertools.product(self.labels, other.labels)))


@dataclass(frozen=True)
class Marginal:
    alphabet: Alphabet
    p: np.ndarray

    def __post_init__(self):
        p = _frozen(self.p)
        if p.shape != (len(self.alphabet),):
            raise ShapeMismatch(f"marginal of shape {p.shape} for alphabet of size {len(self.alphabet)}")
        _check_mass(p)
        object.__setattr__(self, "p", p)

    @property
    def sqrt(self) -> np.ndarray:
        """Entrywise square root, the top singular vector of a tilde matrix."""
        return np.sqrt(self.p)

    @property
    def is_positive(self) -> bool:
        return bool(np.all(self.p > POSITIVE_TOL))


@dataclass(frozen=True)
class Kernel:
    """Row-stochastic matrix ``rows[i, j] = Pr(target=j | source=i)``."""

    source: Alphabet
    target: Alphabet
    rows: np.ndarray

    def __post_init__(self):
        rows = _frozen(self.rows)
        if rows.shape != (len(self.source), len(self.target)):
            raise ShapeMismatch(
                f"kernel of shape {rows.shape} for alphabets {len(self.source)}x{len(self.target)}"
            )
        if np.any(rows < 0):
            raise NegativeEntry("kernel has a negative entry")
        sums = rows.sum(axis=1)
        if np.any(np.abs(sums - 1.0) > SUM_TOL):
            bad = int(np.argmax(np.abs(sums - 1.0)))
            raise SumNotOne(f"kernel row {bad} sums to {sums[bad]!r}")
        object.__setattr__(self, "rows", rows)


@dataclass(frozen=True)
class JointDist:
    """Joint pmf of a pair (X, Y); ``mass[i, j] = Pr(X=x_i, Y=y_j)``."""

    rows: Alphabet
    cols: Alphabet
    mass: np.ndarray

    def __post_init__(self):
        mass = _frozen(self.mass)
        if mass.shape != (len(self.rows), len(self.cols)):
            raise ShapeMismatch(
                f"mass of shape {mass.shape} for alphabets {len(self.rows)}x{len(self.cols)}"
            )
        _check_mass(mass)
        object.__setattr__(self, "mass", mass)

    @classmethod
    def from_matrix(cls, matrix, row_prefix: str = "x", col_prefix: str = "y") -> "JointDist":
        m = np.asarray(matrix, dtype=np.float64)
        if m.ndim != 2:
            raise ShapeMismatch("joint mass must be a matrix")
        return cls(Alphabet.of_size(m.shape[0], row_prefix), Alphabet.of_size(m.shape[1], col_prefix), m)

    @property
    def shape(self) -> tuple[int, int]:
        return self.mass.shape

    @property
    def px(self) -> np.ndarray:
        return self.mass.sum(axis=1)

    @property
    def py(self) -> np.ndarray:
        return self.mass.sum(axis=0)

    @property
    def has_zero_marginal(self) -> bool:
        return bool(np.any(self.px <= POSITIVE_TOL) or np.any(self.py <= POSITIVE_TOL))

    def transpose(self) -> "JointDist":
        return JointDist(self.cols, self.rows, self.mass.T)


def validate_joint(matrix, row_alphabet=None, col_alphabet=None) -> JointDist:
    """Build a :class:`JointDist`, raising the first invariant that fails.

    Zero marginals are allowed here; ``JointDist.has_zero_marginal`` flags
    them and the spectral routines reject them.
    """
    m = np.asarray(matrix, dtype=np.float64)
    if m.ndim != 2:
        raise ShapeMismatch("joint mass must be a matrix")
    rows = row_alphabet if isinstance(row_alphabet, Alphabet) else (
        Alphabet(tuple(row_alphabet)) if row_alphabet is not None else Alphabet.of_size(m.shape[0], "x")
    )
    cols = col_alphabet if isinstance(col_alphabet, Alphabet) else (
        Alphabet(tuple(col_alphabet)) if col_alphabet is not None else Alphabet.of_size(m.shape[1], "y")
    )
    return JointDist(rows, cols, m)


def marginals(joint: JointDist) -> tuple[Marginal, Marginal]:
    return Marginal(joint.rows, joint.px), Marginal(joint.cols, joint.py)


def conditional(joint: JointDist, given: str = "x") -> Kernel:
    """Kernel p(y|x) (``given="x"``) or p(x|y) (``given="y"``)."""
    if given not in ("x", "y"):
        raise ValueError("given must be 'x' or 'y'")
    mass = joint.mass if given == "x" else joint.mass.T
    source, target = (joint.rows, joint.cols) if given == "x" else (joint.cols, joint.rows)
    p = mass.sum(axis=1)
    if np.any(p <= POSITIVE_TOL):
        bad = source.labels[int(np.argmin(p))]
        raise ZeroMarginal(f"cannot condition on zero-probability symbol {bad!r}")
    return Kernel(source, target, mass / p[:, None])


def recompose(kernel: Kernel, marginal: Marginal) -> JointDist:
    """Inverse of :func:`conditional`: joint with rows indexed by the source."""
    return JointDist(kernel.source, kernel.target, marginal.p[:, None] * kernel.rows)


def kron(j1: JointDist, j2: JointDist, cap: int = DEFAULT_CELL_CAP) -> JointDist:
    """Joint of two independent pairs, ``mass[(i,j),(k,l)] = j1[i,k] * j2[j,l]``."""
    cells = j1.mass.size * j2.mass.size
    if cells > cap:
        raise SizeOverflow(f"product alphabet has {cells} cells, cap is {cap}")
    return JointDist(j1.rows.product(j2.rows), j1.cols.product(j2.cols), np.kron(j1.mass, j2.mass))


def kron_power(joint: JointDist, n: int, cap: int = DEFAULT_CELL_CAP) -> JointDist:
    if n < 1:
        raise ValueError("n must be >= 1")
    out = joint
    for _ in range(n - 1):
        out = kron(out, joint, cap=cap)
    return out


def random_simplex(rng: np.random.Generator, shape) -> np.ndarray:
    """Uniform draw from the probability simplex (normalized exponentials)."""
    x = rng.exponential(size=shape)
    return x / x.sum()


def random_joint(rng: np.random.Generator, nrows: int, ncols: int) -> JointDist:
    return JointDist.from_matrix(random_simplex(rng, (nrows, ncols)))


def random_kernel(rng: np.random.Generator, source: int, target: int) -> Kernel:
    x = rng.exponential(size=(source, target))
    return Kernel(Alphabet.of_size(source, "y"), Alphabet.of_size(target, "z"), x / x.sum(axis=1, keepdims=True))


def bss(crossover: float) -> JointDist:
    """Doubly symmetric binary source with the given crossover probability."""
    e = float(crossover)
    return JointDist(Alphabet(("0", "1")), Alphabet(("0", "1")),
                     np.array([[(1 - e) / 2, e / 2], [e / 2, (1 - e) / 2]]))


def bsc(crossover: float, source: Alphabet | None = None, target: Alphabet | None = None) -> Kernel:
    e = float(crossover)
    return Kernel(source or Alphabet(("0", "1")), target or Alphabet(("0", "1")),
                  np.array([[1 - e, e], [e, 1 - e]]))


class FactoredDist:
    """Joint pmf over named axes, kept in canonical (sorted-name) axis order.

    ``mass`` has one tensor dimension per axis, in the order of ``names``.
    """

    __slots__ = ("_axes", "_mass")

    def __init__(self, axes: Mapping[str, Alphabet] | Iterable[tuple[str, Alphabet]], mass):
        items = list(axes.items()) if isinstance(axes, Mapping) else list(axes)
        names = [str(n) for n, _ in items]
        if len(set(names)) != len(names):
            raise ShapeMismatch(f"duplicate axis names: {names}")
        alphs = [a if isinstance(a, Alphabet) else Alphabet(tuple(a)) for _, a in items]
        m = np.asarray(mass, dtype=np.float64)
        shape = tuple(len(a) for a in alphs)
        if m.shape != shape:
            if m.size == int(np.prod(shape)):
                m = m.reshape(shape)
            else:
                raise ShapeMismatch(f"mass of shape {m.shape} for axes of sizes {shape}")
        order = sorted(range(len(names)), key=lambda i: names[i])
        m = np.transpose(m, order) if len(order) > 1 else m
        _check_mass(m)
        self._axes = tuple((names[i], alphs[i]) for i in order)
        self._mass = _frozen(m)

    @property
    def axes(self) -> tuple[tuple[str, Alphabet], ...]:
        return self._axes

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(n for n, _ in self._axes)

    @property
    def mass(self) -> np.ndarray:
        return self._mass

    def alphabet(self, name: str) -> Alphabet:
        for n, a in self._axes:
            if n == name:
                return a
        raise UnknownAxis(f"no axis named {name!r}; axes are {self.names}")

    def axis_index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise UnknownAxis(f"no axis named {name!r}; axes are {self.names}") from None

    def __repr__(self) -> str:
        sizes = ", ".join(f"{n}:{len(a)}" for n, a in self._axes)
        return f"FactoredDist({sizes})"

    def marginalize(self, keep: Iterable[str]) -> "FactoredDist":
        keep = list(dict.fromkeys(keep))
        idx = [self.axis_index(n) for n in keep]
        drop = tuple(i for i in range(len(self._axes)) if i not in idx)
        m = self._mass.sum(axis=drop) if drop else self._mass
        kept = [self._axes[i] for i in sorted(idx)]
        return FactoredDist(kept, m)

    def condition(self, assignment: Mapping[str, object]) -> "FactoredDist":
        """Slice at ``assignment`` (axis name -> label or index) and renormalize."""
        sl: list = [slice(None)] * len(self._axes)
        for name, value in assignment.items():
            i = self.axis_index(name)
            sl[i] = self._axes[i][1].index(value)
        sub = self._mass[tuple(sl)]
        total = float(sub.sum())
        if total < POSITIVE_TOL:
            raise ZeroEvent(f"conditioning event {dict(assignment)} has probability {total!r}")
        rest = [ax for ax, s in zip(self._axes, sl) if isinstance(s, slice)]
        if not rest:
            raise ValueError("cannot condition on every axis")
        return FactoredDist(rest, sub / total)

    def tensor(self, names: Sequence[str]) -> np.ndarray:
        """Marginal tensor with dimensions in the requested order."""
        names = list(names)
        sub = self.marginalize(names)
        order = [sub.axis_index(n) for n in names]
        return np.transpose(sub.mass, order) if len(order) > 1 else sub.mass

    def joint(self, row_axes: Sequence[str], col_axes: Sequence[str]) -> JointDist:
        """Two-variable view grouping ``row_axes`` and ``col_axes`` into product symbols."""
        row_axes, col_axes = list(row_axes), list(col_axes)
        t = self.tensor(row_axes + col_axes)
        nr = int(np.prod([len(self.alphabet(n)) for n in row_axes]))
        return JointDist(_product_alphabet([self.alphabet(n) for n in row_axes]),
                         _product_alphabet([self.alphabet(n) for n in col_axes]),
                         t.reshape(nr, -1))

    @classmethod
    def from_joint(cls, joint: JointDist, row_name: str, col_name: str) -> "FactoredDist":
        return cls([(row_name, joint.rows), (col_name, joint.cols)], joint.mass)


def _product_alphabet(alphs: Sequence[Alphabet]) -> Alphabet:
    out = alphs[0]
    for a in alphs[1:]:
        out = out.product(a)
    return out


def _xlogx_sum(p: np.ndarray) -> float:
    p = p[p > 0]
    return float(-(p * np.log2(p)).sum())


def entropy(dist, axes: Sequence[str] | None = None) -> float:
    """Shannon entropy in bits of a Marginal, a probability vector, or named axes of a FactoredDist."""
    if isinstance(dist, Marginal):
        return _xlogx_sum(dist.p)
    if isinstance(dist, FactoredDist):
        if axes is None:
            return _xlogx_sum(dist.mass.ravel())
        axes = list(axes)
        if not axes:
            return 0.0
        return _xlogx_sum(dist.marginalize(axes).mass.ravel())
    if isinstance(dist, JointDist):
        return _xlogx_sum(dist.mass.ravel())
    return _xlogx_sum(np.asarray(dist, dtype=np.float64).ravel())


def conditional_entropy(dist: FactoredDist, target: Sequence[str], given: Sequence[str] = ()) -> float:
    target, given = list(target), list(given)
    return entropy(dist, target + given) - entropy(dist, given)


def mutual_information(dist: FactoredDist, group_a: Sequence[str], group_b: Sequence[str],
                       given: Sequence[str] = ()) -> float:
    """I(A; B | C) in bits, from the entropy identity H(AC)+H(BC)-H(ABC)-H(C)."""
    a, b, c = list(group_a), list(group_b), list(given)
    if set(a) & set(b) or set(a) & set(c) or set(b) & set(c):
        raise ValueError("information groups must be disjoint")
    return (entropy(dist, a + c) + entropy(dist, b + c)
            - entropy(dist, a + b + c) - entropy(dist, c))


def binary_entropy(p: float) -> float:
    return _xlogx_sum(np.array([p, 1.0 - p]))
