import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

import oracles
from corrspec.dpi import (
    ChainSpec, check_dpi, compose, conditional_necc_check, factorization_residual, intersection_membership,
    necc_check,
)
from corrspec.errors import AlphabetMismatch, SubsetExplosion
from corrspec.probcore import Alphabet, FactoredDist, JointDist, Kernel, bsc, bss, random_joint, random_kernel

A2 = Alphabet(("0", "1"))


def chain_bss_bsc(eps=0.25, delta=0.1):
    return ChainSpec(bss(eps), bsc(delta))


def single_letter(kernel1, kernel2, sources=None):
    """F over (u1, v1, x1, x2) for encoders p(x1|u) and p(x2|v)."""
    src = bss(0.25) if sources is None else sources
    m = np.einsum("uv,ux,vy->uvxy", src.mass, kernel1, kernel2)
    return FactoredDist([("u1", src.rows), ("v1", src.cols), ("x1", A2), ("x2", A2)], m)


def common_info():
    """X1 = (U, W), X2 = (V, W), W a fair bit."""
    src = bss(0.25)
    m = np.zeros((2, 2, 4, 4))
    for u, v, w in itertools.product(range(2), repeat=3):
        m[u, v, 2 * u + w, 2 * v + w] = src.mass[u, v] / 2
    ax = Alphabet.of_size(4)
    return FactoredDist([("u1", A2), ("v1", A2), ("x1", ax), ("x2", ax)], m)


def test_compose_examples():
    ch = ChainSpec(JointDist(A2, A2, np.diag([0.5, 0.5])), bsc(0.25))
    assert np.allclose(compose(ch).mass, bss(0.25).mass)
    const = Kernel(A2, A2, [[0.3, 0.7], [0.3, 0.7]])
    pxz = compose(ChainSpec(bss(0.25), const))
    assert np.allclose(pxz.mass, np.outer(pxz.px, pxz.py))


def test_alphabet_mismatch():
    with pytest.raises(AlphabetMismatch):
        ChainSpec(bss(0.25), Kernel(Alphabet(("a", "b")), A2, np.eye(2)))


def test_symmetric_cascade_is_tight():
    rep = check_dpi(chain_bss_bsc())
    assert rep.sigma_xz.lambda2 == pytest.approx(0.4, abs=1e-12)
    assert abs(rep.slack[0]) < 1e-10
    assert rep.holds


def test_constant_kernel():
    rep = check_dpi(ChainSpec(bss(0.25), Kernel(A2, A2, [[0.3, 0.7], [0.3, 0.7]])))
    assert rep.holds and rep.sigma_xz.lambda2 < 1e-12


@given(st.integers(0, 2**32 - 1), st.integers(2, 5), st.integers(2, 5), st.integers(2, 5))
def test_dpi_property(seed, nx, ny, nz):
    rng = np.random.default_rng(seed)
    pxy = random_joint(rng, nx, ny)
    k = random_kernel(rng, ny, nz)
    ch = ChainSpec(JointDist(pxy.rows, k.source, pxy.mass), k)
    rep = check_dpi(ch)
    assert rep.holds and min(rep.slack, default=0) >= -1e-8
    assert factorization_residual(ch) < 1e-10
    assert np.allclose(compose(ch).mass, oracles.compose_loops(pxy.mass, k.rows), atol=1e-15)
    # independent spectra recomputation
    assert np.allclose(rep.sigma_xz.lambdas[: min(nx, nz) - 1],
                       oracles.spectrum(compose(ch).mass)[1: min(nx, nz)], atol=1e-7)


@given(st.integers(0, 2**32 - 1))
def test_degradation_monotone(seed):
    rng = np.random.default_rng(seed)
    pxy = random_joint(rng, 3, 3)
    k1 = random_kernel(rng, 3, 3)
    k2 = random_kernel(rng, 3, 3)
    c1 = ChainSpec(JointDist(pxy.rows, k1.source, pxy.mass), k1)
    pxz = compose(c1)
    c2 = ChainSpec(JointDist(pxz.rows, k2.source, pxz.mass), k2)
    r2 = check_dpi(c2)
    assert all(b <= a * r2.sigma_yz.lambda2 + 1e-8 for a, b in zip(r2.sigma_xy.lambdas, r2.sigma_xz.lambdas))


def test_necc_examples():
    assert necc_check(JointDist.from_matrix([[0.25, 0.25], [0.25, 0.25]]), 0.3).passed
    rep = necc_check(JointDist.from_matrix(np.diag([0.5, 0.5])), 0.5)
    assert not rep.passed and rep.worst.id == "i=2"
    assert necc_check(bss(0.3), 0.5).passed  # lambda_2 = 0.4


def test_necc_monotone_in_bound(rng):
    j = random_joint(rng, 4, 4)
    lam = necc_check(j, 1.0).worst.value
    for b in np.linspace(0, 1, 21):
        assert necc_check(j, b).passed == (lam <= b + 1e-8)


def test_conditional_examples():
    f = single_letter(bsc(0.1).rows, bsc(0.1).rows)
    rep = conditional_necc_check(f, 0.5, ["u1"], ["v1"])
    assert rep.passed and all(c.value < 1e-12 for c in rep.constraints)
    same = single_letter(np.eye(2), np.eye(2), JointDist(A2, A2, np.diag([0.5, 0.5])))
    # copying through a perfectly correlated source still respects lambda_2 = 1
    assert conditional_necc_check(same, 1.0).passed
    x_eq_u = FactoredDist([("u1", A2), ("v1", A2), ("x1", A2), ("x2", A2)],
                          np.einsum("uv,ux,uy->uvxy", bss(0.25).mass, np.eye(2), np.eye(2)))
    rep = conditional_necc_check(x_eq_u, 0.5)
    assert not rep.passed and rep.worst.id == "{}:i=2"


def test_zero_probability_assignments_are_skipped():
    src = JointDist(A2, A2, [[0.5, 0.5], [0.0, 0.0]])
    f = single_letter(bsc(0.1).rows, bsc(0.1).rows, src)
    rep = conditional_necc_check(f, 0.5, ["u1"], [])
    assert rep.skipped == ("{u1=1}",)


def test_intersection_examples():
    f = single_letter(bsc(0.1).rows, bsc(0.1).rows)
    rep = intersection_membership(f, 0.5)
    assert rep.passed and len(rep.details["per_subset"]) == 4
    rep = intersection_membership(common_info(), 0.5)
    assert not rep.passed and rep.details["per_subset"]["U'={},V'={}"] is False


def test_parity_instance_matches_bruteforce():
    src = bss(0.25)
    puv = np.kron(src.mass, src.mass).reshape(2, 2, 2, 2)  # u1 v1 u2 v2 interleaved by kron
    # kron orders (u1,u2) x (v1,v2); reshape to u1,u2,v1,v2
    puv = np.kron(src.mass, src.mass).reshape(2, 2, 2, 2)
    m = np.zeros((2, 2, 2, 2, 2, 2))
    for u1, u2, v1, v2 in itertools.product(range(2), repeat=4):
        m[u1, u2, v1, v2, u1 ^ u2, v1] = puv[u1, u2, v1, v2]
    f = FactoredDist([("u1", A2), ("u2", A2), ("v1", A2), ("v2", A2), ("x1", A2), ("x2", A2)], m)
    lam = 0.5
    rep = intersection_membership(f, lam)
    # brute force each conditional spectrum with the eigen oracle
    names = ["u1", "u2", "v1", "v2"]
    expected = {}
    for r in range(5):
        for sub in itertools.combinations(names, r):
            su = [s for s in sub if s[0] == "u"]
            sv = [s for s in sub if s[0] == "v"]
            t = f.tensor(su + sv + ["x1", "x2"]).reshape(-1, 2, 2)
            worst = max((oracles.lambda2(s / s.sum()) for s in t if s.sum() > 1e-12), default=0.0)
            expected["U'={" + ",".join(su) + "},V'={" + ",".join(sv) + "}"] = worst <= lam + 1e-8
    assert rep.details["per_subset"] == expected
    assert rep.passed == all(expected.values())


def test_subset_cap():
    names = [("u%d" % i, A2) for i in range(1, 6)] + [("v%d" % i, A2) for i in range(1, 5)]
    m = np.full(2 ** 9 * 4, 1 / (2 ** 9 * 4))
    f = FactoredDist(names + [("x1", A2), ("x2", A2)], m)
    with pytest.raises(SubsetExplosion):
        intersection_membership(f, 0.5)
