import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

import oracles
from corrspec.binary import (
    CSV_HEADER, BinaryScenario, bounds, curve_data, extreme_point_max, outer2_batch, parametrized_tilde,
    signed_lambda, signed_lambda_batch, xi_values,
)
from corrspec.errors import DegenerateMarginal, NonIntegralCount, NotBinary
from corrspec.probcore import JointDist, bss, random_joint
from corrspec.spectral import lambda2, untilde

R = 1 / math.sqrt(2)
unit = st.floats(0.01, 0.99)


def test_xi_examples():
    xi = xi_values(R, R)
    assert (xi.xi1, xi.xi2, xi.xi3) == pytest.approx((1, 1, 1), abs=1e-12)
    xi = xi_values(math.sqrt(0.2), math.sqrt(0.5))
    assert (xi.xi1, xi.xi2, xi.xi3) == pytest.approx((0.5, 0.5, 0.5), abs=1e-12)


@given(unit, unit)
def test_xi_closed_forms_and_symmetry(a2, b2):
    a, b = math.sqrt(a2), math.sqrt(b2)
    xi, sw = xi_values(a, b), xi_values(b, a)
    ref = oracles.xi_closed_forms(a2, b2)
    assert (xi.xi1, xi.xi2, xi.xi3) == pytest.approx(ref, rel=1e-12)
    assert sw.xi1 == pytest.approx(xi.xi1) and sw.xi2 == pytest.approx(xi.xi2)
    assert all(0 < x <= 1 + 1e-12 for x in (xi.xi1, xi.xi2, xi.xi3))


def test_degenerate_marginal():
    with pytest.raises(DegenerateMarginal):
        xi_values(0.0, 0.5)
    with pytest.raises(DegenerateMarginal):
        BinaryScenario(0.5, 1.0, 0.5)


def test_bounds_examples():
    bs = bounds(BinaryScenario(0.5, R, R))
    for iv in (bs.outer1, bs.outer2, bs.inner):
        assert iv == pytest.approx((-0.5, 0.5), abs=1e-12)
    bs = bounds(BinaryScenario.from_squares(0.5, 0.2, 0.5))
    assert bs.outer1 == pytest.approx((-0.5, 0.5), abs=1e-12)
    assert bs.outer2 == pytest.approx((-0.375, 0.375), abs=1e-12)
    assert bs.inner == pytest.approx((-0.25, 0.25), abs=1e-12)
    bs = bounds(BinaryScenario(0.0, 0.3, 0.6))
    for iv in (bs.outer1, bs.outer2, bs.inner):
        assert iv == pytest.approx((0, 0), abs=0)


@pytest.mark.parametrize("lam", [0.1, 0.5, 0.9])
def test_containment_grid(lam):
    data = curve_data(lam, 99, full_grid=True)
    assert data.shape == (99 * 99, len(CSV_HEADER))
    assert not np.isnan(data).any()
    o1, o2, inn = data[:, 2:4], data[:, 4:6], data[:, 6:8]
    tol = 1e-12
    assert np.all(o1[:, 0] - tol <= o2[:, 0]) and np.all(o2[:, 1] <= o1[:, 1] + tol)
    assert np.all(o2[:, 0] - tol <= inn[:, 0]) and np.all(inn[:, 1] <= o2[:, 1] + tol)


def test_curve_examples():
    diag = curve_data(0.5, 99)
    row = diag[np.argmin(np.abs(diag[:, 0] - R))]
    assert row[[3, 5, 7]] == pytest.approx((0.5, 0.5, 0.5), abs=1e-12)
    full = curve_data(0.5, 99, full_grid=True)
    i = np.argmin(np.abs(full[:, 0] ** 2 - 0.2) + np.abs(full[:, 1] ** 2 - 0.5))
    assert full[i, [3, 5, 7]] == pytest.approx((0.5, 0.375, 0.25), abs=1e-12)
    assert np.all(curve_data(0.0, 10)[:, 2:] == 0)


def test_signed_lambda_examples():
    assert signed_lambda(JointDist.from_matrix([[0.25, 0.25], [0.25, 0.25]])) == pytest.approx(0, abs=1e-15)
    assert signed_lambda(bss(0.25)) == pytest.approx(0.5, abs=1e-12)
    assert signed_lambda(JointDist.from_matrix([[0, 0.5], [0.5, 0]])) == pytest.approx(-1, abs=1e-12)
    with pytest.raises(NotBinary):
        signed_lambda(random_joint(np.random.default_rng(0), 2, 3))


@given(unit, unit, st.floats(-1, 1))
def test_parametrization_roundtrip(a2, b2, t):
    a, b = math.sqrt(a2), math.sqrt(b2)
    # only lambdas inside [-xi2, xi1] give nonnegative joints
    xi = xi_values(a, b)
    lam = t * (xi.xi1 if t > 0 else xi.xi2)
    j = untilde(parametrized_tilde(a, b, lam))
    assert signed_lambda(j) == pytest.approx(lam, abs=1e-10)
    assert abs(lam) == pytest.approx(lambda2(j), abs=1e-9)


@given(st.integers(0, 2**32 - 1))
def test_signed_magnitude_is_lambda2(seed):
    j = random_joint(np.random.default_rng(seed), 2, 2)
    assert abs(signed_lambda(j)) == pytest.approx(oracles.lambda2(j.mass), abs=1e-9)


def test_batch_matches_scalar(rng):
    ms = rng.exponential(size=(100, 2, 2))
    ms[::10, 0, :] = 0
    lam, a, b = signed_lambda_batch(ms)
    for m, l_, a_ in zip(ms, lam, a):
        j = m / m.sum()
        if j.sum(1).min() <= 1e-12:
            assert l_ == 0 and np.isnan(a_)
        else:
            assert l_ == pytest.approx(signed_lambda(JointDist.from_matrix(j)), abs=1e-12)
    lo, hi = outer2_batch(a, b, 0.5)
    for a_, b_, l_, h_ in zip(a, b, lo, hi):
        if not np.isnan(a_):
            ref = bounds(BinaryScenario(0.5, a_, b_)).outer2
            assert (l_, h_) == pytest.approx(ref, abs=1e-12)


def test_z_channel_encoders_reach_inner_endpoint():
    # X = 0 only when U = 0, with probability 0.4, gives P(X=0) = 0.2
    enc = np.array([[0.4, 0.6], [0.0, 1.0]])
    src = bss(0.25)
    j = JointDist.from_matrix(enc.T @ src.mass @ enc)
    bs = bounds(BinaryScenario.from_squares(0.5, 0.2, 0.2))
    assert abs(signed_lambda(j)) == pytest.approx(bs.inner[1], abs=1e-12)


def test_extreme_examples():
    assert extreme_point_max(R, R, 1) == pytest.approx(1, abs=1e-12)
    a, b = 0.5, R
    assert extreme_point_max(a, b, 2) == pytest.approx(oracles.vertex_pairs_max(a, b, 2), abs=1e-12)
    assert extreme_point_max(a, b, 2) == pytest.approx(xi_values(a, b).xi1, abs=1e-12)
    with pytest.raises(NonIntegralCount):
        extreme_point_max(math.sqrt(0.3), R, 2)


def _integral_configs(max_n):
    for n in range(1, max_n + 1):
        for ka in range(1, 2**n):
            for kb in range(1, 2**n):
                yield n, ka, kb


def test_extreme_all_integral_configs():
    for n, ka, kb in _integral_configs(6):
        a, b = math.sqrt(ka / 2**n), math.sqrt(kb / 2**n)
        assert abs(extreme_point_max(a, b, n) - xi_values(a, b).xi1) < 1e-10


@pytest.mark.parametrize("n", [1, 2, 3])
def test_extreme_against_lp_and_bruteforce(n):
    for _, ka, kb in (c for c in _integral_configs(n) if c[0] == n):
        a, b = math.sqrt(ka / 2**n), math.sqrt(kb / 2**n)
        v = extreme_point_max(a, b, n)
        assert v == pytest.approx(oracles.polytope_lp_max(a, b, n), abs=1e-9)
        assert v == pytest.approx(oracles.vertex_pairs_max(a, b, n), abs=1e-12)


@pytest.mark.parametrize("n", [4, 5, 6])
def test_extreme_against_lp(n):
    for _, ka, kb in (c for c in _integral_configs(n) if c[0] == n and (c[1] + c[2]) % 3 == 0):
        a, b = math.sqrt(ka / 2**n), math.sqrt(kb / 2**n)
        assert extreme_point_max(a, b, n) == pytest.approx(oracles.polytope_lp_max(a, b, n), abs=1e-9)
