import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from adaptrial import exp_family as ef
from adaptrial.exp_family import NormalKnownVar, NormalUnknownVar, SuffStat, TwoSampleBinomial

normal = NormalKnownVar()
tcase = NormalUnknownVar()
binom = TwoSampleBinomial()

prob = st.floats(0.01, 0.99)
mean = st.floats(-3, 3)
sd = st.floats(0.2, 3)


def test_mle_examples():
    assert ef.mle(normal, SuffStat(40, (12.0,))) == pytest.approx((0.3,))
    assert ef.mle(tcase, SuffStat.from_observations(tcase, [1, 3])) == pytest.approx((2.0, 1.0))
    p1, _ = ef.mle(binom, SuffStat(59, (15, 20), n_second=57))
    assert p1 == pytest.approx(15 / 59)
    assert p1 == pytest.approx(0.254, abs=5e-4)


def test_mle_needs_data():
    with pytest.raises(ef.InsufficientDataError):
        ef.mle(normal, SuffStat(0, (0.0,)))
    with pytest.raises(ef.InsufficientDataError):
        ef.mle(tcase, SuffStat(1, (1.0, 1.0)))


def test_binomial_boundary_mle_is_clipped():
    p1, p2 = ef.mle(binom, SuffStat(10, (0, 10)))
    assert p1 == pytest.approx(0.05)
    assert p2 == pytest.approx(0.95)
    assert math.isfinite(ef.constrained_kl(binom, (p1, p2), 0.0))


def test_kl_examples():
    assert ef.kl(normal, 0.3, 0.0) == pytest.approx(0.045)
    assert ef.kl(binom, (0.5, 0.5), (0.5, 0.5)) == 0
    assert ef.kl(tcase, (1.0, 2.0), (1.0, 2.0)) == pytest.approx(0, abs=1e-15)


@settings(max_examples=10_000, deadline=None)
@given(mean, mean)
def test_normal_kl_nonnegative(t, l):
    v = ef.kl(normal, t, l)
    assert v >= 0
    assert v == pytest.approx(oracles.normal_kl(t, l), abs=1e-12)
    if t == l:
        assert v == 0
    elif abs(t - l) > 1e-100:  # below that the square underflows
        assert v > 0


@settings(max_examples=10_000, deadline=None)
@given(mean, sd, mean, sd)
def test_unknown_var_kl_nonnegative(m1, s1, m2, s2):
    v = ef.kl(tcase, (m1, s1), (m2, s2))
    assert v >= -1e-12
    assert v == pytest.approx(oracles.normal_unknown_var_kl(m1, s1, m2, s2), abs=1e-9)
    if (m1, s1) == (m2, s2):
        assert v == pytest.approx(0, abs=1e-12)


@settings(max_examples=10_000, deadline=None)
@given(prob, prob, prob, prob)
def test_binomial_kl_nonnegative(p1, p2, q1, q2):
    v = ef.kl(binom, (p1, p2), (q1, q2))
    assert v >= -1e-12
    if (p1, p2) == (q1, q2):
        assert v == pytest.approx(0, abs=1e-12)
    elif max(abs(p1 - q1), abs(p2 - q2)) > 1e-6:
        assert v > 0


def test_constrained_kl_examples():
    assert ef.constrained_kl(tcase, (0.3, 1.0), 0.3) == 0
    assert ef.constrained_kl(binom, (0.254, 0.351), 0.351 - 0.254) == pytest.approx(0, abs=1e-12)
    want, _ = oracles.binomial_profile_grid(0.3, 0.5, 0.0, step=1e-6)
    assert ef.constrained_kl(binom, (0.3, 0.5), 0.0) == pytest.approx(want, abs=1e-9)


@settings(max_examples=200, deadline=None)
@given(mean, sd, mean)
def test_t_constrained_kl_closed_form(mu, s, delta):
    assert ef.constrained_kl(tcase, (mu, s), delta) == pytest.approx(oracles.t_constrained_kl(mu, s, delta))
    # infimum over sigma of the full KL, found numerically
    grid = np.exp(np.linspace(-4, 4, 20001))
    brute = min(oracles.normal_unknown_var_kl(mu, s, delta, g) for g in grid[::50])
    assert ef.constrained_kl(tcase, (mu, s), delta) <= brute + 1e-12


@settings(max_examples=300, deadline=None)
@given(st.sampled_from(["normal", "t", "binomial"]), st.data())
def test_constrained_kl_zero_at_own_value(kind, data):
    if kind == "normal":
        th = (data.draw(mean),)
        fam = normal
    elif kind == "t":
        th = (data.draw(mean), data.draw(sd))
        fam = tcase
    else:
        th = (data.draw(prob), data.draw(prob))
        fam = binom
    assert ef.constrained_kl(fam, th, fam.u(th)) == pytest.approx(0, abs=1e-12)
    assert ef.signed_root(fam, 50, th, fam.u(th)) == 0


@pytest.mark.parametrize(
    "fam,theta",
    [(normal, (0.3,)), (tcase, (0.4, 1.3)), (binom, (0.25, 0.4)), (binom, (0.7, 0.2))],
)
def test_constrained_kl_unimodal(fam, theta):
    u = fam.u(theta)
    if fam is binom:
        grid = np.linspace(-0.99, 0.99, 397)
    else:
        grid = np.linspace(u - 3, u + 3, 601)
    vals = np.array([ef.constrained_kl(fam, theta, d) for d in grid])
    left, right = vals[grid <= u], vals[grid >= u]
    assert np.all(np.diff(left) <= 1e-12)
    assert np.all(np.diff(right) >= -1e-12)


def test_binomial_profile_matches_grid_scan():
    rng = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(100):
        p1, p2 = rng.uniform(0.02, 0.98, 2)
        delta = rng.uniform(-0.9, 0.9)
        if max(0, -delta) >= min(1, 1 - delta) - 1e-3:
            continue
        want, _ = oracles.binomial_profile_grid(p1, p2, delta, step=1e-5)
        got = ef.constrained_kl(binom, (p1, p2), delta)
        worst = max(worst, abs(got - want))
    assert worst < 1e-4


def test_binomial_batch_matches_scalar():
    rng = np.random.default_rng(5)
    n = 58
    cum = rng.integers(1, n, size=(200, 2)).astype(float)
    for delta in (0.0, 0.097, -0.2):
        uhat, info = binom.glr_batch(n, cum, delta)
        for (s1, s2), u, i in zip(cum, uhat, info):
            th = binom.mle(SuffStat(n, (s1, s2)))
            assert u == pytest.approx(th[1] - th[0])
            assert i == pytest.approx(binom.constrained_kl(th, delta), abs=1e-9)


def test_t_batch_matches_scalar():
    rng = np.random.default_rng(6)
    x = rng.normal(0.2, 1.4, size=(50, 30))
    cum = ef.cumulative(tcase, x)
    uhat, info = tcase.glr_batch(30, cum[:, -1], 0.0)
    for row, u, i in zip(x, uhat, info):
        th = tcase.mle(SuffStat.from_observations(tcase, row))
        assert u == pytest.approx(th[0])
        assert i == pytest.approx(tcase.constrained_kl(th, 0.0))


def test_infeasible_constraint():
    with pytest.raises(ef.InfeasibleConstraintError):
        ef.constrained_kl(binom, (0.3, 0.5), 1.0)


def test_signed_root_examples():
    assert ef.signed_root(normal, 40, 0.3, 0.0) == pytest.approx(math.sqrt(40) * 0.3)
    assert ef.signed_root(normal, 40, 0.3, 0.0) == pytest.approx(1.897, abs=5e-4)
    sr = ef.signed_root(binom, 58, (0.254, 0.351), 0.0)
    ref = abs(oracles.arcsine(58, 0.254, 0.351))
    assert sr > 0
    assert abs(sr - ref) / ref < 0.15


@settings(max_examples=300, deadline=None)
@given(prob, prob, st.floats(-0.5, 0.5))
def test_signed_root_antisymmetric(p1, p2, delta):
    # mirroring both the estimate and the constraint about u flips the sign only
    a = ef.signed_root(binom, 40, (p1, p2), delta)
    b = ef.signed_root(binom, 40, (p2, p1), -delta)
    assert b == pytest.approx(-a, abs=1e-7)


@settings(max_examples=300, deadline=None)
@given(mean, sd, st.floats(-2, 2))
def test_signed_root_antisymmetric_t(mu, s, delta):
    a = ef.signed_root(tcase, 30, (mu, s), delta)
    b = ef.signed_root(tcase, 30, (-mu, s), -delta)
    assert b == pytest.approx(-a, abs=1e-12)


def test_arcsine_examples():
    assert ef.arcsine_stat(SuffStat(58, (20, 20))) == 0
    got = ef.arcsine_stat(SuffStat(58, (0.351 * 58, 0.254 * 58)))
    assert got == pytest.approx(oracles.arcsine(58, 0.351, 0.254), rel=1e-12)
    assert got == pytest.approx(1.1405, abs=5e-4)
    assert ef.arcsine_stat(SuffStat(58, (0.254 * 58, 0.351 * 58))) == pytest.approx(-got)


def test_arcsine_uses_own_group_sizes():
    got = ef.arcsine_stat(SuffStat(59, (15, 20), n_second=57))
    assert got == pytest.approx(oracles.arcsine(59, 15 / 59, 20 / 57))


def test_cumulative_matches_sampler_prefix():
    # a longer stream shares its prefix with a shorter one
    a = normal.sample_cumulative(np.random.default_rng(1), 0.2, 5, 30)
    b = normal.sample_cumulative(np.random.default_rng(1), 0.2, 5, 60)
    np.testing.assert_array_equal(a, b[:, :30])
    x = np.diff(np.concatenate([np.zeros((5, 1)), a[..., 0]], axis=1), axis=1)
    np.testing.assert_allclose(ef.cumulative(normal, x), a)


def test_family_specs():
    assert normal.dimension == 1 and tcase.dimension == 2 and binom.dimension == 2
    with pytest.raises(ValueError):
        NormalKnownVar(sigma=0)
    with pytest.raises(ValueError):
        binom.check_theta((0.0, 0.5))
    assert ef.as_family("binomial") == binom
