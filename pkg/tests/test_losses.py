import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import density_mass
from rpsvr.errors import ValidationError
from rpsvr.losses import (
    LossParams,
    eps_insensitive,
    huber_loss,
    influence,
    laplace_loss,
    rp_density,
    rp_loss,
    rp_normalizer,
    sign_nonpositive_negative,
)

P = LossParams(tau1=0.5, tau2=2.0, eps=2.0)


@pytest.mark.parametrize("u, expected", [(5.0, 6.0), (1.0, -0.5), (2.0, 0.0), (-2.0, 0.0)])
def test_rp_loss_examples(u, expected):
    assert rp_loss(u, P) == expected


def test_eps_insensitive_examples():
    assert eps_insensitive(5.0, 2.0) == 3.0
    assert eps_insensitive(1.0, 2.0) == 0.0


def test_rp_reduces_to_eps_insensitive():
    u = np.random.default_rng(0).normal(scale=5, size=1000)
    np.testing.assert_array_equal(rp_loss(u, LossParams(0.0, 1.0, 1.3)), eps_insensitive(u, 1.3))


def test_influence_examples():
    assert influence(1.0, P) == 0.5
    assert influence(-3.0, P) == -2.0


def test_sign_convention_at_zero():
    assert sign_nonpositive_negative(0.0) == -1.0
    assert influence(0.0, P) == -0.5


def test_convexity_guard():
    with pytest.raises(ValidationError):
        LossParams(tau1=-0.5, tau2=1.0, eps=2.0)
    with pytest.raises(ValidationError):
        LossParams(tau1=2.0, tau2=1.0, eps=1.0)
    with pytest.raises(ValidationError):
        LossParams(tau1=0.1, tau2=1.0, eps=0.0)
    p = LossParams(tau1=-0.5, tau2=1.0, eps=2.0, allow_nonconvex=True)
    assert rp_loss(0.0, p) == 1.0


def test_huber_and_laplace():
    assert huber_loss(0.5, 1.0) == 0.125
    assert huber_loss(2.0, 1.0) == 1.5
    assert laplace_loss(-3.0) == 3.0
    with pytest.raises(ValidationError):
        huber_loss(1.0, 0.0)


params = st.builds(
    lambda t1, extra, eps: LossParams(t1, t1 + extra, eps),
    st.floats(0, 3), st.floats(0, 3), st.floats(0.01, 5),
)


@settings(max_examples=200, deadline=None)
@given(params, st.floats(-50, 50), st.floats(-50, 50), st.floats(0, 1))
def test_convexity(p, a, b, lam):
    lhs = rp_loss(lam * a + (1 - lam) * b, p)
    rhs = lam * rp_loss(a, p) + (1 - lam) * rp_loss(b, p)
    assert lhs <= rhs + 1e-9 * (1 + abs(rhs))


@settings(max_examples=200, deadline=None)
@given(params, st.floats(-1e3, 1e3))
def test_symmetry_and_lower_bound(p, u):
    assert rp_loss(u, p) == rp_loss(-u, p)
    assert rp_loss(u, p) >= rp_loss(0.0, p) == -p.tau1 * p.eps or p.tau1 * p.eps == 0


@settings(max_examples=200, deadline=None)
@given(params, st.floats(-1e3, 1e3))
def test_influence_bounded(p, u):
    assert abs(influence(u, p)) <= p.tau2


def test_density_laplace_case():
    p = LossParams(1.0, 1.0, 0.7)
    xi = np.linspace(-20, 20, 2001)
    np.testing.assert_allclose(rp_density(xi, p), 0.5 * np.exp(-np.abs(xi)), rtol=1e-10, atol=0)


def test_density_eps_insensitive_constant():
    for eps in (0.1, 1.0, 2.5):
        p = LossParams(0.0, 1.0, eps)
        assert 1.0 / rp_normalizer(p) == pytest.approx(1.0 / (2.0 * (1.0 + eps)), rel=1e-15)


def test_normalizer_small_tau1_continuity():
    a = rp_normalizer(LossParams(0.0, 1.5, 0.8))
    b = rp_normalizer(LossParams(1e-12, 1.5, 0.8))
    assert a == pytest.approx(b, rel=1e-10)


def test_normalizer_needs_positive_tau2():
    with pytest.raises(ValidationError):
        rp_normalizer(LossParams(0.0, 0.0, 1.0))


@settings(max_examples=25, deadline=None)
@given(params)
def test_density_unit_mass(p):
    if p.tau2 < 0.05:
        p = LossParams(p.tau1, p.tau2 + 0.05, p.eps)
    mass = density_mass(lambda x: rp_density(x, p), p.tau2, p.eps)
    assert mass == pytest.approx(1.0, abs=1e-6)
    assert math.isfinite(mass)
