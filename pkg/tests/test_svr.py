import dataclasses
import warnings

import numpy as np
import pytest

from oracles import primal_tight, rbf_gram
from rpsvr.data import Dataset, fit_scaling
from rpsvr.errors import ValidationError
from rpsvr.kernels import KernelSpec
from rpsvr.svr import (
    HyperParams,
    compute_bias,
    fit,
    load_model,
    predict,
    save_model,
    sparsity_percent,
    verify_propositions,
)

LIN = KernelSpec("linear")


def random_data(rng, l_max=50, n=2):
    l = int(rng.integers(5, l_max + 1))
    X = rng.uniform(-3, 3, size=(l, n))
    y = np.sin(X[:, 0]) + 0.5 * X[:, -1] + 0.1 * rng.normal(size=l)
    return Dataset(X, y)


def random_params(rng, eps_svr=False):
    kern = KernelSpec("rbf", float(rng.uniform(0.5, 4)))
    C = float(rng.uniform(0.2, 5))
    eps = float(rng.uniform(0.01, 0.3))
    if eps_svr:
        return HyperParams.eps_svr(C, eps, kern)
    t1 = float(rng.uniform(0.05, 1.0))
    return HyperParams(C, eps, t1, t1 + float(rng.uniform(0.1, 2.0)), kern)


@pytest.mark.parametrize("kwargs", [
    dict(C=0.0, eps=0.1), dict(C=1.0, eps=0.0), dict(C=1.0, eps=0.1, tau1=-0.1),
    dict(C=1.0, eps=0.1, tau1=0.6, tau2=0.5), dict(C=float("nan"), eps=0.1),
    dict(C=1.0, eps=0.1, tau1=0.0, tau2=0.0),
])
def test_hyperparams_validation(kwargs):
    with pytest.raises(ValidationError):
        HyperParams(**kwargs)


def test_hyperparams_roundtrip():
    hp = HyperParams(2.0, 0.1, 0.3, 1.2, KernelSpec("rbf", 4.0))
    assert HyperParams.from_dict(hp.to_dict()) == hp
    assert (hp.lo, hp.hi) == pytest.approx((0.6, 2.4))
    assert HyperParams.eps_svr(1.0, 0.1).is_eps_svr


@pytest.mark.parametrize("tau1, tau2", [(0.0, 1.0), (0.5, 1.5)])
def test_two_point_model(l2_data, tau1, tau2):
    m = fit(l2_data, HyperParams(1.0, 0.1, tau1, tau2, LIN), tol=1e-12)
    w = float(m.support_points[:, 0] @ m.coefficients)
    assert w == pytest.approx(0.8, abs=1e-12)
    assert m.bias == pytest.approx(0.1, abs=1e-12)
    assert predict(m, np.array([[0.5]]))[0] == pytest.approx(0.5, abs=1e-12)
    assert m.diagnostics["kkt_residual"] <= 1e-8


def test_two_point_interior_sets(l2_data):
    m = fit(l2_data, HyperParams.eps_svr(1.0, 0.1, LIN), tol=1e-12)
    assert m.s2.tolist() == [0] and m.s1.tolist() == [1]
    assert compute_bias(m.solution, l2_data, m.params) == pytest.approx(0.1, abs=1e-12)


def test_constant_targets():
    rng = np.random.default_rng(0)
    d = Dataset(rng.normal(size=(12, 2)), np.full(12, 3.25))
    hp = HyperParams(1.0, 0.2, 0.3, 1.1, KernelSpec("rbf", 1.0))
    m = fit(d, hp)
    assert m.n_support == 0
    assert m.bias == 3.25
    np.testing.assert_array_equal(predict(m, rng.normal(size=(5, 2))), 3.25)
    report = verify_propositions(m, d)
    assert report.ok and report.n_inside == 12


def test_degenerate_taus_warn_and_return_zero_model():
    d = Dataset(np.array([[0.0], [1.0], [2.0]]), np.array([0.0, 1.0, 4.0]))
    with pytest.warns(RuntimeWarning):
        m = fit(d, HyperParams(1.0, 0.1, 0.7, 0.7, LIN))
    assert m.n_support == 0
    assert m.bias == pytest.approx(2.0)
    np.testing.assert_array_equal(predict(m, np.array([[5.0]])), [m.bias])


def test_needs_two_points():
    with pytest.raises(ValidationError):
        fit(Dataset(np.array([[0.0]]), np.array([1.0])), HyperParams.eps_svr(1.0, 0.1))


def test_sparsity_examples():
    assert sparsity_percent(np.array([0.0, 0.0, 1.0, -1.0])) == 50.0
    assert sparsity_percent(np.zeros(7)) == 100.0
    assert sparsity_percent(np.array([1.0, -2.0, 0.5])) == 0.0


def test_support_points_reproduce_training_values():
    rng = np.random.default_rng(1)
    d = random_data(rng)
    hp = random_params(rng)
    m = fit(d, hp)
    G = rbf_gram(d.features, hp.kernel.q)
    f_train = G @ m.solution.gamma + m.bias
    np.testing.assert_allclose(predict(m, m.support_points), f_train[m.support_indices],
                               rtol=0, atol=1e-10)
    assert np.all(np.abs(m.coefficients) > hp.zero_tol)


def test_model_invariants_and_soundness():
    rng = np.random.default_rng(2)
    for _ in range(10):
        d = random_data(rng)
        hp = random_params(rng)
        m = fit(d, hp)
        u1, u2 = m.solution.u1, m.solution.u2
        assert np.all((u1[m.s1] > hp.lo) & (u1[m.s1] < hp.hi))
        assert np.all((u2[m.s2] > hp.lo) & (u2[m.s2] < hp.hi))
        r = d.targets - predict(m, d.features)
        inside = np.flatnonzero(np.abs(r) < hp.eps - 1e-6)
        assert not set(inside) & set(m.support_indices.tolist())
        # interior points sit on the tube boundary once b is applied
        np.testing.assert_allclose(r[m.s1], hp.eps, atol=1e-6)
        np.testing.assert_allclose(r[m.s2], -hp.eps, atol=1e-6)


def test_primal_dual_gap():
    rng = np.random.default_rng(3)
    for k in range(15):
        d = random_data(rng)
        hp = random_params(rng, eps_svr=k % 3 == 0)
        m = fit(d, hp)
        G = rbf_gram(d.features, hp.kernel.q)
        g = m.solution.gamma
        primal = primal_tight(g @ G @ g, G @ g + m.bias, d.targets, hp.C, hp.eps, hp.tau1, hp.tau2)
        obj = m.solution.objective
        assert primal + obj == pytest.approx(0.0, abs=1e-5 * (1 + abs(obj)))


def test_verify_detects_perturbation():
    rng = np.random.default_rng(4)
    d = random_data(rng)
    hp = HyperParams(1.0, 0.3, 0.4, 1.5, KernelSpec("rbf", 2.0))
    m = fit(d, hp)
    assert verify_propositions(m, d).ok
    r = d.targets - predict(m, d.features)
    inside = np.flatnonzero(np.abs(r) < hp.eps - 1e-3)
    assert inside.size
    i = int(inside[0])
    g = m.full_gamma()
    # above zero_tol, small enough that no other residual moves by the margin
    g[i] = 1e-7
    keep = np.flatnonzero(g != 0)
    bad = dataclasses.replace(m, coefficients=g[keep], support_indices=keep,
                              support_points=d.features[keep])
    report = verify_propositions(bad, d)
    assert report.violating_indices == [i]
    assert any(v.proposition == 3 for v in report.violations)


def test_verify_preconditions():
    rng = np.random.default_rng(5)
    d = random_data(rng)
    m = fit(d, HyperParams.eps_svr(1.0, 0.1, KernelSpec("rbf", 1.0)))
    assert verify_propositions(m, d).ok
    with pytest.raises(ValidationError):
        verify_propositions(m, d, HyperParams(1.0, 0.1, 0.5, 0.5, KernelSpec("rbf", 1.0)))
    m2 = fit(d, HyperParams(1.0, 0.1, 0.2, 1.0, KernelSpec("rbf", 1.0)))
    with pytest.raises(ValidationError):
        verify_propositions(m2, d.subset(np.arange(3)))


def test_roundtrip_bit_identical(tmp_path):
    rng = np.random.default_rng(6)
    d = random_data(rng)
    hp = random_params(rng)
    m = fit(d, hp, scaling=fit_scaling(d))
    path = tmp_path / "m.json"
    save_model(m, path)
    back = load_model(path)
    Z = rng.uniform(-4, 4, size=(40, 2))
    assert np.array_equal(predict(m, Z), predict(back, Z))
    assert back.params == m.params and back.bias == m.bias
    assert back.diagnostics == m.diagnostics


def test_roundtrip_zero_model(tmp_path):
    d = Dataset(np.zeros((3, 2)), np.ones(3))
    m = fit(d, HyperParams.eps_svr(1.0, 0.5, LIN))
    save_model(m, tmp_path / "z.json")
    back = load_model(tmp_path / "z.json")
    assert predict(back, np.ones((2, 2))).tolist() == [1.0, 1.0]


def test_load_rejects_foreign_json(tmp_path):
    p = tmp_path / "x.json"
    p.write_text('{"format": "other"}')
    with pytest.raises(ValidationError):
        load_model(p)


def test_predict_dimension_mismatch():
    rng = np.random.default_rng(7)
    d = random_data(rng)
    m = fit(d, random_params(rng))
    with pytest.raises(ValidationError):
        predict(m, np.zeros((2, 3)))
    ms = fit(d, random_params(rng), scaling=fit_scaling(d))
    with pytest.raises(ValidationError):
        predict(ms, np.zeros((2, 3)))


def test_scaled_model_applies_scaling():
    rng = np.random.default_rng(8)
    d = random_data(rng)
    s = fit_scaling(d)
    hp = random_params(rng)
    m = fit(d, hp, scaling=s)
    plain = fit(Dataset(s.transform(d.features), d.targets), hp)
    Z = rng.uniform(-3, 3, size=(10, 2))
    np.testing.assert_allclose(predict(m, Z), predict(plain, s.transform(Z)), atol=1e-12)


def test_reference_solver_option():
    rng = np.random.default_rng(9)
    d = random_data(rng, 25)
    hp = random_params(rng)
    a = fit(d, hp, tol=1e-9)
    b = fit(d, hp, tol=1e-9, solver="reference")
    np.testing.assert_allclose(predict(a, d.features), predict(b, d.features), atol=1e-6)


def test_fit_emits_no_warnings_normally():
    rng = np.random.default_rng(10)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        fit(random_data(rng), random_params(rng))
