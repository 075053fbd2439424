import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import feature_weights, grid_oracle_linear_1d, rbf_gram
from rpsvr.errors import ConvergenceError, ValidationError
from rpsvr.qp import (
    DualSolution,
    ReducedDual,
    kkt_residual,
    multipliers,
    solve_full_oracle,
    solve_reference,
    solve_smo,
    split_gamma,
)
from rpsvr.qp.oracle import project_box_hyperplane
from rpsvr.qp.problem import recover_bias

G2 = np.array([[0.0, 0.0], [0.0, 1.0]])
Y2 = np.array([0.0, 1.0])


def random_instance(rng, l_max=10, kind=None):
    l = int(rng.integers(2, l_max + 1))
    n = int(rng.integers(1, 4))
    X = rng.uniform(-2, 2, size=(l, n))
    y = np.sin(X.sum(1)) + 0.2 * rng.normal(size=l)
    kind = kind or ("rbf" if rng.random() < 0.7 else "linear")
    G = rbf_gram(X, float(rng.uniform(0.3, 4.0))) if kind == "rbf" else X @ X.T
    C = float(rng.uniform(0.1, 5.0))
    tau1 = float(rng.uniform(0.05, 1.0))
    tau2 = tau1 + float(rng.uniform(0.1, 2.0))
    eps = float(rng.uniform(0.01, 0.5))
    return G, y, eps, C, tau1, tau2


@pytest.mark.parametrize("solver", [solve_smo, solve_reference])
@pytest.mark.parametrize("lo, hi, obj", [(0.0, 1.0, -0.32), (0.5, 1.5, -0.12)])
def test_two_point_fixture(solver, lo, hi, obj):
    p = ReducedDual(G2, Y2, 0.1, lo, hi)
    s = solver(p, tol=1e-12)
    np.testing.assert_allclose(s.gamma, [-0.8, 0.8], atol=1e-12)
    assert s.objective == pytest.approx(obj, abs=1e-12)
    assert s.bias == pytest.approx(0.1, abs=1e-12)
    assert s.kkt_residual <= 1e-8


@pytest.mark.parametrize("tau1, tau2", [(0.0, 1.0), (0.5, 1.5)])
def test_two_point_fixture_matches_grid_oracle(tau1, tau2):
    w, b, primal = grid_oracle_linear_1d([0.0, 1.0], Y2, 1.0, 0.1, tau1, tau2)
    assert w == pytest.approx(0.8, abs=1e-8) and b == pytest.approx(0.1, abs=1e-8)
    s = solve_smo(ReducedDual.from_params(G2, Y2, 0.1, 1.0, tau1, tau2), tol=1e-12)
    # strong duality: the minimised dual objective is minus the primal optimum
    assert -s.objective == pytest.approx(primal, abs=1e-10)
    w_dual = float(np.array([0.0, 1.0]) @ s.gamma)
    assert w_dual == pytest.approx(w, abs=1e-8)


def test_hand_built_solution_residual():
    lo, hi = 0.0, 1.0
    p = ReducedDual(G2, Y2, 0.1, lo, hi)
    u1, u2 = split_gamma(np.array([-0.8, 0.8]), lo)
    s = DualSolution(u1, u2, p.objective(u1, u2), 0.0, 0)
    assert kkt_residual(p, s) <= 1e-8
    assert kkt_residual(p, s, bias=0.1) <= 1e-8


def test_perturbed_solution_residual():
    p = ReducedDual(G2, Y2, 0.1, 0.0, 1.0)
    u1, u2 = split_gamma(np.array([-0.8, 0.8]), 0.0)
    u1 = u1.copy()
    u1[1] += 0.1
    s = DualSolution(u1, u2, p.objective(u1, u2), 0.0, 0)
    assert kkt_residual(p, s) >= 0.01


def test_constant_targets_inside_tube():
    rng = np.random.default_rng(3)
    X = rng.normal(size=(8, 2))
    p = ReducedDual(rbf_gram(X, 1.0), np.full(8, 2.5), 0.3, 0.2, 0.9)
    for solver in (solve_smo, solve_reference):
        s = solver(p)
        assert np.all(s.gamma == 0.0)
        assert np.all(s.u1 == 0.2) and np.all(s.u2 == 0.2)
        assert s.bias == pytest.approx(2.5)
        assert s.kkt_residual <= 1e-6


def test_single_point():
    p = ReducedDual(np.array([[1.0]]), np.array([3.0]), 0.1, 0.0, 1.0)
    assert solve_reference(p).gamma.tolist() == [0.0]
    assert solve_smo(p).gamma.tolist() == [0.0]


@pytest.mark.parametrize("kwargs", [
    dict(gram=np.array([[1.0, np.inf], [np.inf, 1.0]]), targets=[0, 1], eps=0.1, lo=0, hi=1),
    dict(gram=np.array([[1.0, 0.5], [0.0, 1.0]]), targets=[0, 1], eps=0.1, lo=0, hi=1),
    dict(gram=np.eye(2), targets=[0, 1], eps=0.0, lo=0, hi=1),
    dict(gram=np.eye(2), targets=[0, 1], eps=0.1, lo=1, hi=1),
    dict(gram=np.eye(2), targets=[0, 1, 2], eps=0.1, lo=0, hi=1),
    dict(gram=np.eye(2), targets=[0, np.nan], eps=0.1, lo=0, hi=1),
])
def test_problem_validation(kwargs):
    with pytest.raises(ValidationError):
        ReducedDual(**kwargs)


def test_convergence_failure_is_reported():
    rng = np.random.default_rng(1)
    G, y, eps, C, t1, t2 = random_instance(rng, 10, "rbf")
    p = ReducedDual.from_params(G, y, 0.01, 10.0, t1, t2)
    with pytest.raises(ConvergenceError) as exc:
        solve_smo(p, tol=1e-12, max_iter=2)
    assert exc.value.residual > 1e-12
    assert exc.value.solution is not None and not exc.value.solution.converged
    with pytest.raises(ConvergenceError):
        solve_reference(p, tol=1e-12, max_iter=2)


def test_trace_file(tmp_path):
    rng = np.random.default_rng(2)
    G, y, eps, C, t1, t2 = random_instance(rng, 8, "rbf")
    path = tmp_path / "trace.jsonl"
    s = solve_smo(ReducedDual.from_params(G, y, eps, C, t1, t2), trace=path)
    lines = [json.loads(x) for x in path.read_text().splitlines()]
    assert len(lines) == s.iterations
    assert all({"iter", "i", "j", "step", "violation"} <= set(d) for d in lines)


def test_deterministic():
    rng = np.random.default_rng(5)
    G, y, eps, C, t1, t2 = random_instance(rng, 10)
    p = ReducedDual.from_params(G, y, eps, C, t1, t2)
    a, b = solve_smo(p), solve_smo(p)
    assert np.array_equal(a.gamma, b.gamma) and a.iterations == b.iterations


def test_duplicate_points_zero_curvature():
    X = np.array([[0.0], [0.0], [1.0], [1.0]])
    p = ReducedDual(rbf_gram(X, 1.0), np.array([0.0, 0.3, 1.0, 1.2]), 0.05, 0.0, 2.0)
    s = solve_smo(p, tol=1e-9)
    assert s.kkt_residual <= 1e-6
    r = solve_reference(p, tol=1e-9)
    assert s.objective == pytest.approx(r.objective, abs=1e-8)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_smo_monotone_and_feasible(seed):
    G, y, eps, C, t1, t2 = random_instance(np.random.default_rng(seed), 12)
    p = ReducedDual.from_params(G, y, eps, C, t1, t2)
    s = solve_smo(p, record_objective=True)
    trace = np.array(s.extras["objective_trace"])
    assert np.all(np.diff(trace) <= 1e-12 * (1 + np.abs(trace[:-1])))
    assert np.all(np.abs(s.extras["equality_trace"]) <= 1e-12 * p.size * p.hi)
    assert np.all((s.u1 >= p.lo) & (s.u1 <= p.hi) & (s.u2 >= p.lo) & (s.u2 <= p.hi))
    assert np.all(np.abs(s.gamma) <= p.width)


@pytest.mark.parametrize("working_set", ["second-order", "max-violating"])
def test_smo_agrees_with_reference(working_set):
    rng = np.random.default_rng(11)
    for _ in range(100):
        G, y, eps, C, t1, t2 = random_instance(rng, 30)
        p = ReducedDual.from_params(G, y, eps, C, t1, t2)
        a = solve_smo(p, working_set=working_set)
        b = solve_reference(p)
        assert abs(a.objective - b.objective) <= 1e-6 * (1 + abs(a.objective))
        assert a.kkt_residual <= 1e-6 and b.kkt_residual <= 1e-6


def test_unknown_working_set():
    with pytest.raises(ValueError):
        solve_smo(ReducedDual(G2, Y2, 0.1, 0.0, 1.0), working_set="random")


def test_full_oracle_structure():
    rng = np.random.default_rng(7)
    for _ in range(10):
        G, y, eps, C, t1, t2 = random_instance(rng, 8)
        s = solve_full_oracle(G, y, eps, C, t1, t2)
        ex = s.extras
        assert abs(ex["equality"]) <= 1e-8
        for k in ("alpha1", "alpha2"):
            assert np.all(ex[k] >= -1e-12) and np.all(ex[k] <= t1 * C + 1e-12)
        for k in ("beta1", "beta2"):
            assert np.all(ex[k] >= -1e-12)
        # alpha at its upper bound tau1*C exactly where u sits at lo
        at_lo = s.u1 == t1 * C
        assert np.all(ex["alpha1"][at_lo] == t1 * C)


def test_full_oracle_rejects_eps_svr_case():
    with pytest.raises(ValidationError):
        solve_full_oracle(G2, Y2, 0.1, 1.0, 0.0, 1.0)


def test_multipliers_nonnegative_and_consistent():
    rng = np.random.default_rng(9)
    for _ in range(20):
        G, y, eps, C, t1, t2 = random_instance(rng, 15)
        p = ReducedDual.from_params(G, y, eps, C, t1, t2)
        s = solve_smo(p)
        mu = multipliers(p, s.u1, s.u2)
        for v in mu.values():
            assert np.all(v >= -1e-12)
        np.testing.assert_allclose(mu["alpha1"] + mu["beta1"], s.u1, rtol=1e-12, atol=1e-12)
        # per-point equalities of the original dual
        np.testing.assert_allclose(C - mu["alpha1"] / t1 - mu["beta1"] / t2, 0.0, atol=1e-10 * C)


def test_c_rescaling_at_dual_level():
    rng = np.random.default_rng(13)
    for _ in range(20):
        G, y, eps, C, t1, t2 = random_instance(rng, 15)
        rp = solve_smo(ReducedDual.from_params(G, y, eps, C, t1, t2), tol=1e-10)
        ep = solve_smo(ReducedDual(G, y, eps, 0.0, (t2 - t1) * C), tol=1e-10)
        np.testing.assert_allclose(rp.gamma, ep.gamma, atol=1e-8)
        offset = 2.0 * t1 * C * eps * len(y)
        assert rp.objective == pytest.approx(ep.objective + offset, rel=1e-9, abs=1e-9)


def test_feature_space_weights_linear_kernel():
    rng = np.random.default_rng(4)
    X = rng.normal(size=(6, 2))
    g = rng.normal(size=6)
    w1 = feature_weights(X @ X.T, g)
    # same norm as A'g; coordinates differ by a rotation
    assert np.linalg.norm(w1) == pytest.approx(np.linalg.norm(X.T @ g), rel=1e-9)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_projection_is_optimal(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 12))
    z = rng.normal(scale=2, size=n)
    c = np.where(rng.random(n) < 0.5, 1.0, -1.0)
    c[0], c[1] = 1.0, -1.0
    upper = float(rng.uniform(0.1, 3))
    x = project_box_hyperplane(z, c, upper)
    assert abs(c @ x) <= 1e-9 * (1 + upper)
    assert np.all(x >= 0) and np.all(x <= upper)
    # random feasible points are never closer to z
    for _ in range(20):
        y = project_box_hyperplane(rng.uniform(0, upper, n), c, upper)
        assert np.sum((x - z) ** 2) <= np.sum((y - z) ** 2) + 1e-9


def test_bias_fallback_when_all_at_bounds():
    p = ReducedDual(G2, Y2, 0.1, 0.0, 0.5)
    s = solve_smo(p, tol=1e-12)
    assert np.all(np.abs(s.gamma) == 0.5)
    b, s1, s2 = recover_bias(p, s.u1, s.u2)
    assert s1.size == 0 and s2.size == 0
    f0 = G2 @ s.gamma
    e = Y2 - f0
    # both points sit beyond the tube: b must lie in [e1 + eps, e2 - eps]
    assert e[0] + 0.1 <= b <= e[1] - 0.1
    assert b == pytest.approx(0.5 * (e[0] + 0.1 + e[1] - 0.1))
