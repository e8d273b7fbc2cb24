import numpy as np
import pytest

from cellhom.gallery import conv_quad, get_density
from cellhom.mesh import DiscreteEnergy, build_mesh
from cellhom.optimize import (
    InfeasibleStartError,
    OptimizerConfig,
    field_starts,
    minimize_feasible,
    multistart,
)


def test_config_validation():
    for kw in ({"max_iters": 0}, {"g_tol": 0}, {"shrink": 1.0}, {"n_starts": 0}, {"h_fd": 0}):
        with pytest.raises(ValueError):
            OptimizerConfig(**kw)
    assert OptimizerConfig().with_(seed=3).seed == 3


def test_dirichlet_zero_start_is_optimal():
    prob = DiscreteEnergy(conv_quad(), 0.0, build_mesh(1, 1, 8))
    r = minimize_feasible(prob.value_and_grad, np.zeros(prob.n_dofs))
    assert r.value == 0.0 and r.iterations == 0 and r.converged


def test_double_well_sawtooth_is_global_minimizer():
    W = get_density("double_well_1d")
    prob = DiscreteEnergy(W, 0.0, build_mesh(1, 1, 4))
    saw = np.array([0.25, 0.0, 0.25])  # slopes +1, -1, +1, -1 on cells of width 1/4
    r = minimize_feasible(prob.value_and_grad, saw)
    assert r.value == 0.0


def test_quadratic_matches_linear_solve(rng):
    n = 12
    M = rng.normal(size=(n, n))
    A = M @ M.T + n * np.eye(n)
    b = rng.normal(size=n)

    def fun(x):
        return 0.5 * x @ A @ x - b @ x, A @ x - b

    r = minimize_feasible(fun, np.zeros(n), OptimizerConfig(g_tol=1e-12))
    x_star = np.linalg.solve(A, b)
    assert r.value == pytest.approx(fun(x_star)[0], abs=1e-8)
    assert np.allclose(r.x, x_star, atol=1e-8)
    r2 = minimize_feasible(lambda x: tuple(3.0 * v for v in fun(x)), np.zeros(n), OptimizerConfig(g_tol=1e-12))
    assert r2.value == pytest.approx(3.0 * r.value, rel=1e-10)


def test_lbfgs_path_on_large_problem(rng):
    n = 800
    d = np.linspace(1, 10, n)

    def fun(x):
        return 0.5 * np.sum(d * x * x) - np.sum(x), d * x - 1

    r = minimize_feasible(fun, np.zeros(n), OptimizerConfig(dense_max=100, g_tol=1e-9))
    assert r.converged and np.allclose(r.x, 1 / d, atol=1e-8)


def test_infeasible_start():
    def fun(x):
        return (np.inf, None) if x[0] > 0 else (float(x @ x), 2 * x)

    with pytest.raises(InfeasibleStartError):
        minimize_feasible(fun, np.array([1.0]))
    with pytest.raises(InfeasibleStartError):
        multistart(fun, [np.array([1.0]), np.array([2.0])])
    with pytest.raises(InfeasibleStartError):
        multistart(fun, [])


def test_barrier_feasibility_and_monotone_descent():
    W = get_density("barrier_1d")
    prob = DiscreteEnergy(W, 0.9, build_mesh(1, 1, 8))
    r = minimize_feasible(prob.value_and_grad, np.zeros(prob.n_dofs), keep_history=True)
    assert np.isfinite(r.value)
    assert all(b <= a for a, b in zip(r.history, r.history[1:]))
    assert r.value == pytest.approx(1 / (1 - 0.81), rel=1e-9)


def test_multistart_identical_and_convex(rng):
    prob = DiscreteEnergy(conv_quad(), 0.3, build_mesh(1, 1, 8))
    single = minimize_feasible(prob.value_and_grad, np.full(prob.n_dofs, 0.01))
    multi = multistart(prob.value_and_grad, [np.full(prob.n_dofs, 0.01)] * 3)
    assert multi.value == single.value and multi.start_index == 0
    starts = [rng.normal(scale=0.05, size=prob.n_dofs) for _ in range(4)]
    vals = [minimize_feasible(prob.value_and_grad, s).value for s in starts]
    assert max(vals) - min(vals) <= 1e-6


def test_multistart_double_well_branches():
    W = get_density("double_well_1d")
    prob = DiscreteEnergy(W, 0.0, build_mesh(1, 1, 4))
    zero = np.zeros(3)
    saw = np.array([0.25, 0.0, 0.25])
    assert prob.value(zero) == 1.0
    r = multistart(prob.value_and_grad, [zero, saw], OptimizerConfig(max_iters=1))
    assert r.value == 0.0 and r.start_index == 1


def test_multistart_skips_infeasible():
    W = get_density("abs_box_1d")
    prob = DiscreteEnergy(W, 0.5, build_mesh(1, 1, 4))
    bad = np.array([1.0, 0.0, 0.0])
    r = multistart(prob.value_and_grad, [bad, np.zeros(3)])
    assert r.n_infeasible == 1 and r.value == pytest.approx(0.5)


def test_field_starts_feasible_and_deterministic():
    W = get_density("hyper2d_default")
    prob = DiscreteEnergy(W, np.zeros((2, 2)), build_mesh(2, 1, 4))
    cfg = OptimizerConfig(n_starts=4)
    a = field_starts(prob, cfg)
    b = field_starts(prob, cfg)
    assert len(a) >= 4 and np.array_equal(a[0], np.zeros(prob.n_dofs))
    assert all(np.array_equal(x, y) for x, y in zip(a, b))
    assert all(np.isfinite(prob.value(z)) for z in a[:4])


def test_thread_count_does_not_change_result(monkeypatch):
    W = get_density("double_well_1d")
    prob = DiscreteEnergy(W, 0.2, build_mesh(1, 1, 8))
    starts = field_starts(prob, OptimizerConfig())
    r1 = multistart(prob.value_and_grad, starts)
    monkeypatch.setenv("CELLHOM_THREADS", "3")
    r3 = multistart(prob.value_and_grad, starts)
    assert r1.value == r3.value and r1.start_index == r3.start_index
