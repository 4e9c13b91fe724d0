import numpy as np
import pytest

import tools.costs as costs_module
from conftest import standing_state
from tools.costs import (
    FEASIBILITY_TOL,
    check_action,
    constraint_values,
    friction_rows,
    project_action,
    project_force,
    q_features,
    q_value,
    q_value_gradients,
    running_cost,
    running_cost_gradients,
    u_desired,
)
from tools.gait import ContactSchedule
from utils.errors import ControlError, SolverError


def naive_feasible(u, stance, mu, fz_max) -> bool:
    for leg in range(4):
        fx, fy, fz = (float(v) for v in u[leg])
        if not stance[leg]:
            if fx != 0.0 or fy != 0.0 or fz != 0.0:
                return False
        rows = [fx - mu * fz, -fx - mu * fz, fy - mu * fz, -fy - mu * fz, -fz, fz - fz_max]
        limits = [FEASIBILITY_TOL] * 5 + [FEASIBILITY_TOL * fz_max]
        for value, limit in zip(rows, limits):
            if not value <= limit:
                return False
    return True


def test_desired_action_carries_the_weight(params):
    u = u_desired(params)
    assert u[:, 2].sum() == pytest.approx(params.weight)
    np.testing.assert_array_equal(u[:, :2], 0.0)


def test_running_cost_is_a_weighted_square(config, weights, params, rng):
    x_des = standing_state(config)
    assert running_cost(x_des, x_des, u_desired(params), weights, params) == 0.0
    x = x_des + rng.standard_normal(12)
    u = u_desired(params) + rng.standard_normal((4, 3))
    e_x, e_u = x - x_des, (u - u_desired(params)).ravel()
    expected = sum(weights.P_x[i] * e_x[i] ** 2 for i in range(12)) + sum(weights.P_u[i] * e_u[i] ** 2 for i in range(12))
    assert running_cost(x, x_des, u, weights, params) == pytest.approx(expected, rel=1e-12)


def test_q_value_is_linear_in_its_weights(config, params, rng):
    x_des = standing_state(config)
    x = x_des + rng.standard_normal(12)
    u = u_desired(params) + rng.standard_normal((4, 3))
    w = rng.uniform(0.0, 2.0, 15)
    assert q_value(x, x_des, u, w, params) == pytest.approx(q_features(x, x_des, u, params) @ w, rel=1e-12)
    assert q_value(x_des, x_des, u_desired(params), w, params) == 0.0
    assert q_value(x, x_des, u, np.zeros(15), params) == 0.0


def test_cost_gradients_match_finite_differences(config, weights, params, rng):
    x_des = standing_state(config)
    x = x_des + rng.standard_normal(12)
    u = u_desired(params) + rng.standard_normal((4, 3))
    w = rng.uniform(0.0, 2.0, 15)
    h = 1e-3
    for func, grads in (
        (lambda x_, u_: running_cost(x_, x_des, u_, weights, params), running_cost_gradients(x, x_des, u, weights, params)),
        (lambda x_, u_: q_value(x_, x_des, u_, w, params), q_value_gradients(x, x_des, u, w, params)),
    ):
        gx, gu = grads
        for i in range(12):
            step = np.zeros(12)
            step[i] = h
            assert (func(x + step, u) - func(x - step, u)) / (2 * h) == pytest.approx(gx[i], rel=1e-6, abs=1e-7)
            du = step.reshape(4, 3)
            assert (func(x, u + du) - func(x, u - du)) / (2 * h) == pytest.approx(gu[i], rel=1e-6, abs=1e-7)


def test_friction_rows_agree_with_row_values(params, rng):
    D, d = friction_rows(params)
    assert D.shape == (24, 12)
    for _ in range(20):
        u = rng.uniform(-50.0, 150.0, (4, 3))
        np.testing.assert_allclose(D @ u.ravel() - d, constraint_values(u, params).ravel(), atol=1e-12)


def test_check_action_agrees_with_naive_evaluator(params, rng):
    for _ in range(20_000):
        stance = rng.random(4) < 0.6
        u = np.column_stack([rng.uniform(-40.0, 40.0, 4), rng.uniform(-40.0, 40.0, 4), rng.uniform(-5.0, 130.0, 4)])
        u[~stance & (rng.random(4) < 0.7)] = 0.0
        verdict = check_action(u, stance, params)
        assert verdict.ok == naive_feasible(u, stance, params.mu, params.fz_max)
        assert verdict.ok == (not verdict.violations)


def test_check_action_names_the_failing_row(params):
    u = u_desired(params)
    u[0, 0] = 100.0
    u[1] = [0.0, 0.0, 1.0]
    verdict = check_action(u, np.array([True, False, True, True]), params)
    assert not verdict.ok
    assert any(v.startswith("fl: f_x - mu f_z") for v in verdict.violations)
    assert "fr: nonzero force on a swing leg" in verdict.violations
    assert check_action(u_desired(params), np.ones(4, dtype=bool), params).ok


def test_projection_keeps_feasible_forces(params):
    f = np.array([3.0, -2.0, 40.0])
    np.testing.assert_array_equal(project_force(f, params.mu, params.fz_max), f)


def test_projection_onto_a_face(params):
    mu = params.mu
    f = np.array([10.0, 0.0, 10.0])
    excess = (f[0] - mu * f[2]) / (1 + mu**2)
    expected = f - excess * np.array([1.0, 0.0, -mu])
    np.testing.assert_allclose(project_force(f, mu, params.fz_max), expected, atol=1e-10)
    np.testing.assert_allclose(project_force(np.array([0.0, 0.0, -1.0]), mu, params.fz_max), np.zeros(3), atol=1e-12)


def test_projection_onto_the_cap(params):
    mu, cap = params.mu, params.fz_max
    np.testing.assert_allclose(project_force(np.array([0.0, 0.0, 200.0]), mu, cap), [0.0, 0.0, cap])
    np.testing.assert_allclose(project_force(np.array([100.0, 0.0, 200.0]), mu, cap), [mu * cap, 0.0, cap])


def test_projection_is_the_nearest_feasible_point(params, rng):
    mu, cap = params.mu, params.fz_max
    for _ in range(200):
        f = rng.uniform(-150.0, 200.0, 3)
        p = project_force(f, mu, cap)
        assert check_action(np.vstack([p, np.zeros((3, 3))]), np.array([True, False, False, False]), params).ok
        np.testing.assert_allclose(project_force(p, mu, cap), p, atol=1e-9)
        for _ in range(20):
            fz = rng.uniform(0.0, cap)
            g = np.array([rng.uniform(-mu * fz, mu * fz), rng.uniform(-mu * fz, mu * fz), fz])
            assert np.linalg.norm(f - p) <= np.linalg.norm(f - g) + 1e-9


def test_projected_action_zeroes_swing_legs(params, rng):
    stance = np.array([True, False, False, True])
    u = project_action(rng.uniform(-50.0, 150.0, (4, 3)), stance, params)
    np.testing.assert_array_equal(u[~stance], 0.0)
    assert check_action(u, stance, params).ok


def test_projection_at_the_iteration_limit_is_a_control_error(params, monkeypatch):
    def exhausted(*args, **kwargs):
        raise RuntimeError("Maximum number of iterations reached.")

    monkeypatch.setattr(costs_module, "nnls", exhausted)
    with pytest.raises(SolverError, match="force projection") as err:
        project_force(np.array([50.0, 0.0, 10.0]), params.mu, params.fz_max)
    assert isinstance(err.value, ControlError)


def test_check_action_takes_a_contact_schedule(params):
    schedule = ContactSchedule(np.array([True, False, False, True]))
    u = u_desired(params)
    assert not check_action(u, schedule, params).ok
    u[[1, 2]] = 0.0
    assert check_action(u, schedule, params).ok
