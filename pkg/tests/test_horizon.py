import numpy as np
import pytest

import agents.horizon as horizon_module
from agents.horizon import (
    ControllerMemory,
    HorizonObjective,
    horizon_cost,
    horizon_cost_and_gradient,
    load_sharing_guess,
    rollout,
    rollout_cost_mpc,
    rollout_cost_rql,
    shifted,
    solve_horizon,
    stance_constraints,
)
from conftest import make_plan, perturbed_state, random_feasible_actions, standing_actions, standing_state, with_overrides
from tools.costs import check_action, constraint_values, q_value, running_cost, u_desired
from tools.gait import ReferencePlan
from tools.rigid_body import predict_euler
from utils.errors import InfeasibleScheduleError, SingularAttitudeError


def truncated(plan: ReferencePlan, horizon: int) -> ReferencePlan:
    return ReferencePlan(plan.t0, plan.x_des_now, plan.x_des[:horizon], plan.levers[:horizon], plan.contacts[:horizon])


def naive_mpc_cost(x0, plan, actions, ctrl, weights, params):
    total, x = 0.0, x0
    for j in range(plan.horizon):
        x = predict_euler(ctrl.delta, x, plan.levers[j], actions[j], params)
        total += ctrl.gamma**j * running_cost(x, plan.x_des[j], actions[j], weights, params)
    return total


@pytest.fixture
def discounted(config):
    return with_overrides(config, controller={"gamma": 0.9})


def test_standing_equilibrium_costs_nothing(standing_config):
    cfg = standing_config
    x = standing_state(cfg)
    plan = make_plan(cfg, 0.0, x, 4)
    actions = standing_actions(4, cfg.robot)
    assert rollout_cost_mpc(x, plan, actions, cfg.controller, cfg.costs, cfg.robot) < 1e-20
    w = np.full(15, 3.0)
    assert rollout_cost_rql(x, plan, actions, w, cfg.controller, cfg.costs, cfg.robot) < 1e-20


def test_single_step_mpc_cost(config, rng):
    x = perturbed_state(config, rng)
    plan = make_plan(config, 0.0, x, 1)
    actions = random_feasible_actions(plan, config.robot, rng)
    x1 = predict_euler(config.controller.delta, x, plan.levers[0], actions[0], config.robot)
    expected = running_cost(x1, plan.x_des[0], actions[0], config.costs, config.robot)
    assert rollout_cost_mpc(x, plan, actions, config.controller, config.costs, config.robot) == expected


def test_mpc_cost_matches_step_by_step_oracle(discounted, rng):
    cfg = discounted
    for t in (0.0, 0.17, 0.31):
        x = perturbed_state(cfg, rng)
        plan = make_plan(cfg, t, x, 3)
        actions = random_feasible_actions(plan, cfg.robot, rng)
        expected = naive_mpc_cost(x, plan, actions, cfg.controller, cfg.costs, cfg.robot)
        assert rollout_cost_mpc(x, plan, actions, cfg.controller, cfg.costs, cfg.robot) == pytest.approx(expected, rel=1e-10)


def test_rql_cost_matches_oracle(discounted, rng):
    cfg = discounted
    x = perturbed_state(cfg, rng)
    plan = make_plan(cfg, 0.1, x, 2)
    actions = random_feasible_actions(plan, cfg.robot, rng)
    w = rng.uniform(0.0, 5.0, 15)
    x1 = predict_euler(cfg.controller.delta, x, plan.levers[0], actions[0], cfg.robot)
    x2 = predict_euler(cfg.controller.delta, x1, plan.levers[1], actions[1], cfg.robot)
    expected = running_cost(x1, plan.x_des[0], actions[0], cfg.costs, cfg.robot) + 0.9 * q_value(
        x2, plan.x_des[1], actions[1], w, cfg.robot
    )
    assert rollout_cost_rql(x, plan, actions, w, cfg.controller, cfg.costs, cfg.robot) == pytest.approx(expected, rel=1e-10)


def test_single_step_rql_is_the_q_value(config, rng):
    x = perturbed_state(config, rng)
    plan = make_plan(config, 0.0, x, 1)
    actions = random_feasible_actions(plan, config.robot, rng)
    w = rng.uniform(0.0, 5.0, 15)
    x1 = predict_euler(config.controller.delta, x, plan.levers[0], actions[0], config.robot)
    expected = q_value(x1, plan.x_des[0], actions[0], w, config.robot)
    assert rollout_cost_rql(x, plan, actions, w, config.controller, config.costs, config.robot) == pytest.approx(expected, rel=1e-12)


@pytest.mark.parametrize("horizon", [2, 3, 5])
def test_zero_critic_is_mpc_with_one_step_less(discounted, rng, horizon):
    cfg = discounted
    for _ in range(10):
        x = perturbed_state(cfg, rng)
        plan = make_plan(cfg, rng.uniform(0.0, 1.0), x, horizon)
        actions = random_feasible_actions(plan, cfg.robot, rng)
        rql = rollout_cost_rql(x, plan, actions, np.zeros(15), cfg.controller, cfg.costs, cfg.robot)
        mpc = rollout_cost_mpc(x, truncated(plan, horizon - 1), actions[:-1], cfg.controller, cfg.costs, cfg.robot)
        assert rql == pytest.approx(mpc, rel=1e-10)


def test_rollout_starts_at_the_input_state(config, rng):
    x = perturbed_state(config, rng)
    plan = make_plan(config, 0.0, x, 3)
    actions = random_feasible_actions(plan, config.robot, rng)
    predicted = rollout(x, plan, actions, config.controller.delta, config.robot)
    np.testing.assert_array_equal(predicted[0], x)
    for j in range(3):
        np.testing.assert_array_equal(predicted[j + 1], predict_euler(config.controller.delta, predicted[j], plan.levers[j], actions[j], config.robot))


def test_horizon_cost_needs_one_action_per_step(config, rng):
    x = perturbed_state(config, rng)
    plan = make_plan(config, 0.0, x, 3)
    with pytest.raises(ValueError):
        horizon_cost(x, plan, np.zeros((2, 4, 3)), HorizonObjective.mpc(), config.controller, config.costs, config.robot)


@pytest.mark.parametrize("mode", ["mpc", "rql"])
def test_gradient_matches_central_differences(discounted, rng, mode):
    cfg = discounted
    scale = cfg.robot.weight / 4.0
    h = 1e-6 * scale
    for _ in range(25):
        x = perturbed_state(cfg, rng)
        plan = make_plan(cfg, rng.uniform(0.0, 1.0), x, 3)
        actions = random_feasible_actions(plan, cfg.robot, rng)
        objective = HorizonObjective.mpc() if mode == "mpc" else HorizonObjective.rql(rng.uniform(0.0, 5.0, 15))
        _, gradient = horizon_cost_and_gradient(x, plan, actions, objective, cfg.controller, cfg.costs, cfg.robot)
        numeric = np.empty_like(gradient)
        for j in range(plan.horizon):
            for i in range(12):
                step = np.zeros((plan.horizon, 12))
                step[j, i] = h
                step = step.reshape(actions.shape)
                plus = horizon_cost(x, plan, actions + step, objective, cfg.controller, cfg.costs, cfg.robot)
                minus = horizon_cost(x, plan, actions - step, objective, cfg.controller, cfg.costs, cfg.robot)
                numeric[j, i] = (plus - minus) / (2 * h)
        assert np.linalg.norm(gradient - numeric) <= 1e-4 * np.linalg.norm(numeric)


def test_solver_finds_the_standing_optimum(standing_config):
    cfg = standing_config
    x = standing_state(cfg)
    plan = make_plan(cfg, 0.0, x, 3)
    solution = solve_horizon(x, plan, HorizonObjective.mpc(), cfg.controller, cfg.costs, cfg.robot)
    np.testing.assert_allclose(solution.actions, standing_actions(3, cfg.robot), atol=1e-6)
    assert solution.objective < 1e-12
    assert solution.converged
    assert solution.iterations <= 2
    np.testing.assert_array_equal(solution.predicted[0], x)


def test_all_swing_step_is_rejected(config, rng):
    x = perturbed_state(config, rng)
    plan = make_plan(config, 0.0, x, 2)
    contacts = plan.contacts.copy()
    contacts[1] = False
    broken = ReferencePlan(plan.t0, plan.x_des_now, plan.x_des, plan.levers, contacts)
    with pytest.raises(InfeasibleScheduleError):
        solve_horizon(x, broken, HorizonObjective.mpc(), config.controller, config.costs, config.robot)


@pytest.mark.parametrize("mode", ["mpc", "rql"])
def test_solver_improves_on_its_start_and_stays_feasible(config, rng, mode):
    cfg = with_overrides(config, controller={"max_iters": 30})
    for t in (0.0, 0.2, 0.38):
        x = perturbed_state(cfg, rng, scale=0.03)
        plan = make_plan(cfg, t, x, 3)
        objective = HorizonObjective.mpc() if mode == "mpc" else HorizonObjective.rql(np.full(15, 1e-2))
        guess = load_sharing_guess(plan, cfg.robot)
        start = horizon_cost(x, plan, guess, objective, cfg.controller, cfg.costs, cfg.robot)
        solution = solve_horizon(x, plan, objective, cfg.controller, cfg.costs, cfg.robot)
        assert solution.objective <= start
        assert solution.objective == pytest.approx(
            horizon_cost(x, plan, solution.actions, objective, cfg.controller, cfg.costs, cfg.robot), rel=1e-12
        )
        for j in range(plan.horizon):
            assert check_action(solution.actions[j], plan.contacts[j], cfg.robot).ok
            np.testing.assert_array_equal(solution.actions[j][~plan.contacts[j]], 0.0)

        warm = shifted(solution)
        again = solve_horizon(x, plan, objective, cfg.controller, cfg.costs, cfg.robot, warm_start=warm)
        assert again.objective <= horizon_cost(x, plan, warm * plan.contacts[:, :, None], objective, cfg.controller, cfg.costs, cfg.robot) + 1e-12


def test_shift_repeats_the_last_action(standing_config):
    cfg = standing_config
    x = standing_state(cfg)
    plan = make_plan(cfg, 0.0, x, 3)
    solution = solve_horizon(x, plan, HorizonObjective.mpc(), cfg.controller, cfg.costs, cfg.robot)
    warm = shifted(solution)
    assert warm.shape == solution.actions.shape
    np.testing.assert_array_equal(warm[:2], solution.actions[1:])
    np.testing.assert_array_equal(warm[2], solution.actions[2])


def test_memory_drops_a_warm_start_of_the_wrong_length(standing_config):
    cfg = standing_config
    x = standing_state(cfg)
    memory = ControllerMemory()
    assert memory.warm_start(3) is None
    memory.last = solve_horizon(x, make_plan(cfg, 0.0, x, 3), HorizonObjective.mpc(), cfg.controller, cfg.costs, cfg.robot)
    assert memory.warm_start(3) is not None
    assert memory.warm_start(4) is None
    memory.reset()
    assert memory.warm_start(3) is None


def test_load_sharing_guess_splits_the_weight(config, params):
    x = standing_state(config)
    plan = make_plan(config, 0.2, x, 1)
    guess = load_sharing_guess(plan, params)
    np.testing.assert_allclose(guess[0, [0, 3], 2], params.weight / 2)
    np.testing.assert_array_equal(guess[0, [1, 2]], 0.0)
    assert u_desired(params)[:, 2].sum() == pytest.approx(guess[0, :, 2].sum())


def test_stance_constraints_are_the_friction_rows_of_stance_legs(config, rng):
    x = standing_state(config)
    plan = make_plan(config, 0.2, x, 3)
    A, b = stance_constraints(plan, config.robot)
    actions = 1.5 * random_feasible_actions(plan, config.robot, rng)
    z = actions.reshape(plan.horizon, 12)[np.repeat(plan.contacts, 3, axis=1)]
    expected = np.concatenate(
        [constraint_values(actions[j], config.robot)[plan.contacts[j]].ravel() for j in range(plan.horizon)]
    )
    assert A.shape == (6 * plan.contacts.sum(), 3 * plan.contacts.sum())
    np.testing.assert_allclose(A @ z - b, expected, atol=1e-9)


def test_start_guess_leaving_the_domain_is_dropped(config, rng, monkeypatch):
    cfg = with_overrides(config, controller={"max_iters": 30})
    x = perturbed_state(cfg, rng, scale=0.03)
    plan = make_plan(cfg, 0.2, x, 3)
    objective = HorizonObjective.mpc()
    sharing = load_sharing_guess(plan, cfg.robot)
    warm = 1.05 * sharing
    real = horizon_module.horizon_cost_and_gradient

    def singular_at_sharing(x0, plan, actions, *args):
        if np.array_equal(actions, sharing):
            raise SingularAttitudeError("pitch -1.569848 too close to +-pi/2")
        return real(x0, plan, actions, *args)

    monkeypatch.setattr(horizon_module, "horizon_cost_and_gradient", singular_at_sharing)
    solution = solve_horizon(x, plan, objective, cfg.controller, cfg.costs, cfg.robot, warm_start=warm)
    warm_cost, _ = real(x, plan, warm, objective, cfg.controller, cfg.costs, cfg.robot)
    assert solution.objective <= warm_cost
    for j in range(plan.horizon):
        assert check_action(solution.actions[j], plan.contacts[j], cfg.robot).ok


def test_solver_fails_when_every_start_guess_leaves_the_domain(config, rng, monkeypatch):
    x = perturbed_state(config, rng, scale=0.03)
    plan = make_plan(config, 0.2, x, 3)

    def singular(*args):
        raise SingularAttitudeError("pitch -1.569848 too close to +-pi/2")

    monkeypatch.setattr(horizon_module, "horizon_cost_and_gradient", singular)
    warm = 1.05 * load_sharing_guess(plan, config.robot)
    with pytest.raises(SingularAttitudeError):
        solve_horizon(x, plan, HorizonObjective.mpc(), config.controller, config.costs, config.robot, warm_start=warm)
