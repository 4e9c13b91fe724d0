"""
Horizon rollout, MPC / RQL objectives and the constrained solver shared by both agents.

Step j of a horizon applies actions[j] at the predicted state x_hat[j] with the plan's levers[j]
and contacts[j]; its running cost is charged on (x_hat[j + 1], x_des[j], actions[j]).
"""
import logging
from dataclasses import dataclass

import numpy as np
from scipy.optimize import Bounds, minimize

from tools.costs import (
    ROWS_PER_LEG,
    check_action,
    friction_rows,
    project_action,
    project_force,
    q_value,
    q_value_gradients,
    running_cost,
    running_cost_gradients,
    u_desired,
)
from tools.gait import ReferencePlan
from tools.rigid_body import STATE_DIM, dynamics_jacobians, predict_euler
from utils.config_schema import ControllerConfig, CostWeights, RobotParams
from utils.errors import ControlError, InfeasibleScheduleError

logger = logging.getLogger(__name__)

# objective reported to the solver when a trial point leaves the model's domain
OUT_OF_DOMAIN_COST = 1e12


@dataclass(frozen=True)
class HorizonObjective:
    mode: str
    critic_weights: np.ndarray | None = None

    @classmethod
    def mpc(cls) -> "HorizonObjective":
        return cls("mpc")

    @classmethod
    def rql(cls, w: np.ndarray) -> "HorizonObjective":
        return cls("rql", np.asarray(w, dtype=float))


@dataclass
class HorizonSolution:
    actions: np.ndarray
    predicted: np.ndarray
    objective: float
    iterations: int
    converged: bool
    stationarity: float


def rollout(x0: np.ndarray, plan: ReferencePlan, actions: np.ndarray, delta: float, params: RobotParams) -> np.ndarray:
    """Predicted states x_hat[0..N] under the explicit Euler model."""
    predicted = np.empty((plan.horizon + 1, STATE_DIM))
    predicted[0] = x0
    for j in range(plan.horizon):
        predicted[j + 1] = predict_euler(delta, predicted[j], plan.levers[j], actions[j], params)
    return predicted


def _stage_cost(j, predicted, plan, actions, objective, cfg, weights, params) -> float:
    discount = cfg.gamma ** j
    if objective.mode == "rql" and j == plan.horizon - 1:
        return discount * q_value(predicted[j + 1], plan.x_des[j], actions[j], objective.critic_weights, params)
    return discount * running_cost(predicted[j + 1], plan.x_des[j], actions[j], weights, params)


def horizon_cost(x0, plan, actions, objective: HorizonObjective, cfg: ControllerConfig, weights: CostWeights, params: RobotParams) -> float:
    if len(actions) != plan.horizon:
        raise ValueError("one action per plan step is required")
    predicted = rollout(x0, plan, actions, cfg.delta, params)
    return float(sum(_stage_cost(j, predicted, plan, actions, objective, cfg, weights, params) for j in range(plan.horizon)))


def rollout_cost_mpc(x0, plan, actions, cfg: ControllerConfig, weights: CostWeights, params: RobotParams) -> float:
    """Discounted sum of running costs over the horizon."""
    return horizon_cost(x0, plan, actions, HorizonObjective.mpc(), cfg, weights, params)


def rollout_cost_rql(x0, plan, actions, w, cfg: ControllerConfig, weights: CostWeights, params: RobotParams) -> float:
    """Running costs over the first N - 1 steps plus the discounted Q-value of the last step."""
    return horizon_cost(x0, plan, actions, HorizonObjective.rql(w), cfg, weights, params)


def horizon_cost_and_gradient(x0, plan, actions, objective, cfg, weights, params):
    """
    Objective value and its gradient with respect to every force component, (N, 12).

    The gradient is propagated backwards through the Euler predictor (adjoint pass).
    """
    n = plan.horizon
    predicted = rollout(x0, plan, actions, cfg.delta, params)
    grad_x = np.empty((n, STATE_DIM))
    grad_u = np.empty((n, 12))
    total = 0.0
    for j in range(n):
        discount = cfg.gamma ** j
        x_next, x_des, u = predicted[j + 1], plan.x_des[j], actions[j]
        if objective.mode == "rql" and j == n - 1:
            w = objective.critic_weights
            total += discount * q_value(x_next, x_des, u, w, params)
            gx, gu = q_value_gradients(x_next, x_des, u, w, params)
        else:
            total += discount * running_cost(x_next, x_des, u, weights, params)
            gx, gu = running_cost_gradients(x_next, x_des, u, weights, params)
        grad_x[j] = discount * gx
        grad_u[j] = discount * gu

    gradient = np.empty((n, 12))
    costate = grad_x[n - 1]
    for j in range(n - 1, -1, -1):
        fx, fu = dynamics_jacobians(predicted[j], plan.levers[j], actions[j], params)
        gradient[j] = grad_u[j] + cfg.delta * (fu.T @ costate)
        if j > 0:
            costate = grad_x[j - 1] + costate + cfg.delta * (fx.T @ costate)
    return float(total), gradient


def load_sharing_guess(plan: ReferencePlan, params: RobotParams) -> np.ndarray:
    """Weight split evenly over the stance legs of each step, swing legs at zero."""
    base = u_desired(params)
    actions = np.zeros((plan.horizon, 4, 3))
    for j in range(plan.horizon):
        stance = plan.contacts[j]
        actions[j] = project_action(base * (4.0 / stance.sum()), stance, params)
    return actions


def _project_plan(actions: np.ndarray, plan: ReferencePlan, params: RobotParams) -> np.ndarray:
    return np.array([project_action(actions[j], plan.contacts[j], params) for j in range(plan.horizon)])


def stationarity(actions: np.ndarray, gradient: np.ndarray, plan: ReferencePlan, params: RobotParams) -> float:
    """
    Infinity norm of x - proj(x - g) in units of the per-leg standing load.
    """
    scale = params.weight / 4.0
    worst = 0.0
    for j in range(plan.horizon):
        for leg in np.flatnonzero(plan.contacts[j]):
            f = actions[j, leg] / scale
            g = gradient[j, 3 * leg:3 * leg + 3] * scale
            step = project_force(f - g, params.mu, params.fz_max / scale) - f
            worst = max(worst, float(np.max(np.abs(step))))
    return worst


def stance_constraints(plan: ReferencePlan, params: RobotParams) -> tuple[np.ndarray, np.ndarray]:
    """
    friction_rows of every stance leg over the whole horizon, restricted to the stance-force
    variables: A z <= b with z the flattened forces of the stance legs in step order.
    """
    D, d = friction_rows(params)
    A = np.kron(np.eye(plan.horizon), D)
    b = np.tile(d, plan.horizon)
    rows = np.repeat(plan.contacts, ROWS_PER_LEG, axis=1).ravel()
    free = np.repeat(plan.contacts, 3, axis=1).ravel()
    return A[np.ix_(rows, free)], b[rows]


def solve_horizon(
    x0: np.ndarray,
    plan: ReferencePlan,
    objective: HorizonObjective,
    cfg: ControllerConfig,
    weights: CostWeights,
    params: RobotParams,
    warm_start: np.ndarray | None = None,
) -> HorizonSolution:
    """
    Minimize the horizon objective over the stance-leg forces.

    Swing-leg forces are not decision variables and stay exactly zero. The friction_rows of the stance
    legs are imposed as hard linear inequalities, the box they imply as bounds; variables are scaled
    by the standing load per leg. The result never scores worse than the starting point.

    Raises:
        InfeasibleScheduleError: some step has no leg in stance
        ControlError: every start guess rolls out of the model's domain
    """
    n = plan.horizon
    for j in range(n):
        if not plan.contacts[j].any():
            raise InfeasibleScheduleError(f"horizon step {j} has every leg in swing")

    def evaluate(actions):
        return horizon_cost_and_gradient(x0, plan, actions, objective, cfg, weights, params)

    sharing = load_sharing_guess(plan, params)
    candidates = [sharing]
    if warm_start is not None:
        projected = _project_plan(np.asarray(warm_start, dtype=float), plan, params)
        # legs that just entered stance carry no force in the shifted guess
        idle = plan.contacts & ~np.any(projected != 0.0, axis=2)
        refilled = projected.copy()
        refilled[idle] = sharing[idle]
        candidates = [projected, refilled, sharing] if idle.any() else [projected, sharing]
    start, start_cost, start_grad = None, np.inf, None
    rejected = None
    for candidate in candidates:
        try:
            cost, grad = evaluate(candidate)
        except ControlError as err:
            logger.debug("start guess dropped: %s", err)
            rejected = err
            continue
        if cost < start_cost:
            start, start_cost, start_grad = candidate, cost, grad
    if start is None:
        raise rejected
    start_measure = stationarity(start, start_grad, plan, params)
    if start_measure <= cfg.tol:
        return HorizonSolution(start, rollout(x0, plan, start, cfg.delta, params), start_cost, 0, True, start_measure)

    scale = params.weight / 4.0
    free = np.repeat(plan.contacts, 3, axis=1).ravel()
    n_legs = int(plan.contacts.sum())

    def unpack(z):
        flat = np.zeros(n * 12)
        flat[free] = z * scale
        return flat.reshape(n, 4, 3)

    def fun(z):
        try:
            cost, grad = evaluate(unpack(z))
        except ControlError:
            return OUT_OF_DOMAIN_COST, np.zeros_like(z)
        return cost, grad.ravel()[free] * scale

    cap = params.fz_max / scale
    lower = np.tile([-params.mu * cap, -params.mu * cap, 0.0], n_legs)
    upper = np.tile([params.mu * cap, params.mu * cap, cap], n_legs)
    A, b = stance_constraints(plan, params)
    b_scaled = b / scale
    result = minimize(
        fun,
        start.reshape(n, 12).ravel()[free] / scale,
        jac=True,
        method="SLSQP",
        bounds=Bounds(lower, upper),
        constraints=[{"type": "ineq", "fun": lambda z: b_scaled - A @ z, "jac": lambda z: -A}],
        options={"maxiter": cfg.max_iters, "ftol": cfg.tol**2},
    )
    candidate = _project_plan(unpack(result.x), plan, params)
    try:
        cost, grad = evaluate(candidate)
    except ControlError:
        cost, grad = np.inf, None
    if cost <= start_cost:
        actions, best_cost, measure = candidate, cost, stationarity(candidate, grad, plan, params)
    else:
        actions, best_cost, measure = start, start_cost, start_measure
    converged = bool(result.success) or measure <= cfg.tol
    if not converged:
        logger.debug("solver stopped after %d iterations: %s (stationarity %.3e)", result.nit, result.message, measure)
    for j in range(n):
        verdict = check_action(actions[j], plan.schedule(j), params)
        if not verdict.ok:
            raise ControlError(f"solver returned an infeasible action at step {j}: {verdict.violations}")
    return HorizonSolution(actions, rollout(x0, plan, actions, cfg.delta, params), float(best_cost), int(result.nit), converged, measure)


def shifted(solution: HorizonSolution) -> np.ndarray:
    """Drop the applied step and repeat the last one."""
    return np.concatenate([solution.actions[1:], solution.actions[-1:]])


@dataclass
class ControllerMemory:
    """Last horizon solution of one controller instance, the source of the next warm start."""
    last: HorizonSolution | None = None

    def warm_start(self, horizon: int) -> np.ndarray | None:
        # a horizon change makes the stored sequence meaningless
        if self.last is None or len(self.last.actions) != horizon:
            return None
        return shifted(self.last)

    def reset(self) -> None:
        self.last = None
