"""
Roll-out Q-learning controller.

Each control step refits the critic on the replay buffer, then solves the horizon with the
critic as terminal value; the applied step is recorded as the newest buffer sample.
"""
import logging

import numpy as np

from agents.horizon import ControllerMemory, HorizonObjective, HorizonSolution, solve_horizon
from agents.rql_agent.critic import CriticState, critic_update, push_sample
from tools.costs import running_cost
from tools.gait import ReferencePlan
from utils.config_schema import ControllerConfig, CostWeights, ExperimentConfig, RobotParams

logger = logging.getLogger(__name__)


def rql_step(
    x_k: np.ndarray,
    plan: ReferencePlan,
    critic: CriticState,
    memory: ControllerMemory,
    cfg: ControllerConfig,
    weights: CostWeights,
    params: RobotParams,
) -> np.ndarray:
    """
    One actor-critic step, returns the first action of the horizon solution.

    The critic sees transitions up to the previous step; (x_k, x_des_k, u_k, r_k) is pushed
    once u_k is known, so after k calls the buffer holds min(k, M) samples.
    """
    w = critic.w_prev if critic.frozen else critic_update(critic, params)
    solution = solve_horizon(
        x_k,
        plan,
        HorizonObjective.rql(w),
        cfg,
        weights,
        params,
        warm_start=memory.warm_start(plan.horizon),
    )
    memory.last = solution
    logger.debug("critic weights %s, buffer %d", w, len(critic.buffer))
    u = solution.actions[0].copy()
    push_sample(critic, x_k, plan.x_des_now, u, running_cost(x_k, plan.x_des_now, u, weights, params))
    return u


class RQLAgent:
    mode = "rql"

    def __init__(self, config: ExperimentConfig):
        self.controller = config.controller
        self.weights = config.costs
        self.params = config.robot
        self.critic = CriticState.from_config(config.critic)
        self.memory = ControllerMemory()

    @property
    def last_solution(self) -> HorizonSolution | None:
        return self.memory.last

    @property
    def critic_weights(self) -> np.ndarray:
        return self.critic.w_prev

    def act(self, x: np.ndarray, plan: ReferencePlan) -> np.ndarray:
        return rql_step(x, plan, self.critic, self.memory, self.controller, self.weights, self.params)

    def reset(self) -> None:
        """Clear the warm start and the buffer; learned weights are kept."""
        logger.debug("dropping %d buffered samples", len(self.critic.buffer))
        self.memory.reset()
        self.critic.reset()
