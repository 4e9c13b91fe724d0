"""
Nominal receding-horizon controller: minimize the discounted running cost, apply the first action.
"""
import numpy as np

from agents.horizon import ControllerMemory, HorizonObjective, HorizonSolution, solve_horizon
from tools.gait import ReferencePlan
from utils.config_schema import ControllerConfig, CostWeights, ExperimentConfig, RobotParams


def mpc_step(
    x_k: np.ndarray,
    plan: ReferencePlan,
    memory: ControllerMemory,
    cfg: ControllerConfig,
    weights: CostWeights,
    params: RobotParams,
) -> np.ndarray:
    """
    Solve the horizon from x_k warm-started on the shifted previous solution and return its first action.
    """
    solution = solve_horizon(
        x_k,
        plan,
        HorizonObjective.mpc(),
        cfg,
        weights,
        params,
        warm_start=memory.warm_start(plan.horizon),
    )
    memory.last = solution
    return solution.actions[0].copy()


class MPCAgent:
    mode = "mpc"

    def __init__(self, config: ExperimentConfig):
        self.controller = config.controller
        self.weights = config.costs
        self.params = config.robot
        self.memory = ControllerMemory()

    @property
    def last_solution(self) -> HorizonSolution | None:
        return self.memory.last

    @property
    def critic_weights(self) -> np.ndarray | None:
        return None

    def act(self, x: np.ndarray, plan: ReferencePlan) -> np.ndarray:
        return mpc_step(x, plan, self.memory, self.controller, self.weights, self.params)

    def reset(self) -> None:
        self.memory.reset()
