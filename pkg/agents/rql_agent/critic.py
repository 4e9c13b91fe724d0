"""
Experience replay and the buffered temporal-difference update of the quadratic critic.

Each sample is one applied step (x_k, x_des_k, u_k, r_k). For consecutive samples i, i+1

    e_i(w) = Q(sample_i; w) - r_i - Q(sample_{i+1}; w_prev)

and since Q is linear in w the update is a nonnegative ridge least-squares problem.
"""
from collections import deque
from dataclasses import dataclass

import numpy as np
from scipy.optimize import nnls

from tools.costs import CRITIC_DIM, q_features, q_value
from utils.config_schema import CriticConfig, RobotParams
from utils.errors import SolverError


@dataclass(frozen=True)
class Sample:
    x: np.ndarray
    x_des: np.ndarray
    u: np.ndarray
    r: float


class ReplayBuffer:
    """The M most recent consecutive samples, oldest first."""

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        self._samples: deque[Sample] = deque(maxlen=capacity)

    def __len__(self) -> int:
        return len(self._samples)

    def __getitem__(self, i: int) -> Sample:
        return self._samples[i]

    def __iter__(self):
        return iter(self._samples)

    def append(self, sample: Sample) -> None:
        self._samples.append(sample)

    def clear(self) -> None:
        self._samples.clear()


@dataclass
class CriticState:
    w_prev: np.ndarray
    buffer: ReplayBuffer
    lambda_reg: float = 1e-3
    frozen: bool = False

    @classmethod
    def from_config(cls, cfg: CriticConfig) -> "CriticState":
        return cls(
            w_prev=np.full(CRITIC_DIM, cfg.init_weight),
            buffer=ReplayBuffer(cfg.buffer_size),
            lambda_reg=cfg.lambda_reg,
            frozen=cfg.frozen,
        )

    def reset(self) -> None:
        self.buffer.clear()


def push_sample(state: CriticState, x, x_des, u, r_value: float) -> CriticState:
    state.buffer.append(Sample(np.array(x, dtype=float), np.array(x_des, dtype=float), np.array(u, dtype=float), float(r_value)))
    return state


def td_error(i: int, w: np.ndarray, state: CriticState, params: RobotParams) -> float:
    """
    Temporal difference of pair (i, i + 1); the bootstrap term uses the frozen w_prev.
    """
    if not 0 <= i < len(state.buffer) - 1:
        raise IndexError(f"pair {i} needs samples {i} and {i + 1}, buffer holds {len(state.buffer)}")
    s, nxt = state.buffer[i], state.buffer[i + 1]
    return q_value(s.x, s.x_des, s.u, w, params) - s.r - q_value(nxt.x, nxt.x_des, nxt.u, state.w_prev, params)


def design_matrix(state: CriticState, params: RobotParams):
    """Phi, y with e(w) = Phi w - y over all consecutive pairs in the buffer."""
    samples = list(state.buffer)
    features = np.array([q_features(s.x, s.x_des, s.u, params) for s in samples])
    rewards = np.array([s.r for s in samples])
    bootstrap = features[1:] @ state.w_prev
    return features[:-1], rewards[:-1] + bootstrap


def critic_objective(w: np.ndarray, state: CriticState, params: RobotParams) -> float:
    """1/2 sum e_i(w)^2 + lambda/2 |w - w_prev|^2, evaluated pair by pair."""
    residuals = np.array([td_error(i, w, state, params) for i in range(len(state.buffer) - 1)])
    return 0.5 * float(residuals @ residuals) + 0.5 * state.lambda_reg * float(np.sum((w - state.w_prev) ** 2))


def _objective_from_design(w, phi, y, state) -> float:
    residual = phi @ w - y
    return 0.5 * float(residual @ residual) + 0.5 * state.lambda_reg * float(np.sum((w - state.w_prev) ** 2))


def critic_update(state: CriticState, params: RobotParams) -> np.ndarray:
    """
    New weights = argmin over w >= 0 of the regularized buffered TD objective; stored as w_prev.

    Fewer than two samples leave the weights unchanged.

    Raises:
        SolverError: the NNLS fit hit its iteration limit
    """
    if len(state.buffer) < 2:
        return state.w_prev
    phi, y = design_matrix(state, params)
    root = np.sqrt(state.lambda_reg)
    lhs = np.vstack([phi, root * np.eye(CRITIC_DIM)])
    rhs = np.concatenate([y, root * state.w_prev])
    norms = np.linalg.norm(lhs, axis=0)
    norms[norms == 0.0] = 1.0
    try:
        scaled, _ = nnls(lhs / norms, rhs, maxiter=50 * CRITIC_DIM)
    except RuntimeError as err:
        raise SolverError(f"critic fit: {err}") from err
    w = np.maximum(scaled / norms, 0.0)
    if _objective_from_design(w, phi, y, state) > _objective_from_design(state.w_prev, phi, y, state):
        w = state.w_prev.copy()
    state.w_prev = w
    return w
