"""
Closed-loop episodes: gait planner, controller and rigid-body plant, one row per control step.
"""
import logging
from dataclasses import dataclass, replace

import numpy as np
import pandas as pd

from agents import make_agent
from harness.records import (
    DESIRED_COLUMNS,
    FORCE_COLUMNS,
    STATE_COLUMNS,
    STATUS_OK,
    TRACKED_AXES,
    WEIGHT_COLUMNS,
    episode_columns,
)
from tools.costs import project_action, running_cost
from tools.gait import init_footholds, plan_reference, reference_state, update_touchdowns
from tools.rigid_body import P, BodyState, integrate_plant
from utils.config_schema import ExperimentConfig
from utils.errors import ControlError

logger = logging.getLogger(__name__)


@dataclass
class EpisodeLog:
    frame: pd.DataFrame
    config: ExperimentConfig
    failed: bool = False
    message: str = ""

    @property
    def mode(self) -> str:
        return self.config.controller.mode

    def ok_rows(self) -> pd.DataFrame:
        return self.frame[self.frame["status"] == STATUS_OK]


@dataclass(frozen=True)
class CostSummary:
    total: float
    mean: float
    rows: int


def initial_state(config: ExperimentConfig) -> np.ndarray:
    """Body at the reference pose over the origin, at rest unless configured otherwise."""
    body = BodyState.from_vector(reference_state(0.0, config.gait, np.zeros(3)))
    if config.episode.start_at_rest:
        body = replace(body, v=np.zeros(3), omega_b=np.zeros(3))
    return body.to_vector()


def _failure_row(columns: list[str], t: float, message: str) -> dict:
    row = {name: np.nan for name in columns}
    row["t"] = t
    row["status"] = f"failed: {message}"
    return row


def run_episode(config: ExperimentConfig) -> EpisodeLog:
    """
    Simulate config.episode.duration seconds with the configured controller.

    Each row holds the plant state at t, the desired state, the commanded action and
    r(x_k, x_des_k, u_k). The plant integrates the noisy, re-projected action with the
    mass-scaled parameters. A ControlError ends the episode with one diagnostic row.
    """
    ctrl, gait, episode = config.controller, config.gait, config.episode
    plant = config.robot.with_mass_scale(episode.mass_scale)
    rng = np.random.default_rng(episode.seed)
    agent = make_agent(config)
    columns = episode_columns(ctrl.mode)
    steps = int(round(episode.duration / ctrl.delta))

    x = initial_state(config)
    footholds = init_footholds(x, gait)
    rows, accumulated, not_converged = [], 0.0, 0
    failed, message = False, ""
    for k in range(steps):
        t = k * ctrl.delta
        logged = False
        try:
            footholds = update_touchdowns(t, x, gait, footholds)
            plan = plan_reference(t, x, ctrl.horizon, ctrl.delta, gait, footholds)
            u = agent.act(x, plan)
            r_value = running_cost(x, plan.x_des_now, u, config.costs, config.robot)
            accumulated += r_value
            solution = agent.last_solution
            not_converged += not solution.converged
            row = {"t": t}
            row.update(zip(STATE_COLUMNS, x))
            row.update(zip(DESIRED_COLUMNS, plan.x_des_now))
            row.update(zip(FORCE_COLUMNS, u.ravel()))
            row.update(
                running_cost=r_value,
                accumulated_cost=accumulated,
                iterations=solution.iterations,
                objective=solution.objective,
                converged=solution.converged,
            )
            if agent.critic_weights is not None:
                row.update(zip(WEIGHT_COLUMNS, agent.critic_weights))
            row["status"] = STATUS_OK
            rows.append(row)
            logged = True

            applied = u
            if episode.action_noise_std > 0:
                noisy = u + rng.normal(0.0, episode.action_noise_std, size=u.shape)
                applied = project_action(noisy, plan.contacts[0], config.robot)
            levers = footholds.positions - x[P]
            x = integrate_plant(ctrl.delta, episode.substeps, x, levers, applied, plant)
        except ControlError as err:
            failed, message = True, f"{type(err).__name__}: {err}"
            logger.warning("%s N=%d seed=%d failed at t=%.3f: %s", ctrl.mode, ctrl.horizon, episode.seed, t, message)
            rows.append(_failure_row(columns, t + ctrl.delta if logged else t, message))
            break

    if not_converged:
        logger.info("%s N=%d seed=%d: solver hit its limits on %d of %d steps", ctrl.mode, ctrl.horizon, episode.seed, not_converged, len(rows))
    frame = pd.DataFrame(rows, columns=columns)
    return EpisodeLog(frame=frame, config=config, failed=failed, message=message)


def default_transient_skip(config: ExperimentConfig) -> float:
    return config.episode.transient_fraction * config.episode.duration


def _window(frame: pd.DataFrame, transient_skip: float) -> pd.DataFrame:
    kept = frame[(frame["status"] == STATUS_OK) & (frame["t"] >= transient_skip)]
    if kept.empty:
        raise ValueError(f"no logged steps at or after t = {transient_skip}")
    return kept


def accumulated_cost(log: EpisodeLog | pd.DataFrame, transient_skip: float | None = None) -> CostSummary:
    """
    Sum and mean of the running cost over the healthy rows with t >= transient_skip.

    Raises:
        ValueError: the window holds no rows
    """
    frame = log.frame if isinstance(log, EpisodeLog) else log
    if transient_skip is None:
        if not isinstance(log, EpisodeLog):
            raise ValueError("transient_skip is required for a bare frame")
        transient_skip = default_transient_skip(log.config)
    costs = _window(frame, transient_skip)["running_cost"].to_numpy()
    return CostSummary(total=float(costs.sum()), mean=float(costs.mean()), rows=len(costs))


def tracking_errors(log: EpisodeLog | pd.DataFrame, transient_skip: float = 0.0) -> pd.DataFrame:
    """Max absolute and RMS error per tracked axis, one row per axis."""
    frame = log.frame if isinstance(log, EpisodeLog) else log
    kept = _window(frame, transient_skip)
    errors = {axis: (kept[axis] - kept[f"des_{axis}"]).to_numpy() for axis in TRACKED_AXES}
    return pd.DataFrame(
        {
            "max_abs": [float(np.max(np.abs(e))) for e in errors.values()],
            "rms": [float(np.sqrt(np.mean(e * e))) for e in errors.values()],
        },
        index=pd.Index(TRACKED_AXES, name="axis"),
    )
