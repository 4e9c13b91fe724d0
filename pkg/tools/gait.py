"""
Deterministic gait scheduler: contact flags, footholds and the reference plan handed to the controllers.
"""
from dataclasses import dataclass

import numpy as np

from tools.rigid_body import P, STATE_DIM, THETA, V, euler_to_rotation
from utils.config_schema import GaitConfig


@dataclass(frozen=True)
class ContactSchedule:
    stance: np.ndarray

    @property
    def swing_legs(self) -> list[int]:
        return [leg for leg in range(4) if not self.stance[leg]]

    @property
    def selection(self) -> np.ndarray:
        """C with one row per swing-leg force component, so C u = 0 pins swing forces to zero."""
        rows = [3 * leg + k for leg in self.swing_legs for k in range(3)]
        C = np.zeros((len(rows), 12))
        C[np.arange(len(rows)), rows] = 1.0
        return C


@dataclass(frozen=True)
class FootholdState:
    """Touchdown positions (world, z = 0), the stance flags last seen and the reference origin."""
    positions: np.ndarray
    stance: np.ndarray
    origin: np.ndarray


@dataclass(frozen=True)
class ReferencePlan:
    t0: float
    x_des_now: np.ndarray
    x_des: np.ndarray
    levers: np.ndarray
    contacts: np.ndarray

    def __post_init__(self):
        if not len(self.x_des) == len(self.levers) == len(self.contacts) >= 1:
            raise ValueError("x_des, levers and contacts must share a nonzero length")

    @property
    def horizon(self) -> int:
        return len(self.x_des)

    def schedule(self, j: int) -> ContactSchedule:
        return ContactSchedule(self.contacts[j])


def _yaw_rotation(yaw: float) -> np.ndarray:
    c, s = np.cos(yaw), np.sin(yaw)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def contact_at(t: float, cfg: GaitConfig) -> np.ndarray:
    """Leg l is in stance iff frac(t / period + offset_l) < duty."""
    if cfg.pattern == "stand":
        return np.ones(4, dtype=bool)
    phase = np.mod(t / cfg.period + cfg.offsets, 1.0)
    return phase < cfg.duty


def _stance_start(t: float, leg: int, cfg: GaitConfig) -> float:
    phase = np.mod(t / cfg.period + cfg.offsets[leg], 1.0)
    return t - phase * cfg.period


def commanded_velocity(t: float, cfg: GaitConfig) -> np.ndarray:
    """World-frame commanded velocity at time t, v_des rotated by the reference yaw."""
    v = np.array([cfg.v_des[0], cfg.v_des[1], 0.0])
    return _yaw_rotation(cfg.yaw_des * t) @ v


def commanded_displacement(t: float, cfg: GaitConfig) -> np.ndarray:
    """Integral of commanded_velocity over [0, t]."""
    vx, vy = cfg.v_des
    w = cfg.yaw_des
    if w == 0.0:
        return np.array([vx * t, vy * t, 0.0])
    s, c = np.sin(w * t), np.cos(w * t)
    return np.array([(s * vx + (c - 1.0) * vy) / w, ((1.0 - c) * vx + s * vy) / w, 0.0])


def reference_state(t: float, cfg: GaitConfig, origin: np.ndarray) -> np.ndarray:
    x_des = np.zeros(STATE_DIM)
    x_des[P] = origin + commanded_displacement(t, cfg)
    x_des[2] = cfg.body_height
    x_des[5] = cfg.yaw_des * t
    x_des[V] = commanded_velocity(t, cfg)
    x_des[11] = cfg.yaw_des
    return x_des


def touchdown_position(p: np.ndarray, rot: np.ndarray, v: np.ndarray, leg: int, cfg: GaitConfig) -> np.ndarray:
    """Hip projection pushed forward by half the stance sweep, dropped to the ground."""
    foot = p + rot @ cfg.hips[leg] + v * (cfg.duty * cfg.period) / 2.0
    foot[2] = 0.0
    return foot


def init_footholds(x: np.ndarray, cfg: GaitConfig) -> FootholdState:
    """All feet planted under the hips at the start of an episode."""
    rot = euler_to_rotation(x[THETA])
    positions = np.array([touchdown_position(x[P], rot, x[V], leg, cfg) for leg in range(4)])
    origin = np.array([x[0], x[1], 0.0])
    return FootholdState(positions=positions, stance=np.ones(4, dtype=bool), origin=origin)


def update_touchdowns(t: float, x: np.ndarray, cfg: GaitConfig, footholds: FootholdState) -> FootholdState:
    """
    Place a new foothold for every leg that switched from swing to stance; planted feet stay put.
    """
    stance = contact_at(t, cfg)
    landing = stance & ~footholds.stance
    positions = footholds.positions.copy()
    if landing.any():
        rot = euler_to_rotation(x[THETA])
        for leg in np.flatnonzero(landing):
            positions[leg] = touchdown_position(x[P], rot, x[V], leg, cfg)
    return FootholdState(positions=positions, stance=stance, origin=footholds.origin)


def plan_reference(
    t: float,
    x: np.ndarray,
    horizon: int,
    delta: float,
    cfg: GaitConfig,
    footholds: FootholdState,
) -> ReferencePlan:
    """
    Desired states, levers and contact flags for the next `horizon` control steps.

    Step j covers [t + j delta, t + (j + 1) delta]: its contacts and levers are taken at the start
    of the interval, its desired state at the end. Levers are measured from the actual body
    position advanced by the commanded velocity. A leg in a stance phase that begins after t gets
    its predicted foothold; swing legs keep the lever of their last touchdown.
    """
    if horizon < 1:
        raise ValueError("horizon must be at least 1")
    stance_now = contact_at(t, cfg)
    shift_now = commanded_displacement(t, cfg)
    x_des = np.empty((horizon, STATE_DIM))
    levers = np.empty((horizon, 4, 3))
    contacts = np.empty((horizon, 4), dtype=bool)
    sweep = cfg.duty * cfg.period / 2.0
    for j in range(horizon):
        t_j = t + j * delta
        contacts[j] = contact_at(t_j, cfg)
        x_des[j] = reference_state(t_j + delta, cfg, footholds.origin)
        body = x[P] + (commanded_displacement(t_j, cfg) - shift_now)
        for leg in range(4):
            foot = footholds.positions[leg]
            if contacts[j, leg] and cfg.pattern != "stand":
                t_td = _stance_start(t_j, leg, cfg)
                if not (stance_now[leg] and t_td <= t + 1e-9 * cfg.period):
                    body_td = x[P] + (commanded_displacement(t_td, cfg) - shift_now)
                    foot = body_td + _yaw_rotation(cfg.yaw_des * t_td) @ cfg.hips[leg] + commanded_velocity(t_td, cfg) * sweep
                    foot[2] = 0.0
            levers[j, leg] = foot - body
    return ReferencePlan(
        t0=t,
        x_des_now=reference_state(t, cfg, footholds.origin),
        x_des=x_des,
        levers=levers,
        contacts=contacts,
    )
