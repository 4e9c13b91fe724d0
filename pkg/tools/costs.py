"""
Running cost, quadratic Q-function model and the action constraint families.
"""
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import nnls

from tools.gait import ContactSchedule
from tools.rigid_body import LEG_NAMES
from utils.config_schema import CostWeights, RobotParams
from utils.errors import SolverError

CRITIC_DIM = 15
ROWS_PER_LEG = 6
FEASIBILITY_TOL = 1e-8


def u_desired(params: RobotParams) -> np.ndarray:
    """Each leg carries a quarter of the weight straight up."""
    u = np.zeros((4, 3))
    u[:, 2] = params.weight / 4.0
    return u


def running_cost(x: np.ndarray, x_des: np.ndarray, u: np.ndarray, weights: CostWeights, params: RobotParams) -> float:
    e_x = x - x_des
    e_u = (u - u_desired(params)).ravel()
    return float(e_x @ (weights.px * e_x) + e_u @ (weights.pu * e_u))


def running_cost_gradients(x, x_des, u, weights: CostWeights, params: RobotParams):
    """(dr/dx, dr/du) with du flattened leg by leg."""
    return 2.0 * weights.px * (x - x_des), 2.0 * weights.pu * (u - u_desired(params)).ravel()


def q_input(x: np.ndarray, x_des: np.ndarray, u: np.ndarray, params: RobotParams) -> np.ndarray:
    """z = [x - x_des; sum(f) - m g]"""
    return np.concatenate([x - x_des, u.sum(axis=0) - params.m * params.gravity_vec])


def q_features(x: np.ndarray, x_des: np.ndarray, u: np.ndarray, params: RobotParams) -> np.ndarray:
    """Q is linear in w with these features: q_value = q_features @ w."""
    z = q_input(x, x_des, u, params)
    return z * z


def q_value(x: np.ndarray, x_des: np.ndarray, u: np.ndarray, w: np.ndarray, params: RobotParams) -> float:
    z = q_input(x, x_des, u, params)
    return float(z @ (w * z))


def q_value_gradients(x, x_des, u, w: np.ndarray, params: RobotParams):
    """(dQ/dx, dQ/du); every leg sees the same force-balance gradient."""
    z = q_input(x, x_des, u, params)
    grad_z = 2.0 * w * z
    return grad_z[:12], np.tile(grad_z[12:], 4)


def friction_rows(params: RobotParams):
    """
    Stacked per-leg constraint rows D u <= d over the flattened action.

    Rows per leg: f_x - mu f_z, -f_x - mu f_z, f_y - mu f_z, -f_y - mu f_z, -f_z, f_z - fz_max.
    """
    mu = params.mu
    block = np.array([
        [1.0, 0.0, -mu],
        [-1.0, 0.0, -mu],
        [0.0, 1.0, -mu],
        [0.0, -1.0, -mu],
        [0.0, 0.0, -1.0],
        [0.0, 0.0, 1.0],
    ])
    D = np.zeros((4 * ROWS_PER_LEG, 12))
    d = np.zeros(4 * ROWS_PER_LEG)
    for leg in range(4):
        D[ROWS_PER_LEG * leg:ROWS_PER_LEG * (leg + 1), 3 * leg:3 * leg + 3] = block
        d[ROWS_PER_LEG * leg + 5] = params.fz_max
    return D, d


def constraint_values(u: np.ndarray, params: RobotParams) -> np.ndarray:
    """(4, 6) row values, feasible when <= 0; same order as friction_rows."""
    fx, fy, fz = u[:, 0], u[:, 1], u[:, 2]
    mu_fz = params.mu * fz
    return np.stack([fx - mu_fz, -fx - mu_fz, fy - mu_fz, -fy - mu_fz, -fz, fz - params.fz_max], axis=1)


@dataclass
class ActionCheck:
    ok: bool
    violations: list[str] = field(default_factory=list)


ROW_NAMES = ("f_x - mu f_z", "-f_x - mu f_z", "f_y - mu f_z", "-f_y - mu f_z", "-f_z", "f_z - fz_max")


def check_action(u: np.ndarray, stance: np.ndarray | ContactSchedule, params: RobotParams) -> ActionCheck:
    """
    Feasibility of one action against its contact schedule (C u = 0) and the friction pyramid.
    """
    schedule = stance if isinstance(stance, ContactSchedule) else ContactSchedule(np.asarray(stance, dtype=bool))
    violations = []
    swing_forces = (schedule.selection @ np.asarray(u, dtype=float).ravel()).reshape(-1, 3)
    for leg, force in zip(schedule.swing_legs, swing_forces):
        if np.any(force != 0.0):
            violations.append(f"{LEG_NAMES[leg]}: nonzero force on a swing leg")
    values = constraint_values(u, params)
    limits = np.array([FEASIBILITY_TOL] * 5 + [FEASIBILITY_TOL * params.fz_max])
    for leg, name in enumerate(LEG_NAMES):
        for row, row_name in enumerate(ROW_NAMES):
            if not values[leg, row] <= limits[row]:
                violations.append(f"{name}: {row_name} = {values[leg, row]:.3e} > 0")
    return ActionCheck(ok=not violations, violations=violations)


def _pyramid_edges(mu: float) -> np.ndarray:
    return np.array([[mu, mu, 1.0], [mu, -mu, 1.0], [-mu, mu, 1.0], [-mu, -mu, 1.0]]).T


def project_force(f: np.ndarray, mu: float, fz_max: float) -> np.ndarray:
    """
    Euclidean projection of one force onto {|f_x|, |f_y| <= mu f_z, f_z <= fz_max}.

    Feasible inputs come back unchanged. The pyramid is the cone spanned by its four edges,
    so the projection is a nonnegative least-squares fit over the edge weights; if that lands
    above the cap, the answer lies on the cap square.

    Raises:
        SolverError: the NNLS fit hit its iteration limit
    """
    fx, fy, fz = f
    if abs(fx) <= mu * fz and abs(fy) <= mu * fz and fz <= fz_max:
        return np.array(f, dtype=float)
    edges = _pyramid_edges(mu)
    try:
        coeffs, _ = nnls(edges, np.asarray(f, dtype=float))
    except RuntimeError as err:
        raise SolverError(f"force projection: {err}") from err
    g = edges @ coeffs
    if g[2] > fz_max:
        limit = mu * fz_max
        g = np.array([np.clip(fx, -limit, limit), np.clip(fy, -limit, limit), fz_max])
    return g


def project_action(u: np.ndarray, stance: np.ndarray, params: RobotParams) -> np.ndarray:
    """Swing legs to exact zero, stance legs onto their pyramid."""
    out = np.zeros((4, 3))
    for leg in range(4):
        if stance[leg]:
            out[leg] = project_force(u[leg], params.mu, params.fz_max)
    return out
