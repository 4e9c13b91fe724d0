"""
Single-rigid-body model of the quadruped trunk.

State vectors are flat (12,) arrays [p, theta, v, omega_b] with theta = (roll, pitch, yaw)
in the ZYX convention; forces and levers are (4, 3) world-frame arrays in leg order FL, FR, RL, RR.
"""
from dataclasses import dataclass

import numpy as np

from utils.config_schema import RobotParams
from utils.errors import DivergenceError, SingularAttitudeError

LEG_NAMES = ("fl", "fr", "rl", "rr")
STATE_LABELS = ("p_x", "p_y", "p_z", "roll", "pitch", "yaw", "v_x", "v_y", "v_z", "w_x", "w_y", "w_z")
STATE_DIM = 12
ACTION_DIM = 12
PITCH_GUARD = 1e-3

P, THETA, V, OMEGA = slice(0, 3), slice(3, 6), slice(6, 9), slice(9, 12)


@dataclass(frozen=True)
class BodyState:
    p: np.ndarray
    theta: np.ndarray
    v: np.ndarray
    omega_b: np.ndarray

    @classmethod
    def from_vector(cls, x: np.ndarray) -> "BodyState":
        x = np.asarray(x, dtype=float)
        return cls(x[P].copy(), x[THETA].copy(), x[V].copy(), x[OMEGA].copy())

    def to_vector(self) -> np.ndarray:
        return np.concatenate([self.p, self.theta, self.v, self.omega_b]).astype(float)

    def is_valid(self) -> bool:
        x = self.to_vector()
        return bool(np.all(np.isfinite(x))) and abs(np.cos(self.theta[1])) > PITCH_GUARD


def skew(a: np.ndarray) -> np.ndarray:
    return np.array([[0.0, -a[2], a[1]], [a[2], 0.0, -a[0]], [-a[1], a[0], 0.0]])


def _check_pitch(theta: np.ndarray) -> None:
    if not abs(np.cos(theta[1])) > PITCH_GUARD:
        raise SingularAttitudeError(f"pitch {theta[1]:.6f} rad is within {PITCH_GUARD} of the Euler-rate singularity")


def euler_to_rotation(theta: np.ndarray) -> np.ndarray:
    """
    Body-to-world rotation R = Rz(yaw) Ry(pitch) Rx(roll).
    """
    _check_pitch(theta)
    cr, sr = np.cos(theta[0]), np.sin(theta[0])
    cp, sp = np.cos(theta[1]), np.sin(theta[1])
    cy, sy = np.cos(theta[2]), np.sin(theta[2])
    return np.array([
        [cy * cp, cy * sp * sr - sy * cr, cy * sp * cr + sy * sr],
        [sy * cp, sy * sp * sr + cy * cr, sy * sp * cr - cy * sr],
        [-sp, cp * sr, cp * cr],
    ])


def euler_rate_matrix_inverse(theta: np.ndarray) -> np.ndarray:
    """
    Map from body angular velocity to Euler-angle rates, d(theta)/dt = J^-1(theta) omega_b.
    """
    _check_pitch(theta)
    cr, sr = np.cos(theta[0]), np.sin(theta[0])
    cp, tp = np.cos(theta[1]), np.tan(theta[1])
    return np.array([
        [1.0, sr * tp, cr * tp],
        [0.0, cr, -sr],
        [0.0, sr / cp, cr / cp],
    ])


def net_torque(levers: np.ndarray, u: np.ndarray) -> np.ndarray:
    """World-frame torque sum of r_i x f_i."""
    return np.cross(levers, u).sum(axis=0)


def dynamics(x: np.ndarray, levers: np.ndarray, u: np.ndarray, params: RobotParams) -> np.ndarray:
    """
    Continuous single-rigid-body dynamics, returns dx/dt as a (12,) array.

    Raises:
        SingularAttitudeError: pitch at the Euler-rate singularity
    """
    theta, v, omega = x[THETA], x[V], x[OMEGA]
    rot = euler_to_rotation(theta)
    j_inv = euler_rate_matrix_inverse(theta)
    inertia = params.inertia
    torque_body = rot.T @ net_torque(levers, u)
    xdot = np.empty(STATE_DIM)
    xdot[P] = v
    xdot[THETA] = j_inv @ omega
    xdot[V] = u.sum(axis=0) / params.m - params.gravity_vec
    xdot[OMEGA] = params.inertia_inv @ (torque_body - np.cross(omega, inertia @ omega))
    return xdot


def _elementary(theta: np.ndarray):
    cr, sr = np.cos(theta[0]), np.sin(theta[0])
    cp, sp = np.cos(theta[1]), np.sin(theta[1])
    cy, sy = np.cos(theta[2]), np.sin(theta[2])
    rx = np.array([[1.0, 0.0, 0.0], [0.0, cr, -sr], [0.0, sr, cr]])
    ry = np.array([[cp, 0.0, sp], [0.0, 1.0, 0.0], [-sp, 0.0, cp]])
    rz = np.array([[cy, -sy, 0.0], [sy, cy, 0.0], [0.0, 0.0, 1.0]])
    drx = np.array([[0.0, 0.0, 0.0], [0.0, -sr, -cr], [0.0, cr, -sr]])
    dry = np.array([[-sp, 0.0, cp], [0.0, 0.0, 0.0], [-cp, 0.0, -sp]])
    drz = np.array([[-sy, -cy, 0.0], [cy, -sy, 0.0], [0.0, 0.0, 0.0]])
    return (rx, ry, rz), (drx, dry, drz)


def dynamics_jacobians(x: np.ndarray, levers: np.ndarray, u: np.ndarray, params: RobotParams):
    """
    Partial derivatives of dynamics() with levers held fixed.

    Returns:
        (df/dx, df/du), both (12, 12); u is flattened leg by leg.
    """
    theta, omega = x[THETA], x[OMEGA]
    _check_pitch(theta)
    (rx, ry, rz), (drx, dry, drz) = _elementary(theta)
    rot = rz @ ry @ rx
    d_rot = (rz @ ry @ drx, rz @ dry @ rx, drz @ ry @ rx)
    inertia, inertia_inv = params.inertia, params.inertia_inv
    torque = net_torque(levers, u)

    cr, sr = np.cos(theta[0]), np.sin(theta[0])
    cp, sp, tp = np.cos(theta[1]), np.sin(theta[1]), np.tan(theta[1])
    dj_droll = np.array([[0.0, cr * tp, -sr * tp], [0.0, -sr, -cr], [0.0, cr / cp, -sr / cp]])
    dj_dpitch = np.array([
        [0.0, sr / cp**2, cr / cp**2],
        [0.0, 0.0, 0.0],
        [0.0, sr * sp / cp**2, cr * sp / cp**2],
    ])

    fx = np.zeros((STATE_DIM, STATE_DIM))
    fx[P, V] = np.eye(3)
    fx[THETA, 3] = dj_droll @ omega
    fx[THETA, 4] = dj_dpitch @ omega
    fx[THETA, OMEGA] = euler_rate_matrix_inverse(theta)
    for k in range(3):
        fx[OMEGA, 3 + k] = inertia_inv @ (d_rot[k].T @ torque)
    fx[OMEGA, OMEGA] = -inertia_inv @ (skew(omega) @ inertia - skew(inertia @ omega))

    fu = np.zeros((STATE_DIM, ACTION_DIM))
    body_map = inertia_inv @ rot.T
    for leg in range(4):
        cols = slice(3 * leg, 3 * leg + 3)
        fu[V, cols] = np.eye(3) / params.m
        fu[OMEGA, cols] = body_map @ skew(levers[leg])
    return fx, fu


def predict_euler(delta: float, x: np.ndarray, levers: np.ndarray, u: np.ndarray, params: RobotParams) -> np.ndarray:
    """One explicit Euler step, the controller's internal predictor."""
    if delta < 0:
        raise ValueError("delta must be nonnegative")
    return x + delta * dynamics(x, levers, u, params)


def integrate_plant(
    delta: float,
    substeps: int,
    x: np.ndarray,
    levers: np.ndarray,
    u: np.ndarray,
    params: RobotParams,
) -> np.ndarray:
    """
    Advance the plant by delta with classical RK4 in equal substeps; u and levers are held.

    Raises:
        DivergenceError: the state became non-finite
    """
    if substeps < 1:
        raise ValueError("substeps must be at least 1")
    h = delta / substeps
    state = np.asarray(x, dtype=float)
    for _ in range(substeps):
        k1 = dynamics(state, levers, u, params)
        k2 = dynamics(state + 0.5 * h * k1, levers, u, params)
        k3 = dynamics(state + 0.5 * h * k2, levers, u, params)
        k4 = dynamics(state + h * k3, levers, u, params)
        state = state + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if not np.all(np.isfinite(state)):
        raise DivergenceError("plant state is no longer finite")
    return state
