"""Experiment config sections. Every module-level invariant is checked here on load."""
from typing import Annotated, Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, PrivateAttr, model_validator

Vector3 = Annotated[list[float], Field(min_length=3, max_length=3)]


class Section(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class RobotParams(Section):
    """
    Mass properties and contact limits of the single rigid body.
    """
    m: float = Field(12.0, gt=0, description="total mass [kg]")
    inertia_b: Annotated[list[Vector3], Field(min_length=3, max_length=3)] = Field(
        default_factory=lambda: [[0.017, 0.0, 0.0], [0.0, 0.057, 0.0], [0.0, 0.0, 0.065]],
        description="body-frame inertia, symmetric positive-definite [kg m^2]",
    )
    gravity: Vector3 = Field(default_factory=lambda: [0.0, 0.0, 9.81], description="gravity vector, pointing up [m/s^2]")
    mu: float = Field(0.3, gt=0, description="friction coefficient")
    fz_max: float = Field(120.0, gt=0, description="per-leg vertical force cap [N]")

    _inertia: np.ndarray = PrivateAttr()
    _inertia_inv: np.ndarray = PrivateAttr()
    _gravity: np.ndarray = PrivateAttr()

    @model_validator(mode="after")
    def check_physics(self):
        inertia = np.asarray(self.inertia_b, dtype=float)
        if not np.allclose(inertia, inertia.T, rtol=0.0, atol=1e-12):
            raise ValueError("inertia_b must be symmetric")
        if np.linalg.eigvalsh(inertia).min() <= 0.0:
            raise ValueError("inertia_b must be positive-definite")
        weight = self.m * float(np.linalg.norm(self.gravity))
        if self.fz_max <= weight / 4.0:
            raise ValueError(f"fz_max must exceed m*|g|/4 = {weight / 4.0:.4g} N")
        return self

    def model_post_init(self, __context) -> None:
        self._inertia = np.asarray(self.inertia_b, dtype=float)
        self._inertia_inv = np.linalg.inv(self._inertia)
        self._gravity = np.asarray(self.gravity, dtype=float)

    @property
    def inertia(self) -> np.ndarray:
        return self._inertia

    @property
    def inertia_inv(self) -> np.ndarray:
        return self._inertia_inv

    @property
    def gravity_vec(self) -> np.ndarray:
        return self._gravity

    @property
    def weight(self) -> float:
        """m * |g| [N]"""
        return self.m * float(np.linalg.norm(self._gravity))

    def with_mass_scale(self, scale: float) -> "RobotParams":
        """Copy with the mass scaled; used for the mismatched plant, so limits are not re-checked."""
        return self.model_copy(update={"m": self.m * scale})


class GaitConfig(Section):
    """
    Periodic gait and commanded motion fed to the reference planner.
    """
    pattern: Literal["trot", "stand"] = Field("trot", description="'stand' keeps all four legs in stance")
    period: float = Field(0.5, gt=0, description="gait cycle duration [s]")
    duty: float = Field(0.6, description="stance fraction, in (0.5, 1)")
    phase_offsets: Annotated[list[float], Field(min_length=4, max_length=4)] = Field(
        default_factory=lambda: [0.0, 0.5, 0.5, 0.0], description="per-leg phase, FL FR RL RR"
    )
    hip_offsets: Annotated[list[Vector3], Field(min_length=4, max_length=4)] = Field(
        default_factory=lambda: [[0.18, 0.13, 0.0], [0.18, -0.13, 0.0], [-0.18, 0.13, 0.0], [-0.18, -0.13, 0.0]],
        description="nominal hip positions in the body frame [m]",
    )
    body_height: float = Field(0.27, gt=0, description="desired standing height [m]")
    v_des: Annotated[list[float], Field(min_length=2, max_length=2)] = Field(
        default_factory=lambda: [0.5, 0.0], description="desired planar velocity in the heading frame [m/s]"
    )
    yaw_des: float = Field(0.0, description="desired yaw rate [rad/s]")

    _hips: np.ndarray = PrivateAttr()
    _offsets: np.ndarray = PrivateAttr()

    @model_validator(mode="after")
    def check_gait(self):
        if not 0.5 < self.duty < 1.0:
            raise ValueError("duty must lie in (0.5, 1)")
        if any(not 0.0 <= o < 1.0 for o in self.phase_offsets):
            raise ValueError("phase_offsets must lie in [0, 1)")
        if self.pattern == "trot":
            fl, fr, rl, rr = self.phase_offsets
            if fl != rr or fr != rl or abs(abs(fl - fr) - 0.5) > 1e-12:
                raise ValueError("trot phase_offsets must pair diagonal legs half a cycle apart")
        return self

    def model_post_init(self, __context) -> None:
        self._hips = np.asarray(self.hip_offsets, dtype=float)
        self._offsets = np.asarray(self.phase_offsets, dtype=float)

    @property
    def hips(self) -> np.ndarray:
        return self._hips

    @property
    def offsets(self) -> np.ndarray:
        return self._offsets


class CostWeights(Section):
    """
    Diagonals of the running-cost matrices, state order p, angles, v, omega.
    """
    P_x: Annotated[list[float], Field(min_length=12, max_length=12)] = Field(
        default_factory=lambda: [100.0, 50.0, 80.0, 10.0, 10.0, 20.0, 10.0, 5.0, 5.0, 1.0, 1.0, 1.0]
    )
    P_u: Annotated[list[float], Field(min_length=12, max_length=12)] = Field(default_factory=lambda: [1e-4] * 12)

    _px: np.ndarray = PrivateAttr()
    _pu: np.ndarray = PrivateAttr()

    @model_validator(mode="after")
    def check_weights(self):
        if min(self.P_x) < 0 or min(self.P_u) < 0:
            raise ValueError("cost weights must be nonnegative")
        if max(self.P_x) <= 0:
            raise ValueError("at least one P_x entry must be positive")
        return self

    def model_post_init(self, __context) -> None:
        self._px = np.asarray(self.P_x, dtype=float)
        self._pu = np.asarray(self.P_u, dtype=float)

    @property
    def px(self) -> np.ndarray:
        return self._px

    @property
    def pu(self) -> np.ndarray:
        return self._pu


class ControllerConfig(Section):
    mode: Literal["mpc", "rql"] = Field("mpc", description="nominal MPC or roll-out Q-learning")
    horizon: int = Field(5, ge=1, description="prediction horizon N [steps]")
    delta: float = Field(0.03, gt=0, description="prediction step and control period [s]")
    gamma: float = Field(1.0, gt=0, le=1, description="discount factor")
    max_iters: int = Field(100, ge=1, description="solver iteration cap")
    tol: float = Field(1e-6, gt=0, description="projected-gradient stationarity tolerance")


class CriticConfig(Section):
    buffer_size: int = Field(500, ge=2, description="experience replay capacity M")
    lambda_reg: float = Field(1e-3, ge=0, description="ridge weight anchoring w to the previous weights")
    init_weight: float = Field(1e-3, ge=0, description="initial value of every critic weight")
    frozen: bool = Field(False, description="keep the initial weights, no learning")


class EpisodeConfig(Section):
    duration: float = Field(20.0, gt=0, description="episode length [s]")
    substeps: int = Field(10, ge=1, description="RK4 substeps per control period")
    mass_scale: float = Field(1.0, gt=0, description="plant mass relative to the model mass")
    action_noise_std: float = Field(0.0, ge=0, description="std of Gaussian noise added per force component [N]")
    seed: int = Field(0, ge=0, description="rng seed")
    transient_fraction: float = Field(0.2, ge=0, lt=1, description="share of the episode excluded from cost statistics")
    start_at_rest: bool = Field(True, description="start with zero velocity instead of the commanded one")


class ExperimentConfig(Section):
    robot: RobotParams = Field(default_factory=RobotParams)
    gait: GaitConfig = Field(default_factory=GaitConfig)
    costs: CostWeights = Field(default_factory=CostWeights)
    controller: ControllerConfig = Field(default_factory=ControllerConfig)
    critic: CriticConfig = Field(default_factory=CriticConfig)
    episode: EpisodeConfig = Field(default_factory=EpisodeConfig)
