import numpy as np
import pytest

from tools.costs import u_desired
from tools.gait import ReferencePlan, init_footholds, plan_reference, reference_state, update_touchdowns
from utils.config_loader import DEFAULT_CONFIG_PATH, STANDING_CONFIG_PATH, load_config
from utils.config_schema import ExperimentConfig


@pytest.fixture
def config() -> ExperimentConfig:
    return load_config(DEFAULT_CONFIG_PATH)


@pytest.fixture
def standing_config() -> ExperimentConfig:
    return load_config(STANDING_CONFIG_PATH)


@pytest.fixture
def params(config):
    return config.robot


@pytest.fixture
def weights(config):
    return config.costs


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def with_overrides(config: ExperimentConfig, **sections) -> ExperimentConfig:
    """Copy of config with some section fields replaced, e.g. controller={"horizon": 2}."""
    data = config.model_dump()
    for section, values in sections.items():
        data[section].update(values)
    return ExperimentConfig.model_validate(data)


def make_plan(config: ExperimentConfig, t: float, x: np.ndarray, horizon: int | None = None) -> ReferencePlan:
    footholds = update_touchdowns(t, x, config.gait, init_footholds(x, config.gait))
    horizon = config.controller.horizon if horizon is None else horizon
    return plan_reference(t, x, horizon, config.controller.delta, config.gait, footholds)


def standing_state(config: ExperimentConfig) -> np.ndarray:
    return reference_state(0.0, config.gait, np.zeros(3))


def perturbed_state(config: ExperimentConfig, rng, scale: float = 0.05) -> np.ndarray:
    x = reference_state(0.0, config.gait, np.zeros(3))
    return x + scale * rng.standard_normal(12)


def random_feasible_action(stance: np.ndarray, params, rng) -> np.ndarray:
    u = np.zeros((4, 3))
    for leg in np.flatnonzero(stance):
        fz = rng.uniform(5.0, 0.9 * params.fz_max)
        u[leg] = [rng.uniform(-0.9, 0.9) * params.mu * fz, rng.uniform(-0.9, 0.9) * params.mu * fz, fz]
    return u


def random_feasible_actions(plan: ReferencePlan, params, rng) -> np.ndarray:
    return np.array([random_feasible_action(plan.contacts[j], params, rng) for j in range(plan.horizon)])


def standing_actions(horizon: int, params) -> np.ndarray:
    return np.repeat(u_desired(params)[None], horizon, axis=0)
