"""
Column layout and CSV persistence of episode logs and sweep summaries.
"""
import re
from pathlib import Path

import pandas as pd
import yaml

from tools.costs import CRITIC_DIM
from tools.rigid_body import LEG_NAMES, STATE_LABELS
from utils.config_loader import write_text_atomic

STATUS_OK = "ok"
STATE_COLUMNS = list(STATE_LABELS)
DESIRED_COLUMNS = [f"des_{label}" for label in STATE_LABELS]
FORCE_COLUMNS = [f"{leg}_{axis}" for leg in LEG_NAMES for axis in ("x", "y", "z")]
SOLVER_COLUMNS = ["running_cost", "accumulated_cost", "iterations", "objective", "converged"]
WEIGHT_COLUMNS = [f"w_{i}" for i in range(CRITIC_DIM)]
TRACKED_AXES = ("p_x", "p_y", "p_z", "roll", "pitch", "yaw")

EPISODE_PATTERN = re.compile(r"^(?P<mode>mpc|rql)_N(?P<horizon>\d+)_seed(?P<seed>\d+)\.csv$")
SUMMARY_FILENAME = "summary.csv"
EFFECTIVE_CONFIG_FILENAME = "effective_config.yaml"
# a later `run` into the same directory replaces effective_config.yaml, never these
SWEEP_CONFIG_FILENAME = "sweep_config.yaml"
SWEEP_GRID_FILENAME = "sweep_grid.yaml"

# full round-trip precision for float64
FLOAT_FORMAT = "%.17g"


def episode_columns(mode: str) -> list[str]:
    columns = ["t", *STATE_COLUMNS, *DESIRED_COLUMNS, *FORCE_COLUMNS, *SOLVER_COLUMNS]
    if mode == "rql":
        columns += WEIGHT_COLUMNS
    return columns + ["status"]


def episode_filename(mode: str, horizon: int, seed: int) -> str:
    return f"{mode}_N{horizon}_seed{seed}.csv"


def parse_episode_filename(name: str) -> tuple[str, int, int] | None:
    match = EPISODE_PATTERN.match(name)
    if match is None:
        return None
    return match["mode"], int(match["horizon"]), int(match["seed"])


def write_csv(frame: pd.DataFrame, path: str | Path) -> Path:
    """Header row, fixed column order, written atomically."""
    return write_text_atomic(path, frame.to_csv(index=False, float_format=FLOAT_FORMAT, lineterminator="\n"))


def read_csv(path: str | Path) -> pd.DataFrame:
    return pd.read_csv(path, float_precision="round_trip", keep_default_na=True)


def write_sweep_grid(path: str | Path, horizons, modes, seeds) -> Path:
    grid = {"horizons": [int(n) for n in horizons], "modes": list(modes), "seeds": [int(s) for s in seeds]}
    return write_text_atomic(path, yaml.safe_dump(grid, sort_keys=False))


def read_sweep_grid(path: str | Path) -> set[tuple[str, int, int]]:
    """(mode, N, seed) keys of the episodes a sweep owns."""
    with open(path, "r", encoding="utf-8") as file:
        grid = yaml.safe_load(file)
    return {(mode, int(n), int(seed)) for n in grid["horizons"] for mode in grid["modes"] for seed in grid["seeds"]}
