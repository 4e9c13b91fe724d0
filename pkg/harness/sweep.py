"""
Horizon sweeps: every (mode, N, seed) episode written to its own CSV, then summarized per (mode, N) cell.

Summaries are always rebuilt from the episode CSVs on disk, so a sweep resumed after an
interruption, or re-summarized later, reports the same numbers.
"""
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd

from harness.episode import accumulated_cost, default_transient_skip, run_episode, tracking_errors
from harness.records import (
    EFFECTIVE_CONFIG_FILENAME,
    STATUS_OK,
    SUMMARY_FILENAME,
    SWEEP_CONFIG_FILENAME,
    SWEEP_GRID_FILENAME,
    TRACKED_AXES,
    episode_filename,
    parse_episode_filename,
    read_csv,
    read_sweep_grid,
    write_csv,
    write_sweep_grid,
)
from utils.config_loader import dump_config, load_config
from utils.config_schema import ExperimentConfig

logger = logging.getLogger(__name__)

MODE_ORDER = ("mpc", "rql")
DEFAULT_HORIZONS = (1, 2, 3, 4, 5, 6, 8, 10)
SUMMARY_COLUMNS = [
    "mode",
    "horizon",
    "episodes",
    "failed",
    "accumulated_mean",
    "accumulated_std",
    "mean_running_cost",
    *[f"max_err_{axis}" for axis in TRACKED_AXES],
]


@dataclass(frozen=True)
class EpisodeTask:
    config: ExperimentConfig
    path: Path


def sweep_seeds(base: ExperimentConfig, count: int) -> list[int]:
    """`count` distinct seeds counted up from the base seed."""
    if count < 1:
        raise ValueError("at least one seed is required")
    return [base.episode.seed + i for i in range(count)]


def episode_tasks(base: ExperimentConfig, horizons, modes, seeds, out_dir: Path) -> list[EpisodeTask]:
    tasks = []
    for horizon in horizons:
        for mode in modes:
            for seed in seeds:
                data = base.model_dump()
                data["controller"].update(mode=mode, horizon=horizon)
                data["episode"]["seed"] = seed
                config = ExperimentConfig.model_validate(data)
                tasks.append(EpisodeTask(config, out_dir / episode_filename(mode, horizon, seed)))
    return tasks


def _run_task(task: EpisodeTask) -> tuple[str, bool]:
    log = run_episode(task.config)
    write_csv(log.frame, task.path)
    return task.path.name, log.failed


def run_sweep(
    base: ExperimentConfig,
    horizons,
    modes,
    seeds: int | list[int],
    out_dir: str | Path,
    jobs: int = 1,
) -> pd.DataFrame:
    """
    Run every missing episode of the grid, then write and return the summary.

    Existing episode CSVs are kept as they are. Failed episodes are counted per cell and
    left out of the cost statistics.
    """
    horizons = sorted(set(horizons))
    if not horizons:
        raise ValueError("horizons must not be empty")
    unknown = set(modes) - set(MODE_ORDER)
    if unknown or not modes:
        raise ValueError(f"modes must be a nonempty subset of {MODE_ORDER}")
    modes = [mode for mode in MODE_ORDER if mode in modes]
    if isinstance(seeds, int):
        seeds = sweep_seeds(base, seeds)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    dump_config(base, out_dir / EFFECTIVE_CONFIG_FILENAME)
    dump_config(base, out_dir / SWEEP_CONFIG_FILENAME)
    write_sweep_grid(out_dir / SWEEP_GRID_FILENAME, horizons, modes, seeds)

    tasks = episode_tasks(base, horizons, modes, seeds, out_dir)
    pending = [task for task in tasks if not task.path.exists()]
    if len(pending) < len(tasks):
        logger.info("skipping %d episodes already on disk", len(tasks) - len(pending))
    if jobs > 1 and len(pending) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outcomes = pool.map(_run_task, pending)
            for done, (name, failed) in enumerate(outcomes, start=1):
                logger.info("[%d/%d] %s%s", done, len(pending), name, " (failed)" if failed else "")
    else:
        for done, task in enumerate(pending, start=1):
            name, failed = _run_task(task)
            logger.info("[%d/%d] %s%s", done, len(pending), name, " (failed)" if failed else "")

    grid = {(task.config.controller.mode, task.config.controller.horizon, task.config.episode.seed) for task in tasks}
    summary = summarize_runs(out_dir, default_transient_skip(base), grid)
    write_csv(summary, out_dir / SUMMARY_FILENAME)
    return summary


def _episode_stats(path: Path, transient_skip: float) -> dict | None:
    frame = read_csv(path)
    if (frame["status"] != STATUS_OK).any():
        return None
    cost = accumulated_cost(frame, transient_skip)
    errors = tracking_errors(frame, transient_skip)
    stats = {"accumulated": cost.total, "mean_running_cost": cost.mean}
    stats.update({f"max_err_{axis}": errors.loc[axis, "max_abs"] for axis in TRACKED_AXES})
    return stats


def summarize_runs(out_dir: str | Path, transient_skip: float, grid: set | None = None) -> pd.DataFrame:
    """
    One row per (mode, N) from the episode CSVs in out_dir, ascending N with MPC before RQL.

    grid restricts the files to a set of (mode, N, seed) keys.
    """
    cells: dict[tuple[str, int], list] = {}
    for path in sorted(Path(out_dir).glob("*.csv")):
        key = parse_episode_filename(path.name)
        if key is None or (grid is not None and key not in grid):
            continue
        mode, horizon, _ = key
        cells.setdefault((mode, horizon), []).append(_episode_stats(path, transient_skip))

    rows = []
    for (mode, horizon), stats in sorted(cells.items(), key=lambda item: (item[0][1], MODE_ORDER.index(item[0][0]))):
        healthy = [s for s in stats if s is not None]
        row = {"mode": mode, "horizon": horizon, "episodes": len(stats), "failed": len(stats) - len(healthy)}
        if healthy:
            totals = np.array([s["accumulated"] for s in healthy])
            row["accumulated_mean"] = float(totals.mean())
            row["accumulated_std"] = float(totals.std())
            row["mean_running_cost"] = float(np.mean([s["mean_running_cost"] for s in healthy]))
            for axis in TRACKED_AXES:
                row[f"max_err_{axis}"] = float(max(s[f"max_err_{axis}"] for s in healthy))
        rows.append(row)
    return pd.DataFrame(rows, columns=SUMMARY_COLUMNS)


def resummarize(out_dir: str | Path) -> pd.DataFrame:
    """
    Rebuild summary.csv of a sweep directory from its episode CSVs.

    Only the episodes of the recorded grid count, with the transient of the recorded sweep config;
    single runs written into the same directory are ignored.
    """
    out_dir = Path(out_dir)
    config = load_config(out_dir / SWEEP_CONFIG_FILENAME)
    grid = read_sweep_grid(out_dir / SWEEP_GRID_FILENAME)
    summary = summarize_runs(out_dir, default_transient_skip(config), grid)
    write_csv(summary, out_dir / SUMMARY_FILENAME)
    return summary


def cost_table(summary: pd.DataFrame) -> pd.DataFrame:
    """Mean accumulated cost, horizons down the rows, one column per mode."""
    table = summary.pivot(index="horizon", columns="mode", values="accumulated_mean")
    return table[[mode for mode in MODE_ORDER if mode in table.columns]]
