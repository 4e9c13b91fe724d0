import logging
import os
import tempfile
from pathlib import Path

import yaml
from dotenv import load_dotenv
from pydantic import ValidationError

from utils.config_schema import ExperimentConfig
from utils.errors import ConfigError

logger = logging.getLogger(__name__)

DEFAULT_CONFIG_PATH = Path(__file__).parent / "experiment_config.yaml"
STANDING_CONFIG_PATH = Path(__file__).parent / "standing_config.yaml"
OUTPUT_DIR_ENV = "RQL_OUTPUT_DIR"
DEFAULT_OUTPUT_DIR = Path("data/runs")


def _violations(err: ValidationError) -> list[str]:
    messages = []
    for item in err.errors():
        where = ".".join(str(part) for part in item["loc"]) or "config"
        messages.append(f"{where}: {item['msg']}")
    return messages


def validate_config(data: dict) -> ExperimentConfig:
    """
    Build an ExperimentConfig from a plain mapping, collecting every violation.
    """
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as err:
        raise ConfigError(_violations(err)) from err


def load_config(config_path: str | Path = DEFAULT_CONFIG_PATH) -> ExperimentConfig:
    """
    Read a YAML experiment config. Missing sections and keys take the documented defaults.

    Raises:
        OSError: the file cannot be read
        ConfigError: the document is not valid YAML or breaks an invariant
    """
    with open(config_path, "r", encoding="utf-8") as file:
        try:
            data = yaml.safe_load(file) or {}
        except yaml.YAMLError as err:
            raise ConfigError([f"config: not valid YAML ({err})"]) from err
    if not isinstance(data, dict):
        raise ConfigError(["config: top level must be a mapping of sections"])
    logger.debug("loaded config from %s", config_path)
    return validate_config(data)


def apply_overrides(
    config: ExperimentConfig,
    controller: str | None = None,
    horizon: int | None = None,
    duration: float | None = None,
    seed: int | None = None,
) -> ExperimentConfig:
    """Command-line values win over file values; the result is re-validated."""
    data = config.model_dump()
    if controller is not None:
        data["controller"]["mode"] = controller
    if horizon is not None:
        data["controller"]["horizon"] = horizon
    if duration is not None:
        data["episode"]["duration"] = duration
    if seed is not None:
        data["episode"]["seed"] = seed
    return validate_config(data)


def write_text_atomic(path: str | Path, text: str) -> Path:
    """Write through a temp file in the same directory, then rename over the target."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as file:
            file.write(text)
        os.replace(tmp_name, path)
    except BaseException:
        Path(tmp_name).unlink(missing_ok=True)
        raise
    return path


def dump_config(config: ExperimentConfig, path: str | Path) -> Path:
    text = yaml.safe_dump(config.model_dump(), sort_keys=False, allow_unicode=True)
    return write_text_atomic(path, text)


def resolve_output_dir(cli_value: str | None = None) -> Path:
    """`--out` beats RQL_OUTPUT_DIR (environment or .env), which beats data/runs."""
    if cli_value:
        return Path(cli_value)
    load_dotenv(".env")
    env_value = os.getenv(OUTPUT_DIR_ENV)
    if env_value:
        return Path(env_value)
    return DEFAULT_OUTPUT_DIR
