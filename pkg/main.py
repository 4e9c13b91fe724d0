import argparse
import logging
import os
import sys

from dotenv import load_dotenv

from harness.episode import accumulated_cost, default_transient_skip, run_episode, tracking_errors
from harness.records import EFFECTIVE_CONFIG_FILENAME, SUMMARY_FILENAME, episode_filename, write_csv
from harness.sweep import DEFAULT_HORIZONS, MODE_ORDER, cost_table, resummarize, run_sweep
from utils.config_loader import DEFAULT_CONFIG_PATH, apply_overrides, dump_config, load_config, resolve_output_dir
from utils.errors import ConfigError, ControlError

logger = logging.getLogger("cli")

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2


def _load(path: str, **overrides):
    config = load_config(path)
    return apply_overrides(config, **overrides) if overrides else config


def cmd_run(args) -> int:
    config = _load(
        args.config,
        controller=args.controller,
        horizon=args.horizon,
        duration=args.duration,
        seed=args.seed,
    )
    out_dir = resolve_output_dir(args.out)
    dump_config(config, out_dir / EFFECTIVE_CONFIG_FILENAME)
    ctrl = config.controller
    log = run_episode(config)
    path = write_csv(log.frame, out_dir / episode_filename(ctrl.mode, ctrl.horizon, config.episode.seed))
    print(f"episode written to {path}")
    if log.failed:
        print(f"episode failed: {log.message}", file=sys.stderr)
        return EXIT_RUNTIME
    skip = default_transient_skip(config)
    cost = accumulated_cost(log, skip)
    print(f"accumulated cost (t >= {skip:g} s): {cost.total:.6e}")
    print(f"mean running cost: {cost.mean:.6e} over {cost.rows} steps")
    print(tracking_errors(log, skip).to_string(float_format=lambda v: f"{v:.4e}"))
    return EXIT_OK


def cmd_sweep(args) -> int:
    out_dir = resolve_output_dir(args.out)
    if args.resummarize:
        summary = resummarize(out_dir)
    else:
        config = _load(args.config, duration=args.duration)
        summary = run_sweep(config, args.horizons, args.modes, args.seeds, out_dir, jobs=args.jobs)
    print(f"summary written to {out_dir / SUMMARY_FILENAME}")
    if summary.empty:
        print("no episodes found")
        return EXIT_RUNTIME
    print(cost_table(summary).to_string(float_format=lambda v: f"{v:.6e}"))
    return EXIT_RUNTIME if summary["failed"].sum() else EXIT_OK


def cmd_validate(args) -> int:
    load_config(args.config)
    print(f"{args.config}: ok")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rql-quadruped", description="Receding-horizon MPC vs roll-out Q-learning on a trotting quadruped.")
    commands = parser.add_subparsers(dest="command", required=True)

    run = commands.add_parser("run", help="run one episode")
    run.add_argument("config", nargs="?", default=str(DEFAULT_CONFIG_PATH))
    run.add_argument("--controller", choices=MODE_ORDER)
    run.add_argument("--horizon", type=int)
    run.add_argument("--duration", type=float)
    run.add_argument("--seed", type=int)
    run.add_argument("--out", help="output directory (default: $RQL_OUTPUT_DIR or data/runs)")
    run.set_defaults(handler=cmd_run)

    sweep = commands.add_parser("sweep", help="run a mode x horizon x seed grid")
    sweep.add_argument("config", nargs="?", default=str(DEFAULT_CONFIG_PATH))
    sweep.add_argument("--horizons", type=int, nargs="+", default=list(DEFAULT_HORIZONS))
    sweep.add_argument("--modes", nargs="+", choices=MODE_ORDER, default=list(MODE_ORDER))
    sweep.add_argument("--seeds", type=int, default=1, help="number of seeds per cell")
    sweep.add_argument("--duration", type=float)
    sweep.add_argument("--jobs", type=int, default=1)
    sweep.add_argument("--out", help="output directory (default: $RQL_OUTPUT_DIR or data/runs)")
    sweep.add_argument("--resummarize", action="store_true", help="rebuild the summary from episode CSVs only")
    sweep.set_defaults(handler=cmd_sweep)

    validate = commands.add_parser("validate", help="check a config file")
    validate.add_argument("config", nargs="?", default=str(DEFAULT_CONFIG_PATH))
    validate.set_defaults(handler=cmd_validate)
    return parser


def main(argv: list[str] | None = None) -> int:
    load_dotenv(".env")
    logging.basicConfig(
        level=os.getenv("LOG_LEVEL", "INFO").upper(),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    args = build_parser().parse_args(argv)
    try:
        return args.handler(args)
    except ConfigError as err:
        for violation in err.violations:
            print(violation, file=sys.stderr)
        return EXIT_INVALID
    except OSError as err:
        print(f"{err}", file=sys.stderr)
        return EXIT_INVALID if args.command == "validate" else EXIT_RUNTIME
    except (ControlError, ValueError) as err:
        logger.error("%s", err)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
