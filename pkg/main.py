"""
epivo CLI - Main entry point for the visual odometry actions
"""

import argparse
import sys
from pathlib import Path
from typing import Callable, Optional, Sequence

from dotenv import load_dotenv
from pydantic import ValidationError
from rich.console import Console

from epivo.core.env_validator import Settings, load_and_validate_settings
from epivo.core.errors import EpivoError
from epivo.core.logger import logger, set_log_level
from epivo.core.schemas import RunConfig

# Load environment variables
load_dotenv()

console = Console()

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INTERRUPTED = 130


def _load_config(args: argparse.Namespace) -> RunConfig:
    """Config file plus the CLI overrides, re-validated."""
    from epivo.core.config_loader import load_run_config
    from epivo.paths import run_config_path, simulate_config_path

    default = simulate_config_path() if args.action == "simulate" else run_config_path()
    config = load_run_config(Path(args.config) if args.config else default)

    overrides = {
        "seed": args.seed,
        "output_dir": args.output,
        "dataset.path": getattr(args, "dataset", None),
        "pipeline.solver": getattr(args, "solver", None),
        "pipeline.scorer": getattr(args, "scorer", None),
    }
    if getattr(args, "toggle_refinement", False):
        overrides["pipeline.refinement"] = not config.pipeline.refinement
    return config.with_overrides(**overrides)


def _report(written: Sequence[Path], output_dir: Path) -> None:
    console.print(f"[green]Wrote {len(written)} file(s) to {output_dir}[/green]")


def run_simulate_action_cli(
    args: argparse.Namespace, config: RunConfig, settings: Settings
) -> None:
    """Generate a synthetic sequence directory"""
    from epivo.actions.common import resolve_output_dir
    from epivo.actions.simulate import run_simulate_action

    output_dir = resolve_output_dir(config, settings, "simulate")
    _report(run_simulate_action(config, output_dir), output_dir)


def run_pipeline_action_cli(
    args: argparse.Namespace, config: RunConfig, settings: Settings
) -> None:
    """Estimate the trajectory of the configured sequence"""
    from epivo.actions.common import resolve_output_dir
    from epivo.actions.run import run_pipeline_action

    output_dir = resolve_output_dir(config, settings, "run")
    _report(run_pipeline_action(config, output_dir, settings), output_dir)


def run_train_action_cli(args: argparse.Namespace, config: RunConfig, settings: Settings) -> None:
    """Train the keypoint refinement denoiser"""
    from epivo.actions.common import resolve_output_dir
    from epivo.actions.train_denoiser import run_train_action

    output_dir = resolve_output_dir(config, settings, "train-denoiser")
    _report(run_train_action(config, output_dir), output_dir)


def run_evaluate_action_cli(
    args: argparse.Namespace, config: RunConfig, settings: Settings
) -> None:
    """Score a stored trajectory against ground truth"""
    from epivo.actions.common import resolve_output_dir
    from epivo.actions.evaluate import run_evaluate_action

    output_dir = resolve_output_dir(config, settings, "evaluate")
    _report(run_evaluate_action(config, Path(args.trajectory), output_dir), output_dir)


def run_plot_action_cli(args: argparse.Namespace, config: RunConfig, settings: Settings) -> None:
    """Render plots of a stored trajectory"""
    from epivo.actions.common import resolve_output_dir
    from epivo.actions.evaluate import run_plot_action

    output_dir = resolve_output_dir(config, settings, "plot")
    written = run_plot_action(
        config,
        Path(args.trajectory),
        output_dir,
        kinds=args.kind,
        metrics_path=Path(args.metrics) if args.metrics else None,
    )
    _report(written, output_dir)


def run_compare_action_cli(args: argparse.Namespace, config: RunConfig, settings: Settings) -> None:
    """Tabulate the pipeline variants on one sequence"""
    from epivo.actions.common import resolve_output_dir
    from epivo.actions.compare import run_compare_action

    output_dir = resolve_output_dir(config, settings, "compare")
    _report(run_compare_action(config, output_dir, settings), output_dir)


ACTIONS: dict[str, Callable[[argparse.Namespace, RunConfig, Settings], None]] = {
    "simulate": run_simulate_action_cli,
    "run": run_pipeline_action_cli,
    "train-denoiser": run_train_action_cli,
    "evaluate": run_evaluate_action_cli,
    "plot": run_plot_action_cli,
    "compare": run_compare_action_cli,
}


def _add_common_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="Run config JSON (default: config/run.json)")
    parser.add_argument("--seed", type=int, help="Override the config seed")
    parser.add_argument("--output", help="Output directory (default: $EPIVO_OUTPUT_ROOT/<action>)")
    parser.add_argument("--verbose", "-v", action="store_true", help="Debug logging")


def _add_pipeline_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--dataset", help="Sequence directory (overrides dataset.path)")
    parser.add_argument(
        "--toggle-refinement",
        action="store_true",
        help="Flip pipeline.refinement from the config value",
    )
    parser.add_argument("--solver", choices=["ransac", "weighted-svd", "multi"])
    parser.add_argument("--scorer", choices=["residual", "mp"])


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="epivo",
        description="epivo - Epipolar visual odometry with keypoint refinement",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Available actions:
  simulate        - Generate a synthetic sequence directory
  run             - Estimate a trajectory and write the metrics report
  train-denoiser  - Train the keypoint refinement denoiser
  evaluate        - Score a stored trajectory against ground truth
  plot            - Render trajectory / refinement plots
  compare         - Tabulate the pipeline variants on one sequence

Exit codes: 0 success, 1 data error, 2 config error, 3 pipeline failure

Examples:
  python main.py simulate --seed 7 --output outputs/seq7
  python main.py run --dataset outputs/seq7 --toggle-refinement
  python main.py evaluate --dataset outputs/seq7 --trajectory outputs/run/trajectory.txt
            """,
    )
    subparsers = parser.add_subparsers(dest="action", help="Available actions")

    simulate_parser = subparsers.add_parser("simulate", help="Generate a synthetic sequence")
    _add_common_arguments(simulate_parser)

    for name, help_text in (
        ("run", "Estimate a trajectory over the configured sequence"),
        ("train-denoiser", "Train the refinement denoiser"),
        ("compare", "Run every pipeline variant and tabulate the errors"),
    ):
        sub = subparsers.add_parser(name, help=help_text)
        _add_common_arguments(sub)
        _add_pipeline_arguments(sub)

    evaluate_parser = subparsers.add_parser("evaluate", help="Score a stored trajectory")
    _add_common_arguments(evaluate_parser)
    _add_pipeline_arguments(evaluate_parser)
    evaluate_parser.add_argument("--trajectory", required=True, help="KITTI trajectory file")

    plot_parser = subparsers.add_parser("plot", help="Render plots of a stored trajectory")
    _add_common_arguments(plot_parser)
    plot_parser.add_argument("--dataset", help="Sequence directory for the ground-truth overlay")
    plot_parser.add_argument("--trajectory", required=True, help="KITTI trajectory file")
    plot_parser.add_argument(
        "--kind",
        action="append",
        choices=["xz", "trajectory3d", "sampson"],
        help="Plot kind; repeat for several (default: plots.kinds from the config)",
    )
    plot_parser.add_argument("--metrics", help="metrics.json, required for the sampson plot")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Main entry point; returns the process exit code"""
    parser = build_parser()
    args = parser.parse_args(argv)
    if not args.action:
        parser.print_help()
        return EXIT_OK

    try:
        settings = load_and_validate_settings()
        set_log_level("DEBUG" if args.verbose else settings.EPIVO_LOG_LEVEL)
        config = _load_config(args)
        ACTIONS[args.action](args, config, settings)
    except ValidationError as e:
        logger.debug("Validation failure", exc_info=True)
        console.print(f"[red]Configuration error: {e}[/red]")
        return EXIT_CONFIG
    except EpivoError as e:
        logger.debug(f"{type(e).__name__} in '{args.action}'", exc_info=True)
        console.print(f"[red]Error ({type(e).__name__}): {e}[/red]")
        return e.exit_code
    except KeyboardInterrupt:
        console.print("\n[yellow]Operation cancelled by user[/yellow]")
        return EXIT_INTERRUPTED
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
