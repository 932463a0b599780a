"""
Command-line interface for geim-lab.

This module provides the main CLI entry point and argument parsing. Each
subcommand runs one experiment and writes its tables, gnuplot script and
text summary into ``<out>/<experiment>/``.
"""

import argparse
import json
import logging
import shutil
import sys
import tempfile
from pathlib import Path
from typing import Any, Dict, List, Optional

from . import __version__
from .bundles import save_snapshot_set
from .config import ExperimentConfig, load_config
from .errors import GeimError
from .experiments import EXPERIMENTS, ExperimentRunner
from .formatters import get_formatter

logger = logging.getLogger(__name__)

_HELP = {
    "snapshots": "Generate the training snapshot set",
    "decay": "Worst GEIM error against M",
    "svd": "Singular value spectrum of the snapshot set",
    "bestfit": "GEIM error against the SVD best fit",
    "lebesgue": "Empirical and exact Lebesgue constants",
    "coupled": "Reconstruction on omega2 driving a solve on omega1",
    "noise": "Variance of the averaged multi-series estimator",
}


def _add_common_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="TOML configuration file")
    parser.add_argument("--out", help="Output directory (default: results)")
    parser.add_argument("--seed", type=int, help="Noise seed")
    parser.add_argument("--threads", type=int, help="Solver threads")
    parser.add_argument(
        "--M-max", dest="M_max", type=int, help="Largest GEIM dimension"
    )
    parser.add_argument(
        "-v",
        "--verbose",
        action="count",
        default=0,
        help="Log more (-v info, -vv debug)",
    )


def create_parser() -> argparse.ArgumentParser:
    """
    Create and configure the command-line argument parser.

    Returns:
        Configured ArgumentParser with one subcommand per experiment

    Example:
        >>> parser = create_parser()
        >>> args = parser.parse_args(['decay', '--M-max', '8'])
        >>> args.M_max
        8
    """
    parser = argparse.ArgumentParser(
        prog="geim-lab",
        description="Generalized empirical interpolation experiments",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  # Training snapshots with the default configuration
  geim-lab snapshots

  # Error decay with a configuration file and a larger basis
  geim-lab decay --config experiment.toml --M-max 20

  # Noise study with another seed, written elsewhere
  geim-lab noise --seed 7 --out /tmp/geim

Flags override configuration keys, which override built-in defaults.
        """,
    )
    parser.add_argument(
        "--version", action="version", version=f"geim-lab {__version__}"
    )
    subparsers = parser.add_subparsers(dest="command", metavar="COMMAND")
    subparsers.required = True
    for name in EXPERIMENTS:
        _add_common_options(subparsers.add_parser(name, help=_HELP[name]))
    return parser


def _configure_logging(verbosity: int) -> None:
    level = logging.WARNING - 10 * min(verbosity, 2)
    logging.basicConfig(
        level=level,
        stream=sys.stderr,
        format="%(levelname)s %(name)s: %(message)s",
    )


def _write_report(
    report: Dict[str, Any], config: ExperimentConfig, target: Path
) -> List[Path]:
    """Write a report into ``target`` through a staging directory."""
    target.parent.mkdir(parents=True, exist_ok=True)
    staging = Path(tempfile.mkdtemp(prefix=f".{target.name}-", dir=target.parent))
    try:
        csv = get_formatter("csv")
        for name in report["tables"]:
            (staging / f"{name}.csv").write_text(
                csv.format(report, name), encoding="utf-8"
            )
        (staging / f"{report['experiment']}.gp").write_text(
            get_formatter("gnuplot").format(report), encoding="utf-8"
        )
        (staging / "summary.txt").write_text(
            get_formatter("text").format(report), encoding="utf-8"
        )
        (staging / "config.toml").write_text(config.to_toml(), encoding="utf-8")
        if "snapshot_set" in report:
            save_snapshot_set(report["snapshot_set"], staging / "snapshots")

        if target.exists():
            shutil.rmtree(target)
        staging.rename(target)
    except BaseException:
        shutil.rmtree(staging, ignore_errors=True)
        raise
    return sorted(target.iterdir())


def _error_record(command: Optional[str], error: BaseException) -> str:
    return json.dumps(
        {
            "status": "error",
            "command": command,
            "error": type(error).__name__,
            "message": str(error),
        }
    )


def main(argv: Optional[List[str]] = None) -> int:
    """Main entry point for the CLI.

    Args:
        argv: Arguments without the program name; ``sys.argv[1:]`` if None

    Returns:
        Exit code (0 for success, 1 for error)
    """
    parser = create_parser()
    args = parser.parse_args(argv)
    _configure_logging(args.verbose)

    try:
        config = load_config(
            args.config,
            out_dir=args.out,
            seed=args.seed,
            threads=args.threads,
            M_max=args.M_max,
        )
        runner = ExperimentRunner(config)
        report = runner.run(args.command)
        target = Path(config.out_dir) / args.command
        written = _write_report(report, config, target)
    except Exception as e:
        if not isinstance(e, GeimError):
            logger.debug("Unexpected failure", exc_info=True)
        print(_error_record(args.command, e), file=sys.stderr)
        return 1

    print(get_formatter("text").format(report))
    print(f"Results written to {target}")
    for path in written:
        print(f"  - {path.name}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
