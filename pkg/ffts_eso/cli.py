"""Command-line interface for ffts-eso."""

import argparse
import logging
import sys
from collections.abc import Sequence
from pathlib import Path

import numpy as np

from . import __version__
from .config import build_sim_config, load_config, merge_config_with_args
from .differentiator import noise_gap_argmax_oracle
from .errors import DomainError
from .observer import gain_report_a, gain_report_t
from .sim.output import write_summary
from .sim.runner import RunSummary, run_and_write, run_suite, suite_configs
from .stability import MarginStatus, robustness_margin

LOG = logging.getLogger("ffts_eso")

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


def configure_logging(verbose: bool = False, debug: bool = False) -> None:
    """Set up root logging once: WARNING, INFO with --verbose, DEBUG with --debug."""
    level = logging.DEBUG if debug else logging.INFO if verbose else logging.WARNING
    logging.basicConfig(level=level, format=LOG_FORMAT, stream=sys.stderr)


def format_summaries(summaries: Sequence[RunSummary]) -> str:
    """Render run summaries as a text report."""
    lines = []
    lines.append("=" * 60)
    lines.append("SIMULATION SUMMARY")
    lines.append("=" * 60)
    for s in summaries:
        status = "❌" if s.diverged else "✅"
        lines.append(f"{status} {s.name}")
        lines.append(
            f"    FFTS-ESO  max |e_phi| = {s.max_e_phi:.3e} N, "
            f"max |e_tau| = {s.max_e_tau:.3e} N m"
        )
        lines.append(
            f"    terminal  |e_phi| = {s.terminal_e_phi:.3e} N, "
            f"|e_tau| = {s.terminal_e_tau:.3e} N m"
        )
        lines.append(
            f"    tracking  mean position error = {s.mean_position_tracking_error:.4f} m, "
            f"mean attitude error = {s.mean_attitude_tracking_error:.4f} rad"
        )
        if s.leso_max_e_phi is not None:
            flag = " (Euler singularity)" if s.leso_singular_steps else ""
            lines.append(
                f"    LESO      max |e_phi| = {s.leso_max_e_phi:.3e}, "
                f"max |e_tau| = {s.leso_max_e_tau:.3e}{flag}"
            )
            lines.append(
                f"    FxTSDO    max |e_phi| = {s.fxtsdo_max_e_phi:.3e}, "
                f"max |e_tau| = {s.fxtsdo_max_e_tau:.3e}"
            )
    lines.append("=" * 60)
    return "\n".join(lines)


def cmd_run(args) -> int:
    """Execute the run command.

    Args:
        args: Parsed command-line arguments.

    Returns:
        Exit code (0 for success, 1 for failure).
    """
    try:
        config = load_config()
        merged = merge_config_with_args(config, args, "run")
        cfg = build_sim_config(config, merged["config_file"], merged["overrides"])

        summary = run_and_write(cfg, plots=merged["plots"])
        write_summary([summary], Path(cfg.out_dir) / f"{summary.name}_summary.json")

        print(format_summaries([summary]))
        return 1 if summary.diverged else 0

    except Exception as e:
        print(f"Error: {e}", file=sys.stderr)
        if args.verbose:
            raise
        return 1


def cmd_suite(args) -> int:
    """Execute the suite command.

    Args:
        args: Parsed command-line arguments.

    Returns:
        Exit code (0 for success, 1 for failure).
    """
    try:
        config = load_config()
        merged = merge_config_with_args(config, args, "suite")
        base = build_sim_config(config, merged["config_file"], merged["overrides"])

        configs = suite_configs(
            base,
            noise_modes=merged["noise_modes"],
            reject_modes=merged["reject_modes"],
            baseline_modes=merged["baselines_modes"],
        )
        summaries = run_suite(configs, jobs=merged["jobs"], plots=merged["plots"])
        write_summary(summaries, Path(base.out_dir) / "summary.json")

        print(format_summaries(summaries))
        return 1 if any(s.diverged for s in summaries) else 0

    except Exception as e:
        print(f"Error: {e}", file=sys.stderr)
        if args.verbose:
            raise
        return 1


def cmd_gains_check(args) -> int:
    """Execute the gains check command.

    Args:
        args: Parsed command-line arguments.

    Returns:
        Exit code (0 if every gain constraint holds, 1 otherwise).
    """
    try:
        config = load_config()
        merged = merge_config_with_args(config, args, "gains")
        cfg = build_sim_config(config, merged["config_file"], merged["overrides"])
        v0 = merged["v0"]

        reports = [
            gain_report_t(cfg.translational.build()),
            gain_report_a(cfg.rotational.build()),
        ]
        for report in reports:
            print(report)
            if report.is_valid:
                print(f"Settling bound from V0 = {v0:g}: {report.settling_time(v0):.6g} s")
            margin = robustness_margin(report.certificate)
            print(
                f"Robustness margin gamma1 - lambda_max/lambda_min = {margin.margin:.6g} "
                f"({margin.status.value})"
            )
            if margin.status is not MarginStatus.SATISFIED:
                LOG.warning(
                    "%s certificate has no disturbance-robust decay rate (%s)",
                    report.name,
                    margin.status.value,
                )
            print()

        return 0 if all(r.is_valid for r in reports) else 1

    except Exception as e:
        print(f"Error: {e}", file=sys.stderr)
        if args.verbose:
            raise
        return 1


def cmd_oracle_noise_gap(args) -> int:
    """Execute the oracle lemma5 (alias noise-gap) command.

    Args:
        args: Parsed command-line arguments.

    Returns:
        Exit code (0 if the maximizer lands within two grid steps of -mu/2).
    """
    try:
        rng = np.random.default_rng(args.seed)
        if args.mu is not None:
            mu = np.asarray(args.mu, dtype=float)
        else:
            mu = rng.uniform(-1.0, 1.0, size=args.dim)
        alpha = args.alpha if args.alpha is not None else float(rng.uniform(0.05, 0.45))
        if not np.any(mu):
            raise DomainError("mu must be nonzero")

        x = noise_gap_argmax_oracle(mu, alpha, step=args.step)
        expected = -0.5 * mu
        distance = float(np.linalg.norm(x - expected)) / float(np.linalg.norm(mu))
        ok = distance <= 2.0 * args.step * np.sqrt(2.0)

        print("=" * 60)
        print("NOISE-GAP MAXIMIZER")
        print("=" * 60)
        print(f"mu     = {np.array2string(mu, precision=6)}")
        print(f"alpha  = {alpha:.6g}")
        print(f"argmax = {np.array2string(x, precision=6)}")
        print(f"-mu/2  = {np.array2string(expected, precision=6)}")
        print(f"distance / |mu| = {distance:.3e} (grid step {args.step:g})")
        print("✅ Maximizer at -mu/2" if ok else "❌ Maximizer away from -mu/2")
        print("=" * 60)
        return 0 if ok else 1

    except Exception as e:
        print(f"Error: {e}", file=sys.stderr)
        if args.verbose:
            raise
        return 1


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--config",
        "-c",
        default=None,
        help="YAML file of simulation settings (overrides pyproject.toml)",
    )
    parser.add_argument(
        "--verbose",
        "-v",
        action="store_true",
        help="Verbose output (INFO logging, tracebacks on error)",
    )
    parser.add_argument(
        "--debug",
        action="store_true",
        help="DEBUG logging",
    )


def _add_sim_options(parser: argparse.ArgumentParser, grid: bool = False) -> None:
    # suite flags take "both" to span the axis
    modes = ("on", "off", "both") if grid else ("on", "off")
    parser.add_argument(
        "--noise",
        choices=modes,
        default=None,
        help="Measurement noise (suite default: both)" if grid else "Measurement noise",
    )
    parser.add_argument("--seed", type=int, default=None, help="Noise seed (default: 0)")
    parser.add_argument("--h", type=float, default=None, help="Step size in s (default: 0.001)")
    parser.add_argument(
        "--duration", type=float, default=None, help="Simulated time in s (default: 30)"
    )
    parser.add_argument("--out", default=None, help="Output directory (default: results)")
    parser.add_argument(
        "--baselines",
        choices=modes,
        default=None,
        help=f"Also run the LESO and FxTSDO baselines (default: {'both' if grid else 'on'})",
    )
    parser.add_argument(
        "--no-plots",
        action="store_true",
        help="Skip SVG figures",
    )


def build_parser() -> argparse.ArgumentParser:
    """Build the argument parser with all subcommands."""
    parser = argparse.ArgumentParser(
        prog="ffts-eso",
        description="Fast finite-time stable extended state observers on SE(3)",
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )

    parser.add_argument(
        "--version",
        action="version",
        version=f"%(prog)s {__version__}",
    )

    subparsers = parser.add_subparsers(dest="command", help="Available commands")

    # Run command
    run_parser = subparsers.add_parser(
        "run",
        help="Simulate one scenario",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  # Hover, noise-free, default gains and disturbances
  ffts-eso run

  # High-pitch flight with measurement noise
  ffts-eso run --scenario high-pitch --noise on --seed 7

  # Feed the disturbance estimates back to the controller
  ffts-eso run --scenario slow-swing --reject on --out results/reject

Outputs:
  <out>/<scenario>_<noise>.csv           one row per step, units in the header
  <out>/<scenario>_<noise>.svg           estimation-error norms
  <out>/<scenario>_<noise>_summary.json  max/terminal error norms
        """,
    )
    run_parser.add_argument(
        "--scenario",
        choices=("hover", "slow-swing", "fast-swing", "high-pitch"),
        default=None,
        help="Reference trajectory (default: hover)",
    )
    _add_sim_options(run_parser)
    run_parser.add_argument(
        "--reject",
        choices=("on", "off"),
        default=None,
        help="Cancel estimated disturbances in the controller (default: off)",
    )
    _add_common(run_parser)
    run_parser.set_defaults(func=cmd_run)

    # Suite command
    suite_parser = subparsers.add_parser(
        "suite",
        help="Simulate every scenario with and without noise and baselines",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  # All four scenarios, noise-free and noisy, with and without baselines
  ffts-eso suite --out results

  # Noisy runs only, FFTS-ESO alone
  ffts-eso suite --noise on --baselines off

  # Compare tracking with and without disturbance rejection on 4 processes
  ffts-eso suite --reject both --jobs 4

Configuration (pyproject.toml):
  [tool.ffts-eso]
  h = 0.001
  duration = 30.0

  [tool.ffts-eso.suite]
  jobs = 4
  reject = "both"
        """,
    )
    _add_sim_options(suite_parser, grid=True)
    suite_parser.add_argument(
        "--reject",
        choices=("on", "off", "both"),
        default=None,
        help="Disturbance feedforward mode(s) (default: off)",
    )
    suite_parser.add_argument(
        "--jobs",
        "-j",
        type=int,
        default=None,
        help="Worker processes (default: 1)",
    )
    _add_common(suite_parser)
    suite_parser.set_defaults(func=cmd_suite)

    # Gains command
    gains_parser = subparsers.add_parser(
        "gains",
        help="Inspect observer gain certificates",
    )
    gains_sub = gains_parser.add_subparsers(dest="gains_command", help="Gain tools")
    check_parser = gains_sub.add_parser(
        "check",
        help="Print Lyapunov certificates, decay constants and settling bounds",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  # Check the default gains
  ffts-eso gains check

  # Check gains from a file, settling bounds from V0 = 2
  ffts-eso gains check --config gains.yaml --v0 2
        """,
    )
    check_parser.add_argument(
        "--v0",
        type=float,
        default=None,
        help="Initial Lyapunov value for the settling bounds (default: 1.0)",
    )
    _add_common(check_parser)
    check_parser.set_defaults(func=cmd_gains_check)

    # Oracle command
    oracle_parser = subparsers.add_parser(
        "oracle",
        help="Numerical oracles",
    )
    oracle_sub = oracle_parser.add_subparsers(dest="oracle_command", help="Oracles")
    gap_parser = oracle_sub.add_parser(
        "lemma5",
        aliases=["noise-gap"],
        help="Grid search for the maximizer of the noise-gap function",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  # Random mu and alpha from a seed
  ffts-eso oracle lemma5 --seed 3

  # Explicit noise vector and exponent
  ffts-eso oracle noise-gap --mu 0.3 -0.2 0.1 --alpha 0.2 --step 0.002
        """,
    )
    gap_parser.add_argument("--mu", type=float, nargs="+", default=None, help="Noise vector")
    gap_parser.add_argument("--alpha", type=float, default=None, help="Exponent in (0, 1/2)")
    gap_parser.add_argument("--step", type=float, default=1e-3, help="Grid step (default: 1e-3)")
    gap_parser.add_argument("--dim", type=int, default=3, help="Dimension of a random mu")
    gap_parser.add_argument("--seed", type=int, default=0, help="Seed for random mu/alpha")
    gap_parser.add_argument("--verbose", "-v", action="store_true", help="Verbose output")
    gap_parser.add_argument("--debug", action="store_true", help="DEBUG logging")
    gap_parser.set_defaults(func=cmd_oracle_noise_gap)

    return parser


def main(argv: list | None = None) -> int:
    """Main entry point for the CLI.

    Args:
        argv: Command-line arguments. Defaults to sys.argv[1:].

    Returns:
        Exit code (0 for success, 1 for failure).
    """
    parser = build_parser()
    args = parser.parse_args(argv)

    if not hasattr(args, "func"):
        parser.print_help()
        return 1

    configure_logging(args.verbose, args.debug)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
