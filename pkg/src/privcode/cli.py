"""
Command-line interface for privcode.

This module provides three commands: `demo` runs one private session end to
end and checks it against schoolbook multiplication, `simulate` writes the
closed-form timing curves of figure 2 or 3 as CSV, and `audit` runs the
privacy audit on the query construction.

Reports go to stdout and are byte-identical for the same config and seed.
Logs go to stderr.
"""

import argparse
import logging
import random
import sys
from pathlib import Path
from typing import Any, Dict, Optional, Sequence

import pandas as pd
from rich.console import Console
from rich.table import Table

from privcode import __version__, reproduce_figure, run_private_session
from privcode.config import RunConfig, load_config
from privcode.core.blockmat import BlockMatrix, matmul
from privcode.core.errors import PrivcodeError
from privcode.core.ffield import PrimeField
from privcode.core.protocol import audit_query_invariance, compose_leaky_query, compose_query
from privcode.core.stragglersim import (
    Convention,
    DelayModel,
    Scheme,
    comm_load,
    reduction_report,
    sample_arrival_order,
)
from privcode.utils import default_output_manager, parse_dims

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_CHECK_FAILED = 2

# Delay model used to order deliveries in the demo
DEMO_GAMMA = 0.1
DEMO_MU = 0.1

FIGURE2_DELAY = 0.1
FIGURE3_GAMMA = 1.0

# Flags that only shape a private session; simulate reads none of them
SESSION_ONLY_FLAGS = ("m", "n", "l", "desired", "dims", "prime")


def setup_logging(verbose: bool = False) -> None:
    """
    Set up logging configuration.

    Args:
        verbose: Whether to use verbose logging.
    """
    logging_level = logging.DEBUG if verbose else logging.INFO
    logging.basicConfig(
        level=logging_level,
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        stream=sys.stderr
    )
    logging.getLogger().setLevel(logging_level)


def _console() -> Console:
    # Fixed width and no colour keep stdout identical across terminals
    return Console(
        file=sys.stdout, width=100, color_system=None, highlight=False, soft_wrap=True
    )


def _int_arg(text: str) -> int:
    try:
        return int(text.replace("_", ""), 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}")


def _dims_arg(text: str):
    try:
        return parse_dims(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc))


def resolve_config(args: argparse.Namespace, timing_only: bool = False) -> RunConfig:
    """Merge defaults, config files and explicit flags, then validate."""
    overrides: Dict[str, Any] = {
        key: getattr(args, key, None)
        for key in (
            "prime", "dims", "m", "n", "big_m", "workers", "l", "desired", "seed",
            "trials", "convention", "fig", "out", "gamma", "mu", "cap",
        )
    }
    return load_config(args.config, overrides).validate(timing_only=timing_only)


def _pad_to_multiple(size: int, block: int) -> int:
    return -(-size // block) * block


def _load_a(args: argparse.Namespace, config: RunConfig, field: PrimeField,
            rng: random.Random) -> BlockMatrix:
    r, s, _ = config.dims
    a_file = getattr(args, "a_file", None)
    if not a_file:
        return BlockMatrix(field.random_matrix(r, s, rng), field)

    logger.info(f"Reading A from {a_file}")
    a = BlockMatrix.from_text(Path(a_file).read_text(encoding="utf-8"))
    if a.field.p != field.p:
        logger.warning(f"A was written over F_{a.field.p}; reducing into F_{field.p}")
        a = BlockMatrix.from_rows(a.data.tolist(), field)
    return a


def demo_command(args: argparse.Namespace) -> int:
    """
    Execute the demo command.

    Args:
        args: Command-line arguments.

    Returns:
        Exit status: 0 when the decoded product matches the oracle.
    """
    config = resolve_config(args)
    spec = config.spec
    field = PrimeField(config.prime)
    rng = random.Random(f"privcode:demo:{config.seed}")

    a = _load_a(args, config, field, rng)
    r, s = a.shape
    t = config.dims[2]
    library = [BlockMatrix(field.random_matrix(s, t, rng), field) for _ in range(spec.M)]

    # Zero padding makes every dimension divisible; the product is cropped back
    padded_r = _pad_to_multiple(r, spec.m)
    padded_t = _pad_to_multiple(t, spec.n - 1)
    if (padded_r, padded_t) != (r, t):
        logger.warning(f"Padding A to {padded_r} rows and the library to {padded_t} columns")
    padded_a = a.pad_to(padded_r, s)
    padded_library = [b.pad_to(s, padded_t) for b in library]

    model = DelayModel(
        gamma=config.gamma if config.gamma is not None else DEMO_GAMMA,
        mu=config.mu if config.mu is not None else DEMO_MU,
    )
    arrival = sample_arrival_order(spec.N, spec.L, spec.m, spec.n, model, config.seed)
    outcome = run_private_session(
        padded_a, padded_library, config.desired, spec.m, spec.n, spec.N, spec.L,
        seed=config.seed, field=field, arrival_order=arrival, check_noise=True,
    )
    product = outcome.product.crop(r, t)
    oracle = matmul(a, library[config.desired - 1])
    matches = product == oracle

    console = _console()
    console.print(f"privcode {__version__} demo", markup=False)
    params = Table(title="Session")
    params.add_column("parameter")
    params.add_column("value", justify="right")
    for name, value in (
        ("p", field.p), ("A", f"{r}x{s}"), ("B_k", f"{s}x{t}"), ("N", spec.N),
        ("n", spec.n), ("m", spec.m), ("M", spec.M), ("L", spec.L),
        ("D", config.desired), ("seed", config.seed),
    ):
        params.add_row(name, str(value))
    console.print(params)
    console.print(f"K = {spec.K}", markup=False)
    console.print(
        f"consumed {outcome.transcript.consumed_count} of "
        f"{outcome.transcript.delivered} delivered results (worker,index,group):",
        markup=False,
    )
    for worker, index, group in outcome.transcript.consumed:
        console.print(f"  {worker},{index},{group}", markup=False)

    loads = Table(title="Communication load (multiples of |A|)")
    loads.add_column("scheme")
    loads.add_column("load", justify="right")
    for scheme in Scheme:
        loads.add_row(scheme.value, str(comm_load(scheme, spec.N, spec.m, spec.L)))
    console.print(loads)

    if not matches:
        logger.error("Decoded product differs from schoolbook multiplication")
        console.print("oracle check: FAILED", markup=False)
        return EXIT_CHECK_FAILED
    console.print("oracle check: decoded product matches A·B_D", markup=False)
    return EXIT_OK


def write_figure_csv(frame: pd.DataFrame, path: Path) -> Path:
    """Write figure rows as UTF-8 CSV with 6-decimal floats and LF line endings."""
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, float_format="%.6f", lineterminator="\n", encoding="utf-8")
    return path


def _frame_table(frame: pd.DataFrame, title: str) -> Table:
    table = Table(title=title)
    for column in frame.columns:
        table.add_column(str(column), justify="right")
    for row in frame.itertuples(index=False):
        table.add_row(*[
            f"{value:.6f}" if isinstance(value, float) else str(value) for value in row
        ])
    return table


def simulate_command(args: argparse.Namespace) -> int:
    """
    Execute the simulate command.

    Args:
        args: Command-line arguments.

    Returns:
        Exit status.
    """
    config = resolve_config(args, timing_only=True)
    convention = Convention(config.convention)
    for flag in SESSION_ONLY_FLAGS:
        if getattr(args, flag, None) is not None:
            logger.warning(
                f"Ignoring --{flag.replace('_', '-')}: the figures fix their own session geometry"
            )

    if config.fig == 2:
        delay = DelayModel(
            gamma=config.gamma if config.gamma is not None else FIGURE2_DELAY,
            mu=config.mu if config.mu is not None else FIGURE2_DELAY,
        )
        frame = reproduce_figure(
            2, convention, N=config.workers, M=config.big_m, model=delay,
            cap=config.cap, seed=config.seed,
        )
    else:
        if config.mu is not None:
            logger.warning("Ignoring --mu: figure 3 sweeps mu over its own grid")
        frame = reproduce_figure(
            3, convention, N=config.workers, M=config.big_m,
            gamma=config.gamma if config.gamma is not None else FIGURE3_GAMMA,
            cap=config.cap, seed=config.seed,
        )

    path = Path(config.out) if config.out else default_output_manager.get_figure_path(
        config.fig, convention.value
    )
    write_figure_csv(frame, path)
    logger.info(f"Wrote figure {config.fig} to {path}")

    console = _console()
    console.print(_frame_table(frame, f"Figure {config.fig} ({convention.value})"))
    if config.fig == 2:
        reductions, summary = reduction_report(frame)
        console.print(_frame_table(reductions, "Reduction of t_a_async"))
        console.print(
            f"reduction vs one-shot: {summary['min_vs_one']:.1%} to {summary['max_vs_one']:.1%}; "
            f"vs RPIR: {summary['min_vs_rpir']:.1%} to {summary['max_vs_rpir']:.1%}",
            markup=False,
        )
    console.print(f"wrote {len(frame)} rows to {path}", markup=False)
    return EXIT_OK


def audit_command(args: argparse.Namespace) -> int:
    """
    Execute the audit command.

    Args:
        args: Command-line arguments.

    Returns:
        Exit status: 0 when every check passes.
    """
    config = resolve_config(args)
    factory = compose_leaky_query if getattr(args, "mutant", False) else compose_query
    if factory is compose_leaky_query:
        logger.warning("Auditing the D-leaking mutant query builder")

    report = audit_query_invariance(
        config.spec, seed_count=config.trials, field=PrimeField(config.prime), factory=factory
    )

    console = _console()
    summary = Table(title="Privacy audit")
    summary.add_column("check")
    summary.add_column("comparisons", justify="right")
    summary.add_row("coupling (query bytes across D)", str(report.coupling_checked))
    summary.add_row("share (encoded A bytes across D)", str(report.share_checked))
    summary.add_row("marginal (chi-square tests)", str(len(report.marginal_pvalues)))
    console.print(summary)
    if report.marginal_pvalues:
        console.print(
            f"smallest marginal p-value: {min(report.marginal_pvalues.values()):.4g}",
            markup=False,
        )

    if not report.passed:
        logger.error(f"Audit failed: {report.first_failure}")
        console.print(f"audit FAILED: {report.first_failure}", markup=False)
        return EXIT_CHECK_FAILED
    console.print("audit passed", markup=False)
    return EXIT_OK


def _add_common_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="Config file of key = value lines.")
    parser.add_argument("--seed", type=_int_arg, help="Seed for every random choice.")
    parser.add_argument("--prime", type=_int_arg, help="Field prime p < 2^64. Default: 2^61-1")
    parser.add_argument("--dims", type=_dims_arg, help="Matrix dimensions RxSxT. Default: 4x6x4")
    parser.add_argument("--m", type=int, help="Row blocks of A.")
    parser.add_argument("--n", type=int, help="Number of worker groups.")
    parser.add_argument("--big-m", dest="big_m", type=int, help="Library size M.")
    parser.add_argument("--workers", type=int, help="Number of workers N.")
    parser.add_argument("--l", type=int, help="Sub-computations per worker L.")
    parser.add_argument("--desired", type=int, help="1-based index D of the wanted matrix.")
    parser.add_argument("--trials", type=int, help="Trials (audit: marginal seeds).")
    parser.add_argument(
        "--convention",
        choices=[c.value for c in Convention],
        help="Order-statistic convention. Default: harmonic"
    )
    parser.add_argument("--gamma", type=float, help="Delay shift gamma.")
    parser.add_argument("--mu", type=float, help="Straggling parameter mu.")
    parser.add_argument("--cap", type=int, help="Grouping enumeration cap. Default: 10^6")
    parser.add_argument(
        "--verbose", "-v",
        action="store_true",
        help="Enable verbose logging."
    )


def build_parser() -> argparse.ArgumentParser:
    """Build the argument parser with its three subcommands."""
    parser = argparse.ArgumentParser(
        prog="privcode",
        description="Private polynomial codes for distributed matrix multiplication."
    )
    parser.add_argument("--version", action="version", version=f"privcode {__version__}")
    subparsers = parser.add_subparsers(
        dest="command",
        help="Command to execute."
    )

    # Demo command
    demo_parser = subparsers.add_parser(
        "demo",
        help="Run one private session and check it against schoolbook multiplication."
    )
    _add_common_arguments(demo_parser)
    demo_parser.add_argument("--a-file", dest="a_file", help="Read A from a matrix file.")

    # Simulate command
    simulate_parser = subparsers.add_parser(
        "simulate",
        help="Write the closed-form timing curves of a figure as CSV."
    )
    _add_common_arguments(simulate_parser)
    simulate_parser.add_argument("--fig", type=int, choices=[2, 3], help="Figure to reproduce.")
    simulate_parser.add_argument(
        "--out", "-o",
        help="Output CSV file. Default: privcode_output/figures/figure<F>_<convention>.csv"
    )

    # Audit command
    audit_parser = subparsers.add_parser(
        "audit",
        help="Check that worker queries and shares carry no information about D."
    )
    _add_common_arguments(audit_parser)
    audit_parser.add_argument(
        "--mutant",
        action="store_true",
        help="Audit a query builder that leaks D (expected to fail)."
    )
    return parser


COMMANDS = {
    "demo": demo_command,
    "simulate": simulate_command,
    "audit": audit_command,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Main entry point for the CLI."""
    parser = build_parser()
    args = parser.parse_args(argv)

    if args.command not in COMMANDS:
        parser.print_help()
        return EXIT_ERROR

    setup_logging(args.verbose)
    try:
        return COMMANDS[args.command](args)
    except PrivcodeError as exc:
        logger.error(str(exc))
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except OSError as exc:
        logger.error(f"Cannot read or write a file: {exc}")
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
