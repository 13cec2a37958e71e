"""
privcode: private polynomial codes for distributed matrix multiplication.

A master holding A asks N workers, who share a public library B_1..B_M, for
A·B_D without revealing D. The package provides the finite-field coding layer,
the master/worker protocol with its privacy audit, and the straggler timing
models used to compare one-shot, asynchronous and RPIR schemes.
"""

import logging
from typing import Optional, Sequence, Tuple

import pandas as pd

from privcode.core import (
    BlockMatrix,
    Convention,
    DelayModel,
    PartitionSpec,
    PrimeField,
    PrivcodeError,
    SessionOutcome,
    default_arrival_order,
    default_field,
    figure2_frame,
    figure3_frame,
    orchestrate,
    plan_session,
)

# Set up basic logging
logging.basicConfig(
    level=logging.INFO,
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
)

logger = logging.getLogger(__name__)

__version__ = "0.1.0"


def run_private_session(
    a: BlockMatrix,
    library: Sequence[BlockMatrix],
    desired: int,
    m: int,
    n: int,
    N: int,
    L: int = 1,
    seed: int = 0,
    field: PrimeField = default_field,
    arrival_order: Optional[Sequence[Tuple[int, int]]] = None,
    check_noise: bool = False,
) -> SessionOutcome:
    """
    Compute A·B_D privately, end to end.

    Args:
        a: The master's matrix; m must divide its rows.
        library: The M public library matrices; n-1 must divide their columns.
        desired: 1-based index D of the wanted library matrix.
        m: Row blocks of A.
        n: Number of worker groups.
        N: Number of workers.
        L: Sub-computations per worker.
        seed: Seed for the session plan.
        field: The field all matrices live in.
        arrival_order: (worker_rank, sequence_index) delivery order; round-robin
            when omitted.
        check_noise: Cross-check the discarded constant terms.

    Returns:
        The decoded product and the transcript of consumed results.
    """
    spec = PartitionSpec(m=m, n=n, M=len(library), N=N, L=L)
    plan = plan_session(spec, desired, seed, field)
    order = list(arrival_order) if arrival_order is not None else default_arrival_order(spec)
    return orchestrate(plan, a, library, order, check_noise=check_noise)


def reproduce_figure(
    figure: int, convention: Convention = Convention.HARMONIC, **kwargs
) -> pd.DataFrame:
    """
    Closed-form rows of figure 2 (time against K) or figure 3 (time against mu).

    Keyword arguments are passed to figure2_frame / figure3_frame.
    """
    logger.info(f"Reproducing figure {figure} under the {Convention(convention).value} convention")
    if figure == 2:
        return figure2_frame(convention, **kwargs)
    if figure == 3:
        return figure3_frame(convention, **kwargs)
    raise PrivcodeError(f"unknown figure {figure}; expected 2 or 3")


__all__ = [
    "__version__",
    "BlockMatrix",
    "Convention",
    "DelayModel",
    "PartitionSpec",
    "PrimeField",
    "PrivcodeError",
    "SessionOutcome",
    "run_private_session",
    "reproduce_figure",
]
