"""
Validator module for input validation.

This module provides validator functions for checking session parameters
before any encoding or simulation work starts. Validators return a list of
violated constraints (empty when everything holds) and log each violation;
callers decide whether to raise.
"""

import re
from typing import List, Sequence, Tuple
import logging

logger = logging.getLogger(__name__)

# Text of the two inequalities the partitioning must satisfy
SUBCOMPUTATION_BOUND = "L ≤ m"
RECOVERY_BOUND = "L·N/n ≥ m"


def partition_spec_violations(m: int, n: int, M: int, N: int, L: int) -> List[str]:
    """
    Validate the partitioning parameters of a session.

    Args:
        m: Row blocks of A.
        n: Number of worker groups.
        M: Library size.
        N: Number of workers.
        L: Sub-computations per worker.

    Returns:
        Violated constraints, each naming the inequality and the offending values.
    """
    violations = []

    for name, value in (("m", m), ("M", M), ("N", N), ("L", L)):
        if not isinstance(value, int) or value < 1:
            violations.append(f"{name} ≥ 1 (got {value})")
    if not isinstance(n, int) or n < 2:
        violations.append(f"n ≥ 2 (got {n})")

    # The inequalities below are meaningless on garbage input
    if violations:
        for violation in violations:
            logger.warning(f"Invalid partition spec: {violation}")
        return violations

    if N % n:
        violations.append(f"n divides N (got N={N}, n={n})")
    if L > m:
        violations.append(f"{SUBCOMPUTATION_BOUND} (got L={L} > m={m})")
    if N % n == 0 and L * (N // n) < m:
        violations.append(f"{RECOVERY_BOUND} (got {L}·{N}/{n} = {L * (N // n)} < {m})")

    for violation in violations:
        logger.warning(f"Invalid partition spec: {violation}")
    return violations


def field_capacity_violations(p: int, m: int, n: int, M: int, N: int, L: int) -> List[str]:
    """
    Check that F_p has enough nonzero elements for every evaluation point.

    A session draws N·L x-points plus n + M - 1 y-points.
    """
    violations = []
    needed = N * L + M + n
    if p - 1 <= needed:
        violations.append(f"p - 1 > N·L + M + n (got p - 1 = {p - 1} ≤ {needed})")
    for violation in violations:
        logger.warning(f"Field too small: {violation}")
    return violations


def desired_index_violations(desired: int, M: int) -> List[str]:
    """Check that the desired index D lies in [1, M]."""
    if not isinstance(desired, int) or desired < 1 or desired > M:
        message = f"1 ≤ D ≤ M (got D={desired}, M={M})"
        logger.warning(f"Invalid desired index: {message}")
        return [message]
    return []


def grouping_violations(groups: Sequence[Sequence[int]], N: int) -> List[str]:
    """
    Check that groups form an equal-size partition of the ranks 1..N.

    Args:
        groups: Worker ranks per group.
        N: Number of workers.
    """
    violations = []
    flat = [rank for group in groups for rank in group]
    if sorted(flat) != list(range(1, N + 1)):
        violations.append(f"groups must partition ranks 1..{N}")
    if len({len(group) for group in groups}) > 1:
        violations.append("groups must have equal sizes")
    for violation in violations:
        logger.warning(f"Invalid grouping: {violation}")
    return violations


def parse_dims(text: str) -> Tuple[int, int, int]:
    """
    Parse an "RxSxT" dimension string.

    Raises:
        ValueError: If the string is malformed or a dimension is not positive.
    """
    match = re.fullmatch(r"\s*(\d+)\s*[xX]\s*(\d+)\s*[xX]\s*(\d+)\s*", text)
    if not match:
        raise ValueError(f"dims must look like RxSxT (got {text!r})")
    r, s, t = (int(g) for g in match.groups())
    if min(r, s, t) < 1:
        raise ValueError(f"dims must be positive (got {text!r})")
    return r, s, t
