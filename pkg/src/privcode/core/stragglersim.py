"""
Straggler timing and communication models.

Worker completion times follow a shifted exponential law,
Pr(T <= t) = 1 - exp(-mu (t - gamma)) for t >= gamma. Closed forms plug the
expected k-th order statistic of N such times into each scheme's completion
rule. The event simulator samples the times directly and is the ground truth
for the true expectations.

Three conventions exist for the expected order statistic:
  harmonic: gamma + (H_N - H_{N-k}) / mu        (exact, finite for k = N)
  log:      gamma + ln(N / (N - k)) / mu         (diverges at k = N)
  log2:     gamma + log2(N / (N - k)) / mu       (diverges at k = N)
"""

import logging
import math
from dataclasses import dataclass, field as dataclass_field
from enum import Enum
from fractions import Fraction
from itertools import combinations
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from privcode.core.errors import (
    DivergentOrderStatError,
    InfeasibleGroupingError,
    InvalidSpecError,
)
from privcode.utils.validators import grouping_violations, partition_spec_violations

logger = logging.getLogger(__name__)

DEFAULT_GROUPING_CAP = 10**6

# Chunk size for vectorized grouping averages
_PLAN_CHUNK = 50_000

# Figure geometries
FIGURE2_K_VALUES = (2, 4, 6, 8, 10)
FIGURE3_MU_POINTS = 20
FIGURE_GROUPS = 2


class Convention(str, Enum):
    """How the expected order statistic is evaluated."""

    HARMONIC = "harmonic"
    LOG = "log"
    LOG2 = "log2"


class Metric(str, Enum):
    ONE_SHOT = "one_shot"
    ASYNC = "async"


class Scheme(str, Enum):
    RPIR = "rpir"
    ONE_SHOT = "one_shot"
    ASYNC = "async"


@dataclass(frozen=True)
class DelayModel:
    """
    Shifted-exponential delay parameters.

    Args:
        gamma: Shift (time units), gamma >= 0.
        mu: Straggling parameter (1 / time units), mu > 0.
    """

    gamma: float
    mu: float

    def __post_init__(self) -> None:
        violations = []
        if not self.gamma >= 0:
            violations.append(f"gamma ≥ 0 (got {self.gamma})")
        if not self.mu > 0:
            violations.append(f"mu > 0 (got {self.mu})")
        if violations:
            raise InvalidSpecError(violations)

    def sample(self, uniforms: np.ndarray) -> np.ndarray:
        """Inverse-transform uniforms in [0, 1) into completion times."""
        return self.gamma - np.log1p(-uniforms) / self.mu


@dataclass(frozen=True)
class GroupingPlan:
    """
    A partition of worker ranks 1..N into equal groups.

    Rank i is the i-th fastest worker. Groups are stored sorted, and ordered by
    their smallest rank, so equal partitions compare equal.
    """

    groups: Tuple[Tuple[int, ...], ...]

    def __post_init__(self) -> None:
        canonical = tuple(sorted(tuple(sorted(g)) for g in self.groups))
        object.__setattr__(self, "groups", canonical)
        violations = grouping_violations(canonical, self.N)
        if violations:
            raise InvalidSpecError(violations)

    @property
    def N(self) -> int:
        return sum(len(g) for g in self.groups)

    @property
    def n(self) -> int:
        return len(self.groups)

    def as_array(self) -> np.ndarray:
        return np.array([self.groups], dtype=np.int64)


@dataclass
class TimingReport:
    """Closed-form times and loads for one parameter set."""

    N: int
    n: int
    m: int
    M: int
    L: int
    convention: Convention
    t_conv: Optional[float]
    t_rpir: Optional[float]
    t_a_one: Optional[float]
    t_a_async: float
    one_shot_samples: Optional[np.ndarray]
    async_samples: np.ndarray
    plan_count: int
    exhaustive: bool
    comm_loads: Dict[str, Fraction] = dataclass_field(default_factory=dict)


@dataclass
class EventSimResult:
    """Per-trial completion times of the event simulator (NaN when infeasible)."""

    one_shot: np.ndarray
    async_: np.ndarray
    conv: np.ndarray
    rpir: np.ndarray

    @property
    def means(self) -> Dict[str, float]:
        return {
            "one_shot": float(np.mean(self.one_shot)),
            "async": float(np.mean(self.async_)),
            "conv": float(np.mean(self.conv)),
            "rpir": float(np.mean(self.rpir)),
        }


def harmonic_number(k: int) -> float:
    return math.fsum(1.0 / i for i in range(1, k + 1))


def expected_order_stat(
    N: int, k: int, model: DelayModel, convention: Convention = Convention.HARMONIC
) -> float:
    """
    Expected k-th smallest of N shifted-exponential completion times.

    Raises:
        InvalidSpecError: Unless 1 <= k <= N.
        DivergentOrderStatError: For k = N under a log convention.
    """
    if not 1 <= k <= N:
        raise InvalidSpecError([f"1 ≤ k ≤ N (got k={k}, N={N})"])
    convention = Convention(convention)
    if convention is Convention.HARMONIC:
        return model.gamma + (harmonic_number(N) - harmonic_number(N - k)) / model.mu
    if k == N:
        raise DivergentOrderStatError(
            f"divergent: the {convention.value} convention is unbounded at k = N = {N}"
        )
    ratio = N / (N - k)
    spread = math.log(ratio) if convention is Convention.LOG else math.log2(ratio)
    return model.gamma + spread / model.mu


def _order_stat_table(N: int, model: DelayModel, convention: Convention) -> np.ndarray:
    # Index k-1 holds the k-th order statistic; divergent entries are inf
    table = np.empty(N, dtype=np.float64)
    for k in range(1, N + 1):
        try:
            table[k - 1] = expected_order_stat(N, k, model, convention)
        except DivergentOrderStatError:
            table[k - 1] = np.inf
    return table


def t_conv(N: int, K: int, model: DelayModel, convention: Convention = Convention.HARMONIC) -> float:
    """Conventional coded computation: the K-th fastest worker computes 1/K of the job."""
    return expected_order_stat(N, K, model, convention) / K


def t_rpir(
    N: int, K: int, M: int, model: DelayModel, convention: Convention = Convention.HARMONIC
) -> float:
    """RPIR baseline: t_conv times (1 + 1/K + ... + 1/K^(M-1))."""
    multiplier = math.fsum(K ** -j for j in range(0, M))
    return t_conv(N, K, model, convention) * multiplier


def _one_shot_times(
    plans: np.ndarray, m: int, n: int, table: np.ndarray
) -> np.ndarray:
    if m > plans.shape[2]:
        raise InfeasibleGroupingError(
            f"infeasible: one-shot needs m={m} results from groups of {plans.shape[2]}"
        )
    slowest = table[plans[:, :, m - 1] - 1].max(axis=1)
    if np.isinf(slowest).any():
        raise DivergentOrderStatError(
            "divergent: a group's m-th fastest worker is the N-th fastest overall"
        )
    return slowest / (m * (n - 1))


def _async_times(plans: np.ndarray, n: int, table: np.ndarray) -> np.ndarray:
    rates = np.where(np.isinf(table), 0.0, 1.0 / table)
    group_rates = rates[plans - 1].sum(axis=2)
    if (group_rates == 0).any():
        raise DivergentOrderStatError("divergent: a group holds only unbounded workers")
    return ((1.0 / (n - 1)) / group_rates).max(axis=1)


def t_one_for_grouping(
    plan: GroupingPlan,
    m: int,
    n: int,
    model: DelayModel,
    convention: Convention = Convention.HARMONIC,
) -> float:
    """
    One-shot completion time of one grouping.

    The slowest group is the one whose m-th fastest member has the largest
    global rank; that member finishes its single block of size 1/(m(n-1)).

    Raises:
        InfeasibleGroupingError: If m exceeds the group size.
    """
    if n != plan.n:
        raise InvalidSpecError([f"plan has {plan.n} groups, n={n}"])
    table = _order_stat_table(plan.N, model, Convention(convention))
    return float(_one_shot_times(plan.as_array(), m, n, table)[0])


def t_async_for_grouping(
    plan: GroupingPlan,
    n: int,
    model: DelayModel,
    convention: Convention = Convention.HARMONIC,
) -> float:
    """
    Asynchronous completion time of one grouping.

    Every worker of a group keeps computing until the group has returned 1/(n-1)
    of the job, so a group finishes after (1/(n-1)) / sum_i 1/E[T_(s_i)]. The
    result is the slowest group's time and does not depend on m. Under a log
    convention the N-th fastest worker contributes zero rate.
    """
    if n != plan.n:
        raise InvalidSpecError([f"plan has {plan.n} groups, n={n}"])
    table = _order_stat_table(plan.N, model, Convention(convention))
    return float(_async_times(plan.as_array(), n, table)[0])


def grouping_count(N: int, n: int) -> int:
    """Number of unordered partitions of N workers into n equal groups."""
    if n < 1 or N % n:
        raise InvalidSpecError([f"n divides N (got N={N}, n={n})"])
    size = N // n
    return math.factorial(N) // (math.factorial(size) ** n * math.factorial(n))


def _exhaustive(ranks: Tuple[int, ...], size: int) -> Iterator[Tuple[Tuple[int, ...], ...]]:
    if not ranks:
        yield ()
        return
    first, rest = ranks[0], ranks[1:]
    for companions in combinations(rest, size - 1):
        chosen = set(companions)
        left = tuple(r for r in rest if r not in chosen)
        for tail in _exhaustive(left, size):
            yield ((first,) + companions,) + tail


def _sampled_arrays(N: int, n: int, count: int, seed: int) -> Iterator[np.ndarray]:
    rng = np.random.default_rng(seed)
    size = N // n
    remaining = count
    while remaining > 0:
        chunk = min(remaining, _PLAN_CHUNK)
        perms = np.argsort(rng.random((chunk, N)), axis=1) + 1
        plans = np.sort(perms.reshape(chunk, n, size), axis=2)
        remaining -= chunk
        yield plans


def _exhaustive_arrays(N: int, n: int) -> Iterator[np.ndarray]:
    batch: List[Tuple[Tuple[int, ...], ...]] = []
    for groups in _exhaustive(tuple(range(1, N + 1)), N // n):
        batch.append(groups)
        if len(batch) == _PLAN_CHUNK:
            yield np.array(batch, dtype=np.int64)
            batch = []
    if batch:
        yield np.array(batch, dtype=np.int64)


def _plan_arrays(
    N: int, n: int, cap: int, seed: int, force_sampling: bool = False
) -> Tuple[Iterator[np.ndarray], int, bool]:
    total = grouping_count(N, n)
    if total <= cap and not force_sampling:
        return _exhaustive_arrays(N, n), total, True
    if not force_sampling:
        logger.warning(
            f"{total} groupings of {N} workers into {n} groups exceed cap {cap}; sampling"
        )
    return _sampled_arrays(N, n, cap, seed), cap, False


def enumerate_groupings(
    N: int, n: int, cap: int = DEFAULT_GROUPING_CAP, seed: int = 0
) -> Iterator[GroupingPlan]:
    """
    Yield equal partitions of ranks 1..N into n groups.

    Every partition appears exactly once when there are at most `cap` of them.
    Otherwise `cap` partitions are sampled uniformly (with replacement) from
    the seed.

    Raises:
        InvalidSpecError: If n does not divide N.
    """
    arrays, _, _ = _plan_arrays(N, n, cap, seed)
    for chunk in arrays:
        for plan in chunk:
            yield GroupingPlan(tuple(tuple(int(r) for r in g) for g in plan))


def grouping_samples(
    metric: Metric,
    N: int,
    n: int,
    m: int,
    model: DelayModel,
    cap: int = DEFAULT_GROUPING_CAP,
    seed: int = 0,
    convention: Convention = Convention.HARMONIC,
    force_sampling: bool = False,
) -> Tuple[np.ndarray, bool]:
    """
    Per-grouping times for every enumerated (or sampled) grouping.

    Returns:
        (times, exhaustive) where exhaustive tells whether enumeration was complete.
    """
    metric = Metric(metric)
    table = _order_stat_table(N, model, Convention(convention))
    arrays, _, exhaustive = _plan_arrays(N, n, cap, seed, force_sampling)
    parts = []
    for chunk in arrays:
        if metric is Metric.ONE_SHOT:
            parts.append(_one_shot_times(chunk, m, n, table))
        else:
            parts.append(_async_times(chunk, n, table))
    return np.concatenate(parts), exhaustive


def average_over_groupings(
    metric: Metric,
    N: int,
    n: int,
    m: int,
    model: DelayModel,
    cap: int = DEFAULT_GROUPING_CAP,
    seed: int = 0,
    convention: Convention = Convention.HARMONIC,
    force_sampling: bool = False,
) -> float:
    """
    Mean completion time over all groupings: t_a,one or t_a,async.

    With force_sampling, `cap` groupings are sampled even when exhaustive
    enumeration would fit.

    Raises:
        InvalidSpecError: If n does not divide N.
        InfeasibleGroupingError: For one-shot with m above the group size.
    """
    samples, exhaustive = grouping_samples(
        metric, N, n, m, model, cap, seed, convention, force_sampling
    )
    logger.debug(
        f"Averaged {Metric(metric).value} over {len(samples)} groupings "
        f"({'exhaustive' if exhaustive else 'sampled'})"
    )
    return float(np.mean(samples))


def comm_load(scheme: Scheme, N: int, m: int, L: int = 1) -> Fraction:
    """
    Master-to-worker load in multiples of |A|.

    rpir sends all of A to every worker; one-shot sends one 1/m block; the
    asynchronous code sends L blocks.

    Raises:
        InvalidSpecError: If L > m.
    """
    if L > m:
        raise InvalidSpecError([f"L ≤ m (got L={L} > m={m})"])
    scheme = Scheme(scheme)
    if scheme is Scheme.RPIR:
        return Fraction(N)
    if scheme is Scheme.ONE_SHOT:
        return Fraction(N, m)
    return Fraction(N * L, m)


def _trial_rng(seed: int, trial: int) -> np.random.Generator:
    # One stream per trial, independent of execution order
    return np.random.default_rng([seed, trial])


def event_sim(
    N: int,
    n: int,
    m: int,
    L: int,
    model: DelayModel,
    trials: int,
    seed: int = 0,
    M: int = 1,
) -> EventSimResult:
    """
    Monte Carlo completion times of every scheme.

    Each trial draws one completion time T_i per worker and a fresh random
    grouping. A block costs T_i / (m(n-1)). One-shot finishes when every group
    has its m-th fastest single block; the asynchronous code when every group
    has m blocks among {j T_i / (m(n-1)) : j = 1..L}. The conventional and RPIR
    baselines use the K-th fastest worker with K = mn.

    Args:
        N, n, m, L: Session geometry.
        model: Delay parameters.
        trials: Number of trials.
        seed: Base seed; trial t uses the stream (seed, t).
        M: Library size, for the RPIR multiplier.

    Raises:
        InvalidSpecError: If the geometry breaks a partition constraint or trials < 1.
    """
    violations = partition_spec_violations(m, n, M, N, L)
    if trials < 1:
        violations.append(f"trials ≥ 1 (got {trials})")
    if violations:
        raise InvalidSpecError(violations)
    size = N // n
    block = 1.0 / (m * (n - 1))
    K = m * n
    rpir_multiplier = math.fsum(K ** -j for j in range(0, M))
    multiples = np.arange(1, L + 1, dtype=np.float64)

    one_shot = np.full(trials, np.nan)
    async_ = np.full(trials, np.nan)
    conv = np.full(trials, np.nan)
    for trial in range(trials):
        rng = _trial_rng(seed, trial)
        times = model.sample(rng.random(N))
        groups = times[rng.permutation(N)].reshape(n, size) * block
        if m <= size:
            one_shot[trial] = np.partition(groups, m - 1, axis=1)[:, m - 1].max()
        stream = (groups[:, :, None] * multiples).reshape(n, size * L)
        async_[trial] = np.partition(stream, m - 1, axis=1)[:, m - 1].max()
        if K <= N:
            conv[trial] = np.partition(times, K - 1)[K - 1] / K
    return EventSimResult(one_shot, async_, conv, conv * rpir_multiplier)


def sample_arrival_order(
    N: int, L: int, m: int, n: int, model: DelayModel, seed: int
) -> List[Tuple[int, int]]:
    """
    Arrival permutation of all (worker_rank, sequence_index) pairs.

    Worker i returns its j-th result at j T_i / (m(n-1)); ties go to the lower
    rank, then the lower index.
    """
    times = model.sample(_trial_rng(seed, 0).random(N))
    block = 1.0 / (m * (n - 1))
    events = [
        (j * block * float(times[rank - 1]), rank, j)
        for rank in range(1, N + 1)
        for j in range(1, L + 1)
    ]
    events.sort()
    return [(rank, j) for _, rank, j in events]


def timing_report(
    N: int,
    n: int,
    m: int,
    M: int,
    model: DelayModel,
    L: int = 1,
    convention: Convention = Convention.HARMONIC,
    cap: int = DEFAULT_GROUPING_CAP,
    seed: int = 0,
) -> TimingReport:
    """Every closed-form time and load for one parameter set."""
    convention = Convention(convention)
    K = m * n
    async_samples, exhaustive = grouping_samples(
        Metric.ASYNC, N, n, m, model, cap, seed, convention
    )
    try:
        one_samples: Optional[np.ndarray] = grouping_samples(
            Metric.ONE_SHOT, N, n, m, model, cap, seed, convention
        )[0]
    except InfeasibleGroupingError:
        logger.warning(f"One-shot is infeasible for m={m} with groups of {N // n}")
        one_samples = None
    except DivergentOrderStatError as exc:
        logger.warning(f"One-shot time is unbounded: {exc}")
        one_samples = None

    baseline: Optional[float] = None
    rpir: Optional[float] = None
    if K > N:
        logger.warning(f"Baselines need K={K} ≤ N={N}; omitted")
    else:
        try:
            baseline = t_conv(N, K, model, convention)
            rpir = t_rpir(N, K, M, model, convention)
        except DivergentOrderStatError as exc:
            logger.warning(f"Baselines are unbounded: {exc}")

    return TimingReport(
        N=N,
        n=n,
        m=m,
        M=M,
        L=L,
        convention=convention,
        t_conv=baseline,
        t_rpir=rpir,
        t_a_one=float(np.mean(one_samples)) if one_samples is not None else None,
        t_a_async=float(np.mean(async_samples)),
        one_shot_samples=one_samples,
        async_samples=async_samples,
        plan_count=len(async_samples),
        exhaustive=exhaustive,
        comm_loads={s.value: comm_load(s, N, m, L) for s in Scheme},
    )


def figure2_frame(
    convention: Convention = Convention.HARMONIC,
    N: int = 12,
    M: int = 4,
    n: int = FIGURE_GROUPS,
    model: DelayModel = DelayModel(gamma=0.1, mu=0.1),
    k_values: Sequence[int] = FIGURE2_K_VALUES,
    cap: int = DEFAULT_GROUPING_CAP,
    seed: int = 0,
) -> pd.DataFrame:
    """Computation time against K (columns K, t_rpir, t_a_one, t_a_async)."""
    rows = []
    for K in k_values:
        m = K // n
        rows.append(
            {
                "K": K,
                "t_rpir": t_rpir(N, K, M, model, convention),
                "t_a_one": average_over_groupings(
                    Metric.ONE_SHOT, N, n, m, model, cap, seed, convention
                ),
                "t_a_async": average_over_groupings(
                    Metric.ASYNC, N, n, m, model, cap, seed, convention
                ),
            }
        )
    return pd.DataFrame(rows, columns=["K", "t_rpir", "t_a_one", "t_a_async"])


def figure3_frame(
    convention: Convention = Convention.HARMONIC,
    N: int = 12,
    M: int = 4,
    n: int = FIGURE_GROUPS,
    K: int = 4,
    gamma: float = 1.0,
    mu_values: Optional[Sequence[float]] = None,
    cap: int = DEFAULT_GROUPING_CAP,
    seed: int = 0,
) -> pd.DataFrame:
    """Computation time against mu (columns mu, t_rpir, t_a_one, t_a_async)."""
    if mu_values is None:
        mu_values = np.logspace(-1, 1, FIGURE3_MU_POINTS)
    m = K // n
    rows = []
    for mu in mu_values:
        model = DelayModel(gamma=gamma, mu=float(mu))
        rows.append(
            {
                "mu": float(mu),
                "t_rpir": t_rpir(N, K, M, model, convention),
                "t_a_one": average_over_groupings(
                    Metric.ONE_SHOT, N, n, m, model, cap, seed, convention
                ),
                "t_a_async": average_over_groupings(
                    Metric.ASYNC, N, n, m, model, cap, seed, convention
                ),
            }
        )
    return pd.DataFrame(rows, columns=["mu", "t_rpir", "t_a_one", "t_a_async"])


def reduction_report(frame: pd.DataFrame) -> Tuple[pd.DataFrame, Dict[str, float]]:
    """
    Relative reduction of t_a_async against the other two schemes.

    Returns:
        A per-row frame (K, reduction_vs_one, reduction_vs_rpir) and a summary
        with the min and max of each column.
    """
    reductions = pd.DataFrame(
        {
            "K": frame["K"],
            "reduction_vs_one": 1.0 - frame["t_a_async"] / frame["t_a_one"],
            "reduction_vs_rpir": 1.0 - frame["t_a_async"] / frame["t_rpir"],
        }
    )
    summary = {
        "min_vs_one": float(reductions["reduction_vs_one"].min()),
        "max_vs_one": float(reductions["reduction_vs_one"].max()),
        "min_vs_rpir": float(reductions["reduction_vs_rpir"].min()),
        "max_vs_rpir": float(reductions["reduction_vs_rpir"].max()),
    }
    return reductions, summary
