"""
Master/worker orchestration for private polynomial codes.

The master plans a session (grouping, y-points, x-points), hands each worker a
query plus its encoded share of A, and decodes from results delivered in an
explicit arrival order. The privacy audit checks that what a worker sees never
depends on which library matrix the master wants.
"""

import logging
import random
import struct
from dataclasses import dataclass, field as dataclass_field, fields, replace
from typing import Callable, Dict, List, Optional, Sequence, Tuple

from scipy.stats import chisquare

from privcode.core.blockmat import BlockMatrix, PartitionSpec, matmul, partition_rows
from privcode.core.codec import (
    EncodedShareA,
    PointAssignment,
    SubResult,
    TwofoldDecoder,
    encode_a,
    encode_library,
    recover_product,
    worker_subcompute,
)
from privcode.core.errors import InvalidSpecError, ShapeError, SingularSystemError
from privcode.core.ffield import FieldElement, PrimeField, default_field, sample_distinct_points
from privcode.utils.validators import desired_index_violations, field_capacity_violations

logger = logging.getLogger(__name__)

QUERY_MAGIC = b"PPCQ"
QUERY_VERSION = 1
COMPUTE_OPCODE = 1

# Residue bins for the marginal uniformity check
MARGINAL_BINS = 16
MARGINAL_SIGNIFICANCE = 0.01


@dataclass(frozen=True)
class Query:
    """
    The instruction record a worker receives.

    Group identity and the desired index are deliberately absent: the query is
    a function of the point list alone.
    """

    n: int
    L: int
    per_matrix_point: Tuple[FieldElement, ...]
    version: int = QUERY_VERSION
    compute_opcode: int = COMPUTE_OPCODE

    def to_bytes(self) -> bytes:
        """
        Canonical serialization.

        Layout: b"PPCQ", u8 version, u64 n, u64 L, u64 M, M x u64 points,
        u8 opcode. All integers little-endian, no padding.
        """
        M = len(self.per_matrix_point)
        return (
            QUERY_MAGIC
            + struct.pack("<B", self.version)
            + struct.pack("<QQQ", self.n, self.L, M)
            + struct.pack(f"<{M}Q", *self.per_matrix_point)
            + struct.pack("<B", self.compute_opcode)
        )


@dataclass(frozen=True)
class LeakyQuery(Query):
    """A query that also carries D. Only used to prove the audit catches leaks."""

    desired: int = 0

    def to_bytes(self) -> bytes:
        return super().to_bytes() + struct.pack("<Q", self.desired)


QueryFactory = Callable[[PartitionSpec, int, Tuple[FieldElement, ...]], Query]


def compose_query(
    spec: PartitionSpec, desired: int, per_matrix_point: Tuple[FieldElement, ...]
) -> Query:
    """
    Build a worker query from its point list.

    `desired` is accepted so the audit can vary it and confirm the bytes do not
    move.
    """
    return Query(n=spec.n, L=spec.L, per_matrix_point=tuple(per_matrix_point))


def compose_leaky_query(
    spec: PartitionSpec, desired: int, per_matrix_point: Tuple[FieldElement, ...]
) -> Query:
    """Mutant query builder that embeds D."""
    return LeakyQuery(
        n=spec.n, L=spec.L, per_matrix_point=tuple(per_matrix_point), desired=desired
    )


@dataclass(frozen=True)
class SessionPlan:
    """
    Everything the master decides before work starts.

    Args:
        spec: Partition spec.
        desired: 1-based index D of the wanted library matrix.
        grouping: n tuples of worker ranks, each sorted, groups ordered by first rank.
        assignment: y-points of the session.
        x_points: For worker rank i, x_points[i-1] holds its L points.
        seed: Seed the plan was drawn from.
        field: The field.
    """

    spec: PartitionSpec
    desired: int
    grouping: Tuple[Tuple[int, ...], ...]
    assignment: PointAssignment
    x_points: Tuple[Tuple[FieldElement, ...], ...]
    seed: int
    field: PrimeField = dataclass_field(default=default_field)

    def group_of(self, worker_rank: int) -> int:
        """1-based group index of a worker."""
        for idx, group in enumerate(self.grouping, start=1):
            if worker_rank in group:
                return idx
        raise ShapeError(f"shape: worker {worker_rank} is not in the plan")


@dataclass(frozen=True)
class WorkerView:
    """
    Everything one worker observes, besides the public library.

    There is no field for the grouping, for other workers' points or for D.
    `produced` is empty until the worker has run; `orchestrate` fills it with
    the L values the worker returned, in index order.
    """

    query: Query
    encoded_a: Tuple[BlockMatrix, ...]
    produced: Tuple[BlockMatrix, ...] = ()


@dataclass(frozen=True)
class WorkerResult:
    """A raw result as a worker returns it: who, which index, what."""

    worker_rank: int
    sequence_index: int
    value: BlockMatrix


@dataclass
class Transcript:
    """Which results the master consumed, in order."""

    consumed: List[Tuple[int, int, int]] = dataclass_field(default_factory=list)
    delivered: int = 0

    @property
    def consumed_count(self) -> int:
        return len(self.consumed)

    def to_text(self) -> str:
        """Stable text form: one "worker,index,group" line per consumed result."""
        lines = [f"delivered={self.delivered} consumed={self.consumed_count}"]
        lines.extend(f"{w},{j},{g}" for w, j, g in self.consumed)
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class SessionOutcome:
    product: BlockMatrix
    transcript: Transcript
    noise_constants: Tuple[BlockMatrix, ...] = ()
    # Worker rank i at index i-1, with produced values filled in
    views: Tuple[WorkerView, ...] = ()


def _stream(seed: int, purpose: str) -> random.Random:
    # Independent, reproducible stream per planning step
    return random.Random(f"privcode:{seed}:{purpose}")


def plan_session(
    spec: PartitionSpec, desired: int, seed: int, field: PrimeField = default_field
) -> SessionPlan:
    """
    Draw a session plan.

    The grouping is a uniformly random equal partition of the ranks. The n
    group points and M-1 shared points are distinct and nonzero. All N·L
    x-points are globally distinct. The x-point stream never looks at D, so
    the encoded shares of A are identical for every D under the same seed.

    Raises:
        InvalidSpecError: If D is out of range or the field is too small.
    """
    violations = desired_index_violations(desired, spec.M) + field_capacity_violations(
        field.p, spec.m, spec.n, spec.M, spec.N, spec.L
    )
    if violations:
        raise InvalidSpecError(violations)

    ranks = list(range(1, spec.N + 1))
    _stream(seed, "grouping").shuffle(ranks)
    size = spec.group_size
    groups = [tuple(sorted(ranks[i * size:(i + 1) * size])) for i in range(spec.n)]
    grouping = tuple(sorted(groups))

    y_points = sample_distinct_points(spec.n + spec.M - 1, (), _stream(seed, "y"), field)
    assignment = PointAssignment(
        desired=desired,
        group_points=tuple(y_points[: spec.n]),
        shared_points=tuple(y_points[spec.n:]),
    )

    flat_x = sample_distinct_points(spec.N * spec.L, (), _stream(seed, "x"), field)
    x_points = tuple(
        tuple(flat_x[i * spec.L:(i + 1) * spec.L]) for i in range(spec.N)
    )
    logger.debug(
        f"Planned session: N={spec.N}, n={spec.n}, m={spec.m}, M={spec.M}, "
        f"L={spec.L}, K={spec.K}, seed={seed}"
    )
    return SessionPlan(spec, desired, grouping, assignment, x_points, seed, field)


def build_query(
    plan: SessionPlan, worker_rank: int, factory: QueryFactory = compose_query
) -> Query:
    """The query for one worker: its group's point for D, shared points elsewhere."""
    points = plan.assignment.per_matrix_point(plan.group_of(worker_rank))
    return factory(plan.spec, plan.desired, points)


def encode_share(plan: SessionPlan, a: BlockMatrix, worker_rank: int) -> EncodedShareA:
    """Encode A at the worker's x-points."""
    x_points = plan.x_points[worker_rank - 1]
    return EncodedShareA(worker_rank, x_points, tuple(encode_a(a, plan.spec.m, x_points)))


def worker_view(plan: SessionPlan, a: BlockMatrix, worker_rank: int) -> WorkerView:
    return WorkerView(
        query=build_query(plan, worker_rank),
        encoded_a=encode_share(plan, a, worker_rank).evaluations,
    )


def run_worker(
    view: WorkerView, library: Sequence[BlockMatrix], worker_rank: int = 0
) -> List[WorkerResult]:
    """
    Execute a worker's L sub-computations, in index order.

    Raises:
        ShapeError: If the query and the share disagree on L.
    """
    query = view.query
    if len(view.encoded_a) != query.L:
        raise ShapeError(
            f"shape: query asks for {query.L} sub-computations, share holds "
            f"{len(view.encoded_a)}"
        )
    encoded_b = encode_library(library, query.n, query.per_matrix_point)
    return [
        WorkerResult(worker_rank, idx, worker_subcompute(share, encoded_b))
        for idx, share in enumerate(view.encoded_a, start=1)
    ]


def _noise_constants(
    plan: SessionPlan, a: BlockMatrix, library: Sequence[BlockMatrix]
) -> List[BlockMatrix]:
    # c_l = A_l * sum_{k != D} B~_k(y_k): the library with B_D zeroed
    zero = BlockMatrix.zeros(*library[0].shape, field=plan.field)
    masked = [zero if k == plan.desired else b for k, b in enumerate(library, start=1)]
    points = plan.assignment.per_matrix_point(1)
    noise = encode_library(masked, plan.spec.n, points)
    return [matmul(block, noise) for block in partition_rows(a, plan.spec.m)]


def orchestrate(
    plan: SessionPlan,
    a: BlockMatrix,
    library: Sequence[BlockMatrix],
    arrival_order: Sequence[Tuple[int, int]],
    check_noise: bool = False,
) -> SessionOutcome:
    """
    Run every worker, deliver results in arrival order and decode.

    Args:
        plan: The session plan.
        a: The master's matrix.
        library: The M public library matrices.
        arrival_order: Every (worker_rank, sequence_index) pair exactly once.
        check_noise: Recompute the discarded constant terms and compare.

    Returns:
        The decoded A B_D and the transcript of consumed results.

    Raises:
        ShapeError: If the arrival order is not a permutation of all results.
        InsufficientResultsError: If some group never reaches m results.
        SingularSystemError: If check_noise finds a mismatch.
    """
    spec = plan.spec
    if len(library) != spec.M:
        raise ShapeError(f"shape: library holds {len(library)} matrices, spec says M={spec.M}")
    spec.check_dims(a.rows, library[0].cols)

    expected = {(w, j) for w in range(1, spec.N + 1) for j in range(1, spec.L + 1)}
    if len(arrival_order) != len(expected) or set(arrival_order) != expected:
        raise ShapeError("shape: arrival order must list every (worker, index) pair once")

    produced: Dict[Tuple[int, int], WorkerResult] = {}
    views: List[WorkerView] = []
    for rank in range(1, spec.N + 1):
        view = worker_view(plan, a, rank)
        results = run_worker(view, library, rank)
        for result in results:
            produced[(rank, result.sequence_index)] = result
        views.append(replace(view, produced=tuple(r.value for r in results)))

    transcript = Transcript()

    def deliveries():
        for rank, idx in arrival_order:
            transcript.delivered += 1
            raw = produced[(rank, idx)]
            yield SubResult(
                group_index=plan.group_of(rank),
                x_point=plan.x_points[rank - 1][idx - 1],
                value=raw.value,
                worker_rank=rank,
                sequence_index=idx,
            )

    decoder = TwofoldDecoder(spec, plan.assignment.group_points)
    product = recover_product(deliveries(), spec, plan.assignment.group_points, decoder)
    transcript.consumed = [
        (res.worker_rank, res.sequence_index, res.group_index) for res in decoder.consumed
    ]

    if check_noise:
        for l, (got, want) in enumerate(zip(decoder.constants, _noise_constants(plan, a, library))):
            if got != want:
                raise SingularSystemError(f"singular system: noise constant {l} does not match")
        logger.debug("Noise constants cross-checked")

    logger.info(
        f"Session complete: consumed {transcript.consumed_count} of "
        f"{transcript.delivered} delivered results"
    )
    return SessionOutcome(product, transcript, tuple(decoder.constants), tuple(views))


def default_arrival_order(spec: PartitionSpec) -> List[Tuple[int, int]]:
    """Round-robin order: every worker's first result, then every second, ..."""
    return [(w, j) for j in range(1, spec.L + 1) for w in range(1, spec.N + 1)]


@dataclass
class AuditReport:
    """Outcome of the query-invariance audit."""

    coupling_checked: int = 0
    share_checked: int = 0
    marginal_pvalues: Dict[Tuple[int, int], float] = dataclass_field(default_factory=dict)
    # Marginal-check draws per group index, over all (D, seed) pairs
    marginal_group_draws: Dict[int, int] = dataclass_field(default_factory=dict)
    failures: List[str] = dataclass_field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.failures

    @property
    def first_failure(self) -> Optional[str]:
        return self.failures[0] if self.failures else None


def _first_difference(left: bytes, right: bytes) -> int:
    for offset, (x, y) in enumerate(zip(left, right)):
        if x != y:
            return offset
    return min(len(left), len(right))


def audit_query_invariance(
    spec: PartitionSpec,
    seed_count: int,
    field: PrimeField = default_field,
    factory: QueryFactory = compose_query,
    coupling_seeds: Optional[int] = None,
    share_seeds: int = 3,
    a: Optional[BlockMatrix] = None,
) -> AuditReport:
    """
    Check that queries and shares carry no information about D.

    Coupling check: for every pair (D, D') and every worker, the query built
    from one point list must serialize identically under D and D'. Share
    check: the encoded pieces of A must be byte-identical across D. Marginal
    check: over seed_count seeds, taking the groups in turn, each library
    position's point must look uniform over 16 residue bins (chi-square,
    significance 0.01 for the whole family of tests, Bonferroni-split).

    Args:
        spec: Partition spec; needs M ≥ 2.
        seed_count: Seeds for the marginal check.
        field: The field.
        factory: Query builder under audit.
        coupling_seeds: Seeds for the coupling check (default: min(seed_count, 100)).
        share_seeds: Seeds for the share check.
        a: Matrix to encode for the share check; random when omitted.

    Raises:
        InvalidSpecError: If M < 2.
    """
    if spec.M < 2:
        raise InvalidSpecError(["audit requires M ≥ 2"])
    report = AuditReport()
    desired_values = range(1, spec.M + 1)
    coupling_seeds = min(seed_count, 100) if coupling_seeds is None else coupling_seeds

    for seed in range(coupling_seeds):
        for d in desired_values:
            plan = plan_session(spec, d, seed, field)
            for rank in range(1, spec.N + 1):
                points = plan.assignment.per_matrix_point(plan.group_of(rank))
                reference = factory(spec, d, points).to_bytes()
                for d_other in desired_values:
                    if d_other == d:
                        continue
                    other = factory(spec, d_other, points).to_bytes()
                    report.coupling_checked += 1
                    if other != reference:
                        offset = _first_difference(reference, other)
                        report.failures.append(
                            f"coupling: seed {seed}, worker {rank}, D={d} vs D'={d_other} "
                            f"differ at byte offset {offset}"
                        )
                        return report

    if a is None:
        rng = random.Random(f"privcode:audit:{spec}")
        a = BlockMatrix(field.random_matrix(spec.m, 2, rng), field)
    for seed in range(share_seeds):
        plans = [plan_session(spec, d, seed, field) for d in desired_values]
        for rank in range(1, spec.N + 1):
            reference = encode_share(plans[0], a, rank).to_bytes()
            for plan in plans[1:]:
                report.share_checked += 1
                other = encode_share(plan, a, rank).to_bytes()
                if other != reference:
                    offset = _first_difference(reference, other)
                    report.failures.append(
                        f"share: seed {seed}, worker {rank}, D=1 vs D={plan.desired} "
                        f"differ at byte offset {offset}"
                    )
                    return report

    threshold = MARGINAL_SIGNIFICANCE / (spec.M * spec.M)
    for d in desired_values:
        counts = [[0] * MARGINAL_BINS for _ in range(spec.M)]
        for seed in range(seed_count):
            plan = plan_session(spec, d, seed, field)
            # Cycle through the groups so every group point reaches position D
            group = 1 + seed % spec.n
            report.marginal_group_draws[group] = report.marginal_group_draws.get(group, 0) + 1
            points = plan.assignment.per_matrix_point(group)
            for k, point in enumerate(points):
                counts[k][point * MARGINAL_BINS // field.p] += 1
        for k in range(spec.M):
            _, pvalue = chisquare(counts[k])
            report.marginal_pvalues[(d, k + 1)] = float(pvalue)
            if pvalue < threshold:
                worst = max(
                    range(MARGINAL_BINS),
                    key=lambda b: abs(counts[k][b] - seed_count / MARGINAL_BINS),
                )
                report.failures.append(
                    f"marginal: D={d}, position {k + 1} fails uniformity "
                    f"(p={pvalue:.4g}), worst bucket {worst}"
                )
            elif pvalue < 10 * threshold:
                logger.warning(
                    f"Marginal check close to threshold: D={d}, position {k + 1}, p={pvalue:.4g}"
                )
    logger.info(
        f"Audit finished: {report.coupling_checked} coupling comparisons, "
        f"{report.share_checked} share comparisons, {len(report.failures)} failures"
    )
    return report


def view_field_names() -> List[str]:
    """Field names of WorkerView, for schema checks."""
    return [f.name for f in fields(WorkerView)]
