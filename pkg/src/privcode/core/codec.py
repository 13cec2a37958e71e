"""
Private polynomial codes: encoding, worker sub-computation and twofold decoding.

A is split into m row blocks and encoded as A~(x) = sum_{l<m} A_l x^l. Each
library matrix B_k is split into n-1 column blocks and encoded as
B~_k(y) = sum_{l=1}^{n-1} B_{k,l} y^l. A worker evaluates
A~(x_p) * sum_k B~_k(y_k) where y_D is its group's point and every other y_k is
a point shared by all workers. The master interpolates first in x inside each
group, then in y across groups, and drops the constant term, which only carries
the undesired matrices.
"""

import logging
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from privcode.core.blockmat import (
    BlockMatrix,
    PartitionSpec,
    add,
    assemble_product,
    matmul,
    partition_cols,
    partition_rows,
)
from privcode.core.errors import InsufficientResultsError, ShapeError, SingularSystemError
from privcode.core.ffield import (
    FieldElement,
    PolyCoeffs,
    PrimeField,
    eval_poly,
    interpolate,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class EncodedShareA:
    """
    The encoded pieces of A handed to one worker.

    Args:
        worker_rank: 1-based worker rank.
        x_points: The worker's L evaluation points.
        evaluations: A~(x_points[p]) for each p.
    """

    worker_rank: int
    x_points: Tuple[FieldElement, ...]
    evaluations: Tuple[BlockMatrix, ...]

    def to_bytes(self) -> bytes:
        """Canonical bytes of the evaluations, the part a worker actually sees."""
        return b"".join(ev.to_bytes() for ev in self.evaluations)


@dataclass(frozen=True)
class PointAssignment:
    """
    The y-points of a session.

    Args:
        desired: 1-based index D of the desired library matrix.
        group_points: One point per group, y_1..y_n.
        shared_points: One point per undesired library position, in library order.
    """

    desired: int
    group_points: Tuple[FieldElement, ...]
    shared_points: Tuple[FieldElement, ...]

    def per_matrix_point(self, group_index: int) -> Tuple[FieldElement, ...]:
        """
        The point list a worker of the given 1-based group uses, in library order.
        """
        shared = iter(self.shared_points)
        M = len(self.shared_points) + 1
        return tuple(
            self.group_points[group_index - 1] if k == self.desired else next(shared)
            for k in range(1, M + 1)
        )


@dataclass(frozen=True)
class SubResult:
    """
    One sub-computation result, as the master files it.

    Args:
        group_index: 1-based group of the producing worker.
        x_point: The x evaluation point used.
        value: A~(x_point) times the group's encoded library.
        worker_rank: Producing worker.
        sequence_index: 1-based position in the worker's output order.
    """

    group_index: int
    x_point: FieldElement
    value: BlockMatrix
    worker_rank: int = 0
    sequence_index: int = 0


def encode_a(a: BlockMatrix, m: int, x_points: Sequence[FieldElement]) -> List[BlockMatrix]:
    """
    Evaluate A~(x) = sum_{l<m} A_l x^l at each point.

    The output never depends on which library matrix the master wants.

    Raises:
        PartitionError: If m does not divide a.rows.
        SingularSystemError: If x_points repeat.
    """
    field = a.field
    if len({x % field.p for x in x_points}) != len(x_points):
        raise SingularSystemError(f"singular system: x points repeat {list(x_points)}")
    blocks = partition_rows(a, m)
    poly = PolyCoeffs(tuple(blk.data for blk in blocks))
    return [BlockMatrix(eval_poly(poly, x, field), field) for x in x_points]


def _encode_library_matrix(b: BlockMatrix, n: int, y: FieldElement) -> BlockMatrix:
    blocks = partition_cols(b, n - 1)
    zero = b.field.zeros(b.rows, b.cols // (n - 1))
    poly = PolyCoeffs((zero,) + tuple(blk.data for blk in blocks))
    return BlockMatrix(eval_poly(poly, y, b.field), b.field)


def encode_library(
    library: Sequence[BlockMatrix], n: int, per_matrix_point: Sequence[FieldElement]
) -> BlockMatrix:
    """
    Sum every library matrix's encoding at its assigned point.

    All M matrices are summed symmetrically; only the point values tell the
    desired one apart.

    Args:
        library: The M library matrices, each s x t.
        n: Group count; each matrix splits into n-1 column blocks.
        per_matrix_point: One nonzero point per library position.

    Returns:
        The s x t/(n-1) encoded library.

    Raises:
        ShapeError: If the point list and library disagree in length or shape.
        PartitionError: If n-1 does not divide t.
    """
    if len(library) != len(per_matrix_point) or not library:
        raise ShapeError(
            f"shape: {len(library)} library matrices but {len(per_matrix_point)} points"
        )
    if len({b.shape for b in library}) != 1:
        raise ShapeError("shape: library matrices must share one shape")
    encoded = _encode_library_matrix(library[0], n, per_matrix_point[0])
    for b, y in zip(library[1:], per_matrix_point[1:]):
        encoded = add(encoded, _encode_library_matrix(b, n, y))
    return encoded


def worker_subcompute(share: BlockMatrix, encoded_b: BlockMatrix) -> BlockMatrix:
    """One sub-computation: A~(x_p) times the encoded library."""
    return matmul(share, encoded_b)


def _ensure_distinct(points: Sequence[FieldElement], what: str) -> None:
    if len(set(points)) != len(points):
        raise SingularSystemError(f"singular system: duplicate {what} {list(points)}")


def decode_stage1(group_results: Sequence[SubResult], m: int) -> PolyCoeffs:
    """
    Interpolate in x within one group.

    Args:
        group_results: At least m results from the same group; the first m are used.
        m: Row blocks of A.

    Returns:
        The m coefficients Z_{t,0..m-1} of A~(x) times the group's encoded library.

    Raises:
        InsufficientResultsError: With fewer than m results.
        SingularSystemError: If x points repeat.
    """
    group = group_results[0].group_index if group_results else None
    if len(group_results) < m:
        raise InsufficientResultsError(
            f"insufficient: group {group} returned {len(group_results)} of {m} results",
            group_index=group,
        )
    used = list(group_results[:m])
    if any(res.group_index != group for res in used):
        raise ShapeError("shape: stage-1 decoding mixes results from different groups")
    points = [res.x_point for res in used]
    _ensure_distinct(points, "x points")
    field = used[0].value.field
    return interpolate(points, [res.value.data for res in used], field)


def decode_stage2(
    per_group_coeff: Sequence[BlockMatrix],
    group_points: Sequence[FieldElement],
    with_constant: bool = False,
):
    """
    Interpolate in y across groups and drop the noise constant.

    Args:
        per_group_coeff: Z_{t,l} for t = 1..n, for one fixed l.
        group_points: y_1..y_n.
        with_constant: Also return the discarded constant term.

    Returns:
        The n-1 blocks A_l B_{D,r} for r = 1..n-1, or (constant, blocks) when
        with_constant is set.

    Raises:
        SingularSystemError: If group points repeat.
    """
    _ensure_distinct(list(group_points), "group points")
    field = per_group_coeff[0].field
    poly = interpolate(list(group_points), [z.data for z in per_group_coeff], field)
    blocks = [BlockMatrix(c, field) for c in poly.coeffs[1:]]
    if with_constant:
        return BlockMatrix(poly.coeffs[0], field), blocks
    return blocks


class TwofoldDecoder:
    """
    Streaming consumer of sub-computation results.

    Results are accepted in arrival order. Each group keeps its m earliest
    results; later ones are ignored. Decoding runs once every group is full,
    after exactly K = mn results have been consumed.

    Args:
        spec: The session's partition spec.
        group_points: y_1..y_n.
    """

    def __init__(self, spec: PartitionSpec, group_points: Sequence[FieldElement]):
        if len(group_points) != spec.n:
            raise ShapeError(f"shape: need {spec.n} group points, got {len(group_points)}")
        self.spec = spec
        self.group_points = tuple(group_points)
        self.buckets: Dict[int, List[SubResult]] = {t: [] for t in range(1, spec.n + 1)}
        self.consumed: List[SubResult] = []
        self.constants: List[BlockMatrix] = []

    @property
    def complete(self) -> bool:
        return all(len(bucket) >= self.spec.m for bucket in self.buckets.values())

    def feed(self, result: SubResult) -> bool:
        """
        Accept one result.

        Returns:
            True once every group holds m results.
        """
        bucket = self.buckets.get(result.group_index)
        if bucket is None:
            raise ShapeError(f"shape: unknown group index {result.group_index}")
        if len(bucket) < self.spec.m:
            bucket.append(result)
            self.consumed.append(result)
            logger.debug(
                f"Consumed result {len(self.consumed)}/{self.spec.K} "
                f"(group {result.group_index}, worker {result.worker_rank})"
            )
        else:
            logger.debug(f"Ignoring late result from worker {result.worker_rank}")
        return self.complete

    def decode(self) -> BlockMatrix:
        """
        Run both interpolation stages and reassemble A B_D.

        Raises:
            InsufficientResultsError: Naming the first group short of m results.
        """
        for t, bucket in self.buckets.items():
            if len(bucket) < self.spec.m:
                raise InsufficientResultsError(
                    f"insufficient: group {t} returned {len(bucket)} of "
                    f"{self.spec.m} results",
                    group_index=t,
                )

        per_group = [decode_stage1(self.buckets[t], self.spec.m) for t in sorted(self.buckets)]
        field = self.consumed[0].value.field
        grid: List[List[BlockMatrix]] = []
        self.constants = []
        for l in range(self.spec.m):
            coeffs = [BlockMatrix(z.coeffs[l], field) for z in per_group]
            constant, blocks = decode_stage2(coeffs, self.group_points, with_constant=True)
            self.constants.append(constant)
            grid.append(blocks)
        logger.info(f"Decoded product from {len(self.consumed)} results (K={self.spec.K})")
        return assemble_product(grid)


def recover_product(
    all_results: Iterable[SubResult],
    spec: PartitionSpec,
    group_points: Sequence[FieldElement],
    decoder: Optional[TwofoldDecoder] = None,
) -> BlockMatrix:
    """
    Consume a result stream until every group has m results, then decode.

    Exactly K = mn results are consumed; the stream is not read past the
    result that completes the last group.

    Args:
        all_results: Results in arrival order.
        spec: Partition spec of the session.
        group_points: y_1..y_n.
        decoder: Optional decoder to use, so callers can inspect what was consumed.

    Raises:
        InsufficientResultsError: If the stream ends with a group short of m.
    """
    decoder = decoder or TwofoldDecoder(spec, group_points)
    for result in all_results:
        if decoder.feed(result):
            break
    return decoder.decode()
