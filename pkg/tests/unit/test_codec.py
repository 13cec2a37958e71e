"""
Unit tests for the private polynomial code: encoding, sub-computation and decoding.
"""

import random
from typing import List, Sequence, Tuple

import pytest

from privcode.core.blockmat import (
    BlockMatrix,
    PartitionSpec,
    add,
    matmul,
    partition_cols,
    partition_rows,
)
from privcode.core.codec import (
    PointAssignment,
    SubResult,
    TwofoldDecoder,
    decode_stage1,
    decode_stage2,
    encode_a,
    encode_library,
    recover_product,
    worker_subcompute,
)
from privcode.core.errors import InsufficientResultsError, ShapeError, SingularSystemError
from privcode.core.ffield import PrimeField, sample_distinct_points


def session_results(
    a: BlockMatrix,
    library: Sequence[BlockMatrix],
    m: int,
    n: int,
    desired: int,
    rng: random.Random,
    per_group: int = 0,
) -> Tuple[PointAssignment, List[SubResult]]:
    """Results of `per_group` (default m) workers per group, grouped by group."""
    field = a.field
    per_group = per_group or m
    y = sample_distinct_points(n + len(library) - 1, (), rng, field)
    assignment = PointAssignment(desired, tuple(y[:n]), tuple(y[n:]))
    xs = sample_distinct_points(n * per_group, (), rng, field)
    results = []
    for t in range(1, n + 1):
        encoded_b = encode_library(library, n, assignment.per_matrix_point(t))
        points = xs[(t - 1) * per_group:t * per_group]
        for x, share in zip(points, encode_a(a, m, points)):
            results.append(
                SubResult(t, x, worker_subcompute(share, encoded_b), worker_rank=len(results) + 1)
            )
    return assignment, results


@pytest.fixture
def f101() -> PrimeField:
    return PrimeField(101)


class TestEncodeA:
    """Tests for encoding the master's matrix."""

    def test_single_block_is_a(self, random_matrix):
        a = random_matrix(3, 2)
        assert all(ev == a for ev in encode_a(a, 1, [5, 9, 11]))

    def test_zero_gives_top_block(self, random_matrix):
        a = random_matrix(4, 3)
        (ev,) = encode_a(a, 2, [0])
        assert ev == partition_rows(a, 2)[0]

    def test_hand_horner(self, f101):
        """[[1,2],[3,4]] with m=2 at x=2 is [1+3·2, 2+4·2]."""
        a = BlockMatrix.from_rows([[1, 2], [3, 4]], f101)
        (ev,) = encode_a(a, 2, [2])
        assert ev.entries == (7, 10)

    def test_repeated_points(self, random_matrix):
        with pytest.raises(SingularSystemError):
            encode_a(random_matrix(2, 2), 2, [3, 3])

    def test_deterministic(self, random_matrix):
        """Output depends only on A, m and the points."""
        a = random_matrix(4, 2)
        first = [ev.to_bytes() for ev in encode_a(a, 4, [1, 2, 3])]
        second = [ev.to_bytes() for ev in encode_a(a, 4, [1, 2, 3])]
        assert first == second


class TestEncodeLibrary:
    """Tests for encoding the shared library."""

    def test_single_matrix_single_block(self, random_matrix):
        """M=1, n=2: B~_1(y) = B_1·y."""
        b = random_matrix(3, 2)
        y = 17
        expected = BlockMatrix(b.data * y, b.field)
        assert encode_library([b], 2, [y]) == expected

    def test_example1_expansion(self, example1_inputs):
        """B_11 y + B_12 y^2 + B_21 z + B_22 z^2."""
        _, (b1, b2) = example1_inputs
        y, z = 1234, 98765
        (b11, b12), (b21, b22) = partition_cols(b1, 2), partition_cols(b2, 2)
        field = b1.field

        def scale(blk, k):
            return BlockMatrix(blk.data * k, field)

        expected = add(
            add(scale(b11, y), scale(b12, y * y)), add(scale(b21, z), scale(b22, z * z))
        )
        assert encode_library([b1, b2], 3, [y, z]) == expected

    def test_zero_matrix_adds_nothing(self, random_matrix, field):
        b = random_matrix(4, 4)
        zero = BlockMatrix.zeros(4, 4, field)
        assert encode_library([b, zero], 3, [5, 6]) == encode_library([b], 3, [5])

    def test_point_count_mismatch(self, random_matrix):
        with pytest.raises(ShapeError):
            encode_library([random_matrix(2, 2)], 2, [1, 2])


class TestWorkerSubcompute:
    """Tests for the worker's product."""

    def test_zero_encoding(self, random_matrix, field):
        share = random_matrix(2, 3)
        assert worker_subcompute(share, BlockMatrix.zeros(3, 2, field)).is_zero()

    def test_collapses_to_plain_product(self, random_matrix):
        """m=1, M=1, n=2, y=1: the result is A·B."""
        a, b = random_matrix(2, 3), random_matrix(3, 2)
        (share,) = encode_a(a, 1, [7])
        assert worker_subcompute(share, encode_library([b], 2, [1])) == matmul(a, b)

    def test_shape_mismatch(self, random_matrix):
        with pytest.raises(ShapeError):
            worker_subcompute(random_matrix(2, 3), random_matrix(2, 3))


class TestDecodeStages:
    """Tests for the two interpolation stages."""

    def test_stage1_single_block(self, random_matrix):
        value = random_matrix(2, 2)
        poly = decode_stage1([SubResult(1, 9, value)], 1)
        assert BlockMatrix(poly.coeffs[0], value.field) == value

    def test_stage1_recovers_group_coefficients(self, example1_inputs, rng):
        """Z_t,l = A_l times the group's encoded library."""
        a, library = example1_inputs
        assignment, results = session_results(a, library, 2, 3, 1, rng)
        encoded_b = encode_library(library, 3, assignment.per_matrix_point(2))
        group2 = [res for res in results if res.group_index == 2]
        poly = decode_stage1(group2, 2)
        for l, a_l in enumerate(partition_rows(a, 2)):
            assert BlockMatrix(poly.coeffs[l], a.field) == matmul(a_l, encoded_b)

    def test_stage1_too_few(self, random_matrix):
        with pytest.raises(InsufficientResultsError, match="insufficient") as excinfo:
            decode_stage1([SubResult(3, 1, random_matrix(1, 1))], 2)
        assert excinfo.value.group_index == 3

    def test_stage1_duplicate_x(self, random_matrix):
        value = random_matrix(1, 1)
        with pytest.raises(SingularSystemError):
            decode_stage1([SubResult(1, 4, value), SubResult(1, 4, value)], 2)

    def test_stage1_mixed_groups(self, random_matrix):
        value = random_matrix(1, 1)
        with pytest.raises(ShapeError):
            decode_stage1([SubResult(1, 4, value), SubResult(2, 5, value)], 2)

    def test_stage2_constant_function(self, random_matrix):
        """n=2, equal values at both points: the linear term vanishes."""
        value = random_matrix(2, 2)
        constant, (linear,) = decode_stage2([value, value], [3, 8], with_constant=True)
        assert constant == value
        assert linear.is_zero()

    def test_stage2_duplicate_points(self, random_matrix):
        value = random_matrix(1, 1)
        with pytest.raises(SingularSystemError):
            decode_stage2([value, value], [2, 2])

    def test_noise_free_constant_is_zero(self, random_matrix, rng):
        """With M=1 there is no undesired matrix, so every constant term is zero."""
        a, b = random_matrix(4, 3), random_matrix(3, 4)
        spec = PartitionSpec(m=2, n=3, M=1, N=6, L=1)
        assignment, results = session_results(a, [b], 2, 3, 1, rng)
        decoder = TwofoldDecoder(spec, assignment.group_points)
        for res in results:
            decoder.feed(res)
        assert decoder.decode() == matmul(a, b)
        assert all(c.is_zero() for c in decoder.constants)


class TestRecoverProduct:
    """Tests for streaming recovery and the recovery threshold."""

    def test_example1(self, example1_inputs, example1_spec, rng):
        a, library = example1_inputs
        assignment, results = session_results(a, library, 2, 3, 1, rng, per_group=4)
        decoder = TwofoldDecoder(example1_spec, assignment.group_points)
        product = recover_product(results, example1_spec, assignment.group_points, decoder)
        assert product == matmul(a, library[0])
        assert len(decoder.consumed) == example1_spec.K == 6

    def test_hand_instance(self, f101, rng):
        """p=101, B_1 = I, B_2 all twos, D=1 recovers A."""
        a = BlockMatrix.from_rows([[1, 2], [3, 4]], f101)
        library = [
            BlockMatrix.identity(2, f101),
            BlockMatrix.from_rows([[2, 2], [2, 2]], f101),
        ]
        spec = PartitionSpec(m=2, n=2, M=2, N=4, L=1)
        assignment, results = session_results(a, library, 2, 2, 1, rng)
        assert recover_product(results, spec, assignment.group_points) == a

    def test_desired_second_matrix(self, example1_inputs, example1_spec, rng):
        a, library = example1_inputs
        assignment, results = session_results(a, library, 2, 3, 2, rng)
        product = recover_product(results, example1_spec, assignment.group_points)
        assert product == matmul(a, library[1])

    def test_stops_at_threshold(self, example1_inputs, example1_spec, rng):
        """The stream is not read past the result that completes the last group."""
        a, library = example1_inputs
        assignment, results = session_results(a, library, 2, 3, 1, rng)

        def stream():
            yield from results
            raise AssertionError("read past the recovery threshold")

        assert recover_product(stream(), example1_spec, assignment.group_points) == matmul(
            a, library[0]
        )

    def test_late_results_ignored(self, example1_inputs, example1_spec, rng):
        """A group keeps its m earliest results."""
        a, library = example1_inputs
        assignment, results = session_results(a, library, 2, 3, 1, rng, per_group=3)
        group1 = [res for res in results if res.group_index == 1]
        decoder = TwofoldDecoder(example1_spec, assignment.group_points)
        for res in group1:
            decoder.feed(res)
        assert decoder.buckets[1] == group1[:2]

    def test_threshold_is_tight(self, example1_inputs, example1_spec, rng):
        """Dropping any single result from a group of exactly m fails, naming that group."""
        a, library = example1_inputs
        assignment, results = session_results(a, library, 2, 3, 1, rng)
        for dropped in range(len(results)):
            remaining = results[:dropped] + results[dropped + 1:]
            with pytest.raises(InsufficientResultsError) as excinfo:
                recover_product(remaining, example1_spec, assignment.group_points)
            assert excinfo.value.group_index == results[dropped].group_index

    def test_unknown_group(self, example1_spec, random_matrix):
        decoder = TwofoldDecoder(example1_spec, [1, 2, 3])
        with pytest.raises(ShapeError):
            decoder.feed(SubResult(4, 1, random_matrix(2, 2)))

    def test_group_point_count(self, example1_spec):
        with pytest.raises(ShapeError):
            TwofoldDecoder(example1_spec, [1, 2])

    def test_single_worker_groups(self, random_matrix, rng):
        """N = n, m = 1: one result per group."""
        a, b = random_matrix(2, 2), random_matrix(2, 3)
        spec = PartitionSpec(m=1, n=4, M=1, N=4, L=1)
        assignment, results = session_results(a, [b], 1, 4, 1, rng)
        assert recover_product(results, spec, assignment.group_points) == matmul(a, b)
