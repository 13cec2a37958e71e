"""
Unit tests for session planning, queries, workers, orchestration and the privacy audit.
"""

import struct

import pytest

from privcode.core.blockmat import BlockMatrix, PartitionSpec, matmul
from privcode.core.errors import InvalidSpecError, ShapeError
from privcode.core.ffield import PrimeField
from privcode.core.protocol import (
    QUERY_MAGIC,
    LeakyQuery,
    Query,
    WorkerView,
    audit_query_invariance,
    build_query,
    compose_leaky_query,
    default_arrival_order,
    encode_share,
    orchestrate,
    plan_session,
    run_worker,
    view_field_names,
    worker_view,
)


class TestPlanSession:
    """Tests for drawing a session plan."""

    def test_example1_plan(self, example1_spec):
        plan = plan_session(example1_spec, 1, seed=7)
        assert len(plan.grouping) == 3
        assert all(len(group) == 4 for group in plan.grouping)
        assert sorted(r for group in plan.grouping for r in group) == list(range(1, 13))

    def test_points_distinct_and_nonzero(self, audit_spec):
        plan = plan_session(audit_spec, 2, seed=3)
        y = plan.assignment.group_points + plan.assignment.shared_points
        assert len(y) == audit_spec.n + audit_spec.M - 1
        assert len(set(y)) == len(y) and 0 not in y
        xs = [x for worker in plan.x_points for x in worker]
        assert len(xs) == audit_spec.N * audit_spec.L
        assert len(set(xs)) == len(xs) and 0 not in xs

    def test_deterministic(self, example1_spec):
        assert plan_session(example1_spec, 1, seed=11) == plan_session(example1_spec, 1, seed=11)

    def test_x_points_ignore_desired(self, audit_spec):
        """The x-points, and therefore the shares of A, are drawn without looking at D."""
        plans = [plan_session(audit_spec, d, seed=5) for d in range(1, 5)]
        assert len({plan.x_points for plan in plans}) == 1

    def test_desired_out_of_range(self, example1_spec):
        with pytest.raises(InvalidSpecError, match="1 ≤ D ≤ M"):
            plan_session(example1_spec, 3, seed=0)

    def test_field_too_small(self, example1_spec):
        with pytest.raises(InvalidSpecError, match="p - 1 > N·L"):
            plan_session(example1_spec, 1, seed=0, field=PrimeField(13))

    def test_single_worker_groups(self):
        spec = PartitionSpec(m=1, n=3, M=1, N=3, L=1)
        plan = plan_session(spec, 1, seed=0)
        assert plan.grouping == ((1,), (2,), (3,))

    def test_group_of_unknown_worker(self, example1_spec):
        plan = plan_session(example1_spec, 1, seed=0)
        with pytest.raises(ShapeError):
            plan.group_of(13)


class TestQueries:
    """Tests for query construction and serialization."""

    def test_layout(self):
        """b"PPCQ", u8 version, u64 n, L, M, M points, u8 opcode."""
        raw = Query(n=3, L=1, per_matrix_point=(5, 6)).to_bytes()
        assert raw[:4] == QUERY_MAGIC
        assert raw[4] == 1
        assert struct.unpack("<QQQ", raw[5:29]) == (3, 1, 2)
        assert struct.unpack("<2Q", raw[29:45]) == (5, 6)
        assert raw[45] == 1
        assert len(raw) == 46

    def test_large_point_fits(self, field):
        raw = Query(n=2, L=1, per_matrix_point=(field.p - 1,)).to_bytes()
        assert struct.unpack("<Q", raw[29:37]) == (field.p - 1,)

    def test_single_matrix_library(self):
        spec = PartitionSpec(m=1, n=2, M=1, N=4, L=1)
        plan = plan_session(spec, 1, seed=2)
        for rank in range(1, 5):
            query = build_query(plan, rank)
            assert query.per_matrix_point == (
                plan.assignment.group_points[plan.group_of(rank) - 1],
            )

    def test_example1_group_two(self, example1_spec):
        """A worker of G_2 asking for B_1 uses (y_2, shared point)."""
        plan = plan_session(example1_spec, 1, seed=4)
        rank = plan.grouping[1][0]
        query = build_query(plan, rank)
        assert query.per_matrix_point == (
            plan.assignment.group_points[1],
            plan.assignment.shared_points[0],
        )

    def test_same_group_same_query(self, audit_spec):
        plan = plan_session(audit_spec, 3, seed=9)
        for group in plan.grouping:
            queries = {build_query(plan, rank).to_bytes() for rank in group}
            assert len(queries) == 1

    def test_leaky_query_appends_desired(self):
        raw = LeakyQuery(n=3, L=1, per_matrix_point=(5, 6), desired=2).to_bytes()
        assert raw[46:] == struct.pack("<Q", 2)


class TestWorkers:
    """Tests for worker views and sub-computations."""

    def test_view_schema(self):
        """A worker never sees the grouping, other workers' points or D."""
        names = view_field_names()
        assert names == ["query", "encoded_a", "produced"]
        for forbidden in ("grouping", "desired", "assignment", "x_points"):
            assert forbidden not in names

    def test_single_result(self, example1_spec, example1_inputs):
        a, library = example1_inputs
        plan = plan_session(example1_spec, 1, seed=0)
        results = run_worker(worker_view(plan, a, 1), library, 1)
        assert [(res.worker_rank, res.sequence_index) for res in results] == [(1, 1)]
        assert results[0].value.shape == (2, 2)

    def test_example2_geometry(self, random_matrix):
        """L = m = 100: a worker returns 100 results in index order."""
        spec = PartitionSpec(m=100, n=3, M=1, N=3, L=100)
        a, b = random_matrix(100, 1), random_matrix(1, 2)
        plan = plan_session(spec, 1, seed=0)
        results = run_worker(worker_view(plan, a, 2), [b], 2)
        assert [res.sequence_index for res in results] == list(range(1, 101))

    def test_zero_library(self, example1_spec, random_matrix, field):
        a = random_matrix(4, 6)
        library = [BlockMatrix.zeros(6, 4, field)] * 2
        plan = plan_session(example1_spec, 2, seed=0)
        results = run_worker(worker_view(plan, a, 5), library, 5)
        assert all(res.value.is_zero() for res in results)

    def test_inconsistent_view(self, example1_spec, example1_inputs):
        a, library = example1_inputs
        plan = plan_session(example1_spec, 1, seed=0)
        view = worker_view(plan, a, 1)
        broken = WorkerView(query=view.query, encoded_a=view.encoded_a * 2)
        with pytest.raises(ShapeError):
            run_worker(broken, library)

    def test_share_ignores_desired(self, audit_spec, random_matrix):
        """Encoded pieces of A are byte-identical for every D."""
        a = random_matrix(4, 3)
        shares = {
            encode_share(plan_session(audit_spec, d, seed=1), a, 6).to_bytes()
            for d in range(1, 5)
        }
        assert len(shares) == 1


class TestOrchestrate:
    """Tests for end-to-end sessions with explicit arrival orders."""

    def test_round_robin(self, example1_spec, example1_inputs):
        a, library = example1_inputs
        plan = plan_session(example1_spec, 2, seed=0)
        outcome = orchestrate(plan, a, library, default_arrival_order(example1_spec))
        assert outcome.product == matmul(a, library[1])
        assert outcome.transcript.consumed_count == example1_spec.K

    def test_starved_group(self, example1_spec, example1_inputs):
        """With one group's results last, decoding waits for that group's m-th result."""
        a, library = example1_inputs
        plan = plan_session(example1_spec, 1, seed=3)
        starved = plan.grouping[0]
        order = [(w, 1) for w in range(1, 13) if w not in starved] + [(w, 1) for w in starved]
        outcome = orchestrate(plan, a, library, order)
        assert outcome.product == matmul(a, library[0])
        assert outcome.transcript.consumed_count == 6
        assert outcome.transcript.delivered == 8 + 2
        assert outcome.transcript.consumed[-1] == (starved[1], 1, 1)

    def test_noise_cross_check(self, audit_spec, random_matrix):
        a = random_matrix(4, 3)
        library = [random_matrix(3, 2) for _ in range(4)]
        plan = plan_session(audit_spec, 4, seed=8)
        outcome = orchestrate(
            plan, a, library, default_arrival_order(audit_spec), check_noise=True
        )
        assert outcome.product == matmul(a, library[3])
        assert len(outcome.noise_constants) == audit_spec.m

    def test_transcript_deterministic(self, example1_spec, example1_inputs):
        a, library = example1_inputs
        order = default_arrival_order(example1_spec)
        texts = {
            orchestrate(plan_session(example1_spec, 1, seed=21), a, library, order)
            .transcript.to_text()
            for _ in range(2)
        }
        assert len(texts) == 1

    def test_order_must_be_permutation(self, example1_spec, example1_inputs):
        a, library = example1_inputs
        plan = plan_session(example1_spec, 1, seed=0)
        order = default_arrival_order(example1_spec)
        with pytest.raises(ShapeError):
            orchestrate(plan, a, library, order[:-1])
        with pytest.raises(ShapeError):
            orchestrate(plan, a, library, order[:-1] + [order[0]])

    def test_library_size_mismatch(self, example1_spec, example1_inputs):
        a, library = example1_inputs
        plan = plan_session(example1_spec, 1, seed=0)
        with pytest.raises(ShapeError):
            orchestrate(plan, a, library[:1], default_arrival_order(example1_spec))

    def test_views_carry_produced(self, example1_spec, example1_inputs):
        """Each view records what its worker returned, beside what it was sent."""
        a, library = example1_inputs
        plan = plan_session(example1_spec, 2, seed=4)
        outcome = orchestrate(plan, a, library, default_arrival_order(example1_spec))
        assert len(outcome.views) == example1_spec.N
        for rank, view in enumerate(outcome.views, start=1):
            fresh = worker_view(plan, a, rank)
            assert view.query == fresh.query
            assert view.encoded_a == fresh.encoded_a
            expected = run_worker(fresh, library, rank)
            assert view.produced == tuple(res.value for res in expected)

    def test_produced_ignores_desired(self, audit_spec, random_matrix):
        """With a library of equal matrices, a worker's outputs are the same for every D."""
        a = random_matrix(4, 3)
        library = [random_matrix(3, 2)] * audit_spec.M
        order = default_arrival_order(audit_spec)
        outcomes = [
            orchestrate(plan_session(audit_spec, d, seed=6), a, library, order)
            for d in range(1, audit_spec.M + 1)
        ]
        for rank in range(audit_spec.N):
            produced = {
                b"".join(value.to_bytes() for value in outcome.views[rank].produced)
                for outcome in outcomes
            }
            assert len(produced) == 1


class TestAudit:
    """Tests for the query-invariance audit."""

    def test_passes(self, audit_spec):
        report = audit_query_invariance(audit_spec, seed_count=500, coupling_seeds=20)
        assert report.passed, report.first_failure
        assert report.coupling_checked == 20 * 4 * 12 * 3
        assert report.share_checked == 3 * 12 * 3
        assert len(report.marginal_pvalues) == 16

    def test_mutant_fails_at_desired_offset(self, audit_spec):
        """A query that embeds D differs right after the 62 canonical bytes."""
        report = audit_query_invariance(
            audit_spec, seed_count=100, factory=compose_leaky_query, coupling_seeds=2
        )
        assert not report.passed
        assert "coupling" in report.first_failure
        assert "byte offset 62" in report.first_failure

    def test_requires_two_matrices(self):
        spec = PartitionSpec(m=2, n=3, M=1, N=12, L=1)
        with pytest.raises(InvalidSpecError, match="audit requires M ≥ 2"):
            audit_query_invariance(spec, seed_count=10)

    def test_marginal_draws_every_group(self, audit_spec):
        """Position D is filled from each group's point in turn."""
        report = audit_query_invariance(audit_spec, seed_count=30, coupling_seeds=1, share_seeds=1)
        assert report.marginal_group_draws == {1: 40, 2: 40, 3: 40}
