"""
Integration tests for the end-to-end workflow.
"""

import random

import numpy as np
import pytest

import privcode
from privcode import reproduce_figure, run_private_session
from privcode.core.blockmat import BlockMatrix, PartitionSpec, matmul
from privcode.core.codec import SubResult, recover_product
from privcode.core.errors import InsufficientResultsError, PrivcodeError
from privcode.core.protocol import audit_query_invariance, orchestrate, plan_session
from privcode.core.stragglersim import (
    Convention,
    DelayModel,
    enumerate_groupings,
    event_sim,
    sample_arrival_order,
    timing_report,
)


def random_geometry(rng: random.Random):
    """A valid (m, n, M, N, L) and matrix dims drawn the way a user might pick them."""
    while True:
        m = rng.choice([1, 2, 4])
        n = rng.choice([2, 3])
        M = rng.choice([1, 2, 4])
        N = n * rng.randint(1, 4)
        valid_l = [L for L in range(1, m + 1) if L * (N // n) >= m]
        if valid_l:
            break
    L = rng.choice(valid_l)
    r = rng.choice([d for d in (4, 8, 12) if d % m == 0])
    s = rng.choice([4, 8, 12])
    t = rng.choice([d for d in (4, 8, 12) if d % (n - 1) == 0])
    return PartitionSpec(m=m, n=n, M=M, N=N, L=L), (r, s, t)


class TestEndToEnd:
    """Integration tests for the end-to-end workflow."""

    def test_random_sessions(self, field):
        """Every valid session decodes from exactly K results, and no fewer suffice."""
        rng = random.Random(2024)
        for trial in range(100):
            spec, (r, s, t) = random_geometry(rng)
            a = BlockMatrix(field.random_matrix(r, s, rng), field)
            library = [BlockMatrix(field.random_matrix(s, t, rng), field) for _ in range(spec.M)]
            desired = rng.randint(1, spec.M)
            order = sample_arrival_order(
                spec.N, spec.L, spec.m, spec.n, DelayModel(0.1, 0.1), seed=trial
            )
            outcome = run_private_session(
                a, library, desired, spec.m, spec.n, spec.N, spec.L,
                seed=trial, field=field, arrival_order=order,
            )
            assert outcome.product == matmul(a, library[desired - 1]), spec
            assert outcome.transcript.consumed_count == spec.K, spec

            # Any K-1 of the consumed results leave exactly one group short
            plan = plan_session(spec, desired, trial, field)
            consumed = [
                SubResult(
                    group_index=g,
                    x_point=plan.x_points[w - 1][j - 1],
                    value=outcome.views[w - 1].produced[j - 1],
                    worker_rank=w,
                    sequence_index=j,
                )
                for w, j, g in outcome.transcript.consumed
            ]
            group_points = plan.assignment.group_points
            assert recover_product(consumed, spec, group_points) == outcome.product, spec
            for dropped in range(spec.K):
                rest = consumed[:dropped] + consumed[dropped + 1:]
                with pytest.raises(InsufficientResultsError) as excinfo:
                    recover_product(rest, spec, group_points)
                assert excinfo.value.group_index == consumed[dropped].group_index, spec

    def test_many_subcomputations(self, random_matrix):
        """m = L = 100 over three workers consumes K = 300 results."""
        spec = PartitionSpec(m=100, n=3, M=2, N=3, L=100)
        a = random_matrix(100, 2)
        library = [random_matrix(2, 2), random_matrix(2, 2)]
        plan = plan_session(spec, 2, seed=0)
        order = sample_arrival_order(3, 100, 100, 3, DelayModel(0.1, 0.1), seed=0)
        outcome = orchestrate(plan, a, library, order)
        assert outcome.product == matmul(a, library[1])
        assert outcome.transcript.consumed_count == 300

    def test_noise_cross_check(self, example1_inputs):
        a, library = example1_inputs
        outcome = run_private_session(a, library, 2, 2, 3, 12, seed=3, check_noise=True)
        assert outcome.product == matmul(a, library[1])

    def test_full_audit(self, audit_spec):
        report = audit_query_invariance(audit_spec, seed_count=10_000)
        assert report.passed, report.first_failure
        assert all(p > 0.01 / 16 for p in report.marginal_pvalues.values())

    def test_version(self):
        assert privcode.__version__ == "0.1.0"


class TestTimingWorkflow:
    """Integration tests for the timing models."""

    def test_published_configuration(self, figure2_model):
        assert sum(1 for _ in enumerate_groupings(12, 2)) == 462
        report = timing_report(12, 2, 2, 4, figure2_model, convention=Convention.LOG2)
        assert report.t_a_async == pytest.approx(1.5861, rel=0.01)
        assert report.t_a_one > report.t_rpir > report.t_a_async

    def test_reproduce_figure(self):
        frame = reproduce_figure(2, Convention.LOG2)
        assert frame.loc[frame["K"] == 4, "t_a_async"].iloc[0] == pytest.approx(1.5861, rel=0.01)
        assert len(reproduce_figure(3)) == 20
        with pytest.raises(PrivcodeError):
            reproduce_figure(4)

    def test_event_sim_dominance(self, figure2_model):
        result = event_sim(12, 2, 2, 2, figure2_model, trials=100_000, seed=0, M=4)
        assert np.all(result.async_ <= result.one_shot)
        assert result.means["async"] < result.means["one_shot"]

    def test_event_sim_tracks_closed_forms(self, figure2_model):
        """The simulated one-shot and fine-grained asynchronous means follow the closed forms."""
        coarse = event_sim(12, 2, 2, 2, figure2_model, trials=20_000, seed=1)
        assert coarse.means["one_shot"] == pytest.approx(2.5727, rel=0.10)

        fine = event_sim(12, 2, 30, 30, figure2_model, trials=20_000, seed=1)
        assert fine.means["async"] == pytest.approx(1.0196, rel=0.10)
