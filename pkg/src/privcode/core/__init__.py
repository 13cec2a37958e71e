"""
Core modules for the privcode package.
"""

from privcode.core.errors import (
    DivergentOrderStatError,
    InfeasibleGroupingError,
    InsufficientPointsError,
    InsufficientResultsError,
    InvalidSpecError,
    NoInverseError,
    PartitionError,
    PrivcodeError,
    ShapeError,
    SingularSystemError,
)
from privcode.core.ffield import PrimeField, default_field, interpolate, eval_poly
from privcode.core.blockmat import BlockMatrix, PartitionSpec, matmul
from privcode.core.codec import TwofoldDecoder, recover_product
from privcode.core.protocol import (
    SessionOutcome,
    SessionPlan,
    audit_query_invariance,
    default_arrival_order,
    orchestrate,
    plan_session,
)
from privcode.core.stragglersim import (
    Convention,
    DelayModel,
    GroupingPlan,
    TimingReport,
    figure2_frame,
    figure3_frame,
    timing_report,
)

__all__ = [
    'DivergentOrderStatError',
    'InfeasibleGroupingError',
    'InsufficientPointsError',
    'InsufficientResultsError',
    'InvalidSpecError',
    'NoInverseError',
    'PartitionError',
    'PrivcodeError',
    'ShapeError',
    'SingularSystemError',
    'PrimeField',
    'default_field',
    'interpolate',
    'eval_poly',
    'BlockMatrix',
    'PartitionSpec',
    'matmul',
    'TwofoldDecoder',
    'recover_product',
    'SessionOutcome',
    'SessionPlan',
    'audit_query_invariance',
    'default_arrival_order',
    'orchestrate',
    'plan_session',
    'Convention',
    'DelayModel',
    'GroupingPlan',
    'TimingReport',
    'figure2_frame',
    'figure3_frame',
    'timing_report',
]
