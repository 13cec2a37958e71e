"""
Utility modules for privcode.

This package provides parameter validation and output path management.
"""

from privcode.utils.validators import (
    desired_index_violations,
    field_capacity_violations,
    grouping_violations,
    parse_dims,
    partition_spec_violations,
)
from privcode.utils.output_manager import OutputManager, default_output_manager

__all__ = [
    'desired_index_violations',
    'field_capacity_violations',
    'grouping_violations',
    'parse_dims',
    'partition_spec_violations',
    'OutputManager',
    'default_output_manager'
]
