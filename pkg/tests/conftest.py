"""
Configuration file for pytest providing fixtures for testing privcode.

This file contains shared fixtures that can be used across all tests.
"""

import random
from typing import Callable, List

import pytest

from privcode.core.blockmat import BlockMatrix, PartitionSpec
from privcode.core.ffield import PrimeField, default_field
from privcode.core.stragglersim import DelayModel


@pytest.fixture
def field() -> PrimeField:
    """The default field F_(2^61-1)."""
    return default_field


@pytest.fixture
def small_field() -> PrimeField:
    """A tiny field where exhaustion and wraparound are easy to hit."""
    return PrimeField(5)


@pytest.fixture
def rng() -> random.Random:
    """A seeded random source."""
    return random.Random(1234)


@pytest.fixture
def random_matrix(field: PrimeField, rng: random.Random) -> Callable[[int, int], BlockMatrix]:
    """Factory for uniformly random matrices over the default field."""

    def make(rows: int, cols: int) -> BlockMatrix:
        return BlockMatrix(field.random_matrix(rows, cols, rng), field)

    return make


@pytest.fixture
def example1_spec() -> PartitionSpec:
    """Twelve workers in three groups, A in two blocks, two library matrices."""
    return PartitionSpec(m=2, n=3, M=2, N=12, L=1)


@pytest.fixture
def audit_spec() -> PartitionSpec:
    """Twelve workers, four library matrices."""
    return PartitionSpec(m=2, n=3, M=4, N=12, L=1)


@pytest.fixture
def example1_inputs(random_matrix) -> tuple:
    """A (4x6) and a library of two 6x4 matrices for the example-1 geometry."""
    a = random_matrix(4, 6)
    library: List[BlockMatrix] = [random_matrix(6, 4), random_matrix(6, 4)]
    return a, library


@pytest.fixture
def figure2_model() -> DelayModel:
    """gamma = mu = 0.1."""
    return DelayModel(gamma=0.1, mu=0.1)


@pytest.fixture
def config_file(tmp_path):
    """Factory writing a key = value config file and returning its path."""

    def write(text: str, name: str = "run.conf") -> str:
        path = tmp_path / name
        path.write_text(text, encoding="utf-8")
        return str(path)

    return write
