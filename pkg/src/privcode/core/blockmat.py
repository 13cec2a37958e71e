"""
Dense matrices over F_p with row/column block partitioning.

BlockMatrix wraps a read-only object-dtype numpy array. Partitions return copies,
so every value stays immutable. Schoolbook multiplication here is the
correctness oracle for the decoder.
"""

import logging
from dataclasses import dataclass, field as dataclass_field
from typing import List, Sequence, Tuple

import numpy as np

from privcode.core.errors import InvalidSpecError, PartitionError, ShapeError
from privcode.core.ffield import FieldElement, PrimeField, default_field
from privcode.utils.validators import partition_spec_violations

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class BlockMatrix:
    """
    A rows x cols matrix over a prime field.

    Args:
        data: 2-D object array of residues. Reduced and frozen on construction.
        field: The field the entries live in.
    """

    data: np.ndarray
    field: PrimeField = dataclass_field(default=default_field)

    def __post_init__(self) -> None:
        if self.data.ndim != 2 or self.data.shape[0] < 1 or self.data.shape[1] < 1:
            raise ShapeError(f"shape: a matrix needs positive rows and cols, got {self.data.shape}")
        reduced = self.field.reduce(self.data)
        reduced.flags.writeable = False
        object.__setattr__(self, "data", reduced)

    @classmethod
    def from_rows(
        cls, rows: Sequence[Sequence[int]], field: PrimeField = default_field
    ) -> "BlockMatrix":
        """Build a matrix from nested integer rows, reducing modulo p."""
        return cls(field.array(rows), field)

    @classmethod
    def zeros(cls, rows: int, cols: int, field: PrimeField = default_field) -> "BlockMatrix":
        return cls(field.zeros(rows, cols), field)

    @classmethod
    def identity(cls, size: int, field: PrimeField = default_field) -> "BlockMatrix":
        return cls.from_rows(
            [[1 if i == j else 0 for j in range(size)] for i in range(size)], field
        )

    @property
    def rows(self) -> int:
        return self.data.shape[0]

    @property
    def cols(self) -> int:
        return self.data.shape[1]

    @property
    def shape(self) -> Tuple[int, int]:
        return (self.rows, self.cols)

    @property
    def entries(self) -> Tuple[FieldElement, ...]:
        """Row-major entries."""
        return tuple(int(v) for v in self.data.reshape(-1))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, BlockMatrix):
            return NotImplemented
        return (
            self.field.p == other.field.p
            and self.shape == other.shape
            and self.entries == other.entries
        )

    def __hash__(self) -> int:
        return hash((self.field.p, self.shape, self.entries))

    def __repr__(self) -> str:
        return f"BlockMatrix({self.rows}x{self.cols} over F_{self.field.p})"

    def is_zero(self) -> bool:
        return all(v == 0 for v in self.entries)

    def to_bytes(self) -> bytes:
        """Canonical little-endian u64 encoding: rows, cols, then entries."""
        words = [self.rows, self.cols, *self.entries]
        return b"".join(int(w).to_bytes(8, "little") for w in words)

    def to_text(self) -> str:
        """Fixture text format: "rows cols p", then one line per row."""
        lines = [f"{self.rows} {self.cols} {self.field.p}"]
        for row in self.data.tolist():
            lines.append(" ".join(str(v) for v in row))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "BlockMatrix":
        """
        Parse the fixture text format.

        Raises:
            ShapeError: If the body does not match the declared dimensions.
        """
        lines = [line.split() for line in text.strip().splitlines() if line.strip()]
        if not lines or len(lines[0]) != 3:
            raise ShapeError("shape: matrix header must be 'rows cols p'")
        rows, cols, p = (int(tok) for tok in lines[0])
        body = lines[1:]
        if len(body) != rows or any(len(row) != cols for row in body):
            raise ShapeError(f"shape: matrix body does not match header {rows}x{cols}")
        return cls.from_rows([[int(tok) for tok in row] for row in body], PrimeField(p))

    def pad_to(self, rows: int, cols: int) -> "BlockMatrix":
        """Zero-pad to at least the given dimensions."""
        out = self.field.zeros(max(rows, self.rows), max(cols, self.cols))
        out[: self.rows, : self.cols] = self.data
        return BlockMatrix(out, self.field)

    def crop(self, rows: int, cols: int) -> "BlockMatrix":
        return BlockMatrix(self.data[:rows, :cols].copy(), self.field)


@dataclass(frozen=True)
class PartitionSpec:
    """
    Partitioning parameters of a private polynomial code session.

    Args:
        m: Row blocks of A.
        n: Number of worker groups; each library matrix splits into n-1 column blocks.
        M: Library size.
        N: Number of workers.
        L: Sub-computations per worker.

    Raises:
        InvalidSpecError: Naming every violated inequality.
    """

    m: int
    n: int
    M: int
    N: int
    L: int

    def __post_init__(self) -> None:
        violations = partition_spec_violations(self.m, self.n, self.M, self.N, self.L)
        if violations:
            raise InvalidSpecError(violations)

    @property
    def K(self) -> int:
        """Recovery threshold: m results from each of the n groups."""
        return self.m * self.n

    @property
    def group_size(self) -> int:
        return self.N // self.n

    def check_dims(self, r: int, t: int) -> None:
        """
        Check the matrix dimensions this spec partitions.

        Raises:
            PartitionError: If m does not divide r or n-1 does not divide t.
        """
        if r % self.m:
            raise PartitionError(f"partition: m={self.m} does not divide r={r}")
        if t % (self.n - 1):
            raise PartitionError(f"partition: n-1={self.n - 1} does not divide t={t}")


def matmul(a: BlockMatrix, b: BlockMatrix) -> BlockMatrix:
    """
    Exact product over F_p.

    Raises:
        ShapeError: If a.cols != b.rows or the fields differ.
    """
    if a.cols != b.rows:
        raise ShapeError(f"shape: cannot multiply {a.rows}x{a.cols} by {b.rows}x{b.cols}")
    if a.field.p != b.field.p:
        raise ShapeError(f"shape: operands live in F_{a.field.p} and F_{b.field.p}")
    return BlockMatrix(np.dot(a.data, b.data) % a.field.p, a.field)


def add(a: BlockMatrix, b: BlockMatrix) -> BlockMatrix:
    if a.shape != b.shape:
        raise ShapeError(f"shape: cannot add {a.shape} and {b.shape}")
    return BlockMatrix((a.data + b.data) % a.field.p, a.field)


def partition_rows(a: BlockMatrix, m: int) -> List[BlockMatrix]:
    """
    Split a into m horizontal bands, top first.

    Raises:
        PartitionError: If m does not divide a.rows.
    """
    if m < 1 or a.rows % m:
        raise PartitionError(f"partition: cannot split {a.rows} rows into {m} blocks")
    band = a.rows // m
    return [BlockMatrix(a.data[i * band:(i + 1) * band, :].copy(), a.field) for i in range(m)]


def partition_cols(b: BlockMatrix, blocks: int) -> List[BlockMatrix]:
    """
    Split b into vertical bands, left first.

    Raises:
        PartitionError: If blocks does not divide b.cols.
    """
    if blocks < 1 or b.cols % blocks:
        raise PartitionError(f"partition: cannot split {b.cols} cols into {blocks} blocks")
    band = b.cols // blocks
    return [
        BlockMatrix(b.data[:, l * band:(l + 1) * band].copy(), b.field) for l in range(blocks)
    ]


def vstack(blocks: Sequence[BlockMatrix]) -> BlockMatrix:
    if not blocks:
        raise ShapeError("shape: nothing to stack")
    if len({blk.cols for blk in blocks}) != 1:
        raise ShapeError("shape: blocks disagree in column count")
    return BlockMatrix(np.vstack([blk.data for blk in blocks]), blocks[0].field)


def hstack(blocks: Sequence[BlockMatrix]) -> BlockMatrix:
    if not blocks:
        raise ShapeError("shape: nothing to stack")
    if len({blk.rows for blk in blocks}) != 1:
        raise ShapeError("shape: blocks disagree in row count")
    return BlockMatrix(np.hstack([blk.data for blk in blocks]), blocks[0].field)


def assemble_product(blocks: Sequence[Sequence[BlockMatrix]]) -> BlockMatrix:
    """
    Reassemble an m x (n-1) grid of product blocks into one matrix.

    Args:
        blocks: blocks[l][r] is A_l * B_{D,r}.

    Raises:
        ShapeError: If the grid is ragged or block shapes disagree.
    """
    if not blocks or not blocks[0]:
        raise ShapeError("shape: empty block grid")
    width = len(blocks[0])
    if any(len(row) != width for row in blocks):
        raise ShapeError("shape: ragged block grid")
    block_shape = blocks[0][0].shape
    for l, row in enumerate(blocks):
        for r, blk in enumerate(row):
            if blk.shape != block_shape:
                raise ShapeError(
                    f"shape: block ({l}, {r}) is {blk.shape}, expected {block_shape}"
                )
    return vstack([hstack(row) for row in blocks])
