"""
Prime field arithmetic and matrix-valued polynomial evaluation/interpolation.

Field elements are plain Python ints kept fully reduced modulo p. Matrices over
the field are numpy arrays of dtype=object holding Python ints, so products of
two residues below 2^64 never overflow. Interpolation computes the Lagrange
basis once per point set and applies it to every matrix entry at once.
"""

import logging
import random
from dataclasses import dataclass
from typing import Iterable, List, Sequence, Tuple

import numpy as np
from sympy import isprime

from privcode.core.errors import (
    InsufficientPointsError,
    InvalidSpecError,
    NoInverseError,
    ShapeError,
    SingularSystemError,
)

logger = logging.getLogger(__name__)

# Mersenne prime 2^61 - 1
DEFAULT_PRIME = (1 << 61) - 1

# Largest field the u64 wire format can carry
MAX_PRIME_EXCLUSIVE = 1 << 64

FieldElement = int


@dataclass(frozen=True)
class PrimeField:
    """
    The prime field F_p.

    Args:
        p: The field characteristic. Must be prime and below 2^64.
    """

    p: int = DEFAULT_PRIME

    def __post_init__(self) -> None:
        if self.p < 2 or self.p >= MAX_PRIME_EXCLUSIVE or not isprime(self.p):
            raise InvalidSpecError([f"p must be a prime below 2^64 (got {self.p})"])

    def element(self, value: int) -> FieldElement:
        """Reduce an integer into the field."""
        return int(value) % self.p

    def add(self, a: FieldElement, b: FieldElement) -> FieldElement:
        return (a + b) % self.p

    def sub(self, a: FieldElement, b: FieldElement) -> FieldElement:
        return (a - b) % self.p

    def mul(self, a: FieldElement, b: FieldElement) -> FieldElement:
        return (a * b) % self.p

    def neg(self, a: FieldElement) -> FieldElement:
        return (-a) % self.p

    def inv(self, a: FieldElement) -> FieldElement:
        """
        Multiplicative inverse via Fermat's little theorem.

        Raises:
            NoInverseError: If a is zero in the field.
        """
        a %= self.p
        if a == 0:
            raise NoInverseError(f"no inverse: 0 has no inverse in F_{self.p}")
        return pow(a, self.p - 2, self.p)

    def array(self, values: Iterable) -> np.ndarray:
        """
        Build a reduced object-dtype matrix from nested integer values.

        Args:
            values: Anything numpy can turn into a 2-D array of integers.

        Returns:
            A 2-D object array with every entry in [0, p).
        """
        arr = np.array(values, dtype=object)
        if arr.ndim != 2:
            raise ShapeError(f"shape: expected a 2-D matrix, got {arr.ndim} dimensions")
        return self.reduce(arr)

    def reduce(self, arr: np.ndarray) -> np.ndarray:
        """Reduce every entry of an object array modulo p."""
        out = np.empty(arr.shape, dtype=object)
        out[...] = [[int(v) % self.p for v in row] for row in arr.tolist()]
        return out

    def zeros(self, rows: int, cols: int) -> np.ndarray:
        out = np.empty((rows, cols), dtype=object)
        out.fill(0)
        return out

    def random_matrix(self, rows: int, cols: int, rng: random.Random) -> np.ndarray:
        """Uniformly random matrix, drawn from the caller's RNG."""
        return self.array(
            [[rng.randrange(self.p) for _ in range(cols)] for _ in range(rows)]
        )


default_field = PrimeField()


@dataclass(frozen=True)
class PolyCoeffs:
    """
    A polynomial with matrix-valued coefficients, constant term first.

    Args:
        coeffs: Coefficient matrices; coeffs[l] multiplies point**l.
    """

    coeffs: Tuple[np.ndarray, ...]

    def __post_init__(self) -> None:
        if len(self.coeffs) < 1:
            raise ShapeError("shape: a polynomial needs at least one coefficient")
        first = self.coeffs[0].shape
        for idx, coeff in enumerate(self.coeffs):
            if coeff.shape != first:
                raise ShapeError(
                    f"shape: coefficient {idx} has shape {coeff.shape}, expected {first}"
                )

    @property
    def degree_bound(self) -> int:
        """Number of coefficients (degree + 1)."""
        return len(self.coeffs)

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.coeffs[0].shape


def field_inv(a: FieldElement, field: PrimeField = default_field) -> FieldElement:
    """
    Invert a nonzero field element.

    Raises:
        NoInverseError: If a is zero.
    """
    return field.inv(a)


def sample_distinct_points(
    count: int,
    forbidden: Iterable[FieldElement],
    rng: random.Random,
    field: PrimeField = default_field,
) -> List[FieldElement]:
    """
    Draw pairwise distinct, nonzero field elements outside a forbidden set.

    Zero is never returned: a library matrix encoded as sum_l B_l y^l would be
    erased at y = 0.

    Args:
        count: Number of points to draw.
        forbidden: Elements that must not be returned.
        rng: Caller-owned random source; the output is a function of its state.
        field: The field to draw from.

    Returns:
        The drawn points, in draw order.

    Raises:
        InsufficientPointsError: If fewer than `count` valid elements exist.
    """
    p = field.p
    excluded = {f % p for f in forbidden} - {0}
    available = p - 1 - len(excluded)
    if count < 0 or count > available:
        raise InsufficientPointsError(
            f"insufficient points: need {count} distinct nonzero elements, "
            f"F_{p} has {available} available"
        )

    # Small fields: enumerate the candidates and sample without replacement
    if available <= 4 * count + 16:
        candidates = [x for x in range(1, p) if x not in excluded]
        return rng.sample(candidates, count)

    points: List[FieldElement] = []
    seen = set(excluded)
    while len(points) < count:
        candidate = rng.randrange(1, p)
        if candidate in seen:
            logger.debug(f"Rejected repeated point {candidate}")
            continue
        seen.add(candidate)
        points.append(candidate)
    return points


def eval_poly(
    poly: PolyCoeffs, point: FieldElement, field: PrimeField = default_field
) -> np.ndarray:
    """
    Evaluate sum_l coeffs[l] * point**l entrywise in F_p (Horner order).

    Args:
        poly: The matrix-valued polynomial.
        point: Evaluation point.
        field: The field.

    Returns:
        The evaluation, a matrix of the coefficients' shape.
    """
    p = field.p
    x = point % p
    acc = poly.coeffs[-1] % p
    for coeff in reversed(poly.coeffs[:-1]):
        acc = (acc * x + coeff) % p
    return acc


def lagrange_basis(
    points: Sequence[FieldElement], field: PrimeField = default_field
) -> List[List[FieldElement]]:
    """
    Coefficients of the Lagrange basis polynomials for a point set.

    Returns:
        basis[i][l] is the coefficient of x**l in the polynomial that is 1 at
        points[i] and 0 at every other point.

    Raises:
        SingularSystemError: If two points coincide.
    """
    p = field.p
    pts = [x % p for x in points]
    if len(set(pts)) != len(pts):
        raise SingularSystemError(f"singular system: interpolation points repeat {pts}")

    k = len(pts)
    # prod_j (x - x_j), ascending coefficients
    master = [1]
    for xj in pts:
        shifted = [0] + master
        for idx, c in enumerate(master):
            shifted[idx] = (shifted[idx] - xj * c) % p
        master = shifted

    basis: List[List[FieldElement]] = []
    for xi in pts:
        # Synthetic division of master by (x - xi)
        quotient = [0] * k
        quotient[k - 1] = master[k]
        for j in range(k - 1, 0, -1):
            quotient[j - 1] = (master[j] + xi * quotient[j]) % p
        denom = 0
        for c in reversed(quotient):
            denom = (denom * xi + c) % p
        weight = field.inv(denom)
        basis.append([(c * weight) % p for c in quotient])
    return basis


def interpolate(
    points: Sequence[FieldElement],
    values: Sequence[np.ndarray],
    field: PrimeField = default_field,
) -> PolyCoeffs:
    """
    Recover the unique polynomial of degree < len(points) through the values.

    Args:
        points: Pairwise distinct evaluation points.
        values: Matrices of identical shape, values[i] taken at points[i].
        field: The field.

    Returns:
        The interpolating polynomial, len(points) coefficients.

    Raises:
        SingularSystemError: If points repeat.
        ShapeError: If the value matrices disagree in shape or count.
    """
    if len(points) != len(values) or not points:
        raise ShapeError(
            f"shape: {len(points)} points but {len(values)} values to interpolate"
        )
    shape = values[0].shape
    for idx, value in enumerate(values):
        if value.shape != shape:
            raise ShapeError(f"shape: value {idx} has shape {value.shape}, expected {shape}")

    basis = lagrange_basis(points, field)
    k = len(points)
    stacked = np.empty((k, int(np.prod(shape))), dtype=object)
    for idx, value in enumerate(values):
        stacked[idx, :] = value.reshape(-1)
    transposed = np.empty((k, k), dtype=object)
    for i in range(k):
        for l in range(k):
            transposed[l, i] = basis[i][l]

    combined = np.dot(transposed, stacked) % field.p
    return PolyCoeffs(tuple(combined[l].reshape(shape) for l in range(k)))
