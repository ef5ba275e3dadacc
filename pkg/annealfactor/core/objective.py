"""
Factoring objectives over odd-integer bit encodings.

The factors are encoded as ``x = 1 + 2*x1 + 4*x2 + ...`` and
``y = 1 + 2*y1 + 4*y2 + ...``, so only odd factors are representable and the
target N must be odd. Four objective variants are supported:

* ``EQ1``: ``N^2 (N - xy)^2 + x (x - y)^2``
* ``EQ2``: ``[N^2 (N - xy)^2 - N^2 + 2N^3 - N^4 + x (x - y)^2] / 4``, the
  constant-stripped form whose coefficients are all divisible by 4
* ``SIMPLIFIED_NO_N2``: ``(N - xy)^2 - (N - 1)^2 + x (x - y)^2``
* ``SIMPLIFIED_PLAIN``: ``(N - xy)^2``
"""

import time
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Any, Dict, List, Mapping, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from annealfactor.core.boolpoly import (
    Assignment,
    MultilinearPoly,
    VarId,
    VarKind,
    linear_form,
)
from annealfactor.utils.logging import get_logger, log_performance

logger = get_logger(__name__)


class ObjectiveVariant(str, Enum):
    EQ1 = "EQ1"
    EQ2 = "EQ2"
    SIMPLIFIED_NO_N2 = "SIMPLIFIED_NO_N2"
    SIMPLIFIED_PLAIN = "SIMPLIFIED_PLAIN"


@dataclass(frozen=True)
class OddEncoding:
    """Maps ``num_bits`` Boolean variables to an odd integer and back."""

    role: VarKind
    num_bits: int

    def __post_init__(self) -> None:
        if self.role not in (VarKind.XBIT, VarKind.YBIT):
            raise ValueError("Odd encodings are only defined for x and y bits")
        if self.num_bits < 1:
            raise ValueError("An encoding needs at least one Boolean variable")

    @property
    def variables(self) -> Tuple[VarId, ...]:
        return tuple(VarId(self.role, i) for i in range(1, self.num_bits + 1))

    @property
    def max_value(self) -> int:
        return 2 ** (self.num_bits + 1) - 1

    def polynomial(self) -> MultilinearPoly:
        return linear_form(((v, 2 ** v.index) for v in self.variables), constant=1)

    def can_represent(self, value: int) -> bool:
        return value % 2 == 1 and 1 <= value <= self.max_value

    def encode(self, value: int) -> Dict[VarId, int]:
        if not self.can_represent(value):
            raise ValueError(
                f"{value} is not an odd integer in [1, {self.max_value}]"
            )
        return {v: (value >> v.index) & 1 for v in self.variables}

    def decode(self, assignment: Assignment) -> int:
        value = 1
        for v in self.variables:
            try:
                bit = assignment[v]
            except KeyError:
                raise MissingBitError(v) from None
            value += (2 ** v.index) * int(bit)
        return value


class ProblemSpec(BaseModel):
    """The semiprime to factor, the encoding widths and the objective variant."""

    model_config = ConfigDict(frozen=True)

    n: int = Field(..., description="Odd integer N to factor")
    x_bits: int = Field(4, ge=1, description="Boolean variables encoding x")
    y_bits: int = Field(4, ge=1, description="Boolean variables encoding y")
    variant: ObjectiveVariant = Field(
        ObjectiveVariant.EQ2, description="Objective variant"
    )

    @field_validator('n')
    @classmethod
    def validate_n(cls, v: int) -> int:
        if v < 3 or v % 2 == 0:
            raise ValueError(
                f"n must be odd and at least 3 (odd encodings cannot "
                f"represent even factors), got {v}"
            )
        return v

    @model_validator(mode='after')
    def warn_unreachable(self) -> "ProblemSpec":
        if self.x_encoding.max_value * self.y_encoding.max_value < self.n:
            logger.warning(
                f"N={self.n} exceeds the largest representable product for "
                f"{self.x_bits}/{self.y_bits} bits"
            )
        return self

    @property
    def x_encoding(self) -> OddEncoding:
        return OddEncoding(VarKind.XBIT, self.x_bits)

    @property
    def y_encoding(self) -> OddEncoding:
        return OddEncoding(VarKind.YBIT, self.y_bits)

    def variables(self) -> Tuple[VarId, ...]:
        return self.x_encoding.variables + self.y_encoding.variables

    def encode_xy(self, x: int, y: int) -> Dict[VarId, int]:
        bits = self.x_encoding.encode(x)
        bits.update(self.y_encoding.encode(y))
        return bits

    def to_flat(self) -> Dict[str, Any]:
        return {
            "n": self.n,
            "x_bits": self.x_bits,
            "y_bits": self.y_bits,
            "variant": self.variant.value,
        }

    @classmethod
    def from_flat(cls, data: Mapping[str, Any]) -> "ProblemSpec":
        keys = ("n", "x_bits", "y_bits", "variant")
        return cls(**{k: data[k] for k in keys if k in data})


def preset_3x4(n: int, variant: ObjectiveVariant = ObjectiveVariant.EQ2) -> ProblemSpec:
    """Narrow widths (x on 3 bits, y on 4 bits) that hardware handled for 15 and 35."""
    return ProblemSpec(n=n, x_bits=3, y_bits=4, variant=variant)


@dataclass(frozen=True)
class ObjectiveComponents:
    """An objective split by origin; ``total`` is what gets minimised.

    ``divisor`` is 4 for EQ2 and 1 otherwise. ``product_term`` holds the
    ``(N - xy)^2`` part with its prefactor, ``constant`` the stripped
    constant and ``tie_break`` the ``x (x - y)^2`` part; all three are
    before division.
    """

    spec: ProblemSpec
    product_term: MultilinearPoly
    constant: int
    tie_break: MultilinearPoly
    divisor: int
    total: MultilinearPoly


def build_components(spec: ProblemSpec) -> ObjectiveComponents:
    n = spec.n
    x = spec.x_encoding.polynomial()
    y = spec.y_encoding.polynomial()
    residual = n - x * y
    tie_break = x * (x - y) ** 2

    variant = spec.variant
    if variant is ObjectiveVariant.EQ1:
        product_term, constant, tie, divisor = n ** 2 * residual ** 2, 0, tie_break, 1
    elif variant is ObjectiveVariant.EQ2:
        product_term = n ** 2 * residual ** 2
        constant = -n ** 2 + 2 * n ** 3 - n ** 4
        tie, divisor = tie_break, 4
    elif variant is ObjectiveVariant.SIMPLIFIED_NO_N2:
        product_term, constant, tie, divisor = residual ** 2, -(n - 1) ** 2, tie_break, 1
    elif variant is ObjectiveVariant.SIMPLIFIED_PLAIN:
        product_term, constant, tie, divisor = residual ** 2, 0, MultilinearPoly(), 1
    else:  # pragma: no cover
        raise ValueError(f"Unknown variant {variant}")

    undivided = product_term + constant + tie
    if divisor == 1:
        total = undivided
    else:
        try:
            total = undivided.exact_div(divisor)
        except ValueError as exc:
            raise DivisibilityViolation(
                f"{variant.value} objective for N={n} is not divisible by "
                f"{divisor}: {exc}"
            ) from None
    return ObjectiveComponents(spec, product_term, constant, tie, divisor, total)


def build_objective(spec: ProblemSpec) -> MultilinearPoly:
    """Expand the chosen objective variant into a multilinear polynomial."""
    start = time.time()
    poly = build_components(spec).total
    log_performance(
        "build_objective", time.time() - start,
        n=spec.n, variant=spec.variant.value, terms=len(poly), degree=poly.degree(),
    )
    return poly


def objective_value(spec: ProblemSpec, x: int, y: int) -> int:
    """Closed-form value of the variant at integers ``x`` and ``y``."""
    n = spec.n
    variant = spec.variant
    if variant is ObjectiveVariant.EQ1:
        return n ** 2 * (n - x * y) ** 2 + x * (x - y) ** 2
    if variant is ObjectiveVariant.EQ2:
        numerator = n ** 2 * (n - x * y) ** 2 - n ** 2 + 2 * n ** 3 - n ** 4 + x * (x - y) ** 2
        quotient, remainder = divmod(numerator, 4)
        if remainder:
            raise DivisibilityViolation(
                f"EQ2 numerator {numerator} at x={x}, y={y} is not divisible by 4"
            )
        return quotient
    if variant is ObjectiveVariant.SIMPLIFIED_NO_N2:
        return (n - x * y) ** 2 - (n - 1) ** 2 + x * (x - y) ** 2
    return (n - x * y) ** 2


def decode_xy(spec: ProblemSpec, assignment: Assignment) -> Tuple[int, int]:
    """Decode the odd factors from bit values; other variables are ignored."""
    return spec.x_encoding.decode(assignment), spec.y_encoding.decode(assignment)


def expected_factors(spec: ProblemSpec) -> Optional[Tuple[int, int]]:
    """The representable factor pair the objective is designed to select.

    Among odd pairs with ``x * y == N`` this is the one minimising
    ``x (x - y)^2``, which puts ``x <= sqrt(N) <= y`` and gives ``x == 1``
    when N is prime. Returns None when no pair fits the widths.
    """
    best: Optional[Tuple[int, int]] = None
    for x in range(1, spec.x_encoding.max_value + 1, 2):
        if spec.n % x:
            continue
        y = spec.n // x
        if not spec.y_encoding.can_represent(y):
            continue
        if best is None or x * (x - y) ** 2 < best[0] * (best[0] - best[1]) ** 2:
            best = (x, y)
    return best


@dataclass(frozen=True)
class Table1Row:
    """Energy decomposition of the EQ2 objective at a point (x, y)."""

    n: int
    x: int
    y: int
    term_a: int
    term_b: int
    term_c: int
    total: Fraction

    @property
    def integral(self) -> bool:
        return self.total.denominator == 1

    def as_dict(self) -> Dict[str, Any]:
        return {
            "n": self.n,
            "x": self.x,
            "y": self.y,
            "term_a": self.term_a,
            "term_b": self.term_b,
            "term_c": self.term_c,
            "sum": int(self.total) if self.integral else str(self.total),
            "integral": self.integral,
        }


def table1_decomposition(n: int, x: int, y: int) -> Table1Row:
    """Split the EQ2 value into ``N^2(N-xy)^2``, ``-N^2+2N^3-N^4`` and ``x(x-y)^2``."""
    term_a = n ** 2 * (n - x * y) ** 2
    term_b = -n ** 2 + 2 * n ** 3 - n ** 4
    term_c = x * (x - y) ** 2
    total = Fraction(term_a + term_b + term_c, 4)
    if total.denominator != 1:
        logger.debug(f"Non-integral decomposition at N={n}, x={x}, y={y}: {total}")
    return Table1Row(n, x, y, term_a, term_b, term_c, total)


def table1_rows(points: List[Tuple[int, int, int]]) -> List[Table1Row]:
    return [table1_decomposition(n, x, y) for n, x, y in points]


class DivisibilityViolation(ArithmeticError):
    """Raised when the EQ2 expansion has a coefficient not divisible by 4."""
    pass


class MissingBitError(KeyError):
    """Raised when decoding an assignment that lacks one of the factor bits."""

    def __init__(self, var: VarId):
        super().__init__(var)
        self.var = var

    def __str__(self) -> str:
        return f"Assignment is missing factor bit {self.var}"
