"""
Exact-integer multilinear polynomials over named Boolean variables.

Every other stage of the pipeline (objective construction, quadratization,
QUBO export) is expressed in terms of :class:`MultilinearPoly`. Coefficients
are Python integers, so arithmetic is exact and cannot overflow; the
idempotence rule ``v * v == v`` is applied when monomials are built, which
keeps every value multilinear without a separate normalisation pass.
"""

import re
from dataclasses import dataclass
from enum import IntEnum
from itertools import product
from types import MappingProxyType
from typing import Dict, Iterable, Iterator, Mapping, Tuple, Union

from annealfactor.utils.logging import get_logger

logger = get_logger(__name__)


class VarKind(IntEnum):
    """Role of a Boolean variable. The integer value fixes the sort order."""

    XBIT = 0
    YBIT = 1
    ANCILLA = 2


_PREFIX = {VarKind.XBIT: "x", VarKind.YBIT: "y", VarKind.ANCILLA: "a"}
_KIND_BY_PREFIX = {prefix: kind for kind, prefix in _PREFIX.items()}
_NAME_PATTERN = re.compile(r"^([xya])(\d+)(?:@(\d+))?$")


@dataclass(frozen=True, order=True)
class VarId:
    """A Boolean variable.

    ``replica`` numbers the physical copies of a logical variable inside a
    hardware chain; logical variables always have replica 0.
    """

    kind: VarKind
    index: int
    replica: int = 0

    def __post_init__(self) -> None:
        if self.index < 0 or self.replica < 0:
            raise ValueError(f"Variable indices must be nonnegative: {self!r}")

    @property
    def logical(self) -> "VarId":
        return VarId(self.kind, self.index) if self.replica else self

    def with_replica(self, replica: int) -> "VarId":
        return VarId(self.kind, self.index, replica)

    def __str__(self) -> str:
        name = f"{_PREFIX[self.kind]}{self.index}"
        return f"{name}@{self.replica}" if self.replica else name

    @classmethod
    def parse(cls, text: str) -> "VarId":
        """Parse ``x1``, ``y3``, ``a0`` or a replica such as ``x1@2``."""
        match = _NAME_PATTERN.match(text.strip())
        if match is None:
            raise TextFormatError(f"Not a variable name: {text!r}")
        prefix, index, replica = match.groups()
        return cls(_KIND_BY_PREFIX[prefix], int(index), int(replica or 0))


def xbit(index: int) -> VarId:
    return VarId(VarKind.XBIT, index)


def ybit(index: int) -> VarId:
    return VarId(VarKind.YBIT, index)


def ancilla(index: int) -> VarId:
    return VarId(VarKind.ANCILLA, index)


# Sorted, duplicate-free tuple of variables; () is the constant monomial.
Monomial = Tuple[VarId, ...]

Assignment = Mapping[VarId, int]


def monomial(*variables: VarId) -> Monomial:
    """Build a monomial, applying idempotence (repeated variables collapse)."""
    return tuple(sorted(set(variables)))


def monomial_product(a: Monomial, b: Monomial) -> Monomial:
    if not a:
        return b
    if not b:
        return a
    return tuple(sorted(set(a).union(b)))


def graded_key(m: Monomial) -> Tuple[int, Monomial]:
    """Graded lexicographic ordering key: degree first, then variables."""
    return (len(m), m)


class MultilinearPoly:
    """Immutable multilinear polynomial with exact integer coefficients.

    The term map never holds a zero coefficient, so two polynomials are equal
    exactly when their term maps are equal.
    """

    __slots__ = ("_terms", "_hash")

    def __init__(self, terms: Union[Mapping[Monomial, int], None] = None):
        cleaned: Dict[Monomial, int] = {}
        for mono, coeff in (terms or {}).items():
            if not isinstance(coeff, int):
                raise TypeError(
                    f"Coefficients must be integers, got {type(coeff).__name__}"
                )
            key = monomial(*mono)
            total = cleaned.get(key, 0) + coeff
            if total:
                cleaned[key] = total
            else:
                cleaned.pop(key, None)
        self._terms: Mapping[Monomial, int] = MappingProxyType(cleaned)
        self._hash = None

    @classmethod
    def _from_clean(cls, terms: Dict[Monomial, int]) -> "MultilinearPoly":
        poly = cls.__new__(cls)
        poly._terms = MappingProxyType(terms)
        poly._hash = None
        return poly

    @classmethod
    def constant(cls, value: int) -> "MultilinearPoly":
        return cls._from_clean({(): value} if value else {})

    @classmethod
    def variable(cls, var: VarId, coeff: int = 1) -> "MultilinearPoly":
        return cls._from_clean({(var,): coeff} if coeff else {})

    @property
    def terms(self) -> Mapping[Monomial, int]:
        return self._terms

    @property
    def constant_term(self) -> int:
        return self._terms.get((), 0)

    def variables(self) -> Tuple[VarId, ...]:
        seen = set()
        for mono in self._terms:
            seen.update(mono)
        return tuple(sorted(seen))

    def degree(self) -> int:
        return max((len(m) for m in self._terms), default=0)

    def is_zero(self) -> bool:
        return not self._terms

    def items(self) -> Iterator[Tuple[Monomial, int]]:
        """Terms in graded lexicographic order."""
        for mono in sorted(self._terms, key=graded_key):
            yield mono, self._terms[mono]

    def __len__(self) -> int:
        return len(self._terms)

    def __add__(self, other: Union["MultilinearPoly", int]) -> "MultilinearPoly":
        other = _coerce(other)
        result = dict(self._terms)
        for mono, coeff in other._terms.items():
            total = result.get(mono, 0) + coeff
            if total:
                result[mono] = total
            else:
                result.pop(mono, None)
        return MultilinearPoly._from_clean(result)

    __radd__ = __add__

    def __neg__(self) -> "MultilinearPoly":
        return MultilinearPoly._from_clean(
            {mono: -coeff for mono, coeff in self._terms.items()}
        )

    def __sub__(self, other: Union["MultilinearPoly", int]) -> "MultilinearPoly":
        return self + (-_coerce(other))

    def __rsub__(self, other: int) -> "MultilinearPoly":
        return _coerce(other) - self

    def __mul__(self, other: Union["MultilinearPoly", int]) -> "MultilinearPoly":
        if isinstance(other, int):
            if other == 0:
                return MultilinearPoly()
            return MultilinearPoly._from_clean(
                {mono: coeff * other for mono, coeff in self._terms.items()}
            )
        result: Dict[Monomial, int] = {}
        for mono_a, coeff_a in self._terms.items():
            for mono_b, coeff_b in other._terms.items():
                key = monomial_product(mono_a, mono_b)
                result[key] = result.get(key, 0) + coeff_a * coeff_b
        return MultilinearPoly._from_clean(
            {mono: coeff for mono, coeff in result.items() if coeff}
        )

    __rmul__ = __mul__

    def __pow__(self, exponent: int) -> "MultilinearPoly":
        if exponent < 0:
            raise ValueError("Negative powers are not polynomials")
        result = MultilinearPoly.constant(1)
        for _ in range(exponent):
            result = result * self
        return result

    def exact_div(self, divisor: int) -> "MultilinearPoly":
        """Divide every coefficient by ``divisor``; raise if any is inexact."""
        bad = [mono for mono, coeff in self._terms.items() if coeff % divisor]
        if bad:
            raise ValueError(
                f"{len(bad)} coefficient(s) not divisible by {divisor}, "
                f"e.g. monomial {format_monomial(bad[0])!r}"
            )
        return MultilinearPoly._from_clean(
            {mono: coeff // divisor for mono, coeff in self._terms.items()}
        )

    def evaluate(self, assignment: Assignment) -> int:
        total = 0
        for mono, coeff in self._terms.items():
            try:
                values = [assignment[var] for var in mono]
                if all(values):
                    total += coeff
            except KeyError as exc:
                raise MissingVariableError(exc.args[0]) from None
        return total

    def __eq__(self, other: object) -> bool:
        if isinstance(other, int):
            other = MultilinearPoly.constant(other)
        if not isinstance(other, MultilinearPoly):
            return NotImplemented
        return dict(self._terms) == dict(other._terms)

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash(frozenset(self._terms.items()))
        return self._hash

    def __repr__(self) -> str:
        if not self._terms:
            return "MultilinearPoly(0)"
        shown = " + ".join(
            f"{coeff}*{format_monomial(mono) or '1'}" for mono, coeff in self.items()
        )
        return f"MultilinearPoly({shown})"

    def to_text(self) -> str:
        """One term per line: ``<coefficient> <var> <var> ...``."""
        lines = []
        for mono, coeff in self.items():
            lines.append(" ".join([str(coeff), *(str(v) for v in mono)]))
        return "\n".join(lines) + ("\n" if lines else "")

    @classmethod
    def from_text(cls, text: str) -> "MultilinearPoly":
        terms: Dict[Monomial, int] = {}
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            fields = line.split()
            try:
                coeff = int(fields[0])
            except ValueError:
                raise TextFormatError(
                    f"Line {lineno}: coefficient {fields[0]!r} is not an integer"
                ) from None
            mono = monomial(*(VarId.parse(f) for f in fields[1:]))
            terms[mono] = terms.get(mono, 0) + coeff
        return cls(terms)


def _coerce(value: Union[MultilinearPoly, int]) -> MultilinearPoly:
    if isinstance(value, MultilinearPoly):
        return value
    if isinstance(value, int):
        return MultilinearPoly.constant(value)
    raise TypeError(f"Cannot combine MultilinearPoly with {type(value).__name__}")


def format_monomial(mono: Monomial) -> str:
    return " ".join(str(v) for v in mono)


def poly_add(a: MultilinearPoly, b: MultilinearPoly) -> MultilinearPoly:
    return a + b


def poly_mul(a: MultilinearPoly, b: MultilinearPoly) -> MultilinearPoly:
    return a * b


def poly_eval(p: MultilinearPoly, assignment: Assignment) -> int:
    return p.evaluate(assignment)


def poly_degree(p: MultilinearPoly) -> int:
    return p.degree()


def linear_form(
    coefficients: Iterable[Tuple[VarId, int]], constant: int = 0
) -> MultilinearPoly:
    """``constant + sum(c * v)`` as a polynomial."""
    terms: Dict[Monomial, int] = {(): constant} if constant else {}
    for var, coeff in coefficients:
        terms[(var,)] = terms.get((var,), 0) + coeff
    return MultilinearPoly(terms)


def all_assignments(variables: Iterable[VarId]) -> Iterator[Dict[VarId, int]]:
    """Every 0/1 assignment of ``variables``, first variable varying slowest."""
    ordered = list(variables)
    for bits in product((0, 1), repeat=len(ordered)):
        yield dict(zip(ordered, bits))


class MissingVariableError(KeyError):
    """Raised when an assignment does not cover a variable being evaluated."""

    def __init__(self, var: object):
        super().__init__(var)
        self.var = var

    def __str__(self) -> str:
        return f"Assignment is missing variable {self.var}"


class TextFormatError(ValueError):
    """Raised when polynomial or QUBO text cannot be parsed."""
    pass
