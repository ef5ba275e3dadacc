"""
Reduction of higher-order pseudo-Boolean polynomials to QUBO form.

A pair of variables ``(a, b)`` that occurs inside monomials of degree >= 3 is
replaced by a fresh ancilla ``z``, and the penalty
``S * (3z + ab - 2za - 2zb)`` is added. The penalty is zero exactly when
``z == a*b`` and at least ``S`` otherwise, so for ``S`` above
:func:`safe_penalty_bound` the minimum over ancillas reproduces the
original polynomial at every assignment of the original variables.
"""

import time
from collections import Counter
from dataclasses import dataclass, field
from typing import (
    Dict,
    FrozenSet,
    Iterable,
    List,
    Optional,
    Tuple,
    Union,
)

from annealfactor.core.boolpoly import (
    Assignment,
    MissingVariableError,
    Monomial,
    MultilinearPoly,
    TextFormatError,
    VarId,
    VarKind,
    ancilla,
    monomial,
)
from annealfactor.utils.logging import get_logger, log_performance

logger = get_logger(__name__)

Number = Union[int, float]
Pair = Tuple[VarId, VarId]
AncillaDef = Tuple[VarId, VarId, VarId]


def pair(a: VarId, b: VarId) -> Pair:
    if a == b:
        raise ValueError(f"Quadratic terms need two distinct variables, got {a} twice")
    return (a, b) if a < b else (b, a)


@dataclass(frozen=True)
class Qubo:
    """A degree-2 pseudo-Boolean form.

    ``declared`` lists variables that belong to the problem even if none of
    their coefficients is nonzero, so solvers still enumerate them.
    """

    linear: Dict[VarId, Number] = field(default_factory=dict)
    quadratic: Dict[Pair, Number] = field(default_factory=dict)
    offset: Number = 0
    ancilla_defs: Tuple[AncillaDef, ...] = ()
    declared: FrozenSet[VarId] = frozenset()

    def __post_init__(self) -> None:
        for a, b in self.quadratic:
            if not a < b:
                raise ValueError(f"Quadratic key ({a}, {b}) must be an ordered pair")

    @property
    def variables(self) -> Tuple[VarId, ...]:
        found = set(self.declared)
        found.update(self.linear)
        for a, b in self.quadratic:
            found.add(a)
            found.add(b)
        return tuple(sorted(found))

    @property
    def num_variables(self) -> int:
        return len(self.variables)

    @property
    def num_ancillas(self) -> int:
        return len(self.ancilla_defs)

    def is_integral(self) -> bool:
        values = [self.offset, *self.linear.values(), *self.quadratic.values()]
        return all(isinstance(v, int) for v in values)

    def coefficients(self) -> List[Number]:
        """Linear and quadratic coefficients; the offset is excluded."""
        return [*self.linear.values(), *self.quadratic.values()]

    def energy(self, assignment: Assignment) -> Number:
        try:
            total = self.offset
            for var, coeff in self.linear.items():
                if assignment[var]:
                    total += coeff
            for (a, b), coeff in self.quadratic.items():
                first, second = assignment[a], assignment[b]
                if first and second:
                    total += coeff
        except KeyError as exc:
            raise MissingVariableError(exc.args[0]) from None
        return total

    def consistent_ancillas(self, assignment: Assignment) -> Dict[VarId, int]:
        """Extend an assignment of original variables with ``z = a*b`` for every ancilla."""
        full = dict(assignment)
        for z, a, b in self.ancilla_defs:
            full[z] = int(bool(full[a]) and bool(full[b]))
        return full

    def to_text(self) -> str:
        lines = [f"c {self.offset}"]
        for z, a, b in self.ancilla_defs:
            lines.append(f"# def {z} {a} {b}")
        for var in sorted(self.linear):
            lines.append(f"{var} {self.linear[var]}")
        for a, b in sorted(self.quadratic):
            lines.append(f"{a} {b} {self.quadratic[(a, b)]}")
        extra = sorted(set(self.declared) - set(self.linear) - {
            v for key in self.quadratic for v in key
        })
        for var in extra:
            lines.append(f"{var} 0")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "Qubo":
        offset: Number = 0
        linear: Dict[VarId, Number] = {}
        quadratic: Dict[Pair, Number] = {}
        defs: List[AncillaDef] = []
        declared = set()
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.strip()
            if not line:
                continue
            fields = line.split()
            if fields[0].startswith("#"):
                if len(fields) == 5 and fields[1] == "def":
                    defs.append(tuple(VarId.parse(f) for f in fields[2:]))  # type: ignore[arg-type]
                continue
            try:
                if fields[0] == "c" and len(fields) == 2:
                    offset += _parse_number(fields[1])
                elif len(fields) == 2:
                    var = VarId.parse(fields[0])
                    declared.add(var)
                    value = _parse_number(fields[1])
                    if value:
                        linear[var] = linear.get(var, 0) + value
                elif len(fields) == 3:
                    key = pair(VarId.parse(fields[0]), VarId.parse(fields[1]))
                    declared.update(key)
                    value = _parse_number(fields[2])
                    if value:
                        quadratic[key] = quadratic.get(key, 0) + value
                else:
                    raise TextFormatError(f"expected 2 or 3 fields, got {len(fields)}")
            except (TextFormatError, ValueError) as exc:
                raise TextFormatError(f"Line {lineno}: {exc}") from None
        declared.update(v for definition in defs for v in definition)
        return cls(linear, quadratic, offset, tuple(defs), frozenset(declared))


def _parse_number(text: str) -> Number:
    try:
        return int(text)
    except ValueError:
        return float(text)


@dataclass(frozen=True)
class PenaltyWeight:
    """The single global weight S on ancilla-consistency penalties."""

    s: int

    def __post_init__(self) -> None:
        if not isinstance(self.s, int) or self.s < 1:
            raise ValueError(f"Penalty weight must be a positive integer, got {self.s!r}")


def safe_penalty_bound(p: MultilinearPoly) -> int:
    """``1 + sum |c|`` over monomials of degree >= 3.

    Any weight at or above this value keeps every penalty-violating ancilla
    assignment strictly above the true minimum.
    """
    return 1 + sum(abs(c) for mono, c in p.terms.items() if len(mono) >= 3)


def _choose_pair(high: Dict[Monomial, int]) -> Pair:
    counts: Counter = Counter()
    for mono in high:
        for i, a in enumerate(mono):
            for b in mono[i + 1:]:
                counts[(a, b)] += 1

    def rank(item: Tuple[Pair, int]) -> Tuple[int, int, Pair]:
        (a, b), count = item
        same_kind = a.kind == b.kind
        return (0 if same_kind else 1, -count, (a, b))

    return min(counts.items(), key=rank)[0]


def quadratize(
    p: MultilinearPoly,
    s: Union[PenaltyWeight, int],
    variables: Optional[Iterable[VarId]] = None,
) -> Qubo:
    """Reduce ``p`` to a QUBO with product ancillas weighted by ``s``.

    Pairs are chosen greedily: among pairs of variables of the same kind
    (both x bits, both y bits or both ancillas) the one occurring in the most
    degree >= 3 monomials wins, and mixed pairs are used only when no
    same-kind pair remains. Ties go to the lowest pair. ``variables`` are
    declared on the result even when their coefficients vanish.
    """
    weight = s if isinstance(s, PenaltyWeight) else PenaltyWeight(s)
    start = time.time()

    bound = safe_penalty_bound(p)
    if weight.s < bound:
        logger.warning(
            f"Penalty weight {weight.s} is below the certified bound {bound}; "
            f"ground states may use inconsistent ancillas"
        )

    terms: Dict[Monomial, int] = dict(p.terms)
    existing = [v.index for v in p.variables() if v.kind == VarKind.ANCILLA]
    next_index = max(existing) + 1 if existing else 0
    defs: List[AncillaDef] = []

    while True:
        high = {m: c for m, c in terms.items() if len(m) >= 3 and c}
        if not high:
            break
        a, b = _choose_pair(high)
        z = ancilla(next_index)
        next_index += 1
        defs.append((z, a, b))
        logger.debug(f"Substituting {z} = {a}*{b}")

        for mono, coeff in high.items():
            if a in mono and b in mono:
                del terms[mono]
                reduced = monomial(z, *(v for v in mono if v != a and v != b))
                terms[reduced] = terms.get(reduced, 0) + coeff

        for mono, coeff in (
            ((z,), 3 * weight.s),
            ((a, b), weight.s),
            (monomial(z, a), -2 * weight.s),
            (monomial(z, b), -2 * weight.s),
        ):
            terms[mono] = terms.get(mono, 0) + coeff

    qubo = _to_qubo(terms, defs, variables or p.variables())
    log_performance(
        "quadratize", time.time() - start,
        ancillas=len(defs), variables=qubo.num_variables, s=weight.s,
    )
    return qubo


def _to_qubo(
    terms: Dict[Monomial, int], defs: List[AncillaDef], declared: Iterable[VarId]
) -> Qubo:
    linear: Dict[VarId, Number] = {}
    quadratic: Dict[Pair, Number] = {}
    offset = 0
    for mono, coeff in terms.items():
        if not coeff:
            continue
        if len(mono) == 0:
            offset = coeff
        elif len(mono) == 1:
            linear[mono[0]] = coeff
        else:
            quadratic[pair(*mono)] = coeff
    every = set(declared)
    every.update(v for mono in terms for v in mono)
    every.update(v for definition in defs for v in definition)
    return Qubo(linear, quadratic, offset, tuple(defs), frozenset(every))


def qubo_from_poly(p: MultilinearPoly) -> Qubo:
    """Wrap a polynomial of degree <= 2 as a QUBO without adding ancillas."""
    if p.degree() > 2:
        raise ValueError(f"Polynomial has degree {p.degree()}; quadratize it first")
    return _to_qubo(dict(p.terms), [], p.variables())


def qubo_energy(q: Qubo, assignment: Assignment) -> Number:
    return q.energy(assignment)
