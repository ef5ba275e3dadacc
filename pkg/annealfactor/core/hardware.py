"""
Software model of what analog annealing hardware does to a QUBO.

The degradation pipeline, applied in this order:

1. the constant offset is dropped (the hardware has no constant terms);
2. every logical variable becomes a path of ``chain_length`` physical spins,
   its linear coefficient split across the chain and its couplings attached
   to the first member, with ferromagnetic coupling ``-param_chain`` along
   the path;
3. all coefficients are scaled so the largest magnitude equals
   ``coeff_range``;
4. coefficients are rounded to a uniform grid of
   ``coeff_range / 2**(precision_bits - 1)``;
5. seeded Gaussian noise is added to every coefficient left nonzero.
"""

import time
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Dict, FrozenSet, List, Mapping, NamedTuple, Tuple, Union

import numpy as np
from pydantic import BaseModel, Field

from annealfactor.core.boolpoly import Assignment, MissingVariableError, VarId
from annealfactor.core.quadratize import Number, Pair, Qubo, pair
from annealfactor.utils.logging import get_logger, log_performance

logger = get_logger(__name__)


class HardwareModel(BaseModel):
    """Coefficient range, precision, noise and chain parameters of the device."""

    coeff_range: float = Field(1.0, gt=0, description="Largest representable |coefficient| after scaling")
    precision_bits: int = Field(5, ge=1, description="Effective bits of the uniform quantizer")
    noise_sigma: float = Field(0.0, ge=0, description="Std-dev of additive Gaussian noise, post-scaling units")
    chain_length: int = Field(1, ge=1, description="Physical spins per logical variable")
    param_chain: int = Field(0, ge=0, description="Ferromagnetic chain weight, pre-scaling units")
    seed: int = Field(0, description="Seed for the noise generator")

    @property
    def step(self) -> float:
        return self.coeff_range / 2 ** (self.precision_bits - 1)

    @classmethod
    def undegraded(cls, **overrides: Any) -> "HardwareModel":
        """Near-identity model: 60-bit precision, no noise, no chains."""
        values: Dict[str, Any] = {"precision_bits": 60}
        values.update(overrides)
        return cls(**values)

    def to_flat(self) -> Dict[str, Any]:
        return self.model_dump()

    @classmethod
    def from_flat(cls, data: Mapping[str, Any]) -> "HardwareModel":
        return cls(**{k: data[k] for k in cls.model_fields if k in data})


@dataclass(frozen=True)
class DegradedQubo:
    """A QUBO as the hardware would minimise it, over physical variables."""

    base: Qubo
    scale_factor: float
    chain_map: Dict[VarId, Tuple[VarId, ...]]
    hw: HardwareModel
    dropped_offset: Number
    chain_coupling: float

    @property
    def variables(self) -> Tuple[VarId, ...]:
        return self.base.variables

    @property
    def num_variables(self) -> int:
        return self.base.num_variables

    @property
    def saturated(self) -> bool:
        """True once the chain coupling sits at the top of the coefficient range."""
        return self.hw.param_chain > 0 and abs(self.chain_coupling) >= self.hw.coeff_range

    def energy(self, assignment: Assignment) -> Number:
        return self.base.energy(assignment)


class ChainDecoding(NamedTuple):
    logical: Dict[VarId, int]
    intact: bool
    break_count: int
    broken: FrozenSet[VarId]


class DynamicRange(NamedTuple):
    max_abs: float
    min_abs_nonzero: float
    ratio: float


def quantize(values: np.ndarray, step: float) -> np.ndarray:
    """Round to multiples of ``step``, halves away from zero."""
    values = np.asarray(values, dtype=np.float64)
    return np.sign(values) * np.floor(np.abs(values) / step + 0.5) * step


def _split(coeff: int, parts: int) -> List[int]:
    share, remainder = divmod(coeff, parts)
    return [share + remainder] + [share] * (parts - 1)


def _expand_chains(
    q: Qubo, hw: HardwareModel
) -> Tuple[Dict[VarId, Fraction], Dict[Pair, Fraction], Dict[VarId, Tuple[VarId, ...]]]:
    length = hw.chain_length
    chain_map = {
        var: tuple(var.with_replica(r) for r in range(length)) for var in q.variables
    }

    linear: Dict[VarId, Fraction] = {}
    quadratic: Dict[Pair, Fraction] = {}
    for var, coeff in q.linear.items():
        if length == 1 or not isinstance(coeff, int):
            shares = [Fraction(coeff) / length] * length if length > 1 else [Fraction(coeff)]
        else:
            shares = [Fraction(s) for s in _split(coeff, length)]
        for member, share in zip(chain_map[var], shares):
            if share:
                linear[member] = linear.get(member, Fraction(0)) + share

    for (a, b), coeff in q.quadratic.items():
        quadratic[pair(chain_map[a][0], chain_map[b][0])] = Fraction(coeff)

    # Path couplings -p*u*v plus p/2 on each endpoint: zero cost when the two
    # members agree, p/2 when they disagree.
    if length > 1:
        p = Fraction(hw.param_chain)
        for members in chain_map.values():
            for u, v in zip(members, members[1:]):
                key = pair(u, v)
                quadratic[key] = quadratic.get(key, Fraction(0)) - p
                for end in (u, v):
                    linear[end] = linear.get(end, Fraction(0)) + p / 2
    return linear, quadratic, chain_map


def degrade(q: Qubo, hw: HardwareModel, seed: Union[int, None] = None) -> DegradedQubo:
    """Apply the hardware model to ``q``; deterministic given ``(q, hw, seed)``.

    ``seed`` defaults to ``hw.seed``.
    """
    start = time.time()
    rng_seed = hw.seed if seed is None else seed

    linear, quadratic, chain_map = _expand_chains(q, hw)
    linear_keys = sorted(linear)
    quadratic_keys = sorted(quadratic)
    exact = [linear[k] for k in linear_keys] + [quadratic[k] for k in quadratic_keys]

    max_abs = max((abs(c) for c in exact), default=Fraction(0))
    if max_abs == 0:
        raise EmptyQuboError("Cannot scale a QUBO whose coefficients are all zero")

    ratio = Fraction(hw.coeff_range) / max_abs
    scale_factor = float(ratio)
    scaled = np.array([float(c * ratio) for c in exact], dtype=np.float64)
    values = quantize(scaled, hw.step)

    if hw.noise_sigma > 0:
        rng = np.random.default_rng(rng_seed)
        mask = values != 0
        values[mask] += rng.normal(0.0, hw.noise_sigma, size=int(mask.sum()))

    split = len(linear_keys)
    new_linear = {k: float(v) for k, v in zip(linear_keys, values[:split]) if v != 0}
    new_quadratic = {
        k: float(v) for k, v in zip(quadratic_keys, values[split:]) if v != 0
    }
    physical = frozenset(m for members in chain_map.values() for m in members)
    base = Qubo(new_linear, new_quadratic, 0.0, (), physical)

    chain_coupling = 0.0
    if hw.chain_length > 1:
        chain_coupling = float(
            quantize(np.array([-float(Fraction(hw.param_chain) * ratio)]), hw.step)[0]
        )

    erased = int(np.count_nonzero(values == 0))
    degraded = DegradedQubo(
        base=base,
        scale_factor=scale_factor,
        chain_map=chain_map,
        hw=hw,
        dropped_offset=q.offset,
        chain_coupling=chain_coupling,
    )
    if degraded.saturated:
        logger.warning(
            f"param_chain={hw.param_chain} saturates the coefficient range; "
            f"larger chain weights only shrink the problem terms"
        )
    log_performance(
        "degrade", time.time() - start,
        scale_factor=scale_factor, erased_coefficients=erased,
        physical_variables=len(physical),
    )
    return degraded


def erased_coefficients(q: Qubo, hw: HardwareModel) -> Tuple[int, int]:
    """How many nonzero physical coefficients quantize to zero, out of how many."""
    linear, quadratic, _ = _expand_chains(q, hw)
    exact = [c for c in [*linear.values(), *quadratic.values()] if c]
    if not exact:
        return 0, 0
    ratio = Fraction(hw.coeff_range) / max(abs(c) for c in exact)
    values = quantize(np.array([float(c * ratio) for c in exact]), hw.step)
    return int(np.count_nonzero(values == 0)), len(exact)


def erased_fraction(q: Qubo, hw: HardwareModel) -> float:
    """Share of nonzero coefficients that quantize to zero (noise ignored)."""
    erased, total = erased_coefficients(q, hw)
    return erased / total if total else 0.0


def dynamic_range(q: Union[Qubo, DegradedQubo]) -> DynamicRange:
    """Largest and smallest nonzero coefficient magnitudes and their ratio."""
    qubo = q.base if isinstance(q, DegradedQubo) else q
    magnitudes = [abs(c) for c in qubo.coefficients() if c]
    if not magnitudes:
        raise EmptyQuboError("Dynamic range is undefined for a QUBO without coefficients")
    largest = max(magnitudes)
    smallest = min(magnitudes)
    return DynamicRange(float(largest), float(smallest), float(Fraction(largest) / Fraction(smallest)))


def decode_chains(d: DegradedQubo, physical: Assignment) -> ChainDecoding:
    """Majority vote per chain (ties resolve to 1) and chain-break statistics."""
    logical: Dict[VarId, int] = {}
    broken = set()
    for var, members in d.chain_map.items():
        try:
            values = [int(bool(physical[m])) for m in members]
        except KeyError as exc:
            raise MissingVariableError(exc.args[0]) from None
        ones = sum(values)
        logical[var] = 1 if 2 * ones >= len(values) else 0
        if 0 < ones < len(values):
            broken.add(var)
    return ChainDecoding(logical, not broken, len(broken), frozenset(broken))


class EmptyQuboError(ValueError):
    """Raised when a QUBO has no nonzero coefficient to work with."""
    pass
