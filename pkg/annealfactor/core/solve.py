"""
Ground-state search and sampling over QUBOs and degraded QUBOs.

Two solvers share one compiled, numpy-backed representation:

* :func:`solve_exact` enumerates every assignment (block-vectorised, exact
  integer arithmetic for integer QUBOs) and returns all ground states;
* :func:`solve_sa` runs seeded single-flip Metropolis annealing with a
  geometric inverse-temperature schedule, one independent run per sample.

Every returned sample's energy is re-evaluated from scratch against the
solved object and must agree with the solver's running value.
"""

import csv
import io
import time
from dataclasses import dataclass
from typing import Any, Dict, FrozenSet, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, Field, model_validator

from annealfactor.core.boolpoly import VarId
from annealfactor.core.hardware import DegradedQubo, decode_chains, dynamic_range
from annealfactor.core.objective import ProblemSpec, decode_xy
from annealfactor.core.quadratize import Number, Qubo
from annealfactor.utils.logging import get_logger, log_performance

logger = get_logger(__name__)

Solvable = Union[Qubo, DegradedQubo]

DEFAULT_MAX_VARIABLES = 26
_BLOCK_BITS = 16
_SWEEP_BLOCK = 64
_INT64_SAFE = 2 ** 62


class AnnealSchedule(BaseModel):
    """Geometric inverse-temperature schedule for simulated annealing."""

    sweeps: int = Field(2000, ge=1, description="Metropolis sweeps per restart")
    beta_start: float = Field(..., gt=0, description="Initial inverse temperature")
    beta_end: float = Field(..., gt=0, description="Final inverse temperature")
    restarts: int = Field(1, ge=1, description="Independent restarts per sample")
    seed: int = Field(0, description="Master seed; sample k uses seed + k")

    @model_validator(mode='after')
    def check_order(self) -> "AnnealSchedule":
        if self.beta_end <= self.beta_start:
            raise ValueError("beta_end must be greater than beta_start")
        return self

    def betas(self) -> np.ndarray:
        return np.geomspace(self.beta_start, self.beta_end, num=self.sweeps)

    def to_flat(self) -> Dict[str, Any]:
        # The seed is shared with the hardware model in flat files.
        return self.model_dump(exclude={"seed"})

    @classmethod
    def from_flat(cls, data: Mapping[str, Any]) -> "AnnealSchedule":
        return cls(**{k: data[k] for k in cls.model_fields if k in data and k != "seed"})


def default_schedule(
    q: Solvable, sweeps: int = 2000, restarts: int = 1, seed: int = 0
) -> AnnealSchedule:
    """Hot enough to randomise the largest term, cold enough to freeze the smallest."""
    largest, smallest, _ = dynamic_range(q)
    beta_start = 0.01 / largest
    beta_end = 10.0 / smallest
    if beta_end <= beta_start:
        beta_end = beta_start * 10.0
    return AnnealSchedule(
        sweeps=sweeps, beta_start=beta_start, beta_end=beta_end,
        restarts=restarts, seed=seed,
    )


@dataclass(frozen=True)
class Sample:
    """One solver output, decoded and validity-tagged."""

    variables: Tuple[VarId, ...]
    bits: Tuple[int, ...]
    energy: Number
    logical_x: int
    logical_y: int
    valid: bool
    intact: bool
    break_count: int
    broken_chains: FrozenSet[VarId] = frozenset()

    @property
    def assignment(self) -> Dict[VarId, int]:
        return dict(zip(self.variables, self.bits))

    @property
    def factors(self) -> Tuple[int, int]:
        return (self.logical_x, self.logical_y)


@dataclass(frozen=True)
class SolveResult:
    samples: List[Sample]
    distinct_count: int
    valid_count: int
    best_energy: Number
    ground_states: List[Dict[VarId, int]]
    num_variables: int

    @property
    def best(self) -> Optional[Sample]:
        if not self.samples:
            return None
        return min(self.samples, key=lambda s: s.energy)

    @property
    def mean_break_count(self) -> float:
        if not self.samples:
            return 0.0
        return sum(s.break_count for s in self.samples) / len(self.samples)


class _Compiled:
    """Dense arrays for a QUBO in a fixed variable order.

    ``dtype`` is int64 for integer QUBOs whose absolute coefficient sum fits,
    object (Python ints) for larger integer QUBOs and float64 otherwise.
    """

    def __init__(self, q: Solvable):
        base = q.base if isinstance(q, DegradedQubo) else q
        self.variables: Tuple[VarId, ...] = base.variables
        self.n = len(self.variables)
        index = {v: i for i, v in enumerate(self.variables)}

        if base.is_integral():
            bound = abs(base.offset) + sum(abs(c) for c in base.coefficients())
            self.exact = True
            self.dtype = np.int64 if bound < _INT64_SAFE else object
        else:
            self.exact = False
            self.dtype = np.float64

        self.h = np.zeros(self.n, dtype=self.dtype)
        self.J = np.zeros((self.n, self.n), dtype=self.dtype)
        for var, coeff in base.linear.items():
            self.h[index[var]] = coeff
        for (a, b), coeff in base.quadratic.items():
            self.J[index[a], index[b]] = coeff
        self.offset = base.offset
        # Worst-case rounding accumulated by a float energy evaluation.
        self.tolerance: Number = 0 if self.exact else 64 * float(np.finfo(np.float64).eps) * (
            float(np.abs(self.h).sum()) + float(np.abs(self.J).sum()) + abs(float(self.offset))
        )

    def energies(self, states: np.ndarray) -> np.ndarray:
        """Energies of a (k, n) 0/1 matrix."""
        x = states.astype(self.dtype)
        return (x @ self.h) + _quadratic_part(x, self.J) + self.offset


def _quadratic_part(states: np.ndarray, J: np.ndarray) -> np.ndarray:
    return ((states @ J) * states).sum(axis=1)


def _bit_matrix(count: int, width: int, dtype: type) -> np.ndarray:
    indices = np.arange(2 ** count, dtype=np.int64)
    return ((indices[:, None] >> np.arange(width, dtype=np.int64)) & 1).astype(dtype)


def energy_table(q: Solvable) -> Tuple[Tuple[VarId, ...], np.ndarray]:
    """Energy of every assignment; bit ``j`` of row index ``t`` is variable ``j``."""
    compiled = _Compiled(q)
    if compiled.n > 22:
        raise VariableCountExceeded(compiled.n, 22)
    states = _bit_matrix(compiled.n, compiled.n, np.int64)
    return compiled.variables, compiled.energies(states)


def _enumerate_minima(
    compiled: _Compiled,
) -> Tuple[Number, List[np.ndarray], List[np.ndarray]]:
    """Scan all 2**n states in blocks; returns the minimum and candidate states."""
    n = compiled.n
    low = min(n, _BLOCK_BITS)
    high = n - low
    low_states = _bit_matrix(low, low, compiled.dtype)
    h_low = compiled.h[:low]
    J_low = compiled.J[:low, :low]
    base_low = (low_states @ h_low) + _quadratic_part(low_states, J_low)
    cross = compiled.J[:low, low:]
    h_high = compiled.h[low:]
    J_high = compiled.J[low:, low:]

    best: Optional[Number] = None
    tol = compiled.tolerance
    candidate_energies: List[np.ndarray] = []
    candidate_states: List[np.ndarray] = []
    high_states = _bit_matrix(high, high, compiled.dtype)
    for hbits in high_states:
        shift = (hbits @ h_high) + (hbits @ J_high @ hbits) + compiled.offset
        energies = base_low + low_states @ (cross @ hbits) + shift
        block_min = energies.min()
        if best is not None and block_min > best + tol:
            continue
        if best is None or block_min < best:
            best = block_min
        keep = np.nonzero(energies <= block_min + tol)[0]
        full = np.zeros((len(keep), n), dtype=np.int8)
        full[:, :low] = low_states[keep]
        full[:, low:] = hbits
        candidate_energies.append(energies[keep])
        candidate_states.append(full)
    assert best is not None
    return best, candidate_energies, candidate_states


def solve_exact(
    q: Solvable, spec: ProblemSpec, max_variables: int = DEFAULT_MAX_VARIABLES
) -> SolveResult:
    """Enumerate every assignment and return all ground states, decoded."""
    start = time.time()
    compiled = _Compiled(q)
    if compiled.n > max_variables:
        raise VariableCountExceeded(compiled.n, max_variables)

    best, energies_list, states_list = _enumerate_minima(compiled)
    tol = compiled.tolerance

    samples: List[Sample] = []
    for energies, states in zip(energies_list, states_list):
        for energy, row in zip(energies, states):
            if energy > best + tol:
                continue
            samples.append(_make_sample(q, spec, compiled, row, energy, compiled.exact))

    best_energy = _as_number(best, compiled.exact)
    result = _summarise(samples, best_energy, compiled.n, ground_states=True)
    log_performance(
        "solve_exact", time.time() - start,
        variables=compiled.n, ground_states=len(samples), valid=result.valid_count,
    )
    return result


def solve_sa(
    q: Solvable,
    spec: ProblemSpec,
    sched: Optional[AnnealSchedule] = None,
    num_samples: int = 1,
) -> SolveResult:
    """Seeded simulated annealing; sample ``k`` depends only on ``sched.seed + k``."""
    if num_samples < 1:
        raise ValueError("num_samples must be positive")
    start = time.time()
    sched = sched or default_schedule(q)
    compiled = _Compiled(q)
    n = compiled.n

    # Dynamics run in int64 when exact and safe, float64 otherwise; the
    # audit below re-evaluates energies exactly either way.
    work = np.int64 if compiled.dtype is np.int64 else np.float64
    h = compiled.h.astype(work)
    W = (compiled.J + compiled.J.T).astype(work)
    betas = sched.betas()

    rngs = [np.random.default_rng(sched.seed + k) for k in range(num_samples)]
    best_states = np.zeros((num_samples, n), dtype=np.int8)
    best_energy = np.full(num_samples, np.inf)
    best_energy_work = np.zeros(num_samples, dtype=work)

    rows = np.arange(num_samples)
    for restart in range(sched.restarts):
        X = np.stack([rng.integers(0, 2, size=n) for rng in rngs]).astype(work)
        E = (X @ h) + _quadratic_part(X, np.triu(W, 1)) + compiled.offset
        for block_start in range(0, sched.sweeps, _SWEEP_BLOCK):
            block = betas[block_start:block_start + _SWEEP_BLOCK]
            draws = np.stack([rng.random((len(block), n)) for rng in rngs])
            for t, beta in enumerate(block):
                for i in range(n):
                    field = h[i] + X @ W[:, i]
                    delta = (1 - 2 * X[:, i]) * field
                    accept = (delta <= 0) | (
                        draws[:, t, i] < np.exp(-beta * np.maximum(delta, 0).astype(np.float64))
                    )
                    X[accept, i] = 1 - X[accept, i]
                    E = E + np.where(accept, delta, 0)
        improved = E.astype(np.float64) < best_energy
        best_states[improved] = X[improved].astype(np.int8)
        best_energy[improved] = E[improved].astype(np.float64)
        best_energy_work[improved] = E[improved]
        logger.debug(f"Restart {restart}: {int(improved.sum())} samples improved")

    samples = [
        _make_sample(q, spec, compiled, best_states[k], best_energy_work[k], work is np.int64)
        for k in rows
    ]
    best = min(s.energy for s in samples)
    result = _summarise(samples, best, n, ground_states=False)
    log_performance(
        "solve_sa", time.time() - start,
        variables=n, samples=num_samples, sweeps=sched.sweeps,
        valid=result.valid_count,
    )
    return result


def _as_number(value: object, exact: bool) -> Number:
    return int(value) if exact else float(value)  # type: ignore[call-overload]


def _make_sample(
    q: Solvable,
    spec: ProblemSpec,
    compiled: _Compiled,
    row: np.ndarray,
    running_energy: object,
    running_exact: bool,
) -> Sample:
    bits = tuple(int(b) for b in row)
    assignment = dict(zip(compiled.variables, bits))
    energy = q.energy(assignment)
    if running_exact:
        if int(running_energy) != energy:  # type: ignore[call-overload]
            raise EnergyAuditError(energy, running_energy)
    else:
        if abs(float(running_energy) - float(energy)) > max(compiled.tolerance, 1e-9 * max(1.0, abs(float(energy)))):  # type: ignore[arg-type]
            raise EnergyAuditError(energy, running_energy)

    if isinstance(q, DegradedQubo):
        decoding = decode_chains(q, assignment)
        logical, intact = decoding.logical, decoding.intact
        break_count, broken = decoding.break_count, decoding.broken
    else:
        logical, intact, break_count, broken = assignment, True, 0, frozenset()

    # Factor bits absent from the solved object read as 0.
    x, y = decode_xy(spec, {**dict.fromkeys(spec.variables(), 0), **logical})
    return Sample(
        variables=compiled.variables,
        bits=bits,
        energy=energy,
        logical_x=x,
        logical_y=y,
        valid=intact and spec.n == x * y,
        intact=intact,
        break_count=break_count,
        broken_chains=broken,
    )


def _summarise(
    samples: List[Sample], best_energy: Number, num_variables: int, ground_states: bool
) -> SolveResult:
    return SolveResult(
        samples=samples,
        distinct_count=count_distinct(samples),
        valid_count=sum(1 for s in samples if s.valid),
        best_energy=best_energy,
        ground_states=[s.assignment for s in samples] if ground_states else [],
        num_variables=num_variables,
    )


def count_distinct(samples: Sequence[Sample]) -> int:
    """Samples differ when their broken chains or their decoded factors differ."""
    return len({(s.broken_chains, s.factors) for s in samples})


CSV_SAMPLE_HEADER = ("sample_index", "energy", "x", "y", "valid", "intact", "break_count")


def samples_to_csv(result: SolveResult) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(CSV_SAMPLE_HEADER)
    for index, s in enumerate(result.samples):
        writer.writerow(
            [index, s.energy, s.logical_x, s.logical_y, int(s.valid), int(s.intact), s.break_count]
        )
    return buffer.getvalue()


class VariableCountExceeded(RuntimeError):
    """Raised when exhaustive enumeration would exceed the variable cap."""

    def __init__(self, count: int, cap: int):
        super().__init__(
            f"Exact enumeration over {count} variables exceeds the cap of {cap}"
        )
        self.count = count
        self.cap = cap


class EnergyAuditError(AssertionError):
    """Raised when a solver's running energy disagrees with re-evaluation."""

    def __init__(self, expected: object, running: object):
        super().__init__(
            f"Re-evaluated energy {expected} disagrees with solver value {running}"
        )
