"""
Experiment runner: Table-1 decompositions, (param_chain, S) sweeps, the
3/4-bit preset and coefficient diagnostics, with versioned JSON/CSV reports.
"""

import csv
import io
import math
import time
from collections import Counter
from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum
from typing import Any, Dict, List, Mapping, Optional, Tuple

import numpy as np
from pydantic import BaseModel, Field, field_validator, model_validator

from annealfactor.core.boolpoly import MultilinearPoly
from annealfactor.core.hardware import (
    DynamicRange,
    HardwareModel,
    degrade,
    dynamic_range,
    erased_coefficients,
)
from annealfactor.core.objective import (
    ObjectiveVariant,
    ProblemSpec,
    Table1Row,
    build_components,
    build_objective,
    expected_factors,
    objective_value,
    preset_3x4,
    table1_rows,
)
from annealfactor.core.quadratize import Qubo, quadratize, safe_penalty_bound
from annealfactor.core.solve import (
    AnnealSchedule,
    SolveResult,
    default_schedule,
    solve_exact,
    solve_sa,
)
from annealfactor.utils.logging import get_logger, log_performance

logger = get_logger(__name__)

REPORT_FORMAT_VERSION = "1.0"
FULL_SCALE_SAMPLES = 1000

Grid = Tuple[int, int, int]

# param_chain grids of the original hardware sweeps, keyed by N.
STANDARD_GRIDS: Dict[int, List[Grid]] = {
    15: [(10, 100, 10), (120, 300, 20), (400, 11400, 100)],
    91: [(300, 11400, 150)],
    899: [(300, 9900, 300)],
}

PRESET_PARAM_CHAIN = 450
PRESET_S = 150

# Two spins per logical variable so param_chain reaches the device.
STANDARD_CHAIN_LENGTH = 2


class SRule(str, Enum):
    THIRD_OF_PARAM_CHAIN = "third_of_param_chain"
    FIXED = "fixed"
    SAFE_BOUND = "safe_bound"


class SolverKind(str, Enum):
    EXACT = "exact"
    SA = "sa"


class ReportFormat(str, Enum):
    JSON = "json"
    CSV = "csv"


def grid_points(grids: List[Grid]) -> List[int]:
    """All param_chain values, grid by grid: ``start, start+step, ... <= stop``."""
    points: List[int] = []
    for start, stop, step in grids:
        points.extend(range(start, stop + 1, step))
    return points


class SweepConfig(BaseModel):
    """Everything a sweep needs; echoed verbatim into its report."""

    spec: ProblemSpec
    grids: List[Grid] = Field(..., min_length=1, description="param_chain grids (start, stop_inclusive, step)")
    s_rule: SRule = Field(SRule.THIRD_OF_PARAM_CHAIN, description="How S follows param_chain")
    s_value: Optional[int] = Field(None, ge=1, description="S for the fixed rule")
    samples_per_run: int = Field(200, ge=1, description="Samples requested per grid point")
    hw: HardwareModel = Field(default_factory=HardwareModel, description="Hardware template")
    solver: SolverKind = Field(SolverKind.SA, description="exact or sa")
    sweeps: int = Field(2000, ge=1, description="SA sweeps when no explicit schedule is given")
    restarts: int = Field(1, ge=1, description="SA restarts when no explicit schedule is given")
    sched: Optional[AnnealSchedule] = Field(None, description="Explicit SA schedule")

    @field_validator('grids')
    @classmethod
    def validate_grids(cls, v: List[Grid]) -> List[Grid]:
        for start, stop, step in v:
            if step <= 0:
                raise ValueError(f"Grid step must be positive, got {step}")
            if start > stop:
                raise ValueError(f"Grid start {start} exceeds stop {stop}")
            if start < 0:
                raise ValueError("param_chain cannot be negative")
        ordered = sorted(v)
        for (_, stop, _), (start, _, _) in zip(ordered, ordered[1:]):
            if start <= stop:
                raise ValueError(f"Grids overlap at param_chain {start}")
        return v

    @model_validator(mode='after')
    def check_fixed_value(self) -> "SweepConfig":
        if self.s_rule is SRule.FIXED and self.s_value is None:
            raise ValueError("s_rule 'fixed' needs s_value")
        return self

    def penalty_for(self, param_chain: int, bound: int) -> int:
        if self.s_rule is SRule.FIXED:
            assert self.s_value is not None
            return self.s_value
        if self.s_rule is SRule.SAFE_BOUND:
            return bound
        # Floor division; S must stay a positive weight.
        return max(1, param_chain // 3)

    def to_flat(self) -> Dict[str, Any]:
        flat: Dict[str, Any] = {}
        flat.update(self.spec.to_flat())
        flat.update(self.hw.to_flat())
        flat.update({
            "grids": [list(g) for g in self.grids],
            "s_rule": self.s_rule.value,
            "samples_per_run": self.samples_per_run,
            "solver": self.solver.value,
            "sweeps": self.sweeps,
            "restarts": self.restarts,
        })
        if self.s_value is not None:
            flat["s_value"] = self.s_value
        if self.sched is not None:
            flat.update(self.sched.to_flat())
        return flat

    @classmethod
    def from_flat(cls, data: Mapping[str, Any]) -> "SweepConfig":
        if "n" not in data:
            raise ValueError("Configuration needs at least 'n'")
        values: Dict[str, Any] = {
            "spec": ProblemSpec.from_flat(data),
            "hw": HardwareModel.from_flat(data),
        }
        if "grids" in data:
            values["grids"] = [tuple(g) for g in data["grids"]]
        else:
            values["grids"] = STANDARD_GRIDS.get(int(data["n"]), [(300, 9900, 300)])
        for key in ("s_rule", "s_value", "samples_per_run", "solver", "sweeps", "restarts"):
            if key in data:
                values[key] = data[key]
        if "beta_start" in data or "beta_end" in data:
            values["sched"] = AnnealSchedule.from_flat(data)
        return cls(**values)


def standard_hardware(**overrides: Any) -> HardwareModel:
    """Default-precision device with chains of ``STANDARD_CHAIN_LENGTH`` spins."""
    values: Dict[str, Any] = {"chain_length": STANDARD_CHAIN_LENGTH}
    values.update(overrides)
    return HardwareModel(**values)


def standard_sweep(n: int, full_scale: bool = False, **overrides: Any) -> SweepConfig:
    """The original hardware sweep for N in {15, 91, 899} on 4/4-bit EQ2 with chained hardware."""
    if n not in STANDARD_GRIDS:
        raise ValueError(f"No standard grid for N={n}; choose one of {sorted(STANDARD_GRIDS)}")
    values: Dict[str, Any] = {
        "spec": ProblemSpec(n=n),
        "grids": STANDARD_GRIDS[n],
        "hw": standard_hardware(),
        "solver": SolverKind.SA,
    }
    if full_scale:
        values["samples_per_run"] = FULL_SCALE_SAMPLES
    values.update(overrides)
    return SweepConfig(**values)


class RunRecord(BaseModel):
    """Outcome of one grid point."""

    index: int
    param_chain: int
    s: int
    seed: int
    scale_factor: float
    max_abs: float
    min_abs: float
    range_ratio: float
    distinct_count: int
    valid_count: int
    best_energy: float
    best_x: Optional[int] = None
    best_y: Optional[int] = None
    best_objective: Optional[int] = None
    mean_break_count: float = 0.0
    saturated: bool = False
    num_physical_variables: int = 0


class SuccessPoint(BaseModel):
    param_chain: int
    s: int


class RunSummary(BaseModel):
    total_runs: int = 0
    total_valid: int = 0
    first_success: Optional[SuccessPoint] = None


class RunReport(BaseModel):
    format_version: str = REPORT_FORMAT_VERSION
    created_at: str = Field(default_factory=lambda: datetime.now(timezone.utc).isoformat())
    config: SweepConfig
    master_seed: int = 0
    runs: List[RunRecord] = Field(default_factory=list)
    summary: RunSummary = Field(default_factory=RunSummary)


def run_seed(master_seed: int, index: int) -> int:
    """Seed of grid point ``index``; independent of every other grid point."""
    return int(np.random.SeedSequence([master_seed, index]).generate_state(1)[0])


def run_table1(points: List[Tuple[int, int, int]]) -> List[Table1Row]:
    """EQ2 decompositions at each ``(n, x, y)``."""
    rows = table1_rows(points)
    for row in rows:
        if not row.integral:
            logger.warning(f"Table row for N={row.n} at ({row.x}, {row.y}) is not an integer")
    return rows


def _solve(cfg: SweepConfig, degraded: Any, seed: int) -> SolveResult:
    if cfg.solver is SolverKind.EXACT:
        return solve_exact(degraded, cfg.spec)
    if cfg.sched is not None:
        sched = cfg.sched.model_copy(update={"seed": seed})
    else:
        sched = default_schedule(degraded, sweeps=cfg.sweeps, restarts=cfg.restarts, seed=seed)
    return solve_sa(degraded, cfg.spec, sched, cfg.samples_per_run)


def _run_point(
    cfg: SweepConfig, poly: MultilinearPoly, bound: int, index: int,
    param_chain: int, master_seed: int,
) -> RunRecord:
    seed = run_seed(master_seed, index)
    s = cfg.penalty_for(param_chain, bound)
    qubo = quadratize(poly, s, variables=cfg.spec.variables())
    hw = cfg.hw.model_copy(update={"param_chain": param_chain, "seed": seed})
    degraded = degrade(qubo, hw)
    logical_range = dynamic_range(qubo)
    result = _solve(cfg, degraded, seed)

    best = result.best
    record = RunRecord(
        index=index,
        param_chain=param_chain,
        s=s,
        seed=seed,
        scale_factor=degraded.scale_factor,
        max_abs=logical_range.max_abs,
        min_abs=logical_range.min_abs_nonzero,
        range_ratio=logical_range.ratio,
        distinct_count=result.distinct_count,
        valid_count=result.valid_count,
        best_energy=float(result.best_energy),
        mean_break_count=result.mean_break_count,
        saturated=degraded.saturated,
        num_physical_variables=degraded.num_variables,
    )
    if best is not None:
        record.best_x = best.logical_x
        record.best_y = best.logical_y
        record.best_objective = objective_value(cfg.spec, best.logical_x, best.logical_y)
    return record


def run_sweep(cfg: SweepConfig, master_seed: int = 0) -> RunReport:
    """Build, quadratize, degrade and solve at every grid point, in grid order."""
    start = time.time()
    poly = build_objective(cfg.spec)
    bound = safe_penalty_bound(poly)
    report = RunReport(config=cfg, master_seed=master_seed)
    run_logger = get_logger(__name__, {"n": cfg.spec.n, "master_seed": master_seed})

    for index, param_chain in enumerate(grid_points(cfg.grids)):
        record = _run_point(cfg, poly, bound, index, param_chain, master_seed)
        report.runs.append(record)
        run_logger.info(
            f"N={cfg.spec.n} param_chain={param_chain} S={record.s}: "
            f"{record.valid_count} valid, {record.distinct_count} distinct"
            + (" (saturated)" if record.saturated else "")
        )

    report.summary = summarise(report.runs)
    log_performance(
        "run_sweep", time.time() - start,
        n=cfg.spec.n, runs=len(report.runs), total_valid=report.summary.total_valid,
    )
    return report


def summarise(runs: List[RunRecord]) -> RunSummary:
    first = next((r for r in runs if r.valid_count > 0), None)
    return RunSummary(
        total_runs=len(runs),
        total_valid=sum(r.valid_count for r in runs),
        first_success=SuccessPoint(param_chain=first.param_chain, s=first.s) if first else None,
    )


def run_preset_3x4(
    n: int,
    hw: Optional[HardwareModel] = None,
    s_rule: SRule = SRule.FIXED,
    solver: SolverKind = SolverKind.SA,
    samples_per_run: int = 200,
    master_seed: int = 0,
) -> RunReport:
    """x on 3 bits, y on 4 bits, param_chain 450 and (by default) S = 150.

    The default device is :func:`standard_hardware`. Its chains double the
    variable count past what the exact solver enumerates, so SA is the default.
    """
    if n not in (15, 35):
        raise ValueError(f"The 3/4-bit preset is defined for N=15 and N=35, got {n}")
    cfg = SweepConfig(
        spec=preset_3x4(n),
        grids=[(PRESET_PARAM_CHAIN, PRESET_PARAM_CHAIN, 1)],
        s_rule=s_rule,
        s_value=PRESET_S if s_rule is SRule.FIXED else None,
        samples_per_run=samples_per_run,
        hw=hw or standard_hardware(),
        solver=solver,
    )
    return run_sweep(cfg, master_seed)


def compare_widths(n: int) -> Tuple[DynamicRange, DynamicRange]:
    """Dynamic range of the quadratized EQ2 QUBO at 3/4 bits and at 4/4 bits.

    Both use the certified penalty weight so the comparison is between sound
    reductions.
    """
    ranges = []
    for spec in (preset_3x4(n), ProblemSpec(n=n)):
        poly = build_objective(spec)
        ranges.append(dynamic_range(quadratize(poly, safe_penalty_bound(poly), spec.variables())))
    return ranges[0], ranges[1]


def decade_histogram(coefficients: List[int]) -> Dict[int, int]:
    """Count of nonzero coefficients per decade ``floor(log10 |c|)``."""
    counts = Counter(len(str(abs(c))) - 1 for c in coefficients if c)
    return dict(sorted(counts.items()))


@dataclass
class Diagnosis:
    spec: ProblemSpec
    s: int
    num_variables: int
    num_ancillas: int
    logical_range: DynamicRange
    scale_factor: float
    step: float
    erased_count: int
    erased_share: float
    tie_break_max_scaled: float
    histograms: Dict[str, Dict[int, int]] = field(default_factory=dict)
    table1: Optional[Table1Row] = None

    @property
    def tie_break_erased(self) -> bool:
        """True when every tie-break coefficient rounds to zero on its own."""
        return self.tie_break_max_scaled < self.step / 2

    def as_dict(self) -> Dict[str, Any]:
        return {
            "n": self.spec.n,
            "variant": self.spec.variant.value,
            "x_bits": self.spec.x_bits,
            "y_bits": self.spec.y_bits,
            "s": self.s,
            "num_variables": self.num_variables,
            "num_ancillas": self.num_ancillas,
            "max_abs": self.logical_range.max_abs,
            "min_abs": self.logical_range.min_abs_nonzero,
            "range_ratio": self.logical_range.ratio,
            "scale_factor": self.scale_factor,
            "step": self.step,
            "erased_count": self.erased_count,
            "erased_share": self.erased_share,
            "tie_break_erased": self.tie_break_erased,
            "histograms": {
                name: {str(k): v for k, v in hist.items()}
                for name, hist in self.histograms.items()
            },
            "table1": self.table1.as_dict() if self.table1 else None,
        }


def diagnose(
    spec: ProblemSpec, hw: Optional[HardwareModel] = None, s: Optional[int] = None
) -> Diagnosis:
    """Where the coefficients of an instance sit relative to the hardware grid."""
    hw = hw or HardwareModel()
    components = build_components(spec)
    poly = components.total
    weight = s if s is not None else safe_penalty_bound(poly)
    qubo: Qubo = quadratize(poly, weight, spec.variables())
    degraded = degrade(qubo, hw)

    erased, total = erased_coefficients(qubo, hw)
    tie_max = max((abs(c) for c in components.tie_break.terms.values()), default=0)
    tie_scaled = tie_max / components.divisor * degraded.scale_factor

    histograms = {
        "product_term": decade_histogram(list(components.product_term.terms.values())),
        "tie_break": decade_histogram(list(components.tie_break.terms.values())),
        "objective": decade_histogram(list(poly.terms.values())),
        "qubo": decade_histogram([int(c) for c in qubo.coefficients()]),
    }

    table1 = None
    factors = expected_factors(spec)
    if factors is not None and spec.variant is ObjectiveVariant.EQ2:
        table1 = run_table1([(spec.n, *factors)])[0]

    return Diagnosis(
        spec=spec,
        s=weight,
        num_variables=qubo.num_variables,
        num_ancillas=qubo.num_ancillas,
        logical_range=dynamic_range(qubo),
        scale_factor=degraded.scale_factor,
        step=hw.step,
        erased_count=erased,
        erased_share=erased / total if total else 0.0,
        tie_break_max_scaled=tie_scaled,
        histograms=histograms,
        table1=table1,
    )


CSV_HEADER = ("param_chain", "s", "scale_factor", "range_ratio", "distinct", "valid", "best_energy", "x", "y")


def emit_report(r: RunReport, fmt: ReportFormat = ReportFormat.JSON) -> bytes:
    """Serialise a report: JSON is the full document, CSV one row per run."""
    if fmt is ReportFormat.JSON:
        return r.model_dump_json(indent=2).encode("utf-8")
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for run in r.runs:
        writer.writerow([
            run.param_chain,
            run.s,
            repr(run.scale_factor),
            repr(run.range_ratio),
            run.distinct_count,
            run.valid_count,
            repr(run.best_energy) if math.isfinite(run.best_energy) else "",
            "" if run.best_x is None else run.best_x,
            "" if run.best_y is None else run.best_y,
        ])
    return buffer.getvalue().encode("utf-8")


def parse_report(data: bytes) -> RunReport:
    return RunReport.model_validate_json(data)
