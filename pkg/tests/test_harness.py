"""
Tests for sweeps, presets, diagnostics and report serialization.
"""

import json
import logging

import pytest
from pydantic import ValidationError

from annealfactor.core.hardware import HardwareModel, degrade
from annealfactor.core.harness import (
    CSV_HEADER,
    STANDARD_CHAIN_LENGTH,
    STANDARD_GRIDS,
    ReportFormat,
    RunReport,
    SolverKind,
    SRule,
    SweepConfig,
    compare_widths,
    decade_histogram,
    diagnose,
    emit_report,
    grid_points,
    parse_report,
    run_preset_3x4,
    run_seed,
    run_sweep,
    run_table1,
    standard_hardware,
    standard_sweep,
)
from annealfactor.core.objective import ProblemSpec, build_objective, preset_3x4
from annealfactor.core.quadratize import quadratize, safe_penalty_bound
from annealfactor.core.solve import AnnealSchedule, VariableCountExceeded


def quick_config(**overrides):
    """A cheap SA sweep over two grid points for N=15."""
    values = dict(
        spec=ProblemSpec(n=15),
        grids=[(300, 400, 100)],
        samples_per_run=4,
        sweeps=20,
        solver=SolverKind.SA,
    )
    values.update(overrides)
    return SweepConfig(**values)


class TestTable1:
    """Test Table-1 reproduction."""

    def test_rows(self):
        """Test exact integers for the three published instances."""
        rows = run_table1([(15, 3, 5), (91, 7, 13), (899, 29, 31)])
        got = [(r.term_a, r.term_b, r.term_c, int(r.total)) for r in rows]
        assert got == [
            (0, -44100, 12, -11022),
            (0, -67076100, 252, -16768962),
            (0, -651736519204, 116, -162934129772),
        ]


class TestGrids:
    """Test grid generation and SweepConfig validation."""

    def test_n15_grid_values(self):
        """Test the three N=15 grids value by value."""
        points = grid_points(STANDARD_GRIDS[15])
        expected = (
            list(range(10, 101, 10))
            + list(range(120, 301, 20))
            + list(range(400, 11401, 100))
        )
        assert points == expected
        assert len(points) == 131
        assert points[:12] == [10, 20, 30, 40, 50, 60, 70, 80, 90, 100, 120, 140]
        assert points[-1] == 11400

    def test_n91_grid(self):
        """Test the N=91 grid size."""
        assert len(grid_points(STANDARD_GRIDS[91])) == 75

    def test_n899_grid(self):
        """Test the N=899 grid."""
        points = grid_points(STANDARD_GRIDS[899])
        assert points[0] == 300
        assert points[-1] == 9900
        assert len(points) == 33

    def test_overlap_rejected(self):
        """Test that overlapping grids are invalid."""
        with pytest.raises(ValidationError, match="overlap"):
            quick_config(grids=[(10, 100, 10), (100, 200, 20)])

    @pytest.mark.parametrize("grid", [(10, 100, 0), (100, 10, 10), (-10, 10, 10)])
    def test_bad_grid(self, grid):
        """Test step, order and sign checks."""
        with pytest.raises(ValidationError):
            quick_config(grids=[grid])

    def test_fixed_rule_needs_value(self):
        """Test that the fixed rule requires s_value."""
        with pytest.raises(ValidationError, match="s_value"):
            quick_config(s_rule=SRule.FIXED)

    def test_penalty_rules(self):
        """Test S under each rule."""
        third = quick_config()
        assert third.penalty_for(10, 999) == 3
        assert third.penalty_for(400, 999) == 133
        assert third.penalty_for(2, 999) == 1
        assert quick_config(s_rule=SRule.FIXED, s_value=150).penalty_for(400, 999) == 150
        assert quick_config(s_rule=SRule.SAFE_BOUND).penalty_for(400, 999) == 999

    def test_standard_sweep(self):
        """Test standard sweep presets."""
        cfg = standard_sweep(15)
        assert cfg.samples_per_run == 200
        assert cfg.s_rule is SRule.THIRD_OF_PARAM_CHAIN
        assert cfg.hw == standard_hardware()
        assert cfg.hw.chain_length == STANDARD_CHAIN_LENGTH
        assert standard_sweep(91, full_scale=True).samples_per_run == 1000
        with pytest.raises(ValueError):
            standard_sweep(21)

    def test_run_seed(self):
        """Test per-run seeds: deterministic and distinct."""
        assert run_seed(0, 3) == run_seed(0, 3)
        assert len({run_seed(0, i) for i in range(50)}) == 50
        assert run_seed(0, 1) != run_seed(1, 1)


class TestRunSweep:
    """Test the sweep runner."""

    def test_full_n15_grid_s_rule(self):
        """Test that every record of the N=15 sweep follows S = floor(param_chain / 3)."""
        cfg = quick_config(grids=STANDARD_GRIDS[15], samples_per_run=1, sweeps=5)
        report = run_sweep(cfg, master_seed=1)
        assert [r.param_chain for r in report.runs] == grid_points(STANDARD_GRIDS[15])
        assert all(r.s == r.param_chain // 3 for r in report.runs)
        assert report.summary.total_runs == 131
        for record in report.runs:
            assert record.max_abs >= record.min_abs > 0
            assert record.range_ratio == pytest.approx(record.max_abs / record.min_abs)
            assert record.num_physical_variables == 20

    def test_standard_n15_sweep_never_factors(self):
        """Test that the chained N=15 hardware sweep has no valid sample at any grid point."""
        cfg = standard_sweep(15, samples_per_run=20, sweeps=50)
        report = run_sweep(cfg)
        assert report.summary.total_runs == 131
        assert report.summary.total_valid == 0
        assert report.summary.first_success is None
        for record in report.runs:
            assert record.valid_count == 0
            assert record.mean_break_count > 0
            assert record.num_physical_variables == 40
            assert not record.saturated

    def test_standard_n15_chain_terms_erased(self):
        """Test that every chain term of the N=15 sweep rounds to zero on the device."""
        cfg = standard_sweep(15)
        poly = build_objective(cfg.spec)
        bound = safe_penalty_bound(poly)
        for param_chain in grid_points(cfg.grids):
            q = quadratize(poly, cfg.penalty_for(param_chain, bound), cfg.spec.variables())
            d = degrade(q, cfg.hw.model_copy(update={"param_chain": param_chain}))
            assert d.chain_coupling == 0.0
            touched = set(d.base.linear) | {v for key in d.base.quadratic for v in key}
            assert all(v.replica == 0 for v in touched)

    def test_undegraded_exact_point(self):
        """Test that an undegraded exact run at one grid point factors 15."""
        cfg = quick_config(
            grids=[(300, 300, 1)],
            s_rule=SRule.SAFE_BOUND,
            hw=HardwareModel.undegraded(),
            solver=SolverKind.EXACT,
        )
        report = run_sweep(cfg)
        record = report.runs[0]
        assert record.valid_count >= 1
        assert (record.best_x, record.best_y) == (3, 5)
        assert record.best_objective == -11022
        assert report.summary.first_success.param_chain == 300

    def test_deterministic(self):
        """Test identical reports (timestamp aside) for identical inputs."""
        cfg = quick_config(hw=HardwareModel(noise_sigma=0.01))
        a = run_sweep(cfg, master_seed=7)
        b = run_sweep(cfg, master_seed=7)
        b.created_at = a.created_at
        assert emit_report(a) == emit_report(b)
        assert emit_report(a, ReportFormat.CSV) == emit_report(b, ReportFormat.CSV)

    def test_run_log_carries_context(self, caplog):
        """Test that per-run log records carry N and the master seed."""
        with caplog.at_level(logging.INFO, logger="annealfactor.core.harness"):
            run_sweep(quick_config(), master_seed=4)
        records = [
            r for r in caplog.records
            if r.name == "annealfactor.core.harness" and "param_chain=" in r.getMessage()
        ]
        assert len(records) == 2
        assert all((r.n, r.master_seed) == (15, 4) for r in records)

    def test_explicit_schedule(self):
        """Test sweeps with a configured schedule."""
        cfg = quick_config(sched=AnnealSchedule(sweeps=10, beta_start=1e-9, beta_end=1.0))
        report = run_sweep(cfg)
        assert len(report.runs) == 2
        assert all(r.distinct_count >= 1 for r in report.runs)

    def test_saturation_flagged(self):
        """Test that chain weights beyond the coefficient range are flagged."""
        cfg = quick_config(
            spec=ProblemSpec(n=15, x_bits=2, y_bits=2),
            grids=[(10, 10, 1), (10 ** 12, 10 ** 12, 1)],
            s_rule=SRule.FIXED,
            s_value=1,
            hw=HardwareModel(chain_length=2),
        )
        report = run_sweep(cfg)
        assert [r.saturated for r in report.runs] == [False, True]

    def test_exact_capacity_propagates(self):
        """Test that oversized exact sweeps raise."""
        cfg = quick_config(solver=SolverKind.EXACT, hw=HardwareModel(chain_length=2))
        with pytest.raises(VariableCountExceeded):
            run_sweep(cfg)


class TestPreset:
    """Test the 3/4-bit preset."""

    @pytest.mark.parametrize("n,factors", [(15, (3, 5)), (35, (5, 7))])
    def test_undegraded(self, n, factors):
        """Test that the narrow widths factor on exact coefficients."""
        report = run_preset_3x4(
            n, hw=HardwareModel.undegraded(), s_rule=SRule.SAFE_BOUND, solver=SolverKind.EXACT
        )
        record = report.runs[0]
        assert record.param_chain == 450
        assert record.valid_count >= 1
        assert (record.best_x, record.best_y) == factors

    def test_default_parameters(self):
        """Test param_chain 450, S 150 and the chained default device."""
        report = run_preset_3x4(15, samples_per_run=10)
        assert report.config.spec.x_bits == 3
        assert report.config.solver is SolverKind.SA
        assert report.config.hw.chain_length == STANDARD_CHAIN_LENGTH
        logical = diagnose(preset_3x4(15), s=150).num_variables
        assert report.runs[0].num_physical_variables == STANDARD_CHAIN_LENGTH * logical
        assert (report.runs[0].param_chain, report.runs[0].s) == (450, 150)

    def test_only_15_and_35(self):
        """Test the preset precondition."""
        with pytest.raises(ValueError):
            run_preset_3x4(21)

    @pytest.mark.parametrize("n", [15, 35])
    def test_narrow_range_smaller(self, n):
        """Test that 3/4 bits have a smaller dynamic range than 4/4 bits."""
        narrow, wide = compare_widths(n)
        assert narrow.ratio < wide.ratio


class TestDiagnose:
    """Test coefficient diagnostics."""

    def test_decade_histogram(self):
        """Test decade bucketing of magnitudes."""
        assert decade_histogram([1, -9, 10, 99, 100, 0, -12345]) == {0: 2, 1: 2, 2: 1, 4: 1}

    def test_n899(self):
        """Test the N=899 diagnosis at default hardware."""
        d = diagnose(ProblemSpec(n=899))
        assert d.logical_range.ratio >= 1e9
        assert d.num_ancillas == 12
        assert d.tie_break_erased
        assert d.erased_count > 0
        assert d.table1 is not None
        assert int(d.table1.total) == -162934129772
        data = d.as_dict()
        assert set(data["histograms"]) == {"product_term", "tie_break", "objective", "qubo"}
        json.dumps(data)

    def test_n15_not_erased_at_high_precision(self):
        """Test that enough bits keep the tie-break term."""
        d = diagnose(ProblemSpec(n=15), HardwareModel(precision_bits=60))
        assert d.erased_count == 0
        assert not d.tie_break_erased


class TestReports:
    """Test report serialization."""

    def test_empty_report(self):
        """Test a report with no runs."""
        report = RunReport(config=quick_config())
        data = json.loads(emit_report(report))
        assert data["format_version"] == "1.0"
        assert data["runs"] == []
        assert data["config"]["spec"]["n"] == 15
        assert emit_report(report, ReportFormat.CSV).decode() == ",".join(CSV_HEADER) + "\n"

    def test_csv_header(self):
        """Test the fixed CSV header."""
        report = run_sweep(quick_config())
        lines = emit_report(report, ReportFormat.CSV).decode().splitlines()
        assert lines[0] == "param_chain,s,scale_factor,range_ratio,distinct,valid,best_energy,x,y"
        assert len(lines) == 3
        assert lines[1].startswith("300,100,")

    def test_json_round_trip(self):
        """Test parse(emit(r)) == r."""
        report = run_sweep(quick_config(), master_seed=3)
        assert parse_report(emit_report(report)) == report
