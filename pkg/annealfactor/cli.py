"""
Command-line interface for annealfactor.

Provides the ``factor`` entry point: Table-1 reproduction, single solves,
parameter sweeps, coefficient diagnostics, the 3/4-bit preset and config
file creation. Human-readable output goes through rich; JSON and CSV reports
go to stdout or ``--out``.
"""

import json
import sys
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

import click
import typer
from pydantic import ValidationError
from rich.console import Console
from rich.panel import Panel
from rich.table import Table
from rich.text import Text

from annealfactor import __codename__, __version__
from annealfactor.core.boolpoly import MultilinearPoly
from annealfactor.core.config import ConfigError, ConfigManager
from annealfactor.core.hardware import HardwareModel, degrade
from annealfactor.core.harness import (
    FULL_SCALE_SAMPLES,
    ReportFormat,
    RunReport,
    SolverKind,
    SRule,
    SweepConfig,
    compare_widths,
    diagnose,
    emit_report,
    run_preset_3x4,
    run_sweep,
    run_table1,
    standard_hardware,
    standard_sweep,
)
from annealfactor.core.objective import ObjectiveVariant, ProblemSpec, build_objective
from annealfactor.core.quadratize import quadratize, safe_penalty_bound
from annealfactor.core.solve import (
    DEFAULT_MAX_VARIABLES,
    SolveResult,
    VariableCountExceeded,
    default_schedule,
    samples_to_csv,
    solve_exact,
    solve_sa,
)
from annealfactor.utils.logging import setup_logging

# Initialize CLI app
cli = typer.Typer(
    name="factor",
    help="Factoring as QUBO minimisation under a model of annealing hardware",
    no_args_is_help=True,
    rich_markup_mode="rich",
)

console = Console()
err_console = Console(stderr=True)


class OutputFormat(str, Enum):
    TEXT = "text"
    JSON = "json"
    CSV = "csv"


def version_callback(value: bool) -> None:
    """Show version information."""
    if value:
        version_text = Text()
        version_text.append("annealfactor ", style="bold blue")
        version_text.append(f"v{__version__}", style="bold green")
        version_text.append(f" - {__codename__}", style="italic cyan")

        console.print(Panel(
            version_text,
            title="Version Information",
            border_style="blue",
            padding=(1, 2)
        ))
        raise typer.Exit()


@cli.callback()
def main_callback(
    log_level: str = typer.Option(
        "WARNING",
        "--log-level",
        "-l",
        help="Set logging level",
        case_sensitive=False,
    ),
    debug: bool = typer.Option(
        False,
        "--debug",
        "-d",
        help="Enable debug mode with verbose logging",
    ),
    log_file: Optional[Path] = typer.Option(
        None,
        "--log-file",
        help="Also write structured JSON logs to this file",
        dir_okay=False,
    ),
    log_to_file: bool = typer.Option(
        False,
        "--log-to-file",
        help="Write structured JSON logs under ~/.local/share/annealfactor/logs",
    ),
    version: Optional[bool] = typer.Option(
        None,
        "--version",
        "-v",
        callback=version_callback,
        is_eager=True,
        help="Show version information and exit",
    ),
) -> None:
    """Factor semiprimes by minimising polynomial objectives, exactly or under a hardware model."""
    if debug:
        log_level = "DEBUG"

    valid_levels = ["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"]
    if log_level.upper() not in valid_levels:
        raise typer.BadParameter(
            f"Invalid log level '{log_level}'. Valid levels: {', '.join(valid_levels)}",
            param_hint="--log-level",
        )

    setup_logging(
        level=log_level.upper(),
        log_file=log_file,
        enable_file_logging=log_to_file or log_file is not None,
    )


def _parse_table1_point(text: str) -> Tuple[int, int, int]:
    try:
        n_text, factors = text.split(":")
        x_text, y_text = factors.split(",")
        return int(n_text), int(x_text), int(y_text)
    except ValueError:
        raise typer.BadParameter(f"Expected N:x,y (e.g. 15:3,5), got {text!r}", param_hint="--n")


def _parse_penalty(text: str, poly: MultilinearPoly) -> int:
    if text.lower() == "safe":
        return safe_penalty_bound(poly)
    try:
        value = int(text)
    except ValueError:
        raise typer.BadParameter(f"Expected an integer or 'safe', got {text!r}", param_hint="--s")
    if value < 1:
        raise typer.BadParameter("S must be a positive integer", param_hint="--s")
    return value


def _make_spec(**values: Any) -> ProblemSpec:
    try:
        return ProblemSpec(**values)
    except ValidationError as e:
        raise typer.BadParameter(str(e.errors()[0]["msg"]), param_hint="--n")


def _hardware(overrides: Dict[str, Any], seed: int = 0) -> Optional[HardwareModel]:
    values = {k: v for k, v in overrides.items() if v is not None}
    if not values:
        return None
    values["seed"] = seed
    try:
        return HardwareModel(**values)
    except ValidationError as e:
        raise typer.BadParameter(str(e.errors()[0]["msg"]))


def _write(data: Union[str, bytes], out: Optional[Path]) -> None:
    text = data.decode("utf-8") if isinstance(data, bytes) else data
    if out is None:
        typer.echo(text.rstrip("\n"))
    else:
        out.write_text(text if text.endswith("\n") else text + "\n", encoding="utf-8")
        err_console.print(f"[green]Wrote[/green] {out}")


@cli.command()
def table1(
    points: List[str] = typer.Option(
        ["15:3,5", "91:7,13", "899:29,31"],
        "--n",
        help="N with its factors as N:x,y; repeatable",
    ),
    as_json: bool = typer.Option(False, "--json", help="Print rows as JSON"),
) -> None:
    """Decompose the divided objective into its three parts at known factors."""
    rows = run_table1([_parse_table1_point(p) for p in points])
    if as_json:
        typer.echo(json.dumps([row.as_dict() for row in rows], indent=2))
        return

    table = Table(title="Objective decomposition at the true factors")
    for column in ("N", "x", "y", "N²(N−xy)²", "−N²+2N³−N⁴", "x(x−y)²", "sum / 4"):
        table.add_column(column, justify="right")
    for row in rows:
        data = row.as_dict()
        table.add_row(
            str(row.n), str(row.x), str(row.y),
            f"{row.term_a:,}", f"{row.term_b:,}", f"{row.term_c:,}",
            f"{data['sum']:,}" if row.integral else str(data["sum"]),
        )
    console.print(table)


@cli.command()
def solve(
    n: int = typer.Option(..., "--n", help="Odd integer to factor"),
    variant: ObjectiveVariant = typer.Option(ObjectiveVariant.EQ2, "--variant", help="Objective variant"),
    x_bits: int = typer.Option(4, "--x-bits", help="Boolean variables encoding x"),
    y_bits: int = typer.Option(4, "--y-bits", help="Boolean variables encoding y"),
    solver: SolverKind = typer.Option(SolverKind.EXACT, "--solver", help="exact or sa"),
    s: str = typer.Option("safe", "--s", help="Penalty weight S: an integer or 'safe'"),
    precision_bits: Optional[int] = typer.Option(None, "--precision-bits", help="Quantizer bits (enables the hardware model)"),
    coeff_range: Optional[float] = typer.Option(None, "--coeff-range", help="Largest coefficient after scaling"),
    noise_sigma: Optional[float] = typer.Option(None, "--noise-sigma", help="Gaussian coefficient noise"),
    chain_length: Optional[int] = typer.Option(None, "--chain-length", help="Physical spins per variable"),
    param_chain: Optional[int] = typer.Option(None, "--param-chain", help="Chain coupling weight"),
    seed: int = typer.Option(0, "--seed", help="Seed for noise and annealing"),
    samples: int = typer.Option(200, "--samples", help="SA samples"),
    sweeps: int = typer.Option(2000, "--sweeps", help="SA sweeps per sample"),
    max_variables: int = typer.Option(DEFAULT_MAX_VARIABLES, "--max-variables", help="Exact solver cap"),
    output: OutputFormat = typer.Option(OutputFormat.TEXT, "--format", help="text, json or csv"),
    dump_qubo: Optional[Path] = typer.Option(None, "--dump-qubo", help="Write the logical QUBO as text", dir_okay=False),
) -> None:
    """
    Build, quadratize and solve one instance.

    Without any hardware option the exact QUBO is solved; any of
    --precision-bits, --coeff-range, --noise-sigma, --chain-length or
    --param-chain switches to the degraded model.
    """
    spec = _make_spec(n=n, x_bits=x_bits, y_bits=y_bits, variant=variant)
    poly = build_objective(spec)
    weight = _parse_penalty(s, poly)
    qubo = quadratize(poly, weight, spec.variables())
    if dump_qubo is not None:
        dump_qubo.write_text(qubo.to_text(), encoding="utf-8")

    hw = _hardware({
        "precision_bits": precision_bits,
        "coeff_range": coeff_range,
        "noise_sigma": noise_sigma,
        "chain_length": chain_length,
        "param_chain": param_chain,
    }, seed)
    target = degrade(qubo, hw) if hw is not None else qubo

    if solver is SolverKind.EXACT:
        result = solve_exact(target, spec, max_variables=max_variables)
    else:
        sched = default_schedule(target, sweeps=sweeps, seed=seed)
        result = solve_sa(target, spec, sched, samples)

    if output is OutputFormat.CSV:
        _write(samples_to_csv(result), None)
        return
    summary = _solve_summary(spec, weight, qubo.num_ancillas, hw is not None, result)
    if output is OutputFormat.JSON:
        typer.echo(json.dumps(summary, indent=2))
        return
    _show_solve(summary)


def _solve_summary(
    spec: ProblemSpec, s: int, ancillas: int, degraded: bool, result: SolveResult
) -> Dict[str, Any]:
    best = result.best
    return {
        "n": spec.n,
        "variant": spec.variant.value,
        "x_bits": spec.x_bits,
        "y_bits": spec.y_bits,
        "s": s,
        "ancillas": ancillas,
        "degraded": degraded,
        "num_variables": result.num_variables,
        "samples": len(result.samples),
        "distinct": result.distinct_count,
        "valid": result.valid_count,
        "best_energy": result.best_energy,
        "best_x": best.logical_x if best else None,
        "best_y": best.logical_y if best else None,
    }


def _show_solve(summary: Dict[str, Any]) -> None:
    success = summary["valid"] > 0
    body = (
        f"N = {summary['n']} ({summary['variant']}, {summary['x_bits']}/{summary['y_bits']} bits)\n"
        f"S = {summary['s']}, ancillas = {summary['ancillas']}, "
        f"variables = {summary['num_variables']}"
        f"{' (degraded)' if summary['degraded'] else ''}\n"
        f"Best energy: {summary['best_energy']}\n"
        f"Best factors: {summary['best_x']} x {summary['best_y']}\n"
        f"Samples: {summary['samples']}, distinct: {summary['distinct']}, valid: {summary['valid']}"
    )
    console.print(Panel(
        body,
        title="Factored" if success else "No valid factoring",
        border_style="green" if success else "red",
    ))


@cli.command()
def sweep(
    config: Optional[Path] = typer.Option(None, "--config", "-c", help="Flat TOML sweep configuration", exists=True, dir_okay=False),
    n: Optional[int] = typer.Option(None, "--n", help="Use the standard sweep for N (15, 91 or 899)"),
    seed: int = typer.Option(0, "--seed", help="Master seed"),
    out: Optional[Path] = typer.Option(None, "--out", "-o", help="Report file (stdout if omitted)", dir_okay=False),
    fmt: ReportFormat = typer.Option(ReportFormat.JSON, "--format", help="json or csv"),
    full_scale: bool = typer.Option(False, "--paper-scale", help="1000 samples per run"),
    solver: Optional[SolverKind] = typer.Option(None, "--solver", help="Override the configured solver"),
    samples: Optional[int] = typer.Option(None, "--samples", help="Override samples per run"),
) -> None:
    """Run a (param_chain, S) sweep and emit a versioned report."""
    cfg = _sweep_config(config, n, full_scale)
    updates: Dict[str, Any] = {}
    if solver is not None:
        updates["solver"] = solver
    if samples is not None:
        updates["samples_per_run"] = samples
    if updates:
        cfg = SweepConfig(**{**cfg.model_dump(), **updates})

    report = run_sweep(cfg, seed)
    _write(emit_report(report, fmt), out)
    _show_summary(report)


def _sweep_config(config: Optional[Path], n: Optional[int], full_scale: bool) -> SweepConfig:
    if config is not None:
        try:
            cfg = ConfigManager(config).load_config()
        except ConfigError as e:
            err_console.print(f"[red]Error:[/red] {e}")
            raise typer.Exit(1)
        if full_scale:
            cfg = cfg.model_copy(update={"samples_per_run": FULL_SCALE_SAMPLES})
        return cfg
    if n is None:
        raise typer.BadParameter("Give --config or --n", param_hint="--config")
    try:
        return standard_sweep(n, full_scale=full_scale)
    except ValueError as e:
        raise typer.BadParameter(str(e), param_hint="--n")


def _show_summary(report: RunReport) -> None:
    summary = report.summary
    first = summary.first_success
    saturated = sum(1 for r in report.runs if r.saturated)
    err_console.print(Panel(
        f"Runs: {summary.total_runs}\n"
        f"Total valid: {summary.total_valid}\n"
        f"Saturated runs: {saturated}\n"
        f"First success: "
        + (f"param_chain={first.param_chain}, S={first.s}" if first else "none"),
        title=f"Sweep N={report.config.spec.n}",
        border_style="green" if summary.total_valid else "yellow",
    ))


@cli.command(name="diagnose")
def diagnose_command(
    n: int = typer.Option(..., "--n", help="Odd integer to factor"),
    variant: ObjectiveVariant = typer.Option(ObjectiveVariant.EQ2, "--variant", help="Objective variant"),
    x_bits: int = typer.Option(4, "--x-bits", help="Boolean variables encoding x"),
    y_bits: int = typer.Option(4, "--y-bits", help="Boolean variables encoding y"),
    s: str = typer.Option("safe", "--s", help="Penalty weight S: an integer or 'safe'"),
    precision_bits: int = typer.Option(5, "--precision-bits", help="Quantizer bits"),
    coeff_range: float = typer.Option(1.0, "--coeff-range", help="Largest coefficient after scaling"),
    chain_length: int = typer.Option(1, "--chain-length", help="Physical spins per variable"),
    param_chain: int = typer.Option(0, "--param-chain", help="Chain coupling weight"),
    as_json: bool = typer.Option(False, "--json", help="Print the diagnosis as JSON"),
) -> None:
    """Report dynamic range, scale factor and coefficient histograms."""
    spec = _make_spec(n=n, x_bits=x_bits, y_bits=y_bits, variant=variant)
    weight = _parse_penalty(s, build_objective(spec))
    hw = _hardware({
        "precision_bits": precision_bits,
        "coeff_range": coeff_range,
        "chain_length": chain_length,
        "param_chain": param_chain,
    })
    result = diagnose(spec, hw, weight).as_dict()
    if as_json:
        typer.echo(json.dumps(result, indent=2))
        return

    console.print(Panel(
        f"Variables: {result['num_variables']} ({result['num_ancillas']} ancillas), S = {result['s']}\n"
        f"Largest |coefficient|: {result['max_abs']:.6g}\n"
        f"Smallest |coefficient|: {result['min_abs']:.6g}\n"
        f"Dynamic range: {result['range_ratio']:.3e}\n"
        f"Scale factor: {result['scale_factor']:.3e} (grid step {result['step']:.3g})\n"
        f"Erased by quantization: {result['erased_count']} "
        f"({100 * result['erased_share']:.1f}%)\n"
        f"Tie-break term erased: {'yes' if result['tie_break_erased'] else 'no'}",
        title=f"Diagnosis N={n}",
        border_style="cyan",
    ))

    table = Table(title="Coefficients per decade of magnitude")
    table.add_column("component")
    decades = sorted({int(d) for hist in result["histograms"].values() for d in hist})
    for decade in decades:
        table.add_column(f"1e{decade}", justify="right")
    for name, hist in result["histograms"].items():
        table.add_row(name, *(str(hist.get(str(d), "")) for d in decades))
    console.print(table)


@cli.command()
def preset(
    n: int = typer.Option(15, "--n", help="15 or 35"),
    s: str = typer.Option("150", "--s", help="Penalty weight S: an integer or 'safe'"),
    precision_bits: int = typer.Option(5, "--precision-bits", help="Quantizer bits"),
    undegraded: bool = typer.Option(False, "--undegraded", help="Use a near-exact hardware model"),
    solver: SolverKind = typer.Option(SolverKind.SA, "--solver", help="exact or sa"),
    samples: int = typer.Option(200, "--samples", help="SA samples"),
    seed: int = typer.Option(0, "--seed", help="Master seed"),
    fmt: Optional[ReportFormat] = typer.Option(None, "--format", help="Emit the report as json or csv"),
) -> None:
    """Run the 3/4-bit configuration at param_chain 450."""
    hw = HardwareModel.undegraded() if undegraded else standard_hardware(precision_bits=precision_bits)
    if s.lower() == "safe":
        rule = SRule.SAFE_BOUND
    elif s == "150":
        rule = SRule.FIXED
    else:
        raise typer.BadParameter("The preset supports S=150 or 'safe'", param_hint="--s")
    try:
        report = run_preset_3x4(n, hw=hw, s_rule=rule, solver=solver, samples_per_run=samples, master_seed=seed)
    except ValueError as e:
        raise typer.BadParameter(str(e), param_hint="--n")

    if fmt is not None:
        _write(emit_report(report, fmt), None)
        return
    record = report.runs[0]
    narrow, wide = compare_widths(n)
    console.print(Panel(
        f"param_chain = {record.param_chain}, S = {record.s}\n"
        f"Best factors: {record.best_x} x {record.best_y}, valid samples: {record.valid_count}\n"
        f"Dynamic range at 3/4 bits: {narrow.ratio:.3e}\n"
        f"Dynamic range at 4/4 bits: {wide.ratio:.3e}",
        title=f"3/4-bit preset N={n}",
        border_style="green" if record.valid_count else "red",
    ))


@cli.command(name="init-config")
def init_config(
    n: int = typer.Option(15, "--n", help="Odd integer to factor"),
    out: Path = typer.Option(Path("sweep.toml"), "--out", "-o", help="Config file to create", dir_okay=False),
    full_scale: bool = typer.Option(False, "--paper-scale", help="1000 samples per run"),
    force: bool = typer.Option(False, "--force", "-f", help="Overwrite an existing file"),
) -> None:
    """Write a flat TOML sweep configuration to edit and pass to ``sweep``."""
    if out.exists() and not force:
        err_console.print(f"[red]Error:[/red] {out} exists; use --force to overwrite")
        raise typer.Exit(1)
    manager = ConfigManager(out)
    overrides: Dict[str, Any] = {"samples_per_run": FULL_SCALE_SAMPLES} if full_scale else {}
    try:
        manager.save_config(manager.default_config(n, **overrides))
    except (ConfigError, ValidationError, ValueError) as e:
        err_console.print(f"[red]Error:[/red] {e}")
        raise typer.Exit(1)


def run(args: Optional[List[str]] = None) -> int:
    """Invoke the CLI and map failures to exit codes (1 usage, 2 solver capacity)."""
    try:
        result = cli(args=args, prog_name="factor", standalone_mode=False)
    except VariableCountExceeded as e:
        err_console.print(f"[red]Error:[/red] {e}")
        return 2
    except click.ClickException as e:
        e.show()
        return 1
    except click.exceptions.Abort:
        err_console.print("[yellow]Aborted[/yellow]")
        return 1
    return result if isinstance(result, int) else 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
