import asyncio
import sys
from pathlib import Path

import click
from rich.console import Console
from rich.table import Table

from src import __version__
from src.logging_config import setup_logging

console = Console()


def _fail(message: str) -> None:
    console.print(f"[red]Error:[/red] {message}")
    sys.exit(1)


def _fmt(value: object) -> str:
    if value is None:
        return "-"
    if isinstance(value, float):
        return f"{value:.6g}"
    return str(value)


@click.group()
@click.version_option(version=__version__, prog_name="cpks")
@click.option("--log-level", default=None, help="Override CPKS_LOG_LEVEL")
@click.option("--json-logs", is_flag=True, help="Emit JSON log lines (same as CPKS_LOG_JSON=1)")
def main(log_level: str | None, json_logs: bool):
    """cpks - chemotaxis channel-flow simulator and inequality lab."""
    setup_logging(level=log_level, json_format=json_logs or None)


@main.command()
def version():
    """Show version information."""
    console.print(f"[bold cyan]cpks[/bold cyan] v{__version__}")


@main.command()
@click.argument("config_path", type=click.Path(dir_okay=False))
@click.option("--output", "-o", default=None, help="Output directory (overrides output.directory)")
def simulate(config_path: str, output: str | None):
    """Run one experiment from a flat YAML config."""
    from src.harness.checkpoint import CheckpointError
    from src.harness.config import ConfigError, load_config
    from src.harness.experiment import ExperimentError, run_experiment
    from src.harness.presets import PresetError

    try:
        config = load_config(config_path)
        report = run_experiment(config, output)
    except (ConfigError, CheckpointError, PresetError, ExperimentError) as exc:
        _fail(str(exc))
        return

    s = report.summary
    table = Table(show_header=False, box=None)
    table.add_column("Label", style="dim")
    table.add_column("Value")
    style = "green" if s["status"] == "completed" else "yellow"
    table.add_row("Status", f"[{style}]{s['status']}[/{style}]")
    table.add_row("t stop", _fmt(s["t_stop"]))
    table.add_row("Steps", _fmt(s["steps"]))
    table.add_row("dt", _fmt(s["dt"]))
    table.add_row("Mass M0 / final", f"{_fmt(s['mass']['M0'])} / {_fmt(s['mass']['final'])}")
    table.add_row("sup |n| / initial", _fmt(s["linf"]["ratio"]))
    table.add_row("E final / sup", f"{_fmt(s['e']['final'])} / {_fmt(s['e']['sup'])}")
    table.add_row("Decay rate (n nonzero)", _fmt(s["decay_rates"]["n_nonzero"]))
    table.add_row("Smallness product", _fmt(s["smallness_product"]))
    table.add_row("Output", str(report.directory))
    console.print(table)
    if s["message"]:
        console.print(f"[dim]{s['message']}[/dim]")


@main.command()
@click.argument("config_path", type=click.Path(dir_okay=False))
@click.option("--axis", "axes", multiple=True, required=True, help="NAME=v1,v2,... (A and M are shorthands)")
@click.option("--workers", "-w", default=None, type=int, help="Worker processes (capped by CPKS_THREADS)")
@click.option("--output", "-o", default=None, help="Sweep directory")
def sweep(config_path: str, axes: tuple[str, ...], workers: int | None, output: str | None):
    """Run a grid of experiments and write sweep.csv."""
    from src.harness.config import ConfigError, load_config
    from src.harness.sweep import SWEEP_COLUMNS, parse_axis, run_sweep

    try:
        base = load_config(config_path)
        parsed = dict(parse_axis(a) for a in axes)
        rows = asyncio.run(run_sweep(base, parsed, output, workers))
    except ConfigError as exc:
        _fail(str(exc))
        return

    table = Table(title="Sweep")
    for column in SWEEP_COLUMNS:
        table.add_column(column, justify="right")
    for row in rows:
        table.add_row(*(_fmt(getattr(row, c)) for c in SWEEP_COLUMNS))
    console.print(table)


@main.command()
@click.argument("suite", default="all")
@click.option("--trials", "-n", default=100, show_default=True, help="Trials per suite")
@click.option("--seed", "-s", default=0, show_default=True, help="Base seed")
@click.option("--ny", default=129, show_default=True, help="Points in y")
@click.option("--nz", default=64, show_default=True, help="Points in z")
@click.option("--csv", "csv_path", default=None, help="Write one row per trial to this file")
def inequalities(suite: str, trials: int, seed: int, ny: int, nz: int, csv_path: str | None):
    """Randomized ratio suites for the interpolation inequalities."""
    from src.inequalities.functions import InequalityError
    from src.inequalities.ratios import THEOREM_MASS_BOUND
    from src.inequalities.suite import run_suite, write_csv

    try:
        report = run_suite(suite, trials=trials, seed=seed, resolution=(ny, nz))
    except InequalityError as exc:
        _fail(str(exc))
        return

    table = Table(title=f"Inequality suite: {suite}")
    table.add_column("Operation")
    table.add_column("Trials", justify="right")
    table.add_column("Max ratio", justify="right")
    for op, values in report.by_operation().items():
        table.add_row(op, str(len(values)), _fmt(max(values)))
    console.print(table)
    if report.bound is not None and "l3_embedding_ratio" in report.by_operation():
        verdict = "[green]within[/green]" if report.within_bound else "[red]exceeds[/red]"
        console.print(f"L3 embedding bound 9/4(1+5h) = {report.bound:.6f}: {verdict}")
    cstar = report.by_operation().get("estimate_cstar")
    if cstar:
        best = max(cstar)
        console.print(
            f"C* >= {best:.6f}; admissible mass 1/C*^3 = {1.0 / best ** 3:.6f} "
            f"(mass bound {THEOREM_MASS_BOUND:.6f})"
        )
    if csv_path:
        console.print(f"Wrote {write_csv(report, csv_path)}")


@main.command()
@click.option("--full", is_flag=True, help="Run all checks, including long simulations")
@click.option("--output", "-o", default=None, help="Keep run outputs in this directory")
def check(full: bool, output: str | None):
    """Run the built-in acceptance checks."""
    from src.harness.acceptance import run_checks

    if output:
        Path(output).mkdir(parents=True, exist_ok=True)
    results = run_checks(full=full, directory=output)
    table = Table(title="Acceptance")
    table.add_column("Check")
    table.add_column("Result", justify="center")
    table.add_column("Value", justify="right")
    table.add_column("Seconds", justify="right")
    table.add_column("Detail", style="dim")
    for r in results:
        mark = "[green]pass[/green]" if r.passed else "[red]FAIL[/red]"
        table.add_row(r.name, mark, _fmt(r.value), f"{r.seconds:.1f}", r.detail)
    console.print(table)
    if not all(r.passed for r in results):
        sys.exit(1)


if __name__ == "__main__":
    main()
