"""
geoscope command line: analyze, scan and extend a metric chart
"""
import sys
from pathlib import Path
from typing import Callable, Optional

import typer

from analysis import GeometryAnalyzer
from config import __version__, load_config
from errors import InputError, NumericalError
from extension import parse_grid, write_field_csv
from metric_dsl import load_chart
from reports import scan_csv, to_json
from utils import get_logger, parse_point, set_log_level

logger = get_logger("cli")

app = typer.Typer(
    name="geoscope",
    help="Curvature, Weyl invariants, Killing algebra and cohomogeneity of a metric given in local coordinates.",
    add_completion=False,
    no_args_is_help=True,
)

ChartArg = typer.Argument(..., help="Chart file (dim / coords / g i j / domain lines)")
ConfigOpt = typer.Option(None, "--config", help="YAML file with configuration fields")
MaxOrderOpt = typer.Option(None, "--max-order", help="Cap on total covariant derivatives per invariant [default: min(n(n-1)/2, 4)]")
MaxValenceOpt = typer.Option(None, "--max-valence", help="Cap on total slots per invariant [default: 8]")
TowerDepthOpt = typer.Option(None, "--tower-depth", help="Largest nabla^s R computed [default: n + n(n-1)/2 + 2]")
RankTolOpt = typer.Option(None, "--rank-tol", help="Relative singular value cutoff [default: 1e-8]")
StepsOpt = typer.Option(None, "--steps", help="RK4 steps per transport segment [default: 100]")
VerboseOpt = typer.Option(False, "--verbose", "-v", help="Log progress to stderr")


def _emit(payload: str, out: Optional[Path]):
    if out is None:
        sys.stdout.write(payload)
        sys.stdout.flush()
    else:
        out.write_text(payload, encoding="utf-8")


def _run(action: Callable[[], None]):
    """Map library errors to exit codes: 1 for input problems, 2 for numerical failures"""
    try:
        action()
    except (InputError, OSError) as exc:
        typer.echo(f"error: {exc}", err=True)
        raise typer.Exit(code=1)
    except NumericalError as exc:
        typer.echo(f"numerical error: {exc}", err=True)
        raise typer.Exit(code=2)


def _analyzer(chart_path: Path, config_path: Optional[Path], verbose: bool, **overrides) -> GeometryAnalyzer:
    if verbose:
        set_log_level("INFO")
    config = load_config(str(config_path) if config_path else None, **overrides)
    chart = load_chart(chart_path)
    return GeometryAnalyzer(chart, config)


@app.command()
def analyze(
    chart: Path = ChartArg,
    point: str = typer.Option(..., "--point", help="Comma-separated coordinates, e.g. '1.0472,0'"),
    max_order: Optional[int] = MaxOrderOpt,
    max_valence: Optional[int] = MaxValenceOpt,
    tower_depth: Optional[int] = TowerDepthOpt,
    rank_tol: Optional[float] = RankTolOpt,
    steps: Optional[int] = StepsOpt,
    config: Optional[Path] = ConfigOpt,
    out: Optional[Path] = typer.Option(None, "--out", help="Write the JSON report here instead of stdout"),
    verbose: bool = VerboseOpt,
):
    """Full point report as JSON."""

    def action():
        analyzer = _analyzer(
            chart, config, verbose,
            max_order=max_order, max_valence=max_valence, tower_depth=tower_depth,
            rank_tol=rank_tol, steps=steps,
        )
        report = analyzer.analyze(parse_point(point, analyzer.chart.n))
        _emit(to_json(report).decode("utf-8"), out)

    _run(action)


@app.command()
def scan(
    chart: Path = ChartArg,
    grid: str = typer.Option(..., "--grid", help="Lattice such as '[-1,1]x[-1,1]:5x5'"),
    max_order: Optional[int] = MaxOrderOpt,
    max_valence: Optional[int] = MaxValenceOpt,
    tower_depth: Optional[int] = TowerDepthOpt,
    rank_tol: Optional[float] = RankTolOpt,
    jobs: Optional[int] = typer.Option(None, "--jobs", help="Parallel workers [default: 1]"),
    config: Optional[Path] = ConfigOpt,
    out: Optional[Path] = typer.Option(None, "--out", help="Write the CSV here instead of stdout"),
    verbose: bool = VerboseOpt,
):
    """Per-node scalar results as CSV; nodes that fail carry a status instead of aborting."""

    def action():
        analyzer = _analyzer(
            chart, config, verbose,
            max_order=max_order, max_valence=max_valence, tower_depth=tower_depth,
            rank_tol=rank_tol, jobs=jobs,
        )
        rows = analyzer.scan(parse_grid(grid, analyzer.chart.n))
        _emit(scan_csv(rows, list(analyzer.chart.coords)), out)

    _run(action)


@app.command()
def extend(
    chart: Path = ChartArg,
    base: str = typer.Option(..., "--base", help="Base point, e.g. '0,0'"),
    element: int = typer.Option(0, "--element", help="Index into the stable basis at the base point"),
    grid: str = typer.Option(..., "--grid", help="Lattice such as '[-1,1]x[-1,1]:9x9'"),
    steps_per_cell: Optional[int] = typer.Option(None, "--steps-per-cell", help="RK4 steps per grid cell [default: 50]"),
    steps: Optional[int] = StepsOpt,
    rank_tol: Optional[float] = RankTolOpt,
    tower_depth: Optional[int] = TowerDepthOpt,
    config: Optional[Path] = ConfigOpt,
    out: Optional[Path] = typer.Option(None, "--out", help="Field CSV destination [default: <chart>.field.csv]"),
    verbose: bool = VerboseOpt,
):
    """Extend a stable element over a grid; writes the field CSV and prints a residual summary."""

    def action():
        analyzer = _analyzer(
            chart, config, verbose,
            steps_per_cell=steps_per_cell, steps=steps, rank_tol=rank_tol, tower_depth=tower_depth,
        )
        lattice = parse_grid(grid, analyzer.chart.n)
        sample, summary = analyzer.extend(parse_point(base, analyzer.chart.n), element, lattice, grid)
        target = out if out is not None else chart.with_suffix(".field.csv")
        write_field_csv(sample, target)
        logger.info(f"Field written to {target}")
        _emit(to_json(summary).decode("utf-8"), None)

    _run(action)


@app.command()
def version():
    """Print the tool version."""
    typer.echo(__version__)


def main():
    app()


if __name__ == "__main__":
    main()
