"""
Run every shipped model chart through the analysis pipeline and print a summary table
"""

import sys
from pathlib import Path

# Add src to path
sys.path.insert(0, str(Path(__file__).parent.parent / 'src'))

from rich.console import Console
from rich.table import Table

from analysis import GeometryAnalyzer
from errors import GeoscopeError
from metric_dsl import load_chart

CHARTS_DIR = Path(__file__).parent.parent / 'charts'

# (chart, point, expected killing_dim, expected cohomogeneity)
MODEL_POINTS = [
    ('euclid2', [0.3, -0.2], 3, 0),
    ('euclid3', [0.1, 0.2, 0.3], 6, 0),
    ('polar', [2.0, 0.5], 3, 0),
    ('sphere', [1.0472, 0.0], 3, 0),
    ('hyperbolic', [0.5, 1.5], 3, 0),
    ('bump', [1.0, 0.0], 1, 1),
    ('sphere3', [1.0, 1.2, 0.3], 6, 0),
]


def run_models():
    """Analyze one point per model chart"""
    console = Console()
    table = Table(title="Model charts")
    for column in ("chart", "point", "dims", "singer", "killing", "orbit", "cohom.", "homog.", "flat", "parallel", "check"):
        table.add_column(column)

    failures = 0
    for name, point, killing_dim, cohomogeneity in MODEL_POINTS:
        try:
            report = GeometryAnalyzer(load_chart(CHARTS_DIR / f"{name}.chart")).analyze(point)
        except GeoscopeError as exc:
            failures += 1
            table.add_row(name, str(point), "-", "-", "-", "-", "-", "-", "-", "-", f"❌ {exc}")
            continue
        ok = report.killing_dim == killing_dim and report.cohomogeneity == cohomogeneity
        failures += not ok
        table.add_row(
            name, str(point), str(report.dims), str(report.singer_invariant), str(report.killing_dim),
            str(report.orbit_dim), str(report.cohomogeneity), str(report.homogeneous),
            f"{report.residuals['flatness']:.1e}", f"{report.residuals['parallelness']:.1e}",
            "✅" if ok else "❌",
        )
    console.print(table)
    return failures


if __name__ == "__main__":
    sys.exit(1 if run_models() else 0)
