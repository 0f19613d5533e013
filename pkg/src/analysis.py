"""
Analysis pipeline: invariants, cohomogeneity, stabilization and Killing extension for one chart
"""
from itertools import combinations
from typing import List, Optional, Sequence, Tuple

import numpy as np
from joblib import Parallel, delayed

from config import AnalysisConfig
from errors import (
    ChartDomainError,
    ExpressionDomainError,
    GeoscopeError,
    MetricDegenerateError,
    SelectionError,
)
from extension import (
    FieldSample,
    GridSpec,
    extend_killing,
    killing_residual,
    path_independence,
)
from metric_dsl import Chart
from reports import ExtensionSummary, PointReport, ScanRow
from stabilization import flatness_check, parallelness_check, stabilize
from tensor_engine import jet_curvature_tower
from utils import get_logger
from weyl import cohomogeneity_at, enumerate_patterns, evaluate_invariant, invariant_values_and_gradients

logger = get_logger("analysis")


class GeometryAnalyzer:
    """Runs every per-point analysis on one chart with one configuration"""

    def __init__(self, chart: Chart, config: Optional[AnalysisConfig] = None):
        self.chart = chart
        self.config = (config or AnalysisConfig()).resolved(chart.n)
        self.invariants = enumerate_patterns(chart.n, self.config.max_order, self.config.max_valence)
        logger.info(
            f"Analyzer for {chart.source}: {len(self.invariants)} invariants, "
            f"max_order={self.config.max_order}, max_valence={self.config.max_valence}"
        )

    def invariant_values(self, point: Sequence[float]) -> dict:
        """Descriptor -> value for every enumerated pattern"""
        depth = self.invariants.max_factor_order
        tower = jet_curvature_tower(self.chart, point, depth, 0, self.config.pd_tol)
        levels = tower.values()
        g = tower.g.value()
        g_inv = tower.g_inv.value()
        return {p.descriptor: evaluate_invariant(p, levels, g, g_inv) for p in self.invariants.patterns}

    def invariant_gradients(self, point: Sequence[float]) -> np.ndarray:
        _, gradients = invariant_values_and_gradients(
            self.invariants.patterns, self.chart, point, self.config.pd_tol
        )
        return gradients

    def residuals(self, point: Sequence[float], report) -> dict:
        """Flatness over coordinate planes and parallelness along coordinate axes"""
        n = self.chart.n
        axes = np.eye(n)
        flatness = max(
            (flatness_check(self.chart, point, report, axes[i], axes[j], self.config.pd_tol)
             for i, j in combinations(range(n), 2)),
            default=0.0,
        )
        parallelness = max(
            parallelness_check(
                self.chart, point, report, axes[i], self.config.parallel_h,
                self.config.rank_tol, self.config.steps, self.config.pd_tol,
            )
            for i in range(n)
        )
        return {"flatness": flatness, "parallelness": parallelness}

    def analyze(self, point: Sequence[float]) -> PointReport:
        """
        Full analysis at a point

        Args:
            point: chart coordinates

        Returns:
            PointReport with invariants, filtration, cohomogeneity and residuals
        """
        point = [float(x) for x in point]
        values = self.invariant_values(point)
        cohomogeneity = cohomogeneity_at(
            self.chart, point, self.invariants, self.config.rank_tol, self.config.h_probe, self.config.pd_tol
        )
        report = stabilize(self.chart, point, self.config.rank_tol, self.config.tower_depth, self.config.pd_tol)
        if report.orbit_dim < self.chart.n - cohomogeneity.codim:
            logger.warning(
                f"orbit dimension {report.orbit_dim} below n - cohomogeneity = "
                f"{self.chart.n - cohomogeneity.codim} at {point}"
            )
        return PointReport(
            chart=self.chart.source,
            point=point,
            invariants=values,
            dims=report.dims,
            singer_invariant=report.singer_invariant,
            orbit_dim=report.orbit_dim,
            isotropy_dim=report.isotropy_dim,
            killing_dim=report.killing_dim,
            cohomogeneity=cohomogeneity.codim,
            cohomogeneity_singular=cohomogeneity.singular_flag,
            homogeneous=report.homogeneous,
            residuals=self.residuals(point, report),
            singular_values=report.singular_values,
            config=self.config.model_dump(),
        )

    def scan_node(self, point: Sequence[float]) -> ScanRow:
        """Scalar analysis of one grid node; failures become a status instead of an exception"""
        point = [float(x) for x in point]
        try:
            cohomogeneity = cohomogeneity_at(
                self.chart, point, self.invariants, self.config.rank_tol, self.config.h_probe, self.config.pd_tol
            )
            report = stabilize(self.chart, point, self.config.rank_tol, self.config.tower_depth, self.config.pd_tol)
            residuals = self.residuals(point, report)
        except (MetricDegenerateError, ExpressionDomainError) as exc:
            return ScanRow(point=point, status="degenerate", message=str(exc))
        except ChartDomainError as exc:
            return ScanRow(point=point, status="outside", message=str(exc))
        except GeoscopeError as exc:
            logger.info(f"Scan node {point} failed: {exc}")
            return ScanRow(point=point, status="error", message=str(exc))
        return ScanRow(
            point=point,
            cohomogeneity=cohomogeneity.codim,
            cohomogeneity_singular=cohomogeneity.singular_flag,
            killing_dim=report.killing_dim,
            singer_invariant=report.singer_invariant,
            orbit_dim=report.orbit_dim,
            isotropy_dim=report.isotropy_dim,
            homogeneous=report.homogeneous,
            flatness=residuals["flatness"],
            parallelness=residuals["parallelness"],
        )

    def scan(self, grid: GridSpec) -> List[ScanRow]:
        """Rows in grid order, whatever order the workers finish in"""
        nodes = grid.nodes()
        return Parallel(n_jobs=self.config.jobs)(delayed(self.scan_node)(node) for node in nodes)

    def select_element(self, base: Sequence[float], element: int):
        report = stabilize(self.chart, base, self.config.rank_tol, self.config.tower_depth, self.config.pd_tol)
        size = len(report.stable_basis)
        if not 0 <= element < size:
            raise SelectionError(f"element index {element} out of range: stable basis has {size} elements")
        return report, report.stable_basis[element]

    def extend(self, base: Sequence[float], element: int, grid: GridSpec, grid_text: str = "") -> Tuple[FieldSample, ExtensionSummary]:
        """
        Extend one stable basis element over a grid

        Args:
            base: base point
            element: index into the stable basis at base
            grid: target lattice
            grid_text: grid as given on the command line, echoed in the summary

        Returns:
            (FieldSample, ExtensionSummary)
        """
        base = [float(x) for x in base]
        report, e0 = self.select_element(base, element)
        sample = extend_killing(self.chart, base, e0, grid, self.config.steps_per_cell, self.config.pd_tol)
        residual = killing_residual(self.chart, sample, self.invariant_gradients, self.config.pd_tol)
        corner = [hi for _, hi, _ in grid.axes]
        deviation = path_independence(self.chart, base, e0, corner, self.config.steps, self.config.pd_tol)
        summary = ExtensionSummary(
            chart=self.chart.source,
            base=base,
            element=element,
            stable_dim=len(report.stable_basis),
            grid=grid_text,
            steps_per_cell=self.config.steps_per_cell,
            max_sym_residual=residual.max_sym_residual,
            max_tangency_residual=residual.max_tangency_residual,
            path_independence=deviation,
            config=self.config.model_dump(),
        )
        return sample, summary
