"""
Extending a stable element to a Killing field on a coordinate box by parallel transport
"""
import re
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence, TextIO, Tuple, Union

import numpy as np
import pandas as pd

from errors import GridSpecError, InputError
from kostant import ConnectionCache, KostantElement, element_norm, parallel_transport, transport_segment
from metric_dsl import Chart
from tensor_engine import connection_data
from utils import get_logger

logger = get_logger("extension")

_AXIS_RE = re.compile(r"\[\s*([^,\]]+?)\s*,\s*([^\]]+?)\s*\]")
_RANGES_RE = re.compile(r"\[[^\]]+\](?:x\[[^\]]+\])*")


@dataclass(frozen=True)
class GridSpec:
    """Rectangular lattice: one (min, max, count) per axis"""

    axes: Tuple[Tuple[float, float, int], ...]

    def __post_init__(self):
        for lo, hi, count in self.axes:
            if count < 1:
                raise GridSpecError(f"axis count must be positive, got {count}")
            if count > 1 and not lo < hi:
                raise GridSpecError(f"axis range [{lo}, {hi}] is empty")

    @property
    def n(self) -> int:
        return len(self.axes)

    @property
    def shape(self) -> Tuple[int, ...]:
        return tuple(count for _, _, count in self.axes)

    def coordinates(self, axis: int) -> np.ndarray:
        lo, hi, count = self.axes[axis]
        return np.linspace(lo, hi, count)

    def cell(self, axis: int) -> float:
        lo, hi, count = self.axes[axis]
        return (hi - lo) / (count - 1) if count > 1 else 0.0

    def nodes(self) -> np.ndarray:
        """All nodes, row-major (last axis fastest), shape (count, n)"""
        mesh = np.meshgrid(*[self.coordinates(a) for a in range(self.n)], indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)


def parse_grid(text: str, n: Optional[int] = None) -> GridSpec:
    """Parse '[-1,1]x[-1,1]:9x9'"""
    try:
        ranges, counts = text.replace(" ", "").rsplit(":", 1)
        bounds = _AXIS_RE.findall(ranges)
        sizes = [int(c) for c in counts.lower().split("x")]
        if not _RANGES_RE.fullmatch(ranges) or len(bounds) != len(sizes):
            raise ValueError("ranges and counts disagree")
        grid = GridSpec(tuple((float(lo), float(hi), size) for (lo, hi), size in zip(bounds, sizes)))
    except ValueError as exc:
        raise GridSpecError(f"cannot parse grid '{text}' (expected e.g. '[-1,1]x[-1,1]:9x9'): {exc}") from exc
    if n is not None and grid.n != n:
        raise GridSpecError(f"grid '{text}' has {grid.n} axes, chart has {n}")
    return grid


@dataclass(frozen=True, eq=False)
class FieldSample:
    """A section of E sampled on a grid; v has shape grid.shape + (n,), B grid.shape + (n, n)"""

    grid: GridSpec
    v: np.ndarray
    B: np.ndarray

    @property
    def n(self) -> int:
        return self.grid.n

    def element_at(self, index: Sequence[int]) -> KostantElement:
        index = tuple(index)
        return KostantElement(self.v[index], self.B[index])


def _steps_for(distance: float, cell: float, steps_per_cell: int) -> int:
    if cell <= 0:
        return steps_per_cell
    return max(1, int(np.ceil(steps_per_cell * distance / cell - 1e-9)))


def extend_killing(
    chart: Chart,
    base: Sequence[float],
    e0: KostantElement,
    grid: GridSpec,
    steps_per_cell: int = 50,
    pd_tol: float = 1e-10,
) -> FieldSample:
    """
    Transport e0 from base to every grid node along axis-ordered L-paths

    Args:
        chart: parsed chart
        base: base point of e0
        e0: element of the stable space at base
        grid: target lattice
        steps_per_cell: RK4 steps per grid cell length

    Returns:
        FieldSample; the path to node x runs base -> (x1, b2, ...) -> (x1, x2, b3, ...) -> ... -> x,
        and shared path prefixes are transported once
    """
    base = np.asarray(base, dtype=float)
    if grid.n != chart.n or base.shape != (chart.n,):
        raise GridSpecError(f"grid and base point must have {chart.n} axes")
    cache = ConnectionCache(chart, pd_tol)
    cache(base)
    v_out = np.zeros(grid.shape + (chart.n,))
    B_out = np.zeros(grid.shape + (chart.n, chart.n))

    def sweep(axis: int, point: np.ndarray, v: np.ndarray, B: np.ndarray, index: Tuple[int, ...]):
        if axis == chart.n:
            v_out[index] = v
            B_out[index] = B
            return
        targets = grid.coordinates(axis)
        cell = grid.cell(axis)
        origin = point[axis]
        upward = [i for i in range(len(targets)) if targets[i] >= origin]
        downward = [i for i in reversed(range(len(targets))) if targets[i] < origin]
        for branch in (upward, downward):
            current, cv, cB = point.copy(), v, B
            for i in branch:
                nxt = current.copy()
                nxt[axis] = targets[i]
                distance = abs(nxt[axis] - current[axis])
                if distance > 0:
                    cv, cB = transport_segment(cache, current, nxt, cv, cB, _steps_for(distance, cell, steps_per_cell))
                current = nxt
                sweep(axis + 1, current, cv, cB, index + (i,))

    sweep(0, base, e0.v.copy(), e0.B.copy(), ())
    logger.info(f"Extended element over {int(np.prod(grid.shape))} grid nodes")
    return FieldSample(grid, v_out, B_out)


@dataclass
class KillingResidual:
    max_sym_residual: float
    max_tangency_residual: float


def killing_residual(chart: Chart, sample: FieldSample, gradient_fn=None, pd_tol: float = 1e-10) -> KillingResidual:
    """
    Killing-equation and tangency residuals on interior grid nodes

    Args:
        chart: parsed chart
        sample: sampled section
        gradient_fn: callable point -> (patterns, n) invariant differentials;
            tangency is reported as 0 when omitted

    Returns:
        Max Frobenius norm of the g-symmetric part 1/2 (g A + A^T g) of
        A = nabla v (central differences plus Gamma v), and max |dI(v)|
    """
    if any(count < 3 for count in sample.grid.shape):
        raise GridSpecError(f"grid {sample.grid.shape} too small: need at least 3 nodes per axis")
    n = chart.n
    coords = [sample.grid.coordinates(a) for a in range(n)]
    # dv[..., a, b] = d_b v^a
    dv = np.stack(
        [np.gradient(sample.v, coords[b], axis=b) for b in range(n)], axis=-1
    )
    interior = tuple(slice(1, -1) for _ in range(n))
    nodes = sample.grid.nodes().reshape(sample.grid.shape + (n,))[interior].reshape(-1, n)
    dv_in = dv[interior].reshape(-1, n, n)
    v_in = sample.v[interior].reshape(-1, n)

    sym_worst = 0.0
    tangency_worst = 0.0
    for point, derivative, v in zip(nodes, dv_in, v_in):
        conn = connection_data(chart, point, pd_tol)
        A = derivative + np.einsum("abc,c->ab", conn.gamma, v)
        gA = conn.g @ A
        sym_worst = max(sym_worst, float(np.linalg.norm(0.5 * (gA + gA.T))))
        if gradient_fn is not None:
            gradients = np.asarray(gradient_fn(point))
            if gradients.size:
                tangency_worst = max(tangency_worst, float(np.max(np.abs(gradients @ v))))
    return KillingResidual(sym_worst, tangency_worst)


def path_independence(
    chart: Chart,
    base: Sequence[float],
    e0: KostantElement,
    target: Sequence[float],
    steps: int = 100,
    pd_tol: float = 1e-10,
) -> float:
    """Norm of the difference between transports along the axis-ordered and reverse-ordered L-paths"""
    base = np.asarray(base, dtype=float)
    target = np.asarray(target, dtype=float)

    def l_path(order):
        path = [base.copy()]
        for axis in order:
            nxt = path[-1].copy()
            nxt[axis] = target[axis]
            path.append(nxt)
        return path

    forward = parallel_transport(chart, l_path(range(chart.n)), e0, steps, pd_tol)
    backward = parallel_transport(chart, l_path(reversed(range(chart.n))), e0, steps, pd_tol)
    return element_norm(forward - backward)


def corrupt_sample(sample: FieldSample, axis: int = 0) -> FieldSample:
    """Scale v by (1 + x_axis) at each node; a field that is no longer Killing"""
    nodes = sample.grid.nodes().reshape(sample.grid.shape + (sample.n,))
    factor = 1.0 + nodes[..., axis : axis + 1]
    return FieldSample(sample.grid, sample.v * factor, sample.B.copy())


def linear_combination(samples: Sequence[FieldSample], coefficients: Sequence[float]) -> FieldSample:
    if not samples or len(samples) != len(coefficients):
        raise InputError("need one coefficient per sample")
    grid = samples[0].grid
    if any(s.grid != grid for s in samples):
        raise GridSpecError("samples live on different grids")
    v = sum(c * s.v for c, s in zip(coefficients, samples))
    B = sum(c * s.B for c, s in zip(coefficients, samples))
    return FieldSample(grid, v, B)


def field_columns(n: int) -> List[str]:
    return (
        [f"coord_{i + 1}" for i in range(n)]
        + [f"v_{i + 1}" for i in range(n)]
        + [f"B_{i + 1}{j + 1}" for i in range(n) for j in range(n)]
    )


def field_frame(sample: FieldSample) -> pd.DataFrame:
    n = sample.n
    rows = np.hstack([
        sample.grid.nodes(),
        sample.v.reshape(-1, n),
        sample.B.reshape(-1, n * n),
    ])
    return pd.DataFrame(rows, columns=field_columns(n))


def write_field_csv(sample: FieldSample, target: Union[str, Path, TextIO]):
    """One row per node, row-major, 17 significant digits"""
    field_frame(sample).to_csv(target, index=False, float_format="%.17g", lineterminator="\n")


def read_field_csv(source: Union[str, Path, TextIO]) -> FieldSample:
    frame = pd.read_csv(source, dtype=float, float_precision="round_trip")
    coord_columns = [c for c in frame.columns if c.startswith("coord_")]
    n = len(coord_columns)
    if n == 0 or list(frame.columns) != field_columns(n):
        raise InputError(f"unexpected field CSV header: {list(frame.columns)}")
    axes = []
    for column in coord_columns:
        values = np.unique(frame[column].to_numpy())
        axes.append((float(values[0]), float(values[-1]), len(values)))
    grid = GridSpec(tuple(axes))
    if len(frame) != int(np.prod(grid.shape)):
        raise InputError(f"field CSV has {len(frame)} rows, grid needs {int(np.prod(grid.shape))}")
    data = frame.to_numpy()
    v = data[:, n : 2 * n].reshape(grid.shape + (n,))
    B = data[:, 2 * n :].reshape(grid.shape + (n, n))
    return FieldSample(grid, v, B)
