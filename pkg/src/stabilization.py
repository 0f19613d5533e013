"""
The filtration E^0 >= E^1 >= ... of the Kostant bundle fiber at a point

E^k consists of the (v, B) with nabla_v(nabla^i R) - B.(nabla^i R) = 0 for
every i <= k. Its dimensions stop shrinking at the Singer invariant; the
stable space seeds local Killing fields.
"""
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg

from errors import StabilizationError, TowerDepthError, TensorSlotError
from kostant import KostantElement, bundle_curvature, element_norm, parallel_transport
from metric_dsl import Chart
from tensor_engine import LOWER, CurvatureTower, Tensor, connection_data, jet_curvature_tower
from utils import get_logger, numerical_kernel, numerical_rank

logger = get_logger("stabilization")


@dataclass(frozen=True, eq=False)
class ParameterBasis:
    """
    Fixed basis of T_q M + so(T_q M)

    The first n elements are (d_i, 0); the rest are (0, E_pq), p < q, with
    E_pq = f_p f_q^T g - f_q f_p^T g built from a g-orthonormal frame f.
    """

    point: Tuple[float, ...]
    g: np.ndarray
    frame: np.ndarray  # columns f_0 ... f_{n-1}
    elements: Tuple[KostantElement, ...]

    @property
    def n(self) -> int:
        return self.g.shape[0]

    @property
    def dim(self) -> int:
        return len(self.elements)


def parameter_basis(g: np.ndarray, point: Sequence[float] = ()) -> ParameterBasis:
    n = g.shape[0]
    # Gram-Schmidt of the coordinate frame: g = L L^T, frame = L^-T
    L = scipy.linalg.cholesky(g, lower=True)
    frame = scipy.linalg.solve_triangular(L.T, np.eye(n), lower=False)
    elements = [KostantElement(np.eye(n)[i], np.zeros((n, n))) for i in range(n)]
    for p in range(n):
        for q in range(p + 1, n):
            fp, fq = frame[:, p], frame[:, q]
            E = np.outer(fp, fq) @ g - np.outer(fq, fp) @ g
            elements.append(KostantElement(np.zeros(n), E))
    return ParameterBasis(tuple(float(x) for x in point), g, frame, tuple(elements))


def from_parameters(basis: ParameterBasis, theta: Sequence[float]) -> KostantElement:
    theta = np.asarray(theta, dtype=float)
    n = basis.n
    B = np.zeros((n, n))
    for coefficient, element in zip(theta[n:], basis.elements[n:]):
        B += coefficient * element.B
    return KostantElement(theta[:n].copy(), B)


def to_parameters(basis: ParameterBasis, e: KostantElement) -> np.ndarray:
    """Coordinates of e in the basis; exact for g-skew B (the frame turns B into a skew matrix)"""
    n = basis.n
    frame_B = scipy.linalg.solve(basis.frame, e.B @ basis.frame)
    skew = [frame_B[p, q] for p in range(n) for q in range(p + 1, n)]
    return np.concatenate([e.v, skew])


def derivation_action(B: np.ndarray, T: Tensor) -> Tensor:
    """
    B acting on a tensor as a derivation

    Args:
        B: endomorphism B[i, j] = B^i_j
        T: tensor with any signature

    Returns:
        Same signature; lower slots get -B^m_a T_..m.., upper slots +B^a_m T^..m..
    """
    B = np.asarray(B, dtype=float)
    components = np.asarray(T.components, dtype=float)
    if T.rank and (B.shape != (components.shape[0],) * 2):
        raise TensorSlotError(f"endomorphism shape {B.shape} does not match tensor dimension {components.shape[0]}")
    result = np.zeros_like(components)
    for slot, variance in enumerate(T.signature):
        if variance == LOWER:
            result -= np.moveaxis(np.tensordot(components, B, axes=([slot], [0])), -1, slot)
        else:
            result += np.moveaxis(np.tensordot(components, B, axes=([slot], [1])), -1, slot)
    return Tensor(T.signature, result)


def _constraint_column(element: KostantElement, tower: Sequence[Tensor], k: int) -> np.ndarray:
    blocks = []
    for i in range(k + 1):
        nabla_v = np.tensordot(element.v, tower[i + 1].components, axes=([0], [0]))
        blocks.append((nabla_v - derivation_action(element.B, tower[i]).components).ravel())
    return np.concatenate(blocks)


def constraint_matrix(
    chart: Chart,
    point: Sequence[float],
    k: int,
    tower: Optional[Sequence[Tensor]] = None,
    basis: Optional[ParameterBasis] = None,
    pd_tol: float = 1e-10,
) -> np.ndarray:
    """
    Linear map (v, B) -> stacked nabla_v(nabla^i R) - B.(nabla^i R), i = 0..k

    Args:
        chart: parsed chart
        point: base point
        k: filtration level
        tower: numeric curvature tower of depth >= k+1 (computed when omitted)
        basis: parameter basis at the point (computed when omitted)

    Returns:
        Matrix whose columns are images of the parameter basis elements
    """
    if tower is None:
        tower = jet_curvature_tower(chart, point, k + 1, 0, pd_tol).values()
    if len(tower) < k + 2:
        raise TowerDepthError(f"level {k} needs nabla^{k + 1} R, tower depth is {len(tower) - 1}")
    if basis is None:
        basis = parameter_basis(connection_data(chart, point, pd_tol).g, point)
    return np.column_stack([_constraint_column(e, tower, k) for e in basis.elements])


@dataclass
class StabilizationReport:
    point: Tuple[float, ...]
    dims: List[int]
    singer_invariant: int
    stable_basis: List[KostantElement]
    orbit_dim: int
    isotropy_dim: int
    homogeneous: bool
    basis: ParameterBasis = field(repr=False)
    kernels: List[np.ndarray] = field(repr=False)
    singular_values: List[List[float]] = field(repr=False)

    @property
    def killing_dim(self) -> int:
        return self.dims[-1]

    @property
    def stable_kernel(self) -> np.ndarray:
        return self.kernels[-1]


def stabilize(
    chart: Chart,
    point: Sequence[float],
    rank_tol: float = 1e-8,
    tower_depth: Optional[int] = None,
    pd_tol: float = 1e-10,
) -> StabilizationReport:
    """
    Run the filtration until two consecutive dimensions agree

    Args:
        chart: parsed chart
        point: regular point
        rank_tol: relative singular value cutoff
        tower_depth: largest covariant derivative order allowed; None means
            the hard cap n + n(n-1)/2 + 1 plus one

    Returns:
        StabilizationReport with the kernel basis at the stopping level

    Raises:
        StabilizationError: no repeat before the hard cap
        TowerDepthError: the cap on the tower depth is reached first
    """
    n = chart.n
    fiber_dim = n + n * (n - 1) // 2
    cap = fiber_dim + 1
    if tower_depth is None:
        tower_depth = cap + 1

    g = connection_data(chart, point, pd_tol).g
    basis = parameter_basis(g, point)
    jets: Optional[CurvatureTower] = None
    tower: List[Tensor] = []
    dims: List[int] = []
    kernels: List[np.ndarray] = []
    singular_values: List[List[float]] = []

    for k in range(cap + 1):
        needed = k + 1
        if needed > tower_depth:
            raise TowerDepthError(f"level {k} needs nabla^{needed} R but tower depth is capped at {tower_depth}")
        if len(tower) < needed + 1:
            depth = min(max(2, 2 * (len(tower) - 1)), tower_depth)
            depth = max(depth, needed)
            logger.debug(f"Growing curvature tower to depth {depth} at {list(point)}")
            jets = jet_curvature_tower(chart, point, depth, 0, pd_tol)
            tower = jets.values()
        matrix = constraint_matrix(chart, point, k, tower, basis)
        result = numerical_kernel(matrix, rank_tol, jets.noise_scale(k + 1))
        dims.append(result.kernel.shape[1])
        kernels.append(result.kernel)
        singular_values.append([float(s) for s in result.singular_values])
        if k and dims[k] > dims[k - 1]:
            logger.warning(f"Filtration dimension increased at level {k}: {dims}")
        if k and dims[k] == dims[k - 1]:
            stable = result.kernel
            orbit_dim = numerical_rank(stable[:n, :], rank_tol, 1.0) if stable.shape[1] else 0
            logger.info(f"Stabilized at {list(point)}: dims {dims}, singer invariant {k - 1}")
            return StabilizationReport(
                point=tuple(float(x) for x in point),
                dims=dims,
                singer_invariant=k - 1,
                stable_basis=[from_parameters(basis, stable[:, j]) for j in range(stable.shape[1])],
                orbit_dim=orbit_dim,
                isotropy_dim=dims[k] - orbit_dim,
                homogeneous=orbit_dim == n,
                basis=basis,
                kernels=kernels,
                singular_values=singular_values,
            )
    raise StabilizationError(f"filtration did not stabilize by level {cap}", dims)


def flatness_check(
    chart: Chart,
    point: Sequence[float],
    report: StabilizationReport,
    X: Sequence[float],
    Y: Sequence[float],
    pd_tol: float = 1e-10,
) -> float:
    """Largest bundle curvature norm over the stable basis"""
    return max(
        (element_norm(bundle_curvature(chart, point, X, Y, e, pd_tol)) for e in report.stable_basis),
        default=0.0,
    )


def _subspace_distance(basis: ParameterBasis, kernel: np.ndarray, e: KostantElement) -> float:
    theta = to_parameters(basis, e)
    projected = kernel @ (kernel.T @ theta) if kernel.size else np.zeros_like(theta)
    return float(np.linalg.norm(theta - projected))


def parallelness_check(
    chart: Chart,
    point: Sequence[float],
    report: StabilizationReport,
    X: Sequence[float],
    h: float = 1e-3,
    rank_tol: float = 1e-8,
    steps: int = 10,
    pd_tol: float = 1e-10,
) -> float:
    """
    Distance of transported stable elements from the stable space at point + hX

    Returns:
        Largest parameter-space distance to the endpoint's stable subspace
    """
    start = np.asarray(point, dtype=float)
    end = start + h * np.asarray(X, dtype=float)
    endpoint = stabilize(chart, end, rank_tol, pd_tol=pd_tol)
    worst = 0.0
    for e in report.stable_basis:
        moved = parallel_transport(chart, [start, end], e, steps, pd_tol)
        worst = max(worst, _subspace_distance(endpoint.basis, endpoint.stable_kernel, moved))
    return worst


def propagation_check(
    chart: Chart,
    point: Sequence[float],
    report: StabilizationReport,
    X: Sequence[float],
    h: float = 1e-3,
    level: Optional[int] = None,
    steps: int = 10,
    pd_tol: float = 1e-10,
) -> float:
    """
    Level-k constraint residual of level-(k+1) kernel elements moved a distance h

    Elements of E^(k+1) transported along X still satisfy the level-k
    equations at the endpoint up to O(h^2).
    """
    if level is None:
        level = report.singer_invariant
    if not 0 <= level < len(report.kernels) - 1:
        raise TowerDepthError(f"level {level} has no recorded level {level + 1} kernel")
    start = np.asarray(point, dtype=float)
    end = start + h * np.asarray(X, dtype=float)
    end_basis = parameter_basis(connection_data(chart, end, pd_tol).g, end)
    matrix = constraint_matrix(chart, end, level, basis=end_basis, pd_tol=pd_tol)
    kernel = report.kernels[level + 1]
    worst = 0.0
    for j in range(kernel.shape[1]):
        e = from_parameters(report.basis, kernel[:, j])
        moved = parallel_transport(chart, [start, end], e, steps, pd_tol)
        worst = max(worst, float(np.linalg.norm(matrix @ to_parameters(end_basis, moved))))
    return worst
