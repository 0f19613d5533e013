"""
The bundle E = TM + so(TM) with the Kostant connection

    nabla~_X (v, B) = (nabla_X v - B X, nabla_X B - R_{X,v})

Parallel sections are exactly the canonical lifts (Z, skew part of nabla Z)
of Killing fields Z.
"""
from dataclasses import dataclass
from typing import Dict, List, Sequence, Tuple, Union

import numpy as np

from errors import GeoscopeError, JetShapeError, TransportError
from jets import jet_space
from metric_dsl import Chart, Expr, parse_expression, eval_expr
from tensor_engine import (
    ConnectionData,
    christoffel_from_metric,
    connection_data,
    curvature_endomorphism,
    endomorphism_from_lowered,
    invert_metric,
    jet_curvature_tower,
    metric_at,
)
from utils import get_logger

logger = get_logger("kostant")


@dataclass(frozen=True, eq=False)
class KostantElement:
    """A fiber element (v, B): tangent vector and mixed endomorphism B[i, j] = B^i_j"""

    v: np.ndarray
    B: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.v, dtype=float)
        B = np.asarray(self.B, dtype=float)
        if v.ndim != 1 or B.shape != (v.size, v.size):
            raise JetShapeError(f"inconsistent element shapes v{v.shape}, B{B.shape}")
        object.__setattr__(self, "v", v)
        object.__setattr__(self, "B", B)

    @property
    def n(self) -> int:
        return self.v.size

    @classmethod
    def zero(cls, n: int) -> "KostantElement":
        return cls(np.zeros(n), np.zeros((n, n)))

    @classmethod
    def from_vector(cls, vector: Sequence[float], n: int) -> "KostantElement":
        vector = np.asarray(vector, dtype=float)
        return cls(vector[:n], vector[n:].reshape(n, n))

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.v, self.B.ravel()])

    def __add__(self, other: "KostantElement") -> "KostantElement":
        return KostantElement(self.v + other.v, self.B + other.B)

    def __sub__(self, other: "KostantElement") -> "KostantElement":
        return KostantElement(self.v - other.v, self.B - other.B)

    def __mul__(self, scalar: float) -> "KostantElement":
        return KostantElement(scalar * self.v, scalar * self.B)

    __rmul__ = __mul__

    def __neg__(self) -> "KostantElement":
        return KostantElement(-self.v, -self.B)


@dataclass(frozen=True, eq=False)
class SectionJet:
    """Value and first coordinate partials of a section at a point"""

    point: Tuple[float, ...]
    value: KostantElement
    dv: np.ndarray  # dv[e, a] = d_e v^a
    dB: np.ndarray  # dB[e, a, b] = d_e B^a_b

    def __post_init__(self):
        n = self.value.n
        if len(self.point) != n or self.dv.shape != (n, n) or self.dB.shape != (n, n, n):
            raise JetShapeError(f"section jet shapes inconsistent with dimension {n}")


def element_norm(e: KostantElement) -> float:
    return float(np.sqrt(np.sum(e.v**2) + np.sum(e.B**2)))


def skew_residual(B: np.ndarray, g: np.ndarray) -> float:
    gB = g @ B
    return float(np.max(np.abs(gB + gB.T))) if B.size else 0.0


def is_skew(B: np.ndarray, g: np.ndarray, tol: float = 1e-10) -> bool:
    """g B + (g B)^T = 0 within tol, scaled by the size of g B"""
    scale = max(1.0, float(np.max(np.abs(g @ B))) if B.size else 1.0)
    return skew_residual(B, g) <= tol * scale


def skew_part(A: np.ndarray, g: np.ndarray, g_inv: np.ndarray) -> np.ndarray:
    """g-skew part 1/2 (A - g^-1 A^T g)"""
    return 0.5 * (A - g_inv @ A.T @ g)


def _as_exprs(chart: Chart, Z: Sequence[Union[str, Expr]]) -> List[Expr]:
    if len(Z) != chart.n:
        raise JetShapeError(f"vector field has {len(Z)} components, chart has {chart.n}")
    return [parse_expression(z, chart.coords) if isinstance(z, str) else z for z in Z]


def _field_covariant_jets(chart: Chart, Z, point: Sequence[float], K: int, pd_tol: float):
    """
    Jets of Z and of A = nabla Z, A^a_b = d_b Z^a + Gamma^a_bc Z^c

    Returns (Z data at order K-1, A data at order K-1, g, g_inv, Gamma) with
    the metric tensors truncated to order K-1.
    """
    exprs = _as_exprs(chart, Z)
    texts = [z if isinstance(z, str) else "" for z in Z]
    z_data = np.array([eval_expr(e, point, K, t).data for e, t in zip(exprs, texts)])
    space = jet_space(chart.n, K)
    lower = space.lower(K - 1)
    g = metric_at(chart, point, K, pd_tol)
    g_inv = invert_metric(g)
    gamma = christoffel_from_metric(g, g_inv)

    dz = np.stack([space.partial(z_data, b) for b in range(chart.n)], axis=-2)  # dz[a, b] = d_b Z^a
    z_low = space.truncate(z_data, K - 1)
    A = dz + lower.einsum("abc,c->ab", gamma.data, z_low)
    return z_low, A, g.truncate(K - 1), g_inv.truncate(K - 1), gamma


def canonical_lift(chart: Chart, Z, point: Sequence[float], pd_tol: float = 1e-10) -> KostantElement:
    """
    Canonical lift of a vector field

    Args:
        chart: parsed chart
        Z: n component expressions (source strings or parsed Expr)
        point: base point

    Returns:
        (Z(p), 1/2 (A - g^-1 A^T g)) with A = nabla Z at p
    """
    z, A, g, g_inv, _ = _field_covariant_jets(chart, Z, point, 1, pd_tol)
    A0 = A[..., 0]
    return KostantElement(z[..., 0], skew_part(A0, g.data[..., 0], g_inv.data[..., 0]))


def section_jet_from_field(chart: Chart, Z, point: Sequence[float], pd_tol: float = 1e-10) -> SectionJet:
    """Exact value and first partials of the canonical lift section of Z"""
    z, A, g, g_inv, _ = _field_covariant_jets(chart, Z, point, 2, pd_tol)
    space = g.space
    # 1/2 (A - g^-1 A^T g) as jets
    at_g = space.einsum("dc,db->cb", A, g.data)
    B = 0.5 * (A - space.einsum("ac,cb->ab", g_inv.data, at_g))
    dv = np.stack([z[..., 1 + e] for e in range(chart.n)])
    dB = np.stack([B[..., 1 + e] for e in range(chart.n)])
    return SectionJet(
        point=tuple(float(x) for x in point),
        value=KostantElement(z[..., 0], B[..., 0]),
        dv=dv,
        dB=dB,
    )


def _covariant_parts(conn: ConnectionData, sj: SectionJet, X: np.ndarray):
    v, B = sj.value.v, sj.value.B
    gamma_x = np.einsum("e,aem->am", X, conn.gamma)  # Gamma(X)^a_m
    nabla_v = X @ sj.dv + gamma_x @ v
    nabla_B = np.einsum("e,eab->ab", X, sj.dB) + gamma_x @ B - B @ gamma_x
    return nabla_v, nabla_B


def connection_apply(chart: Chart, sj: SectionJet, X: Sequence[float], pd_tol: float = 1e-10) -> KostantElement:
    """nabla~_X of a section given by its value and first partials"""
    X = np.asarray(X, dtype=float)
    if X.shape != (chart.n,):
        raise JetShapeError(f"direction has shape {X.shape}, expected ({chart.n},)")
    conn = connection_data(chart, sj.point, pd_tol)
    nabla_v, nabla_B = _covariant_parts(conn, sj, X)
    v, B = sj.value.v, sj.value.B
    return KostantElement(nabla_v - B @ X, nabla_B - curvature_endomorphism(conn.riemann_up, X, v))


def affine_jacobi_residual(chart: Chart, Z, point: Sequence[float], X: Sequence[float], pd_tol: float = 1e-10) -> float:
    """Frobenius norm of nabla_X(nabla Z) - R_{X,Z}; zero for Killing fields"""
    X = np.asarray(X, dtype=float)
    z, A, g, g_inv, gamma = _field_covariant_jets(chart, Z, point, 2, pd_tol)
    conn = connection_data(chart, point, pd_tol)
    section = SectionJet(
        point=tuple(float(x) for x in point),
        value=KostantElement(z[..., 0], A[..., 0]),
        dv=np.stack([z[..., 1 + e] for e in range(chart.n)]),
        dB=np.stack([A[..., 1 + e] for e in range(chart.n)]),
    )
    _, nabla_A = _covariant_parts(conn, section, X)
    return float(np.linalg.norm(nabla_A - curvature_endomorphism(conn.riemann_up, X, z[..., 0])))


def derivation_on_endomorphism(B: np.ndarray, R_end, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """(B.R)_{X,Y} = [B, R_{X,Y}] - R_{BX,Y} - R_{X,BY}"""
    R_xy = R_end(X, Y)
    return B @ R_xy - R_xy @ B - R_end(B @ X, Y) - R_end(X, B @ Y)


def bundle_curvature(
    chart: Chart,
    point: Sequence[float],
    X: Sequence[float],
    Y: Sequence[float],
    e: KostantElement,
    pd_tol: float = 1e-10,
) -> KostantElement:
    """
    Curvature of the Kostant connection

    Args:
        chart: parsed chart
        point: base point
        X, Y: tangent directions
        e: fiber element (v, B)

    Returns:
        (0, (nabla_v R)_{X,Y} - (B.R)_{X,Y}); the first component is exactly zero
    """
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    tower = jet_curvature_tower(chart, point, 1, 0, pd_tol)
    R, nabla_R = tower.values()
    g_inv = tower.g_inv.data[..., 0]

    def R_end(a, b):
        return endomorphism_from_lowered(R.components, g_inv, a, b)

    nabla_v_R = np.einsum("e,eabcd->abcd", e.v, nabla_R.components)
    second = endomorphism_from_lowered(nabla_v_R, g_inv, X, Y) - derivation_on_endomorphism(e.B, R_end, X, Y)
    return KostantElement(np.zeros(chart.n), second)


class ConnectionCache:
    """Connection values along one transport; RK4 revisits step endpoints and midpoints"""

    def __init__(self, chart: Chart, pd_tol: float):
        self.chart = chart
        self.pd_tol = pd_tol
        self.entries: Dict[Tuple[float, ...], ConnectionData] = {}

    def __call__(self, point: np.ndarray) -> ConnectionData:
        key = tuple(float(x) for x in point)
        if key not in self.entries:
            if len(self.entries) >= 64:
                self.entries.pop(next(iter(self.entries)))
            try:
                self.entries[key] = connection_data(self.chart, key, self.pd_tol)
            except GeoscopeError as exc:
                raise TransportError(f"transport left the regular chart domain at {list(key)}: {exc}") from exc
        return self.entries[key]


def _transport_rhs(conn: ConnectionData, velocity: np.ndarray, v: np.ndarray, B: np.ndarray):
    gamma_c = np.einsum("e,aem->am", velocity, conn.gamma)
    dv = -gamma_c @ v + B @ velocity
    dB = -(gamma_c @ B - B @ gamma_c) + curvature_endomorphism(conn.riemann_up, velocity, v)
    return dv, dB


def transport_segment(
    cache: ConnectionCache, start: np.ndarray, end: np.ndarray, v: np.ndarray, B: np.ndarray, steps: int
) -> Tuple[np.ndarray, np.ndarray]:
    """Classical RK4 along the straight segment start -> end"""
    velocity = end - start
    h = 1.0 / steps
    for step in range(steps):
        p0 = start + (step / steps) * velocity
        pm = start + ((step + 0.5) / steps) * velocity
        p1 = end if step == steps - 1 else start + ((step + 1) / steps) * velocity
        k1v, k1B = _transport_rhs(cache(p0), velocity, v, B)
        k2v, k2B = _transport_rhs(cache(pm), velocity, v + 0.5 * h * k1v, B + 0.5 * h * k1B)
        k3v, k3B = _transport_rhs(cache(pm), velocity, v + 0.5 * h * k2v, B + 0.5 * h * k2B)
        k4v, k4B = _transport_rhs(cache(p1), velocity, v + h * k3v, B + h * k3B)
        v = v + h / 6.0 * (k1v + 2 * k2v + 2 * k3v + k4v)
        B = B + h / 6.0 * (k1B + 2 * k2B + 2 * k3B + k4B)
    return v, B


def parallel_transport(
    chart: Chart,
    curve: Sequence[Sequence[float]],
    e0: KostantElement,
    steps_per_segment: int,
    pd_tol: float = 1e-10,
) -> KostantElement:
    """
    Transport a fiber element along a polyline

    Args:
        chart: parsed chart
        curve: waypoints in chart coordinates, at least one
        e0: element at curve[0]
        steps_per_segment: RK4 steps per polyline segment

    Returns:
        The transported element at the last waypoint

    Raises:
        TransportError: bad step count or the curve leaves the regular domain
    """
    if steps_per_segment < 1:
        raise TransportError(f"steps_per_segment must be at least 1, got {steps_per_segment}")
    waypoints = [np.asarray(p, dtype=float) for p in curve]
    if not waypoints:
        raise TransportError("empty curve")
    if any(p.shape != (chart.n,) for p in waypoints):
        raise TransportError(f"waypoints must have {chart.n} coordinates")

    cache = ConnectionCache(chart, pd_tol)
    cache(waypoints[0])
    v, B = e0.v.copy(), e0.B.copy()
    for start, end in zip(waypoints[:-1], waypoints[1:]):
        if np.array_equal(start, end):
            continue
        v, B = transport_segment(cache, start, end, v, B, steps_per_segment)

    g_end = cache(waypoints[-1]).g
    if not is_skew(B, g_end, 1e-8):
        logger.warning(f"Transported B is not g-skew at {waypoints[-1].tolist()}: residual {skew_residual(B, g_end):.3e}")
    return KostantElement(v, B)


def holonomy_defect(
    chart: Chart,
    point: Sequence[float],
    X: Sequence[float],
    Y: Sequence[float],
    h: float,
    e: KostantElement,
    steps_per_segment: int = 20,
    pd_tol: float = 1e-10,
) -> KostantElement:
    """
    Transport around the square p -> p+hY -> p+hX+hY -> p+hX -> p minus e

    The defect equals h^2 R~_{X,Y} e + O(h^3).
    """
    p = np.asarray(point, dtype=float)
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    loop = [p, p + h * Y, p + h * X + h * Y, p + h * X, p]
    return parallel_transport(chart, loop, e, steps_per_segment, pd_tol) - e
