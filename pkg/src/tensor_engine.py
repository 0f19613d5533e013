"""
Metric, Levi-Civita connection, curvature and its covariant derivatives at a point

Conventions:
    R(X,Y)Z = nabla_X nabla_Y Z - nabla_Y nabla_X Z - nabla_[X,Y] Z
    riemann_up[a, b, k, l] = R_{abk}^l, the l-component of R(d_a, d_b) d_k
    R_abcd = g_cl R_{abd}^l, so constant curvature K gives K (g_ac g_bd - g_ad g_bc)
    (nabla^s R) keeps its derivative slots first, outermost derivative first
"""
from dataclasses import dataclass
from typing import List, Sequence, Tuple, Union

import numpy as np
import scipy.linalg

from errors import (
    ChartDomainError,
    JetDomainError,
    JetOrderError,
    MetricDegenerateError,
    TensorSlotError,
)
from jets import JetSpace, jet_space
from metric_dsl import Chart
from utils import get_logger

logger = get_logger("tensor_engine")

UPPER = "u"
LOWER = "l"

# free tensor slots; 'e' and 'm' are reserved for derivative and dummy indices
_SLOT_LETTERS = "abcdfghijklnopqrstuvwxy"


@dataclass(frozen=True, eq=False)
class Tensor:
    """Dense tensor at a point; components[i1, ..., ir] with one index per slot"""

    signature: Tuple[str, ...]
    components: np.ndarray

    @property
    def n(self) -> int:
        return self.components.shape[0] if self.components.ndim else 0

    @property
    def rank(self) -> int:
        return len(self.signature)


@dataclass(frozen=True, eq=False)
class JetTensor:
    """Tensor with jet-valued components; the last axis of data holds jet coefficients"""

    signature: Tuple[str, ...]
    data: np.ndarray
    space: JetSpace

    @property
    def n(self) -> int:
        return self.space.dim

    @property
    def rank(self) -> int:
        return len(self.signature)

    @property
    def order(self) -> int:
        return self.space.order

    def truncate(self, order: int) -> "JetTensor":
        return JetTensor(self.signature, self.space.truncate(self.data, order), self.space.lower(order))

    def value(self) -> Tensor:
        return Tensor(self.signature, np.array(self.data[..., 0]))

    def gradient(self) -> np.ndarray:
        """First-order coefficients, shape (n,)*rank + (n,)"""
        return np.array(self.space.gradient(self.data))


def _components(t: Union[Tensor, np.ndarray]) -> np.ndarray:
    return t.components if isinstance(t, Tensor) else np.asarray(t, dtype=float)


def metric_at(chart: Chart, point: Sequence[float], K: int, pd_tol: float = 1e-10) -> JetTensor:
    """
    Metric components as jets

    Args:
        chart: parsed chart
        point: evaluation point
        K: jet order
        pd_tol: smallest admissible eigenvalue of g

    Returns:
        JetTensor with signature (lower, lower)

    Raises:
        MetricDegenerateError: g not positive definite at the point
        ChartDomainError: point outside a declared domain interval
    """
    values = chart.metric_values(point)
    smallest = float(scipy.linalg.eigvalsh(values)[0])
    if not smallest > pd_tol:
        raise MetricDegenerateError(point, smallest)
    if not chart.contains(point):
        raise ChartDomainError(f"point {list(point)} outside the chart domain {list(chart.domain_hints)}")
    jets = chart.metric_jets(point, K)
    data = np.array([[jets[i][j].data for j in range(chart.n)] for i in range(chart.n)])
    return JetTensor((LOWER, LOWER), data, jet_space(chart.n, K))


def invert_metric(g: JetTensor) -> JetTensor:
    """
    Jet-valued inverse of the metric

    Solves g h = 1 degree by degree: the value block is inverted once and
    every higher degree is eliminated against it.
    """
    space = g.space
    g0 = g.data[..., 0]
    try:
        h0 = scipy.linalg.inv(g0)
    except (scipy.linalg.LinAlgError, ValueError) as exc:
        raise JetDomainError("singular metric value part", float(np.linalg.det(g0))) from exc

    h = np.zeros_like(g.data)
    h[..., 0] = h0
    for degree in range(1, space.order + 1):
        lo, hi = space.degree_offsets[degree], space.degree_offsets[degree + 1]
        product = space.einsum("ij,jk->ik", g.data, h)
        h[..., lo:hi] = -np.einsum("ij,jk...->ik...", h0, product[..., lo:hi])
    return JetTensor((UPPER, UPPER), h, space)


def christoffel_from_metric(g: JetTensor, g_inv: JetTensor) -> JetTensor:
    """Gamma^k_ij = 1/2 g^kl (d_i g_jl + d_j g_il - d_l g_ij), one jet order below g"""
    space = g.space
    if space.order < 1:
        raise JetOrderError("Christoffel symbols need a metric jet of order >= 1")
    lower = space.lower(space.order - 1)
    dg = np.stack([space.partial(g.data, a) for a in range(g.n)])  # dg[a, b, c] = d_a g_bc
    first_kind = 0.5 * (
        np.einsum("ijl...->lij...", dg) + np.einsum("jil...->lij...", dg) - dg
    )
    h = space.truncate(g_inv.data, lower.order)
    return JetTensor((UPPER, LOWER, LOWER), lower.einsum("kl,lij->kij", h, first_kind), lower)


def christoffel(chart: Chart, point: Sequence[float], K: int, pd_tol: float = 1e-10) -> JetTensor:
    """Christoffel symbols Gamma[k, i, j] = Gamma^k_ij as jets of order K-1"""
    g = metric_at(chart, point, K, pd_tol)
    return christoffel_from_metric(g, invert_metric(g))


def riemann_from_christoffel(gamma: JetTensor) -> JetTensor:
    """riemann_up[a, b, k, l] = d_a Gamma^l_bk - d_b Gamma^l_ak + Gamma^l_am Gamma^m_bk - Gamma^l_bm Gamma^m_ak"""
    space = gamma.space
    if space.order < 1:
        raise JetOrderError("curvature needs Christoffel jets of order >= 1")
    lower = space.lower(space.order - 1)
    d_gamma = np.stack([space.partial(gamma.data, a) for a in range(gamma.n)])
    derivative = np.einsum("albk...->abkl...", d_gamma)
    g0 = space.truncate(gamma.data, lower.order)
    quadratic = lower.einsum("lam,mbk->abkl", g0, g0)
    data = derivative - np.swapaxes(derivative, 0, 1) + quadratic - np.swapaxes(quadratic, 0, 1)
    return JetTensor((LOWER, LOWER, LOWER, UPPER), data, lower)


def lower_riemann(riemann_up: JetTensor, g: JetTensor) -> JetTensor:
    space = riemann_up.space
    g_t = g.space.truncate(g.data, space.order)
    return JetTensor((LOWER,) * 4, space.einsum("cl,abdl->abcd", g_t, riemann_up.data), space)


def covariant_derivative(T: JetTensor, gamma: JetTensor) -> JetTensor:
    """
    Covariant derivative with one lower slot prepended

    Args:
        T: jet tensor of order >= 1
        gamma: Christoffel jets of order >= T.order - 1

    Returns:
        (nabla T)[e, ...] = d_e T + sum over upper slots of Gamma^a_em T^..m..
        - sum over lower slots of Gamma^m_ea T_..m.., one jet order below T
    """
    if T.order == 0:
        raise JetOrderError("cannot differentiate a tensor whose jets have order 0")
    target = T.order - 1
    if gamma.order < target:
        raise JetOrderError(f"Christoffel jets of order {gamma.order} cannot differentiate order {T.order}")
    if T.rank > len(_SLOT_LETTERS):
        raise TensorSlotError(f"tensor rank {T.rank} too large")
    space = T.space.lower(target)
    letters = _SLOT_LETTERS[: T.rank]

    result = np.stack([T.space.partial(T.data, e) for e in range(T.n)])
    G = gamma.space.truncate(gamma.data, target)
    Tt = T.space.truncate(T.data, target)
    for p, (letter, variance) in enumerate(zip(letters, T.signature)):
        dummy = letters[:p] + "m" + letters[p + 1 :]
        if variance == UPPER:
            result += space.einsum(f"{letter}em,{dummy}->e{letters}", G, Tt)
        else:
            result -= space.einsum(f"me{letter},{dummy}->e{letters}", G, Tt)
    return JetTensor((LOWER,) + T.signature, result, space)


def christoffel_magnitudes(gamma: JetTensor) -> Tuple[float, ...]:
    """Largest |Taylor coefficient| of the Christoffel jets, one entry per degree"""
    offsets = gamma.space.degree_offsets
    return tuple(
        float(np.max(np.abs(gamma.data[..., offsets[m] : offsets[m + 1]])))
        for m in range(gamma.order + 1)
    )


@dataclass(frozen=True, eq=False)
class CurvatureTower:
    """g, g^-1, Gamma, R and [R, nabla R, ..., nabla^s R] at a point, all as jets of one order"""

    point: Tuple[float, ...]
    g: JetTensor
    g_inv: JetTensor
    christoffel: JetTensor
    riemann_up: JetTensor
    levels: Tuple[JetTensor, ...]
    # per-degree Christoffel magnitudes, taken before the levels were truncated
    christoffel_sizes: Tuple[float, ...] = ()

    @property
    def depth(self) -> int:
        return len(self.levels) - 1

    @property
    def order(self) -> int:
        return self.g.order

    def values(self) -> List[Tensor]:
        return [level.value() for level in self.levels]

    @property
    def metric_norm(self) -> float:
        return float(np.linalg.norm(self.g.data[..., 0], 2))

    @property
    def inverse_metric_norm(self) -> float:
        return float(np.linalg.norm(self.g_inv.data[..., 0], 2))

    def connection_scale(self, degree: int) -> float:
        """
        Inverse coordinate length read off the Christoffel jets

        max over m <= degree of |Gamma coefficients of degree m|^(1/(m+1)); zero
        when every coefficient vanishes (a constant metric).
        """
        sizes = self.christoffel_sizes[: degree + 1]
        return max((c ** (1.0 / (m + 1)) for m, c in enumerate(sizes)), default=0.0)

    def noise_scale(self, s: int) -> float:
        """
        Magnitude reference for the lowered levels R, ..., nabla^s R

        Roundoff in nabla^i R stays a small multiple of eps * |g| * gamma^(i+2),
        gamma being the connection scale over the degrees the level used.
        """
        gamma = self.connection_scale(s + 1)
        return self.metric_norm * max(gamma ** (i + 2) for i in range(s + 1))


def jet_curvature_tower(
    chart: Chart, point: Sequence[float], s_max: int, order: int = 0, pd_tol: float = 1e-10
) -> CurvatureTower:
    """
    Curvature tower with jet-valued levels

    Args:
        chart: parsed chart
        point: evaluation point
        s_max: highest covariant derivative of R
        order: jet order kept in every returned level (0 = values only)
        pd_tol: positive-definiteness tolerance

    Returns:
        CurvatureTower; the metric is expanded to order s_max + 2 + order internally
    """
    if s_max < 0:
        raise JetOrderError(f"s_max must be non-negative, got {s_max}")
    K = s_max + 2 + order
    g = metric_at(chart, point, K, pd_tol)
    g_inv = invert_metric(g)
    gamma = christoffel_from_metric(g, g_inv)
    riemann_up = riemann_from_christoffel(gamma)
    levels = [lower_riemann(riemann_up, g)]
    for _ in range(s_max):
        levels.append(covariant_derivative(levels[-1], gamma))
    logger.debug(f"Curvature tower at {list(point)}: depth {s_max}, jet order {K}")
    return CurvatureTower(
        point=tuple(float(x) for x in point),
        g=g.truncate(order),
        g_inv=g_inv.truncate(order),
        christoffel=gamma.truncate(order),
        riemann_up=riemann_up.truncate(order),
        levels=tuple(level.truncate(order) for level in levels),
        christoffel_sizes=christoffel_magnitudes(gamma),
    )


def curvature_tower(chart: Chart, point: Sequence[float], s_max: int, pd_tol: float = 1e-10) -> List[Tensor]:
    """[R, nabla R, ..., nabla^s_max R] at the point, fully lowered"""
    return jet_curvature_tower(chart, point, s_max, 0, pd_tol).values()


@dataclass(frozen=True, eq=False)
class ConnectionData:
    """Metric, inverse, Christoffel symbols and curvature operator values at a point"""

    point: Tuple[float, ...]
    g: np.ndarray
    g_inv: np.ndarray
    gamma: np.ndarray       # gamma[k, i, j] = Gamma^k_ij
    riemann_up: np.ndarray  # riemann_up[a, b, k, l] = R_{abk}^l


def connection_data(chart: Chart, point: Sequence[float], pd_tol: float = 1e-10) -> ConnectionData:
    g = metric_at(chart, point, 2, pd_tol)
    g_inv = invert_metric(g)
    gamma = christoffel_from_metric(g, g_inv)
    riemann_up = riemann_from_christoffel(gamma)
    return ConnectionData(
        point=tuple(float(x) for x in point),
        g=np.array(g.data[..., 0]),
        g_inv=np.array(g_inv.data[..., 0]),
        gamma=np.array(gamma.data[..., 0]),
        riemann_up=np.array(riemann_up.data[..., 0]),
    )


def _check_slot(T: Tensor, slot: int):
    if not 0 <= slot < T.rank:
        raise TensorSlotError(f"slot {slot} out of range for a rank-{T.rank} tensor")


def contract(T: Tensor, i: int, j: int, g, g_inv) -> Tensor:
    """
    Metric contraction of slots i and j

    Two lower slots contract through g^-1, two upper slots through g and a
    mixed pair is a plain trace.
    """
    _check_slot(T, i)
    _check_slot(T, j)
    if i == j:
        raise TensorSlotError("cannot contract a slot with itself")
    letters = _SLOT_LETTERS[: T.rank]
    out = "".join(ch for p, ch in enumerate(letters) if p not in (i, j))
    signature = tuple(s for p, s in enumerate(T.signature) if p not in (i, j))
    if T.signature[i] == T.signature[j]:
        metric = _components(g_inv) if T.signature[i] == LOWER else _components(g)
        components = np.einsum(f"{letters},{letters[i]}{letters[j]}->{out}", T.components, metric)
    else:
        traced = letters.replace(letters[j], letters[i])
        components = np.einsum(f"{traced}->{out}", T.components)
    return Tensor(signature, np.asarray(components))


def lower_index(T: Tensor, slot: int, g) -> Tensor:
    _check_slot(T, slot)
    if T.signature[slot] == LOWER:
        raise TensorSlotError(f"slot {slot} is already lower")
    moved = np.moveaxis(np.tensordot(T.components, _components(g), axes=([slot], [0])), -1, slot)
    return Tensor(T.signature[:slot] + (LOWER,) + T.signature[slot + 1 :], moved)


def raise_index(T: Tensor, slot: int, g_inv) -> Tensor:
    _check_slot(T, slot)
    if T.signature[slot] == UPPER:
        raise TensorSlotError(f"slot {slot} is already upper")
    moved = np.moveaxis(np.tensordot(T.components, _components(g_inv), axes=([slot], [0])), -1, slot)
    return Tensor(T.signature[:slot] + (UPPER,) + T.signature[slot + 1 :], moved)


def ricci_tensor(R: Tensor, g_inv) -> Tensor:
    """Ric_bd = g^ac R_abcd"""
    return contract(R, 0, 2, None, g_inv)


def scalar_curvature(R: Tensor, g_inv) -> float:
    return float(contract(ricci_tensor(R, g_inv), 0, 1, None, g_inv).components)


def curvature_endomorphism(riemann_up: np.ndarray, X: Sequence[float], Y: Sequence[float]) -> np.ndarray:
    """R_{X,Y} = R(X,Y) as a mixed matrix M[l, k] = X^a Y^b R_{abk}^l"""
    return np.einsum("a,b,abkl->lk", np.asarray(X, dtype=float), np.asarray(Y, dtype=float), riemann_up)


def endomorphism_from_lowered(T: np.ndarray, g_inv: np.ndarray, X: Sequence[float], Y: Sequence[float]) -> np.ndarray:
    """Mixed matrix M[l, d] = g^lc X^a Y^b T_abcd of a curvature-like lowered 4-tensor"""
    return np.einsum("lc,a,b,abcd->ld", g_inv, np.asarray(X, dtype=float), np.asarray(Y, dtype=float), T)
