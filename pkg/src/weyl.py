"""
Scalar Weyl invariants as complete-trace patterns of the curvature tower
"""
import re
from dataclasses import dataclass, field
from itertools import permutations, product
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from errors import GeoscopeError, InputError, TowerDepthError
from metric_dsl import Chart
from tensor_engine import CurvatureTower, Tensor, jet_curvature_tower
from utils import get_logger, numerical_rank

logger = get_logger("weyl")

Pairing = Tuple[Tuple[int, int], ...]

_DESCRIPTOR_RE = re.compile(r"^tr\[\s*([0-9,\s]+?)\s*\|\s*((?:\(\s*\d+\s*,\s*\d+\s*\)\s*)+)\]$")
_PAIR_RE = re.compile(r"\(\s*(\d+)\s*,\s*(\d+)\s*\)")


@dataclass(frozen=True)
class TracePattern:
    """Complete metric trace of nabla^m1 R x ... x nabla^ml R along a perfect matching of slots"""

    factors: Tuple[int, ...]
    pairing: Pairing

    @property
    def order(self) -> int:
        return sum(self.factors)

    @property
    def valence(self) -> int:
        return sum(m + 4 for m in self.factors)

    @property
    def offsets(self) -> Tuple[int, ...]:
        offsets, total = [], 0
        for m in self.factors:
            offsets.append(total)
            total += m + 4
        return tuple(offsets)

    @property
    def descriptor(self) -> str:
        return pattern_descriptor(self)


@dataclass(frozen=True)
class InvariantSet:
    patterns: Tuple[TracePattern, ...]
    max_order: int
    max_valence: int
    n: Optional[int] = None

    def __len__(self):
        return len(self.patterns)

    @property
    def max_factor_order(self) -> int:
        return max((max(p.factors) for p in self.patterns), default=0)


def pattern_descriptor(p: TracePattern) -> str:
    """'tr[m1,...,ml | (a,b)(c,d)...]' with 0-based global slot indices"""
    factors = ",".join(str(m) for m in p.factors)
    pairs = "".join(f"({a},{b})" for a, b in p.pairing)
    return f"tr[{factors} | {pairs}]"


def parse_descriptor(text: str) -> TracePattern:
    match = _DESCRIPTOR_RE.match(text.strip())
    if not match:
        raise InputError(f"malformed invariant descriptor '{text}'")
    factors = tuple(int(m) for m in match.group(1).split(",") if m.strip())
    pairing = tuple(sorted(tuple(sorted((int(a), int(b)))) for a, b in _PAIR_RE.findall(match.group(2))))
    valence = sum(m + 4 for m in factors)
    covered = sorted(s for pair in pairing for s in pair)
    if covered != list(range(valence)):
        raise InputError(f"descriptor '{text}' does not pair each of its {valence} slots exactly once")
    return TracePattern(factors, pairing)


def _perfect_matchings(slots: Tuple[int, ...]):
    """Perfect matchings in lexicographic order, each as a sorted tuple of pairs"""
    if not slots:
        yield ()
        return
    first, rest = slots[0], slots[1:]
    for k, partner in enumerate(rest):
        remaining = rest[:k] + rest[k + 1 :]
        for tail in _perfect_matchings(remaining):
            yield ((first, partner),) + tail


def _curvature_slot_maps() -> List[Tuple[Tuple[int, int, int, int], int]]:
    """The order-8 symmetry group of R_abcd as (image of abcd, sign)"""
    generators = [((1, 0, 2, 3), -1), ((0, 1, 3, 2), -1), ((2, 3, 0, 1), 1)]
    group = {(0, 1, 2, 3): 1}
    frontier = [(0, 1, 2, 3)]
    while frontier:
        current = frontier.pop()
        for perm, sign in generators:
            image = tuple(current[perm[i]] for i in range(4))
            if image not in group:
                group[image] = group[current] * sign
                frontier.append(image)
    return sorted(group.items())


def _symmetry_group(factors: Tuple[int, ...]) -> List[Tuple[Tuple[int, ...], int]]:
    """Slot permutations (with sign) from factor swaps among equal orders and R's index symmetries"""
    offsets, total = [], 0
    for m in factors:
        offsets.append(total)
        total += m + 4

    blocks: Dict[int, List[int]] = {}
    for idx, m in enumerate(factors):
        blocks.setdefault(m, []).append(idx)
    factor_perms = [list(range(len(factors)))]
    for m, members in blocks.items():
        expanded = []
        for base in factor_perms:
            for perm in permutations(members):
                candidate = list(base)
                for src, dst in zip(members, perm):
                    candidate[src] = dst
                expanded.append(candidate)
        factor_perms = expanded

    curvature = _curvature_slot_maps()
    group = []
    for factor_perm in factor_perms:
        for choice in product(curvature, repeat=len(factors)):
            mapping = [0] * total
            sign = 1
            for idx, m in enumerate(factors):
                target = offsets[factor_perm[idx]]
                (images, s) = choice[idx]
                sign *= s
                for d in range(m):
                    mapping[offsets[idx] + d] = target + d
                for r in range(4):
                    mapping[offsets[idx] + m + r] = target + m + images[r]
            group.append((tuple(mapping), sign))
    return group


def _apply(mapping: Sequence[int], pairing: Pairing) -> Pairing:
    return tuple(sorted(tuple(sorted((mapping[a], mapping[b]))) for a, b in pairing))


def _factor_multisets(max_order: int, max_valence: int):
    """Non-decreasing derivative-order tuples with even total valence within the caps"""
    results = []

    def extend(prefix: List[int], low: int, order: int, valence: int):
        if prefix and valence % 2 == 0:
            results.append(tuple(prefix))
        for m in range(low, max_order - order + 1):
            if valence + m + 4 > max_valence:
                break
            extend(prefix + [m], m, order + m, valence + m + 4)

    extend([], 0, 0, 0)
    return sorted(results, key=lambda f: (sum(m + 4 for m in f), sum(f), f))


def enumerate_patterns(n: int, max_order: int, max_valence: int = 8) -> InvariantSet:
    """
    Canonical complete-trace patterns

    Args:
        n: chart dimension (recorded only; patterns are dimension-free)
        max_order: cap on the total number of covariant derivatives
        max_valence: cap on the total slot count

    Returns:
        InvariantSet in deterministic order; patterns that a symmetry maps to
        themselves with an odd sign vanish identically and are dropped
    """
    if max_order < 0:
        raise InputError(f"max_order must be non-negative, got {max_order}")
    if max_valence < 4 or max_valence % 2:
        raise InputError(f"max_valence must be even and at least 4, got {max_valence}")

    patterns = []
    for factors in _factor_multisets(max_order, max_valence):
        group = _symmetry_group(factors)
        slots = tuple(range(sum(m + 4 for m in factors)))
        seen = set()
        for pairing in _perfect_matchings(slots):
            if pairing in seen:
                continue
            orbit = {}
            vanishes = False
            for mapping, sign in group:
                image = _apply(mapping, pairing)
                if image in orbit and orbit[image] != sign:
                    vanishes = True
                orbit.setdefault(image, sign)
            seen.update(orbit)
            if not vanishes:
                # matchings come in lexicographic order, so the first orbit member seen is minimal
                patterns.append(TracePattern(factors, pairing))
    logger.debug(f"Enumerated {len(patterns)} trace patterns (max_order={max_order}, max_valence={max_valence})")
    return InvariantSet(tuple(patterns), max_order, max_valence, n)


def _contraction_network(p: TracePattern, factors: Sequence, metric_inverse, einsum: Callable):
    """
    Contract the factor tensors and one inverse metric per pair, two operands at a time

    Operands carry only tensor axes plus whatever trailing axes einsum manages.
    """
    letters = [chr(ord("a") + i) for i in range(26)] + [chr(ord("A") + i) for i in range(20)]
    slot_letter = {}
    for i, (a, b) in enumerate(p.pairing):
        slot_letter[a] = letters[2 * i]
        slot_letter[b] = letters[2 * i + 1]

    operands = []
    placed = set()
    pending = list(p.pairing)
    for idx, offset in enumerate(p.offsets):
        width = p.factors[idx] + 4
        subs = "".join(slot_letter[offset + k] for k in range(width))
        operands.append((subs, factors[p.factors[idx]]))
        placed.update(range(offset, offset + width))
        for a, b in [pair for pair in pending if pair[0] in placed and pair[1] in placed]:
            operands.append((slot_letter[a] + slot_letter[b], metric_inverse))
            pending.remove((a, b))

    subs, acc = operands[0]
    for k in range(1, len(operands)):
        next_subs, operand = operands[k]
        later = "".join(s for s, _ in operands[k + 1 :])
        out = "".join(ch for ch in dict.fromkeys(subs + next_subs) if ch in later)
        acc = einsum(f"{subs},{next_subs}->{out}", acc, operand)
        subs = out
    return acc


def _check_depth(p: TracePattern, available: int):
    if max(p.factors) > available:
        raise TowerDepthError(
            f"pattern {p.descriptor} needs nabla^{max(p.factors)} R, tower depth is {available}"
        )


def evaluate_invariant(p: TracePattern, tower: Sequence[Tensor], g, g_inv) -> float:
    """Full metric contraction of the pattern on a numeric curvature tower"""
    _check_depth(p, len(tower) - 1)
    g_inv = g_inv.components if isinstance(g_inv, Tensor) else np.asarray(g_inv, dtype=float)
    factors = [t.components if isinstance(t, Tensor) else np.asarray(t) for t in tower]

    def numeric_einsum(subscripts, a, b):
        return np.einsum(subscripts, a, b, optimize=True)

    return float(_contraction_network(p, factors, g_inv, numeric_einsum))


def evaluate_jet_invariant(p: TracePattern, tower: CurvatureTower) -> np.ndarray:
    """Jet coefficients of the invariant from a jet-valued tower"""
    _check_depth(p, tower.depth)
    space = tower.g.space
    factors = [level.data for level in tower.levels]
    return _contraction_network(p, factors, tower.g_inv.data, space.einsum)


def gradient_scale(p: TracePattern, tower: CurvatureTower) -> float:
    """
    Magnitude reference for the differential of one invariant

    Each lowered factor nabla^m R carries |g| gamma^(m+2), every contraction
    one |g^-1|, and the differential one more gamma.
    """
    gamma = tower.connection_scale(max(p.factors) + 2)
    f = len(p.factors)
    return (
        tower.metric_norm ** f
        * tower.inverse_metric_norm ** (p.valence // 2)
        * gamma ** (2 * f + p.order + 1)
    )


def _invariant_jets(
    patterns: Sequence[TracePattern], chart: Chart, point: Sequence[float], pd_tol: float
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    s_max = max(max(p.factors) for p in patterns)
    tower = jet_curvature_tower(chart, point, s_max, order=1, pd_tol=pd_tol)
    jets = np.array([evaluate_jet_invariant(p, tower) for p in patterns])
    scales = np.array([gradient_scale(p, tower) for p in patterns])
    return jets[:, 0].copy(), jets[:, 1 : 1 + chart.n].copy(), scales


def invariant_values_and_gradients(
    patterns: Sequence[TracePattern], chart: Chart, point: Sequence[float], pd_tol: float = 1e-10
) -> Tuple[np.ndarray, np.ndarray]:
    """Values (len(patterns),) and coordinate differentials (len(patterns), n) from one order-1 tower"""
    if not patterns:
        return np.zeros(0), np.zeros((0, chart.n))
    values, gradients, _ = _invariant_jets(patterns, chart, point, pd_tol)
    return values, gradients


def invariant_gradient(p: TracePattern, chart: Chart, point: Sequence[float], pd_tol: float = 1e-10) -> np.ndarray:
    """Coordinate differential of the invariant at the point"""
    _, gradients = invariant_values_and_gradients([p], chart, point, pd_tol)
    return gradients[0]


def normalized_gradients(gradients: np.ndarray, scales: np.ndarray) -> np.ndarray:
    """Rows divided by their magnitude references; rows of a constant metric stay as they are"""
    safe = np.where(scales > 0.0, scales, 1.0)
    return gradients / safe[:, None]


def gradient_rank(gradients: np.ndarray, scales: np.ndarray, rank_tol: float) -> int:
    if not len(gradients):
        return 0
    return numerical_rank(normalized_gradients(gradients, scales), rank_tol, 1.0)


@dataclass
class CohomogeneityResult:
    codim: int
    rank_basis: List[TracePattern]
    singular_flag: bool
    gradients: np.ndarray = field(repr=False)
    values: np.ndarray = field(repr=False)
    scales: np.ndarray = field(repr=False, default=None)


def _rank_basis(patterns: Sequence[TracePattern], rows: np.ndarray, rank_tol: float) -> List[TracePattern]:
    basis, kept = [], []
    for pattern, row in zip(patterns, rows):
        if numerical_rank(np.array(kept + [row]), rank_tol, 1.0) > len(kept):
            basis.append(pattern)
            kept.append(row)
    return basis


def cohomogeneity_at(
    chart: Chart,
    point: Sequence[float],
    inv_set: InvariantSet,
    rank_tol: float = 1e-8,
    h_probe: float = 1e-3,
    pd_tol: float = 1e-10,
) -> CohomogeneityResult:
    """
    Codimension of the invariant level sets through the point

    Args:
        chart: parsed chart
        point: regular point
        inv_set: invariants whose differentials are stacked
        rank_tol: cutoff relative to each row's magnitude reference
        h_probe: offset of the 2n probe points along the coordinate axes

    Returns:
        CohomogeneityResult; singular_flag is set when the rank differs at a
        probe point or a probe point cannot be evaluated
    """
    patterns = list(inv_set.patterns)
    if not patterns:
        empty = np.zeros((0, chart.n))
        return CohomogeneityResult(0, [], False, empty, np.zeros(0), np.zeros(0))
    values, gradients, scales = _invariant_jets(patterns, chart, point, pd_tol)
    codim = gradient_rank(gradients, scales, rank_tol)

    singular = False
    for axis in range(chart.n):
        for direction in (1.0, -1.0):
            probe = np.array(point, dtype=float)
            probe[axis] += direction * h_probe
            try:
                _, probe_gradients, probe_scales = _invariant_jets(patterns, chart, probe, pd_tol)
            except GeoscopeError as exc:
                logger.info(f"Probe point {probe.tolist()} failed: {exc}")
                singular = True
                continue
            if gradient_rank(probe_gradients, probe_scales, rank_tol) != codim:
                singular = True

    return CohomogeneityResult(
        codim=codim,
        rank_basis=_rank_basis(patterns, normalized_gradients(gradients, scales), rank_tol),
        singular_flag=singular,
        gradients=gradients,
        values=values,
        scales=scales,
    )
