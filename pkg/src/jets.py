"""
Truncated multivariate Taylor arithmetic (jets)

A jet of order K in n variables stores the Taylor coefficients
d^alpha f(x0) / alpha! for every multi-index alpha with |alpha| <= K.
Coefficients live in a dense vector ordered by degree, so truncating to a
lower order is a prefix slice. Jet-valued arrays (shape (..., N)) share the
same layout and the same product tables, which is what the tensor engine
builds on.
"""
import math
from functools import lru_cache
from itertools import combinations_with_replacement
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
from scipy.special import binom

from errors import JetDomainError, JetOrderError, JetShapeError

MultiIndex = Tuple[int, ...]

ELEMENTARY = ("exp", "log", "sin", "cos", "tan", "sinh", "cosh", "tanh", "sqrt", "pow")


class JetSpace:
    """Monomial layout and product tables for jets of a given (dim, order)"""

    def __init__(self, dim: int, order: int):
        if dim < 1:
            raise JetShapeError(f"jet dimension must be positive, got {dim}")
        if order < 0:
            raise JetShapeError(f"jet order must be non-negative, got {order}")
        self.dim = dim
        self.order = order

        monomials = []
        offsets = []
        for degree in range(order + 1):
            offsets.append(len(monomials))
            for combo in combinations_with_replacement(range(dim), degree):
                exponents = [0] * dim
                for var in combo:
                    exponents[var] += 1
                monomials.append(tuple(exponents))
        offsets.append(len(monomials))

        self.monomials: Tuple[MultiIndex, ...] = tuple(monomials)
        self.index: Dict[MultiIndex, int] = {m: i for i, m in enumerate(monomials)}
        self.degree_offsets = tuple(offsets)
        self.size = len(monomials)
        self.degrees = np.array([sum(m) for m in monomials], dtype=int)
        self.factorials = np.array(
            [math.prod(math.factorial(e) for e in m) for m in monomials], dtype=float
        )
        self._build_product_table()
        self._build_partial_maps()

    def _build_product_table(self):
        pa, pb, pc = [], [], []
        for ia, a in enumerate(self.monomials):
            da = self.degrees[ia]
            for ib, b in enumerate(self.monomials):
                if da + self.degrees[ib] > self.order:
                    continue
                pa.append(ia)
                pb.append(ib)
                pc.append(self.index[tuple(x + y for x, y in zip(a, b))])
        pc = np.array(pc)
        perm = np.argsort(pc, kind="stable")
        self._pair_a = np.array(pa)[perm]
        self._pair_b = np.array(pb)[perm]
        # every target has at least the (0, c) pair, so segment starts are well defined
        self._starts = np.searchsorted(pc[perm], np.arange(self.size))

    def _build_partial_maps(self):
        self._partial_src = []
        self._partial_factor = []
        if self.order == 0:
            return
        lower = self.degree_offsets[self.order]  # monomials of degree <= order - 1
        for var in range(self.dim):
            src, factor = [], []
            for alpha in self.monomials[:lower]:
                beta = list(alpha)
                beta[var] += 1
                src.append(self.index[tuple(beta)])
                factor.append(alpha[var] + 1)
            self._partial_src.append(np.array(src))
            self._partial_factor.append(np.array(factor, dtype=float))

    def __repr__(self):
        return f"JetSpace(dim={self.dim}, order={self.order}, size={self.size})"

    # batched operations on arrays whose last axis holds jet coefficients

    def lower(self, order: int) -> "JetSpace":
        return jet_space(self.dim, order)

    def truncate(self, data: np.ndarray, order: int) -> np.ndarray:
        if order > self.order:
            raise JetOrderError(f"cannot raise jet order {self.order} to {order}")
        return data[..., : self.degree_offsets[order + 1]]

    def constant(self, values) -> np.ndarray:
        values = np.asarray(values, dtype=float)
        data = np.zeros(values.shape + (self.size,))
        data[..., 0] = values
        return data

    def mul(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        """Cauchy product truncated at this space's order, broadcasting leading axes"""
        return np.add.reduceat(a[..., self._pair_a] * b[..., self._pair_b], self._starts, axis=-1)

    def einsum(self, subscripts: str, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        """
        Two-operand einsum over jet-valued arrays

        Args:
            subscripts: tensor-index subscripts such as 'lam,mbk->abkl'; the jet
                axis is implicit
            a, b: jet arrays of this space

        Returns:
            Jet array with the contracted tensor indices
        """
        inputs, output = subscripts.replace(" ", "").split("->")
        sa, sb = inputs.split(",")
        pair = next(ch for ch in "ZYXWVU" if ch not in subscripts)
        product = np.einsum(
            f"{sa}{pair},{sb}{pair}->{output}{pair}",
            a[..., self._pair_a],
            b[..., self._pair_b],
            optimize=True,
        )
        return np.add.reduceat(product, self._starts, axis=-1)

    def div(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        """Solve b * q = a degree by degree"""
        b0 = b[..., 0]
        if np.any(b0 == 0):
            raise JetDomainError("division by a jet with zero constant term", 0.0)
        shape = np.broadcast_shapes(a.shape, b.shape)
        q = np.zeros(shape)
        for degree in range(self.order + 1):
            lo, hi = self.degree_offsets[degree], self.degree_offsets[degree + 1]
            partial_product = self.mul(q, b) if degree else np.zeros(shape)
            q[..., lo:hi] = (a[..., lo:hi] - partial_product[..., lo:hi]) / b0[..., None]
        return q

    def partial(self, data: np.ndarray, var: int) -> np.ndarray:
        """Coordinate derivative d/dx_var; the result lives one order lower"""
        if self.order == 0:
            raise JetOrderError("cannot differentiate an order-0 jet")
        if not 0 <= var < self.dim:
            raise JetShapeError(f"variable index {var} out of range for dim {self.dim}")
        return data[..., self._partial_src[var]] * self._partial_factor[var]

    def gradient(self, data: np.ndarray) -> np.ndarray:
        """First-order coefficients, shape (..., dim)"""
        if self.order == 0:
            raise JetOrderError("order-0 jets carry no gradient")
        return data[..., 1 : 1 + self.dim]


@lru_cache(maxsize=None)
def jet_space(dim: int, order: int) -> JetSpace:
    return JetSpace(dim, order)


class Jet:
    """Immutable scalar jet"""

    __slots__ = ("space", "data")

    def __init__(self, space: JetSpace, data):
        data = np.array(data, dtype=float)
        if data.shape != (space.size,):
            raise JetShapeError(f"expected {space.size} coefficients, got shape {data.shape}")
        data.flags.writeable = False
        self.space = space
        self.data = data

    @property
    def dim(self) -> int:
        return self.space.dim

    @property
    def order(self) -> int:
        return self.space.order

    @property
    def value(self) -> float:
        return float(self.data[0])

    def coefficient(self, alpha: Sequence[int]) -> float:
        alpha = tuple(alpha)
        if len(alpha) != self.dim:
            raise JetShapeError(f"multi-index {alpha} has wrong length for dim {self.dim}")
        if sum(alpha) > self.order:
            return 0.0
        return float(self.data[self.space.index[alpha]])

    def derivative(self, alpha: Sequence[int]) -> float:
        """Raw partial derivative d^alpha f (coefficient times alpha!)"""
        alpha = tuple(alpha)
        return self.coefficient(alpha) * math.prod(math.factorial(e) for e in alpha)

    def coefficient_map(self) -> Dict[MultiIndex, float]:
        return {m: float(c) for m, c in zip(self.space.monomials, self.data)}

    def partial(self, var: int) -> "Jet":
        return Jet(self.space.lower(self.order - 1), self.space.partial(self.data, var))

    def truncate(self, order: int) -> "Jet":
        return Jet(self.space.lower(order), self.space.truncate(self.data, order))

    def gradient(self) -> np.ndarray:
        return np.array(self.space.gradient(self.data))

    def _coerce(self, other) -> "Jet":
        if isinstance(other, Jet):
            if other.space is not self.space:
                raise JetShapeError(
                    f"jet mismatch: (dim {self.dim}, order {self.order}) vs "
                    f"(dim {other.dim}, order {other.order})"
                )
            return other
        if isinstance(other, (int, float, np.floating, np.integer)):
            return jet_const(float(other), self.dim, self.order)
        return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return Jet(self.space, self.data + other.data)

    __radd__ = __add__

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return Jet(self.space, self.data - other.data)

    def __rsub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return Jet(self.space, other.data - self.data)

    def __mul__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return Jet(self.space, self.space.mul(self.data, other.data))

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return Jet(self.space, self.space.div(self.data, other.data))

    def __rtruediv__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return Jet(self.space, self.space.div(other.data, self.data))

    def __neg__(self):
        return Jet(self.space, -self.data)

    def __pos__(self):
        return self

    def __pow__(self, exponent):
        return jet_elementary("pow", self, exponent)

    def __repr__(self):
        return f"Jet(dim={self.dim}, order={self.order}, value={self.value!r})"


def jet_const(c: float, n: int, K: int) -> Jet:
    space = jet_space(n, K)
    return Jet(space, space.constant(c))


def jet_var(i: int, x0: float, n: int, K: int) -> Jet:
    """Coordinate function x_i seeded at x0"""
    if not 0 <= i < n:
        raise JetShapeError(f"coordinate index {i} out of range for dim {n}")
    space = jet_space(n, K)
    data = space.constant(x0)
    if K >= 1:
        data[1 + i] = 1.0
    return Jet(space, data)


def jet_arith(op: str, a: Jet, b: Jet) -> Jet:
    if op == "add":
        return a + b
    if op == "sub":
        return a - b
    if op == "mul":
        return a * b
    if op == "div":
        return a / b
    raise ValueError(f"unknown jet operation '{op}'")


def int_power(base, k: int, one):
    """base**k by binary exponentiation; shared by jet and float evaluation"""
    if k < 0:
        return one / int_power(base, -k, one)
    result = one
    square = base
    while k:
        if k & 1:
            result = result * square
        k >>= 1
        if k:
            square = square * square
    return result


def _is_integral(r) -> bool:
    return float(r).is_integer() and abs(float(r)) < 2**31


def _univariate_series(f: str, a0: float, K: int, r: Optional[float] = None) -> np.ndarray:
    """Taylor coefficients of f about a0, up to degree K"""
    c = np.zeros(K + 1)
    k = np.arange(K + 1)
    fact = np.array([math.factorial(i) for i in range(K + 1)], dtype=float)

    if f == "exp":
        c[:] = math.exp(a0) / fact
    elif f == "log":
        if a0 <= 0:
            raise JetDomainError("log of non-positive value", a0)
        c[0] = math.log(a0)
        c[1:] = (-1.0) ** (k[1:] + 1) / (k[1:] * a0 ** k[1:])
    elif f in ("sin", "cos"):
        s, co = math.sin(a0), math.cos(a0)
        cycle = [s, co, -s, -co] if f == "sin" else [co, -s, -co, s]
        c[:] = [cycle[i % 4] for i in range(K + 1)] / fact
    elif f in ("sinh", "cosh"):
        sh, ch = math.sinh(a0), math.cosh(a0)
        cycle = [sh, ch] if f == "sinh" else [ch, sh]
        c[:] = [cycle[i % 2] for i in range(K + 1)] / fact
    elif f in ("tan", "tanh"):
        if f == "tan" and math.cos(a0) == 0:
            raise JetDomainError("tan at a pole", a0)
        # t' = 1 + t^2 (tan) or 1 - t^2 (tanh)
        sign = 1.0 if f == "tan" else -1.0
        c[0] = math.tan(a0) if f == "tan" else math.tanh(a0)
        for i in range(K):
            conv = float(np.dot(c[: i + 1], c[i::-1]))
            c[i + 1] = ((1.0 if i == 0 else 0.0) + sign * conv) / (i + 1)
    elif f in ("sqrt", "pow"):
        r = 0.5 if f == "sqrt" else float(r)
        if a0 <= 0:
            raise JetDomainError(f"{f} of non-positive value", a0)
        c[0] = math.sqrt(a0) if f == "sqrt" else math.pow(a0, r)
        c[1:] = c[0] * binom(r, k[1:]) / a0 ** k[1:]
    else:
        raise ValueError(f"unknown elementary function '{f}'")
    return c


def jet_elementary(f: str, a: Jet, r: Optional[float] = None) -> Jet:
    """
    Apply an elementary function to a jet

    Args:
        f: one of exp, log, sin, cos, tan, sinh, cosh, tanh, sqrt, pow
        a: argument jet
        r: exponent for pow

    Returns:
        The jet of f(a): univariate series of f about a's value composed with
        (a - value), truncated at a's order
    """
    if f == "pow":
        if r is None:
            raise ValueError("pow needs an exponent")
        if _is_integral(r):
            return int_power(a, int(r), jet_const(1.0, a.dim, a.order))
    coefficients = _univariate_series(f, a.value, a.order, r)
    shifted = a - a.value
    # Horner: the value slot ends up exactly coefficients[0]
    result = jet_const(coefficients[-1], a.dim, a.order)
    for c in coefficients[-2::-1]:
        result = result * shifted + float(c)
    return result
