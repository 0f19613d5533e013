"""
Tests for truncated Taylor arithmetic
"""

import math

import numpy as np
import pytest

from errors import JetDomainError, JetOrderError, JetShapeError
from jets import Jet, int_power, jet_const, jet_elementary, jet_space, jet_var


def random_jet(rng, n, K, value=None):
    space = jet_space(n, K)
    data = rng.uniform(-1.0, 1.0, space.size)
    if value is not None:
        data[0] = value
    return Jet(space, data)


def test_constant_and_variable():
    c = jet_const(2.5, 2, 3)
    assert c.value == 2.5
    assert np.all(c.data[1:] == 0)

    x = jet_var(1, 0.7, 2, 3)
    assert x.value == 0.7
    assert x.coefficient((0, 1)) == 1.0
    assert x.coefficient((1, 0)) == 0.0
    assert x.coefficient((0, 2)) == 0.0


def test_order_zero_jets_are_values():
    x = jet_var(0, 3.0, 1, 0)
    assert x.data.shape == (1,)
    assert (x * x).value == 9.0
    with pytest.raises(JetOrderError):
        x.gradient()


def test_univariate_products_and_quotients():
    x = jet_var(0, 0.0, 1, 2)
    np.testing.assert_allclose(((1 + x) * (1 + x)).data, [1.0, 2.0, 1.0])
    np.testing.assert_allclose((1 / (1 + x)).data, [1.0, -1.0, 1.0])


def test_sin_series_at_zero():
    x = jet_var(0, 0.0, 1, 3)
    np.testing.assert_allclose(jet_elementary("sin", x).data, [0.0, 1.0, 0.0, -1.0 / 6.0], atol=1e-16)
    assert jet_elementary("exp", jet_const(0.0, 1, 3)).value == 1.0


def test_ring_laws(rng):
    a, b, c = (random_jet(rng, 3, 3) for _ in range(3))
    np.testing.assert_allclose((a * b).data, (b * a).data, rtol=1e-14, atol=1e-15)
    np.testing.assert_allclose(((a * b) * c).data, (a * (b * c)).data, rtol=1e-13, atol=1e-14)
    np.testing.assert_allclose((a * (b + c)).data, (a * b + a * c).data, rtol=1e-13, atol=1e-14)


def test_division_undoes_multiplication(rng):
    a = random_jet(rng, 2, 4)
    b = random_jet(rng, 2, 4, value=3.0)
    np.testing.assert_allclose(((a * b) / b).data, a.data, rtol=1e-12, atol=1e-13)


def test_integer_power_matches_repeated_product():
    x = jet_var(0, 1.3, 2, 3) + jet_var(1, -0.4, 2, 3)
    np.testing.assert_allclose((x ** 3).data, (x * x * x).data, rtol=1e-14)
    np.testing.assert_allclose((x ** -2).data, (1 / (x * x)).data, rtol=1e-13)
    assert int_power(1.5, 3, 1.0) == 1.5 * 1.5 * 1.5


def test_partials_of_sin_xy_match_finite_differences():
    point = (0.7, 1.3)

    def f(x, y):
        return math.sin(x * y)

    def jet_at(p):
        x = jet_var(0, p[0], 2, 2)
        y = jet_var(1, p[1], 2, 2)
        return jet_elementary("sin", x * y)

    jet = jet_at(point)
    h = 1e-5
    fd_x = (f(point[0] + h, point[1]) - f(point[0] - h, point[1])) / (2 * h)
    fd_y = (f(point[0], point[1] + h) - f(point[0], point[1] - h)) / (2 * h)
    assert jet.derivative((1, 0)) == pytest.approx(fd_x, abs=1e-7)
    assert jet.derivative((0, 1)) == pytest.approx(fd_y, abs=1e-7)

    # second partials against differences of the exact first partials
    for var, unit in ((0, (h, 0.0)), (1, (0.0, h))):
        plus = jet_at((point[0] + unit[0], point[1] + unit[1])).gradient()
        minus = jet_at((point[0] - unit[0], point[1] - unit[1])).gradient()
        column = (plus - minus) / (2 * h)
        for other in range(2):
            alpha = [0, 0]
            alpha[var] += 1
            alpha[other] += 1
            assert jet.derivative(alpha) == pytest.approx(column[other], abs=1e-7)


def test_truncation_commutes_with_evaluation():
    def build(K):
        x = jet_var(0, 0.4, 2, K)
        y = jet_var(1, -1.1, 2, K)
        return jet_elementary("exp", jet_elementary("sin", x * y)) / (2 + x * x) + jet_elementary("log", 3 + y)

    high = build(5).truncate(2)
    low = build(2)
    np.testing.assert_array_equal(high.data, low.data)


def test_partial_and_coefficient_map():
    x = jet_var(0, 2.0, 2, 3)
    y = jet_var(1, 1.0, 2, 3)
    f = x * x * y
    df_dx = f.partial(0)
    assert df_dx.order == 2
    assert df_dx.value == pytest.approx(4.0)
    assert f.derivative((2, 1)) == pytest.approx(2.0)
    assert f.coefficient_map()[(1, 1)] == pytest.approx(4.0)


def test_shape_and_domain_errors():
    with pytest.raises(JetShapeError):
        jet_const(1.0, 2, 2) + jet_const(1.0, 2, 3)
    with pytest.raises(JetShapeError):
        jet_var(2, 0.0, 2, 1)
    with pytest.raises(JetDomainError) as excinfo:
        jet_elementary("sqrt", jet_const(-1.0, 1, 2))
    assert excinfo.value.value == -1.0
    with pytest.raises(JetDomainError):
        jet_elementary("log", jet_const(0.0, 1, 2))
    with pytest.raises(JetDomainError):
        jet_const(1.0, 1, 2) / jet_const(0.0, 1, 2)
