"""
Tests for the Kostant connection, its curvature and parallel transport
"""

import math

import numpy as np
import pytest

from errors import TransportError
from kostant import (
    KostantElement,
    SectionJet,
    affine_jacobi_residual,
    bundle_curvature,
    canonical_lift,
    connection_apply,
    element_norm,
    holonomy_defect,
    is_skew,
    parallel_transport,
    section_jet_from_field,
)
from tensor_engine import connection_data

KILLING_FIELDS = [
    ("euclid2", ("-y", "x"), [(1.0, 0.0), (0.3, -0.8)]),
    ("euclid2", ("1", "0"), [(0.2, 0.5)]),
    ("sphere", ("0", "1"), [(1.0, 0.3), (2.2, -1.0)]),
    ("sphere", ("sin(ph)", "cos(th)/sin(th)*cos(ph)"), [(1.0, 0.3), (0.7, 2.0)]),
    ("sphere", ("cos(ph)", "-cos(th)/sin(th)*sin(ph)"), [(1.3, -0.4)]),
    ("hyperbolic", ("1", "0"), [(0.3, 1.2)]),
    ("hyperbolic", ("x", "y"), [(0.3, 1.2), (-0.5, 0.6)]),
    ("hyperbolic", ("x^2 - y^2", "2*x*y"), [(0.3, 1.2)]),
    ("bump", ("0", "1"), [(1.0, 0.0), (-0.6, 0.9)]),
]


def random_element(rng, g):
    n = g.shape[0]
    S = rng.normal(size=(n, n))
    return KostantElement(rng.normal(size=n), np.linalg.solve(g, S - S.T))


def test_rotation_lift_on_the_plane(chart):
    e = canonical_lift(chart("euclid2"), ("-y", "x"), [1.0, 0.0])
    np.testing.assert_allclose(e.v, [0.0, 1.0])
    np.testing.assert_allclose(e.B, [[0.0, -1.0], [1.0, 0.0]])

    dilation = canonical_lift(chart("euclid2"), ("x", "y"), [0.4, -0.2])
    np.testing.assert_allclose(dilation.B, 0.0, atol=1e-15)


def test_lifts_are_skew(chart):
    e = canonical_lift(chart("sphere"), ("0", "1"), [math.pi / 3, 0.0])
    g = connection_data(chart("sphere"), [math.pi / 3, 0.0]).g
    assert is_skew(e.B, g, 1e-12)


@pytest.mark.parametrize("name, field, points", KILLING_FIELDS)
def test_killing_lifts_are_parallel(chart, name, field, points):
    c = chart(name)
    for point in points:
        section = section_jet_from_field(c, field, point)
        for X in np.eye(c.n):
            assert element_norm(connection_apply(c, section, X)) < 1e-9
            assert affine_jacobi_residual(c, field, point, X) < 1e-9


def test_constant_section_on_the_plane(chart):
    c = chart("euclid2")
    section = SectionJet((0.0, 0.0), KostantElement(np.array([1.0, 2.0]), np.zeros((2, 2))), np.zeros((2, 2)), np.zeros((2, 2, 2)))
    result = connection_apply(c, section, [0.3, 0.7])
    assert element_norm(result) == 0.0


def test_non_killing_field(chart):
    c = chart("euclid2")
    section = section_jet_from_field(c, ("x^2", "0"), [1.0, 0.0])
    np.testing.assert_allclose(section.value.B, 0.0, atol=1e-15)
    result = connection_apply(c, section, [1.0, 0.0])
    np.testing.assert_allclose(result.v, [2.0, 0.0])
    np.testing.assert_allclose(result.B, 0.0, atol=1e-14)


def test_bundle_curvature_of_symmetric_spaces(chart, rng):
    for name in ("euclid2", "sphere", "hyperbolic"):
        c = chart(name)
        point = [1.0, 0.8]
        g = connection_data(c, point).g
        for _ in range(3):
            curvature = bundle_curvature(c, point, [1.0, 0.0], [0.0, 1.0], random_element(rng, g))
            np.testing.assert_array_equal(curvature.v, np.zeros(2))
            np.testing.assert_allclose(curvature.B, 0.0, atol=1e-9)


def test_bundle_curvature_of_the_bump(chart):
    c = chart("bump")
    e = KostantElement(np.array([1.0, 0.0]), np.zeros((2, 2)))
    curvature = bundle_curvature(c, [1.0, 0.0], [1.0, 0.0], [0.0, 1.0], e)
    assert element_norm(curvature) > 1e-3
    killing = canonical_lift(c, ("0", "1"), [1.0, 0.0])
    assert element_norm(bundle_curvature(c, [1.0, 0.0], [1.0, 0.0], [0.0, 1.0], killing)) < 1e-9


def test_transport_on_the_plane(chart, rng):
    c = chart("euclid2")
    e0 = random_element(rng, np.eye(2))
    back = parallel_transport(c, [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 0.0]], e0, 10)
    assert element_norm(back - e0) < 1e-12

    rotation = canonical_lift(c, ("-y", "x"), [1.0, 0.0])
    moved = parallel_transport(c, [[1.0, 0.0], [1.0, 1.0], [0.0, 1.0]], rotation, 20)
    np.testing.assert_allclose(moved.v, [-1.0, 0.0], atol=1e-12)
    np.testing.assert_allclose(moved.B, rotation.B, atol=1e-12)


def test_killing_lift_transports_to_itself(chart):
    c = chart("sphere")
    start, end = [math.pi / 3, 0.0], [math.pi / 2, 0.0]
    moved = parallel_transport(c, [start, end], canonical_lift(c, ("0", "1"), start), 100)
    assert element_norm(moved - canonical_lift(c, ("0", "1"), end)) < 1e-8


def test_closed_loops_return(chart, rng):
    loop = [[1.0, 0.2], [1.4, 0.2], [1.4, 0.7], [1.0, 0.7], [1.0, 0.2]]
    for name in ("euclid2", "sphere"):
        c = chart(name)
        e0 = random_element(rng, connection_data(c, loop[0]).g)
        back = parallel_transport(c, loop, e0, 50)
        assert element_norm(back - e0) < 1e-6


def test_holonomy_recovers_bundle_curvature(chart):
    c = chart("bump")
    point = [1.0, 0.0]
    X, Y = [1.0, 0.0], [0.0, 1.0]
    e = KostantElement(np.array([1.0, 0.0]), np.zeros((2, 2)))
    curvature = bundle_curvature(c, point, X, Y, e)
    errors = []
    for h in (0.1, 0.05, 0.025):
        defect = holonomy_defect(c, point, X, Y, h, e, steps_per_segment=20)
        errors.append(element_norm(defect - curvature * (h * h)))
    orders = [math.log2(errors[i] / errors[i + 1]) for i in range(2)]
    assert min(orders) >= 2.9


def test_transport_errors(chart):
    c = chart("sphere")
    e0 = KostantElement.zero(2)
    with pytest.raises(TransportError):
        parallel_transport(c, [[1.0, 0.0], [1.2, 0.0]], e0, 0)
    with pytest.raises(TransportError):
        parallel_transport(chart("hyperbolic"), [[0.0, 1.0], [0.0, -0.5]], e0, 10)
