"""
Tests for the stabilization filtration and the Killing algebra dimension
"""

import numpy as np
import pytest

from analysis import GeometryAnalyzer
from errors import TowerDepthError
from kostant import KostantElement, is_skew
from stabilization import (
    constraint_matrix,
    derivation_action,
    flatness_check,
    from_parameters,
    parallelness_check,
    parameter_basis,
    propagation_check,
    stabilize,
    to_parameters,
)
from tensor_engine import LOWER, UPPER, Tensor, connection_data, curvature_tower
from weyl import cohomogeneity_at, enumerate_patterns

MAXIMALLY_SYMMETRIC = [
    ("euclid2", [0.3, -0.2], 3),
    ("polar", [2.0, 0.5], 3),
    ("sphere", [1.0472, 0.0], 3),
    ("hyperbolic", [0.5, 1.5], 3),
    ("euclid3", [0.1, 0.2, 0.3], 6),
    ("sphere3", [1.0, 1.2, 0.3], 6),
]


def test_parameter_basis_is_skew():
    g = np.array([[2.0, 0.3], [0.3, 1.5]])
    basis = parameter_basis(g)
    assert basis.dim == 3
    for element in basis.elements[2:]:
        assert is_skew(element.B, g, 1e-13)
    theta = np.array([0.4, -1.2, 0.7])
    np.testing.assert_allclose(to_parameters(basis, from_parameters(basis, theta)), theta, atol=1e-13)


def test_derivation_action():
    g = np.array([[2.0, 0.3], [0.3, 1.5]])
    basis = parameter_basis(g)
    B = basis.elements[2].B
    metric = Tensor((LOWER, LOWER), g)
    np.testing.assert_allclose(derivation_action(B, metric).components, 0.0, atol=1e-14)
    wedge = np.einsum("ac,bd->abcd", g, g) - np.einsum("ad,bc->abcd", g, g)
    np.testing.assert_allclose(derivation_action(B, Tensor((LOWER,) * 4, wedge)).components, 0.0, atol=1e-13)

    vector = Tensor((UPPER,), np.array([1.0, 2.0]))
    np.testing.assert_allclose(derivation_action(B, vector).components, B @ vector.components)
    np.testing.assert_array_equal(derivation_action(np.zeros((2, 2)), metric).components, np.zeros((2, 2)))


def test_constraint_matrices(chart):
    M = constraint_matrix(chart("euclid2"), [0.1, 0.1], 0)
    assert M.shape[1] == 3
    assert np.all(M == 0)
    assert np.max(np.abs(constraint_matrix(chart("sphere"), [1.0, 0.3], 0))) < 1e-10


def test_bump_level_zero(chart):
    point = [1.0, 0.0]
    bump = chart("bump")
    tower = curvature_tower(bump, point, 1)
    basis = parameter_basis(connection_data(bump, point).g, point)
    M = constraint_matrix(bump, point, 0, tower, basis)
    _, s, vh = np.linalg.svd(M)
    kernel = vh[np.sum(s > 1e-8):]
    assert kernel.shape[0] == 2
    # no kernel element moves in the x direction
    np.testing.assert_allclose(kernel[:, 0], 0.0, atol=1e-10)


@pytest.mark.parametrize("name, point, killing_dim", MAXIMALLY_SYMMETRIC)
def test_maximally_symmetric_charts(chart, name, point, killing_dim):
    report = stabilize(chart(name), point)
    assert report.dims == [killing_dim, killing_dim]
    assert report.singer_invariant == 0
    assert report.killing_dim == killing_dim
    assert report.orbit_dim == chart(name).n
    assert report.homogeneous
    assert len(report.stable_basis) == killing_dim


def test_bump_has_one_killing_field(chart):
    report = stabilize(chart("bump"), [1.0, 0.0])
    assert report.dims[0] == 2
    assert report.killing_dim == 1
    assert report.orbit_dim == 1
    assert report.isotropy_dim == 0
    assert not report.homogeneous
    assert all(a >= b for a, b in zip(report.dims, report.dims[1:]))
    assert report.orbit_dim + report.isotropy_dim == report.dims[report.singer_invariant]
    v = report.stable_basis[0].v
    assert abs(v[0]) < 1e-8 and abs(v[1]) > 0.1


def test_bump_at_random_points(chart, rng):
    """Generic points stay off the critical line x = 0, which has its own test"""
    for _ in range(10):
        point = [rng.uniform(0.3, 1.5) * rng.choice([-1.0, 1.0]), rng.uniform(-1.0, 1.0)]
        report = stabilize(chart("bump"), point)
        assert report.killing_dim == 1
        assert not report.homogeneous


def test_bump_on_its_critical_line(chart):
    # dK vanishes at x = 0, so the filtration needs extra levels to shrink
    for y in (0.0, 0.6):
        report = stabilize(chart("bump"), [0.0, y])
        assert report.killing_dim == 1
        assert report.singer_invariant > 0
        assert report.dims[0] == 3
        assert not report.homogeneous


STRETCHED_BUMP = (
    "dim = 2",
    "coords = x y",
    "g 0 0 = 1",
    "g 1 1 = (1 + (x/1000)^2)^2",
)


def test_slowly_varying_curvature_is_not_mistaken_for_noise(chart_text):
    c = chart_text(*STRETCHED_BUMP)
    point = [1000.0, 0.0]
    report = stabilize(c, point)
    # level 0 singular values are of order 1e-8, far above roundoff at this scale
    assert report.dims[0] == 2
    assert report.killing_dim == 1
    assert report.orbit_dim == 1
    assert not report.homogeneous
    v = report.stable_basis[0].v
    assert abs(v[0]) < 1e-8 and abs(v[1]) > 0.1

    result = cohomogeneity_at(c, point, enumerate_patterns(2, 1, 8))
    assert result.codim == 1
    assert not result.singular_flag


def test_tower_depth_cap(chart):
    with pytest.raises(TowerDepthError):
        stabilize(chart("bump"), [1.0, 0.0], tower_depth=1)


def test_stable_space_checks(chart):
    X, Y = [1.0, 0.0], [0.0, 1.0]
    for name, point in (("euclid2", [0.3, -0.2]), ("sphere", [1.0, 0.3]), ("bump", [1.0, 0.0])):
        report = stabilize(chart(name), point)
        assert flatness_check(chart(name), point, report, X, Y) < 1e-8

    sphere = stabilize(chart("sphere"), [1.0, 0.3])
    assert parallelness_check(chart("sphere"), [1.0, 0.3], sphere, X) < 1e-9

    bump = stabilize(chart("bump"), [1.0, 0.0])
    assert parallelness_check(chart("bump"), [1.0, 0.0], bump, Y) < 1e-6
    assert propagation_check(chart("bump"), [1.0, 0.0], bump, X, level=0) < 1e-6


def test_stable_elements_are_killing_lifts(chart):
    report = stabilize(chart("sphere"), [1.0, 0.3])
    g = connection_data(chart("sphere"), [1.0, 0.3]).g
    for e in report.stable_basis:
        assert isinstance(e, KostantElement)
        assert is_skew(e.B, g, 1e-10)


MODEL_POINTS = [
    ("euclid2", [0.3, -0.2], 0),
    ("euclid3", [0.1, 0.2, 0.3], 0),
    ("polar", [2.0, 0.5], 0),
    ("sphere", [1.0472, 0.0], 0),
    ("hyperbolic", [0.5, 1.5], 0),
    ("bump", [1.0, 0.0], 1),
    ("sphere3", [1.0, 1.2, 0.3], 0),
]


@pytest.mark.parametrize("name, point, cohomogeneity", MODEL_POINTS)
def test_orbits_fill_the_invariant_level_sets(chart, name, point, cohomogeneity):
    c = chart(name)
    report = GeometryAnalyzer(c).analyze(point)
    assert report.cohomogeneity == cohomogeneity
    assert not report.cohomogeneity_singular
    assert report.orbit_dim == c.n - report.cohomogeneity
    assert report.residuals["flatness"] < 1e-8
    assert report.residuals["parallelness"] < 1e-6
