"""
Tests for grid parsing, Killing extension and the field CSV
"""

import io
import math

import numpy as np
import pytest

from analysis import GeometryAnalyzer
from errors import GridSpecError
from extension import (
    FieldSample,
    corrupt_sample,
    extend_killing,
    field_columns,
    killing_residual,
    linear_combination,
    parse_grid,
    path_independence,
    read_field_csv,
    write_field_csv,
)
from kostant import KostantElement, canonical_lift, element_norm
from stabilization import stabilize


def exact_sample(chart, field, grid):
    """Canonical lift of a known field evaluated at every node"""
    nodes = grid.nodes()
    n = grid.n
    v = np.zeros((len(nodes), n))
    B = np.zeros((len(nodes), n, n))
    for i, node in enumerate(nodes):
        e = canonical_lift(chart, field, node)
        v[i], B[i] = e.v, e.B
    return FieldSample(grid, v.reshape(grid.shape + (n,)), B.reshape(grid.shape + (n, n)))


def max_deviation(a: FieldSample, b: FieldSample) -> float:
    return float(max(np.max(np.abs(a.v - b.v)), np.max(np.abs(a.B - b.B))))


def test_parse_grid():
    grid = parse_grid("[-1,1]x[-1,1]:9x9", 2)
    assert grid.axes == ((-1.0, 1.0, 9), (-1.0, 1.0, 9))
    assert grid.shape == (9, 9)
    assert grid.cell(0) == pytest.approx(0.25)
    nodes = grid.nodes()
    assert nodes.shape == (81, 2)
    np.testing.assert_array_equal(nodes[1], [-1.0, -0.75])

    assert parse_grid("[0.5, 2]x[0,3.14]:3x4").shape == (3, 4)


@pytest.mark.parametrize("text", ["[-1,1]x[-1,1]", "[-1,1]x[-1,1]:9", "[1,-1]x[0,1]:3x3", "[a,1]x[0,1]:3x3", "[0,1]:0"])
def test_bad_grids(text):
    with pytest.raises(GridSpecError):
        parse_grid(text)


def test_grid_dimension_must_match():
    with pytest.raises(GridSpecError):
        parse_grid("[0,1]:3", 2)


def test_rotation_extends_exactly_on_the_plane(chart):
    c = chart("euclid2")
    grid = parse_grid("[-1,1]x[-1,1]:5x5", 2)
    e0 = canonical_lift(c, ("-y", "x"), [1.0, 0.0])
    sample = extend_killing(c, [1.0, 0.0], e0, grid, steps_per_cell=5)
    assert max_deviation(sample, exact_sample(c, ("-y", "x"), grid)) < 1e-10


def test_sphere_rotation_extends(chart):
    c = chart("sphere")
    grid = parse_grid("[0.8,2.2]x[-1,1]:5x5", 2)
    base = [math.pi / 3, 0.0]
    sample = extend_killing(c, base, canonical_lift(c, ("0", "1"), base), grid, steps_per_cell=50)
    assert max_deviation(sample, exact_sample(c, ("0", "1"), grid)) < 1e-7


def test_bump_extension(chart):
    c = chart("bump")
    analyzer = GeometryAnalyzer(c)
    report = stabilize(c, [0.0, 0.0])
    assert len(report.stable_basis) == 1
    e0 = report.stable_basis[0]
    np.testing.assert_allclose(e0.v, [0.0, 1.0], atol=1e-8)

    grid = parse_grid("[-1,1]x[-1,1]:9x9", 2)
    sample = extend_killing(c, [0.0, 0.0], e0, grid, steps_per_cell=50)
    np.testing.assert_allclose(sample.v[..., 0], 0.0, atol=1e-7)
    np.testing.assert_allclose(sample.v[..., 1], 1.0, atol=1e-7)

    residual = killing_residual(c, sample, analyzer.invariant_gradients)
    assert residual.max_sym_residual < 1e-5
    assert residual.max_tangency_residual < 1e-6
    # the tangency check is not vacuous: the invariants do vary across the grid
    assert np.max(np.abs(analyzer.invariant_gradients([0.75, 0.0]))) > 1e-1

    corrupted = killing_residual(c, corrupt_sample(sample))
    assert corrupted.max_sym_residual > 1e-2


def test_exact_field_has_no_residual(chart):
    c = chart("euclid2")
    grid = parse_grid("[-1,1]x[-1,1]:4x4", 2)
    residual = killing_residual(c, exact_sample(c, ("-y", "x"), grid))
    assert residual.max_sym_residual < 1e-9
    assert residual.max_tangency_residual == 0.0


def test_residual_needs_interior_nodes(chart):
    c = chart("euclid2")
    grid = parse_grid("[-1,1]x[-1,1]:2x4", 2)
    with pytest.raises(GridSpecError):
        killing_residual(c, exact_sample(c, ("1", "0"), grid))


def test_path_independence(chart):
    assert path_independence(chart("euclid2"), [0.0, 0.0], KostantElement(np.array([1.0, 0.5]), np.array([[0.0, -2.0], [2.0, 0.0]])), [1.0, 1.0]) < 1e-10

    sphere = chart("sphere")
    base = [1.0, 0.0]
    assert path_independence(sphere, base, canonical_lift(sphere, ("0", "1"), base), [1.8, 1.2]) < 1e-7

    bump = chart("bump")
    generic = KostantElement(np.array([1.0, 0.0]), np.zeros((2, 2)))
    assert path_independence(bump, [1.0, 0.0], generic, [1.5, 0.5]) > 1e-3
    stable = stabilize(bump, [1.0, 0.0]).stable_basis[0]
    assert path_independence(bump, [1.0, 0.0], stable, [1.5, 0.5]) < 1e-6


def test_extension_is_linear(chart, rng):
    c = chart("bump")
    grid = parse_grid("[0,1]x[0,1]:3x3", 2)
    base = [0.5, 0.5]
    e0 = KostantElement(rng.normal(size=2), np.array([[0.0, 1.0], [-0.3, 0.0]]))
    e1 = KostantElement(rng.normal(size=2), np.array([[0.0, -2.0], [0.6, 0.0]]))
    alpha, beta = 0.7, -1.3
    combined = extend_killing(c, base, alpha * e0 + beta * e1, grid, steps_per_cell=10)
    separate = linear_combination(
        [extend_killing(c, base, e0, grid, steps_per_cell=10), extend_killing(c, base, e1, grid, steps_per_cell=10)],
        [alpha, beta],
    )
    assert max_deviation(combined, separate) < 1e-10


def test_field_csv(chart):
    c = chart("euclid2")
    grid = parse_grid("[-1,1]x[0,2]:3x3", 2)
    sample = exact_sample(c, ("-y", "x"), grid)
    sample = FieldSample(grid, sample.v / 3.0, sample.B / 7.0)
    buffer = io.StringIO()
    write_field_csv(sample, buffer)
    text = buffer.getvalue()
    assert text.splitlines()[0] == ",".join(field_columns(2))
    assert field_columns(2) == ["coord_1", "coord_2", "v_1", "v_2", "B_11", "B_12", "B_21", "B_22"]
    assert len(text.splitlines()) == 10

    restored = read_field_csv(io.StringIO(text))
    assert restored.grid == grid
    np.testing.assert_array_equal(restored.v, sample.v)
    np.testing.assert_array_equal(restored.B, sample.B)


def test_translation_field_is_constant(chart):
    e0 = canonical_lift(chart("euclid2"), ("1", "0"), [0.0, 0.0])
    grid = parse_grid("[0,1]x[0,1]:3x3", 2)
    sample = extend_killing(chart("euclid2"), [0.0, 0.0], e0, grid, steps_per_cell=1)
    assert element_norm(sample.element_at((2, 2)) - e0) < 1e-14
