"""Tests for anisoheat core types."""
import math

import numpy as np
import pytest
from anisoheat.core import (
    DimensionSplit,
    Grid,
    GridFunction,
    MultiIndex,
    NumericConsistencyError,
    WeightKind,
    WeightSpec,
    check_real,
    multi_indices,
    multi_indices_upto,
)
from hypothesis import given
from hypothesis import strategies as st
from pydantic import ValidationError


def test_multi_index():
    a = MultiIndex.of(2, 0, 1)
    assert a.dim == 3
    assert a.order() == 3
    assert a.factorial() == 2
    assert str(a) == "(2,0,1)"

    beta, gamma = a.split(1)
    assert beta == MultiIndex.of(2)
    assert gamma == MultiIndex.of(0, 1)
    assert beta.concat(gamma) == a
    assert a.plus(MultiIndex.unit(3, 1)) == MultiIndex.of(2, 1, 1)
    assert MultiIndex.zeros(2).order() == 0

    # usable as dict key
    assert {a: 1}[MultiIndex.of(2, 0, 1)] == 1

    with pytest.raises(ValidationError):
        MultiIndex.of(1, -1)
    with pytest.raises(ValueError):
        a.plus(MultiIndex.zeros(2))

    x, y = np.array([2.0]), np.array([3.0])
    assert MultiIndex.of(2, 1).monomial([x, y])[0] == 12.0
    with pytest.raises(ValueError):
        MultiIndex.of(2, 1).monomial([x])


def test_multi_indices_enumeration():
    assert [a.exponents for a in multi_indices(2, 2)] == [(2, 0), (1, 1), (0, 2)]
    assert multi_indices(0, 0) == [MultiIndex(exponents=())]
    assert multi_indices(0, 1) == []
    assert multi_indices(2, -1) == []

    upto = multi_indices_upto(2, 2)
    assert [a.order() for a in upto] == [0, 1, 1, 2, 2, 2]


@given(st.integers(1, 4), st.integers(0, 5))
def test_multi_indices_count(dim, order):
    res = multi_indices(dim, order)
    assert len(res) == math.comb(order + dim - 1, dim - 1)
    assert len(set(res)) == len(res)
    assert all(a.order() == order and a.dim == dim for a in res)


def test_dimension_split():
    split = DimensionSplit(m=2, n=1)
    assert split.N == 3
    assert split.x_axes() == (0, 1)
    assert split.y_axes() == (2,)
    with pytest.raises(ValidationError):
        DimensionSplit(m=0, n=1)


def test_grid():
    grid = Grid.cube(1, 4.0, 8)
    assert grid.spacing == (1.0,)
    assert grid.cell_volume == 1.0
    assert list(grid.axes()[0]) == [-4, -3, -2, -1, 0, 1, 2, 3]
    assert grid.axes()[0][grid.origin_index()[0]] == 0

    grid = Grid(extents=(2.0, 8.0), points=(8, 16))
    assert grid.shape == (8, 16)
    assert grid.node_count == 128
    assert grid.scaled([2, 0.5]).extents == (4.0, 4.0)
    assert grid.sub([1]) == Grid.cube(1, 8.0, 16)
    assert grid.frequencies()[0][1] == pytest.approx(2 * np.pi / 4.0)

    with pytest.raises(ValidationError):
        Grid(extents=(1.0,), points=(7,))  # odd
    with pytest.raises(ValidationError):
        Grid(extents=(1.0,), points=(4,))  # too few
    with pytest.raises(ValidationError):
        Grid(extents=(-1.0,), points=(8,))
    with pytest.raises(ValidationError):
        Grid(extents=(1.0, 1.0), points=(8,))
    with pytest.raises(ValueError):
        grid.scaled([1.0])


def test_grid_function():
    grid = Grid.cube(2, 1.0, 8)
    gf = GridFunction.from_function(grid, lambda x, y: x + 0 * y)
    assert gf.values.shape == (8, 8)

    # samples are frozen
    with pytest.raises(ValueError):
        gf.values[0, 0] = 1.0
    with pytest.raises(TypeError):
        gf.values = np.zeros((8, 8))

    one = GridFunction.from_function(grid, lambda x, y: 1.0)
    assert np.all((gf + one).values == gf.values + 1)
    assert np.all((2 * gf - gf).values == gf.values)
    assert np.all((-gf).values == -gf.values)

    with pytest.raises(ValidationError):
        GridFunction(grid=grid, values=np.zeros((8, 4)))
    with pytest.raises(ValueError):
        gf + GridFunction.from_function(Grid.cube(2, 2.0, 8), lambda x, y: 1.0)


def test_check_real():
    assert np.all(check_real(np.array([1.0 + 1e-14j]), "x") == np.array([1.0]))
    with pytest.raises(NumericConsistencyError):
        check_real(np.array([1.0 + 1e-3j]), "x")


def test_weights():
    grid = Grid.cube(2, 4.0, 8)
    split = DimensionSplit(m=1, n=1)
    assert np.all(WeightSpec.unit().evaluate(grid) == 1)

    r = WeightSpec.radial(2).evaluate(grid)
    x, y = grid.mesh()
    assert np.allclose(r, x**2 + y**2)
    assert np.allclose(WeightSpec.split_power(split, 1, 2).evaluate(grid), np.abs(x) * y**2)
    assert np.allclose(WeightSpec.additive(split, 2, 1).evaluate(grid), 1 + x**2 + np.abs(y))

    with pytest.raises(ValidationError):
        WeightSpec(kind=WeightKind.split, a=1)  # needs split
    with pytest.raises(ValidationError):
        WeightSpec.radial(-1)
    with pytest.raises(ValueError):
        WeightSpec.additive(DimensionSplit(m=2, n=1), 1, 1).evaluate(grid)
