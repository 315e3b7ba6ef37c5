"""Tests for moments, remainder functionals and moment decompositions."""
import math

import numpy as np
import pytest
from anisoheat.core import DimensionSplit, Grid, GridFunction, MultiIndex
from anisoheat.moments import (
    DecompositionRule,
    DilationRemainder,
    MomentTable,
    SampledFunction,
    TestFunction,
    decomposition_pairing,
    decomposition_table,
    gauss_legendre,
    main_term_indices,
    moment,
    remainder_bounds,
    remainder_F_alpha,
    remainder_F_gamma,
    remainder_R_betagamma,
    taylor_check,
    taylor_split_check,
    verify_decomposition,
    y_moment,
)
from pydantic import ValidationError

SPLIT = DimensionSplit(m=1, n=1)


@pytest.fixture
def gauss2():
    """exp(-|z|^2) on R^2, split as (x, y)."""
    return SampledFunction.gaussian(2, variance=0.5, split=SPLIT)


@pytest.fixture
def zero2():
    return SampledFunction(evaluator=lambda x, y: 0 * x * y, dim=2, radius=4.0, split=SPLIT)


def test_gauss_legendre():
    x, w = gauss_legendre(8)
    assert w.sum() == pytest.approx(1.0)
    assert np.sum(w * x**5) == pytest.approx(1 / 6)
    x, w = gauss_legendre(4, -1.0, 3.0)
    assert x.min() > -1 and x.max() < 3
    assert w.sum() == pytest.approx(4.0)


def test_sampled_function(gauss2):
    assert gauss2.radius == pytest.approx(8 * math.sqrt(0.5))
    assert gauss2(0.0, 0.0) == pytest.approx(1.0)
    assert gauss2(np.zeros(3), 1.0).shape == (3,)
    assert gauss2.sample().grid == gauss2.box_grid()

    half = gauss2.dilated(2.0)
    assert half(0.5, 0.0) == pytest.approx(gauss2(1.0, 0.0))
    assert half.radius == pytest.approx(gauss2.radius / 2)

    unit = SampledFunction.gaussian(1, variance=0.25, center=[1.0], mass=1.0)
    assert moment(unit, MultiIndex.zeros(1)) == pytest.approx(1.0)
    assert moment(unit, MultiIndex.of(1)) == pytest.approx(1.0)

    with pytest.raises(ValueError):
        gauss2(0.0)
    with pytest.raises(ValueError):
        gauss2.dilated(0.0)
    with pytest.raises(ValueError):
        SampledFunction.gaussian(2, center=[1.0])
    with pytest.raises(ValidationError):
        SampledFunction(evaluator=lambda x: x, dim=1, radius=1.0, points=63)
    with pytest.raises(ValidationError):
        SampledFunction(evaluator=lambda x: x, dim=1, radius=1.0, split=SPLIT)


def test_from_grid():
    grid = Grid.cube(1, 6.0, 256)
    gf = GridFunction.from_function(grid, lambda x: np.exp(-(x**2)))
    f = SampledFunction.from_grid(gf)
    assert f.dim == 1 and f.radius == 6.0
    assert f(0.3) == pytest.approx(math.exp(-0.09), abs=1e-6)
    assert f(10.0) == 0.0


def test_moments(gauss2):
    assert moment(gauss2, MultiIndex.of(0, 0)) == pytest.approx(math.pi, abs=1e-8)
    assert moment(gauss2, MultiIndex.of(1, 0)) == pytest.approx(0.0, abs=1e-10)
    assert moment(gauss2, MultiIndex.of(2, 0)) == pytest.approx(math.pi / 2, abs=1e-8)

    table = MomentTable.build(gauss2, [MultiIndex.of(0, 0), MultiIndex.of(0, 2)])
    assert table.order == 2
    assert table[MultiIndex.of(0, 2)] == pytest.approx(math.pi / 2, abs=1e-8)
    assert MultiIndex.of(0, 0) in table
    assert MultiIndex.of(1, 0) not in table
    assert table.indices() == [MultiIndex.of(0, 0), MultiIndex.of(0, 2)]

    heavy = SampledFunction(
        evaluator=lambda x: 1 / (1 + x**2), dim=1, radius=10.0, moment_order=0
    )
    moment(heavy, MultiIndex.of(0))
    with pytest.raises(ValueError):
        moment(heavy, MultiIndex.of(1))
    with pytest.raises(ValueError):
        moment(gauss2, MultiIndex.of(1))


def test_test_function():
    u = TestFunction.from_expr("z1**2*z2 + 1", 2)
    assert u.dim == 2
    assert u(2.0, 3.0) == pytest.approx(13.0)
    assert u(np.array([1.0, 2.0]), 1.0).shape == (2,)
    d = u.derivative(MultiIndex.of(1, 1))
    assert d(5.0, 7.0) == pytest.approx(10.0)
    assert u.derivative(MultiIndex.of(1, 1)) is d  # cached
    assert u.derivative(MultiIndex.zeros(2))(2.0, 3.0) == pytest.approx(13.0)
    with pytest.raises(ValueError):
        u.derivative(MultiIndex.of(1))

    v = TestFunction.polynomial_gaussian(1, {(1,): 2.0}, variance=0.5, center=[1.0])
    assert v(2.0) == pytest.approx(2 * math.exp(-1.0))

    a = TestFunction.random(np.random.default_rng(1), 2)
    b = TestFunction.random(np.random.default_rng(1), 2)
    assert a(0.1, 0.2) == b(0.1, 0.2)

    h = TestFunction.from_expr("theta", 3, heisenberg=True)
    assert [str(s) for s in h.symbols] == ["z1", "z2", "theta"]
    with pytest.raises(ValueError):
        TestFunction.from_expr("z1", 2).apply_field(1)


def test_taylor():
    rng = np.random.default_rng(0)
    poly = TestFunction.from_expr("1 + 2*z1 - z1*z2 + z2**2", 2)
    assert taylor_check(poly, [0.3, -0.7], 2) < 1e-12
    gauss = TestFunction.from_expr("exp(-z1**2 - z2**2)", 2)
    for _ in range(5):
        z = rng.uniform(-1, 1, 2) / 2
        assert taylor_check(gauss, z, 2) < 1e-10
    assert taylor_check(gauss, [0.0, 0.0], 3) == 0.0


def test_taylor_split():
    rng = np.random.default_rng(1)
    split = DimensionSplit(m=2, n=1)
    for k in (0, 1, 2):
        phi = TestFunction.random(rng, 3)
        z = rng.uniform(-0.5, 0.5, 3)
        assert taylor_split_check(phi, z, k, split) < 1e-10
    with pytest.raises(ValueError):
        taylor_split_check(TestFunction.random(rng, 2), [0.0, 0.0], 1, split)


def test_main_terms():
    assert len(main_term_indices(DecompositionRule.isotropic, 2, 2)) == 6
    res = main_term_indices(DecompositionRule.mixed_order, 3, 2, SPLIT)
    assert {a.exponents for a in res} == {(0, 0), (1, 0), (2, 0), (3, 0), (0, 1), (1, 1)}
    with pytest.raises(ValueError):
        main_term_indices(DecompositionRule.mixed_order, 3, 2)


def test_decomposition_table(gauss2):
    table = decomposition_table(gauss2, 2, DecompositionRule.split)
    assert table[MultiIndex.of(0, 0)] == pytest.approx(math.pi)
    # (-1)^2 / 2! * pi/2
    assert table[MultiIndex.of(2, 0)] == pytest.approx(math.pi / 4)
    with pytest.raises(ValueError):
        decomposition_table(gauss2, 2, DecompositionRule.mixed_order)
    nosplit = SampledFunction.gaussian(2)
    with pytest.raises(ValueError):
        decomposition_table(nosplit, 1, DecompositionRule.split)


def test_remainders_of_zero(zero2):
    grid = zero2.box_grid(16)
    assert np.all(remainder_F_alpha(zero2, MultiIndex.of(1, 1), 1).sample(grid).values == 0)
    assert np.all(remainder_F_gamma(zero2, None, MultiIndex.of(2), 1).sample(grid).values == 0)
    rem = remainder_R_betagamma(zero2, None, MultiIndex.of(1), MultiIndex.of(1), 1)
    assert np.all(rem.sample(Grid.cube(1, 4.0, 16)).values == 0)


def test_remainder_index_checks(gauss2):
    with pytest.raises(ValueError):
        remainder_F_alpha(gauss2, MultiIndex.of(1, 0), 1)
    with pytest.raises(ValueError):
        remainder_F_gamma(gauss2, None, MultiIndex.of(1), 1)
    with pytest.raises(ValueError):
        remainder_F_gamma(gauss2, None, MultiIndex.of(1), 2, half=True)
    with pytest.raises(ValueError):
        remainder_R_betagamma(gauss2, None, MultiIndex.of(0), MultiIndex.of(2), 1)
    with pytest.raises(ValueError):
        rule = DecompositionRule.mixed_order
        remainder_R_betagamma(gauss2, None, MultiIndex.of(1), MultiIndex.of(1), 1, rule)
    with pytest.raises(ValueError):
        rule = DecompositionRule.isotropic
        remainder_R_betagamma(gauss2, None, MultiIndex.of(1), MultiIndex.of(1), 1, rule)
    with pytest.raises(ValidationError):
        DilationRemainder.build(
            gauss2, (0,), monomial=MultiIndex.of(0), weight_power=0, coefficient=1, jacobian=1
        )


def test_y_moment(gauss2):
    marginal = y_moment(gauss2, None, MultiIndex.of(0))
    assert marginal.dim == 1
    x = np.linspace(-2, 2, 9)
    assert np.allclose(marginal(x), math.sqrt(math.pi) * np.exp(-(x**2)), atol=1e-8)

    odd = SampledFunction(
        evaluator=lambda x, y: y * np.exp(-(x**2) - y**2), dim=2, radius=6.0, split=SPLIT
    )
    assert np.max(np.abs(y_moment(odd, None, MultiIndex.of(0))(x))) < 1e-14
    rem = remainder_R_betagamma(odd, None, MultiIndex.of(2), MultiIndex.of(0), 1)
    assert np.max(np.abs(rem(x))) < 1e-12


def test_remainder_F_alpha_values():
    # 1-D, k=0: F(x) = -int_0^1 (x/t) f(x/t) dt/t = -int_x^inf f(s) ds for x > 0
    f = SampledFunction.gaussian(1, variance=0.5)
    rem = remainder_F_alpha(f, MultiIndex.of(1), 0)
    x = np.array([0.5, 1.0, -1.0])
    tail = 0.5 * math.sqrt(math.pi) * np.array([math.erfc(0.5), math.erfc(1.0), math.erfc(1.0)])
    assert np.allclose(rem(x), -np.sign(x) * tail, atol=1e-10)


def test_decomposition_examples(gauss2):
    phi = TestFunction.from_expr("z1**2*exp(-z1**2 - z2**2)", 2)
    assert verify_decomposition(gauss2, phi, 1, DecompositionRule.isotropic) < 1e-6

    phi = TestFunction.from_expr("(z1**2 + z2)*exp(-z1**2 - z2**2)", 2)
    assert verify_decomposition(gauss2, phi, 1, DecompositionRule.mixed_order) < 1e-6

    # polynomial test functions of degree <= k are reproduced by the delta-terms
    poly = TestFunction.from_expr("1 + z1 - z1*z2", 2)
    lhs, rhs = decomposition_pairing(gauss2, poly, 2, DecompositionRule.isotropic)
    assert lhs == pytest.approx(math.pi)
    assert abs(lhs - rhs) < 1e-10


@pytest.mark.parametrize(
    "rule, k",
    [
        (DecompositionRule.isotropic, 0),
        (DecompositionRule.isotropic, 2),
        (DecompositionRule.split, 1),
        (DecompositionRule.split, 2),
        (DecompositionRule.mixed_order, 1),
        (DecompositionRule.mixed_order, 3),
    ],
)
def test_decomposition_random(rule, k):
    rng = np.random.default_rng(k)
    for _ in range(2):
        phi = TestFunction.random(rng, 2)
        datum = TestFunction.random(rng, 2)
        f = SampledFunction.from_test_function(datum, 7.0, SPLIT)
        assert verify_decomposition(f, phi, k, rule) < 1e-6


def test_remainder_bounds(gauss2):
    checks = remainder_bounds(gauss2, 1, DecompositionRule.isotropic)
    assert [c.name for c in checks] == ["F_alpha"] * 3
    assert all(c.holds() for c in checks)

    checks = remainder_bounds(gauss2, 1, DecompositionRule.split)
    assert {c.name for c in checks} == {"F_gamma", "[R f]"}
    assert all(c.holds() for c in checks)

    checks = remainder_bounds(gauss2, 1, DecompositionRule.mixed_order)
    assert all(c.holds() for c in checks)

    with pytest.raises(ValueError):
        remainder_bounds(gauss2, 1, DecompositionRule.isotropic, p=2.0)
