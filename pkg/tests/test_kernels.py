"""Tests for the fundamental solutions."""
import math

import numpy as np
import pytest
from anisoheat.core import DimensionSplit, Grid, MultiIndex
from anisoheat.kernels import (
    KernelFamily,
    KernelSpec,
    SigmaQuadrature,
    default_kernel_grid,
    derivative_decay_check,
    derivative_multiplier,
    fft_convolve,
    field_decay_check,
    field_symbol_terms,
    gaussian_kernel,
    heisenberg_kernel,
    heisenberg_kernel_derivative,
    heisenberg_kernel_grid,
    heisenberg_kernel_rtheta,
    heisenberg_kernel_t,
    kernel_derivative,
    mixed_kernel,
    sigma_factors,
)
from anisoheat.norms import quad_integral
from pydantic import ValidationError

ISO1 = KernelSpec.isotropic(1)
MIXED = KernelSpec.mixed(1, 1)
ZERO1 = MultiIndex.zeros(1)


def test_kernel_spec():
    assert ISO1.dim == 1 and ISO1.is_fft
    assert MIXED.dim == 2
    assert MIXED.scaling_exponents() == (0.25, 0.5)
    assert MIXED.prefactor_exponent() == 0.75
    h = KernelSpec.heisenberg(2)
    assert h.dim == 5 and not h.is_fft
    assert h.scaling_exponents() == (0.5,) * 4 + (1.0,)
    assert KernelSpec.isotropic(2, DimensionSplit(m=1, n=1)).split.m == 1

    with pytest.raises(ValidationError):
        KernelSpec(family=KernelFamily.mixed, dim=2)
    with pytest.raises(ValidationError):
        KernelSpec.isotropic(3, DimensionSplit(m=1, n=1))
    with pytest.raises(ValueError):
        h.symbol(Grid.cube(5, 1.0, 8), 1.0)
    with pytest.raises(ValueError):
        ISO1.symbol(Grid.cube(1, 1.0, 8), 0.0)


def test_gaussian_kernel():
    grid = default_kernel_grid(ISO1, 1.0)
    g = gaussian_kernel(grid, 1.0)
    assert quad_integral(g) == pytest.approx(1.0, abs=1e-8)
    assert g.values[grid.origin_index()] == pytest.approx((4 * np.pi) ** -0.5)
    assert g.values[grid.origin_index()] == pytest.approx(0.28209, abs=1e-5)

    # the FFT kernel agrees with the closed form
    fft = kernel_derivative(ISO1, ZERO1, MultiIndex.zeros(0), 1.0, grid)
    assert np.max(np.abs(fft.values - g.values)) < 1e-10

    # semigroup G_s * G_t = G_(s+t)
    grid = Grid.cube(1, 24.0, 256)
    conv = fft_convolve(gaussian_kernel(grid, 1.0), gaussian_kernel(grid, 2.0))
    assert np.max(np.abs(conv.values - gaussian_kernel(grid, 3.0).values)) < 1e-8

    with pytest.raises(ValueError):
        gaussian_kernel(grid, -1.0)


def test_mixed_kernel():
    split = DimensionSplit(m=1, n=1)
    grid = default_kernel_grid(MIXED, 1.0, 64)
    g = mixed_kernel(grid, split, 1.0)
    assert quad_integral(g) == pytest.approx(1.0, abs=1e-8)
    assert np.all(np.isfinite(g.values))
    # the x-profile of exp(-xi^4) changes sign, the y-profile is Gaussian
    assert g.values.min() < 0

    same = kernel_derivative(MIXED, ZERO1, ZERO1, 1.0, grid)
    assert np.allclose(same.values, g.values)

    # anisotropic self-similarity on the scaled grid
    t = 16.0
    gt = mixed_kernel(grid.scaled([t**0.25, t**0.5]), split, t)
    assert np.allclose(gt.values, t**-0.75 * g.values, atol=1e-12)


def test_kernel_derivatives():
    grid = default_kernel_grid(MIXED, 1.0, 64)
    for beta, gamma in [((1,), (0,)), ((0,), (1,)), ((2,), (1,))]:
        d = kernel_derivative(MIXED, MultiIndex.of(*beta), MultiIndex.of(*gamma), 1.0, grid)
        assert quad_integral(d) == pytest.approx(0.0, abs=1e-8)

    # d/dx of the Gaussian
    grid = default_kernel_grid(ISO1, 1.0)
    d = kernel_derivative(ISO1, MultiIndex.of(1), MultiIndex.zeros(0), 1.0, grid)
    (x,) = grid.mesh()
    exact = -x / 2 * gaussian_kernel(grid, 1.0).values
    assert np.max(np.abs(d.values - exact)) < 1e-10

    with pytest.raises(ValueError):
        kernel_derivative(MIXED, MultiIndex.zeros(2), MultiIndex.zeros(0), 1.0, grid)
    with pytest.raises(ValueError):
        kernel_derivative(KernelSpec.heisenberg(1), ZERO1, ZERO1, 1.0, grid)


def test_derivative_multiplier():
    grid = Grid.cube(1, 1.0, 8)
    mult = derivative_multiplier(grid, MultiIndex.of(1))
    assert mult[4] == 0  # Nyquist dropped for odd powers
    assert derivative_multiplier(grid, MultiIndex.of(2))[4] != 0
    with pytest.raises(ValueError):
        derivative_multiplier(grid, MultiIndex.zeros(2))


def test_derivative_decay():
    t_list = [1.0, 2.0, 4.0, 8.0]
    base = default_kernel_grid(MIXED, 1.0, 64)
    fit = derivative_decay_check(MIXED, ZERO1, ZERO1, 1, t_list, base)
    assert fit.slope == pytest.approx(0.0, abs=0.02)
    fit = derivative_decay_check(MIXED, MultiIndex.of(1), ZERO1, 1, t_list, base)
    assert fit.slope == pytest.approx(-0.25, abs=0.03)
    fit = derivative_decay_check(MIXED, ZERO1, MultiIndex.of(1), 1, t_list, base)
    assert fit.slope == pytest.approx(-0.5, abs=0.03)
    with pytest.raises(ValueError):
        derivative_decay_check(MIXED, ZERO1, ZERO1, 1, [1.0, 2.0], base)


def test_sigma_quadrature():
    a, c = sigma_factors(np.array([0.0, 1e-12, 1.0]))
    assert a[0] == a[1] == 1.0
    assert c[0] == c[1] == 0.5
    assert a[2] == pytest.approx(2 / math.sinh(2))
    assert c[2] == pytest.approx(1 / math.tanh(2))

    quad = SigmaQuadrature.default(1)
    assert quad.radius == 20.0 and quad.count == 256
    assert len(quad.nodes) == 257
    assert quad.weights.sum() == pytest.approx(40.0)
    refined = SigmaQuadrature.for_theta_range(1, 500.0)
    assert refined.count > 256 and refined.count % 2 == 0
    assert refined.alias_period() >= 1000.0
    with pytest.raises(ValidationError):
        SigmaQuadrature(radius=1.0, count=8)


def test_field_symbol_terms():
    assert field_symbol_terms((), 1) == {"1": [(1.0, ())]}
    # Theta H: factor i sigma / 2
    assert field_symbol_terms((3,), 1) == {"S": [(1.0, ())]}
    terms = field_symbol_terms((1,), 1)
    assert sorted(terms) == ["C", "S"]
    with pytest.raises(ValueError):
        field_symbol_terms((1, 2, 3), 1)
    with pytest.raises(ValueError):
        field_symbol_terms((4,), 1)


def test_heisenberg_kernel():
    # int 2s/sinh(2s) ds = pi^2/4, so H(0, 0) = 1/64 for n=1
    assert heisenberg_kernel([0.0, 0.0], 0.0) == pytest.approx(1 / 64, rel=1e-10)
    assert abs(heisenberg_kernel([12.0, 0.0], 0.0)) < 1e-12

    # radial in z, even in theta
    h = heisenberg_kernel([0.3, 0.4], 0.7)
    assert heisenberg_kernel([0.5, 0.0], 0.7) == pytest.approx(h, rel=1e-12)
    assert heisenberg_kernel([0.3, 0.4], -0.7) == pytest.approx(h, rel=1e-12)

    # H_t(z, theta) = t^-(n+1) H(z/sqrt t, theta/t)
    assert heisenberg_kernel_t([0.3, 0.4], 0.7, 1.0) == pytest.approx(h)
    assert heisenberg_kernel_t([0.6, 0.8], 2.8, 4.0) == pytest.approx(h / 16)

    with pytest.raises(ValueError):
        heisenberg_kernel([0.0], 0.0)
    with pytest.raises(ValueError):
        heisenberg_kernel_t([0.0, 0.0], 0.0, 0.0)


def test_heisenberg_kernel_mass():
    spec = KernelSpec.heisenberg(1)
    for t in (1.0, 4.0):
        grid = default_kernel_grid(spec, t, 64)
        assert quad_integral(heisenberg_kernel_grid(grid, t)) == pytest.approx(1.0, abs=1e-4)


def test_heisenberg_kernel_tables_agree():
    grid = Grid(extents=(3.0, 3.0, 6.0), points=(8, 8, 8))
    values = heisenberg_kernel_grid(grid, 2.0).values
    (x,), (y,), (th,) = [a[[1]] for a in grid.axes()]
    assert values[1, 1, 1] == pytest.approx(heisenberg_kernel_t([x, y], th, 2.0), rel=1e-10)

    r = np.array([0.0, 1.0, 2.0])
    theta = np.array([0.0, 1.5])
    table = heisenberg_kernel_rtheta(r, theta, 2.0, 1)
    assert table.shape == (3, 2)
    assert table[1, 1] == pytest.approx(heisenberg_kernel_t([1.0, 0.0], 1.5, 2.0), rel=1e-10)


def test_heisenberg_field_derivatives():
    quad = SigmaQuadrature.default(1)
    z, theta, t, eps = np.array([0.4, -0.3]), 0.5, 1.5, 1e-5

    def h(z, theta):
        return heisenberg_kernel_t(z, theta, t, quad)

    d1 = (h(z + [eps, 0], theta) - h(z - [eps, 0], theta)) / (2 * eps)
    d2 = (h(z + [0, eps], theta) - h(z - [0, eps], theta)) / (2 * eps)
    dt = (h(z, theta + eps) - h(z, theta - eps)) / (2 * eps)

    # Z_1 = d_1 + 2 z_2 d_theta, Z_2 = d_2 - 2 z_1 d_theta, Theta = d_theta
    fd = {1: d1 + 2 * z[1] * dt, 2: d2 - 2 * z[0] * dt, 3: dt}
    for field, expected in fd.items():
        got = heisenberg_kernel_derivative((field,), z, theta, t, quad)
        assert got == pytest.approx(expected, abs=1e-8)

    # right-invariant fields flip the sign of the theta coefficient
    right = heisenberg_kernel_derivative((1,), z, theta, t, quad, right=True)
    assert right == pytest.approx(d1 - 2 * z[1] * dt, abs=1e-8)

    # second order: Z_1 Z_1 H by differencing Z_1 H along Z_1
    def z1h(z, theta):
        return heisenberg_kernel_derivative((1,), z, theta, t, quad)

    dd1 = (z1h(z + [eps, 0], theta) - z1h(z - [eps, 0], theta)) / (2 * eps)
    ddt = (z1h(z, theta + eps) - z1h(z, theta - eps)) / (2 * eps)
    got = heisenberg_kernel_derivative((1, 1), z, theta, t, quad)
    assert got == pytest.approx(dd1 + 2 * z[1] * ddt, abs=1e-6)

    assert heisenberg_kernel_derivative((1,), [0.0, 0.0], 0.0, t, quad) == pytest.approx(
        0.0, abs=1e-14
    )


def test_field_decay():
    t_list = [1.0, 2.0, 4.0, 8.0]
    assert field_decay_check((1,), 1, 1, t_list).slope == pytest.approx(-0.5, abs=0.03)
    assert field_decay_check((3,), 1, 1, t_list).slope == pytest.approx(-1.0, abs=0.03)
