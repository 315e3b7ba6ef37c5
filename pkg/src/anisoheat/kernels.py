"""Fundamental solutions of the three heat flows and their derivatives.

The isotropic and mixed-order kernels are computed from their Fourier symbols
by inverse FFT, the Heisenberg kernel from its sigma-integral representation
evaluated by a trapezoid rule.
"""

from __future__ import annotations

import math
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.fft
from pydantic import BaseModel, Extra, Field, root_validator, validator

from .core import (
    DimensionSplit,
    Grid,
    GridFunction,
    MultiIndex,
    QuadratureError,
    check_real,
)
from .fit import DecayFit, decay_fit
from .log import logger, warn_once
from .norms import weighted_lp_norm
from .settings import get_settings


class KernelFamily(str, Enum):
    """Supported heat flows."""

    isotropic = "isotropic"
    mixed = "mixed"
    heisenberg = "heisenberg"


class KernelSpec(BaseModel):
    """Which fundamental solution is meant, together with its dimensions."""

    family: KernelFamily
    dim: Optional[int] = Field(None, ge=1)
    split: Optional[DimensionSplit] = None
    heisenberg_n: Optional[int] = Field(None, ge=1)

    class Config:
        frozen = True
        extra = Extra.forbid

    @root_validator(skip_on_failure=True)
    def check_dims(cls, values):
        """Check that the family has the dimension data it needs."""
        fam, dim, split = values["family"], values["dim"], values["split"]
        if fam == KernelFamily.isotropic:
            if dim is None and split is None:
                raise ValueError("isotropic kernel needs a dimension")
            if dim is not None and split is not None and dim != split.N:
                raise ValueError(f"dim={dim} contradicts split {split.m}+{split.n}")
            if dim is None:
                values["dim"] = split.N
        elif fam == KernelFamily.mixed:
            if split is None:
                raise ValueError("mixed-order kernel needs a split (m, n)")
            values["dim"] = split.N
        else:
            if values["heisenberg_n"] is None:
                raise ValueError("heisenberg kernel needs n")
            values["dim"] = 2 * values["heisenberg_n"] + 1
        return values

    @classmethod
    def isotropic(cls, dim: int, split: Optional[DimensionSplit] = None) -> KernelSpec:
        return cls(family=KernelFamily.isotropic, dim=dim, split=split)

    @classmethod
    def mixed(cls, m: int, n: int) -> KernelSpec:
        return cls(family=KernelFamily.mixed, split=DimensionSplit(m=m, n=n))

    @classmethod
    def heisenberg(cls, n: int) -> KernelSpec:
        return cls(family=KernelFamily.heisenberg, heisenberg_n=n)

    @property
    def is_fft(self) -> bool:
        return self.family != KernelFamily.heisenberg

    def scaling_exponents(self) -> Tuple[float, ...]:
        """Per-axis exponents a_i such that the kernel lives on scale t^a_i."""
        if self.family == KernelFamily.isotropic:
            return (0.5,) * self.dim
        if self.family == KernelFamily.mixed:
            return (0.25,) * self.split.m + (0.5,) * self.split.n
        return (0.5,) * (2 * self.heisenberg_n) + (1.0,)

    def prefactor_exponent(self) -> float:
        """Exponent e of the amplitude t^-e, equal to the sum of the scaling exponents."""
        return sum(self.scaling_exponents())

    def symbol(self, grid: Grid, t: float) -> np.ndarray:
        """Fourier symbol exp(-t P(xi)) on the FFT frequencies of the grid."""
        _check_t(t)
        if not self.is_fft:
            raise ValueError("The Heisenberg kernel has no Euclidean Fourier symbol")
        _check_grid_dim(grid, self.dim)
        freq = grid.frequency_mesh()
        if self.family == KernelFamily.isotropic:
            poly = sum(f**2 for f in freq)
        else:
            xs = sum(freq[i] ** 2 for i in self.split.x_axes())
            ys = sum(freq[i] ** 2 for i in self.split.y_axes())
            poly = xs**2 + ys
        return np.exp(-t * np.broadcast_to(poly, grid.shape))


def _check_t(t: float):
    if not t > 0:
        raise ValueError(f"Time must satisfy t > 0, got t={t}")


def _check_grid_dim(grid: Grid, dim: int):
    if grid.dims != dim:
        raise ValueError(f"Grid has {grid.dims} axes, expected {dim}")


def _fft_workers() -> int:
    return get_settings().threads


# ---- FFT families


def derivative_multiplier(grid: Grid, alpha: MultiIndex) -> np.ndarray:
    """Fourier multiplier prod_a (i xi_a)^alpha_a of D^alpha.

    The Nyquist frequency is dropped for odd powers, so that the multiplier
    stays Hermitian and real data are mapped to real data.
    """
    if alpha.dim != grid.dims:
        raise ValueError(f"Multi-index of length {alpha.dim} does not fit grid dim {grid.dims}")
    res = np.ones(grid.shape, dtype=complex)
    for axis, (e, freq) in enumerate(zip(alpha.exponents, grid.frequencies())):
        if e == 0:
            continue
        mult = (1j * freq) ** e
        if e % 2:
            mult[grid.points[axis] // 2] = 0
        shape = [1] * grid.dims
        shape[axis] = grid.points[axis]
        res = res * mult.reshape(shape)
    return res


def grid_function_from_symbol(grid: Grid, symbol: np.ndarray, what: str) -> GridFunction:
    """Inverse FFT of a symbol, centred so that the origin node carries x = 0."""
    vals = scipy.fft.ifftn(symbol, workers=_fft_workers())
    vals = np.fft.fftshift(vals) / grid.cell_volume
    return GridFunction(grid=grid, values=check_real(vals, what))


def gaussian_kernel(grid: Grid, t: float) -> GridFunction:
    """Heat kernel (4 pi t)^(-N/2) exp(-|z|^2 / 4t) sampled on the grid."""
    _check_t(t)
    dim = grid.dims

    def kernel(*coords):
        r2 = sum(c**2 for c in coords)
        return (4 * np.pi * t) ** (-dim / 2) * np.exp(-r2 / (4 * t))

    return GridFunction.from_function(grid, kernel)


def mixed_kernel(grid: Grid, split: DimensionSplit, t: float) -> GridFunction:
    """Fundamental solution of u_t = -Delta_x^2 u + Delta_y u by inverse FFT."""
    spec = KernelSpec(family=KernelFamily.mixed, split=split)
    return grid_function_from_symbol(grid, spec.symbol(grid, t), "mixed-order kernel")


def kernel_derivative(
    spec: KernelSpec,
    beta: MultiIndex,
    gamma: MultiIndex,
    t: float,
    grid: Grid,
) -> GridFunction:
    """D_x^beta D_y^gamma of the isotropic or mixed-order kernel at time t.

    For an isotropic kernel without split, pass the full multi-index as beta
    and an empty gamma.
    """
    if not spec.is_fft:
        raise ValueError("Use heisenberg_kernel_derivative for the Heisenberg kernel")
    alpha = beta.concat(gamma)
    if alpha.dim != spec.dim:
        raise ValueError(f"Index lengths {beta.dim}+{gamma.dim} do not fit dim {spec.dim}")
    if spec.family == KernelFamily.mixed and beta.dim != spec.split.m:
        raise ValueError(f"beta must have length m={spec.split.m}, got {beta.dim}")
    symbol = spec.symbol(grid, t)
    if alpha.order() > 0:
        symbol = symbol * derivative_multiplier(grid, alpha)
    logger.debug(f"{spec.family.value} kernel derivative {alpha} at t={t} on {grid.shape}")
    return grid_function_from_symbol(grid, symbol, f"kernel derivative {alpha}")


def fft_convolve(f: GridFunction, g: GridFunction) -> GridFunction:
    """Periodic convolution of f with a kernel g centred at the origin node."""
    if f.grid != g.grid:
        raise ValueError("Grid functions live on different grids")
    workers = _fft_workers()
    fh = scipy.fft.fftn(f.values, workers=workers)
    gh = scipy.fft.fftn(np.fft.ifftshift(g.values), workers=workers)
    vals = scipy.fft.ifftn(fh * gh, workers=workers) * f.grid.cell_volume
    return GridFunction(grid=f.grid, values=check_real(vals, "convolution"))


def default_kernel_grid(spec: KernelSpec, t: float = 1.0, points: int = 128) -> Grid:
    """Box holding the kernel at time t with tails far below quadrature accuracy."""
    if spec.family == KernelFamily.heisenberg:
        base = (8.0,) * (2 * spec.heisenberg_n) + (20.0,)
    elif spec.family == KernelFamily.mixed:
        base = (32.0,) * spec.split.m + (12.0,) * spec.split.n
    else:
        base = (12.0,) * spec.dim
    ext = tuple(b * t**a for b, a in zip(base, spec.scaling_exponents()))
    return Grid(extents=ext, points=(points,) * spec.dim)


def derivative_decay_check(
    spec: KernelSpec,
    beta: MultiIndex,
    gamma: MultiIndex,
    q: float,
    t_list: Sequence[float],
    base: Optional[Grid] = None,
) -> DecayFit:
    """Fit the decay of ||D_x^beta D_y^gamma G_t||_{L^q} in t.

    The grid at time t is the base grid with extents scaled by t^a_i, so the
    kernel occupies the same fraction of the box for every t.
    """
    if len(t_list) < 3:
        raise ValueError(f"Need at least 3 times, got {len(t_list)}")
    if q != 1:
        warn_once(
            "decay-q",
            "For q != 1 the L^q decay of the mixed-order kernel follows the "
            "anisotropic scaling t^-(m/4+n/2)(1-1/q), not t^-N/2(1-1/q)",
        )
    base = base or default_kernel_grid(spec)
    exps = spec.scaling_exponents()
    norms = []
    for t in t_list:
        grid = base.scaled([t**a for a in exps])
        norms.append(weighted_lp_norm(kernel_derivative(spec, beta, gamma, t, grid), p=q))
    fit = decay_fit(t_list, norms)
    logger.info(f"||D^{beta.concat(gamma)} G_t||_L{q} decays with slope {fit.slope:.4f}")
    return fit


# ---- Heisenberg kernel


class SigmaQuadrature(BaseModel):
    """Trapezoid rule on [-S, S] with Q intervals for the sigma-integral."""

    radius: float = Field(..., gt=0)
    count: int = Field(..., ge=64)
    nodes: np.ndarray = None
    weights: np.ndarray = None

    class Config:
        arbitrary_types_allowed = True
        allow_mutation = False
        extra = Extra.forbid

    @validator("nodes", pre=True, always=True)
    def make_nodes(cls, v, values):
        """Place Q+1 equispaced nodes on [-S, S]."""
        if "radius" not in values or "count" not in values:
            return v
        nodes = np.linspace(-values["radius"], values["radius"], values["count"] + 1)
        nodes.setflags(write=False)
        return nodes

    @validator("weights", pre=True, always=True)
    def make_weights(cls, v, values):
        """Trapezoid weights h, with h/2 at both endpoints."""
        if "radius" not in values or "count" not in values:
            return v
        h = 2 * values["radius"] / values["count"]
        w = np.full(values["count"] + 1, h)
        w[0] = w[-1] = h / 2
        w.setflags(write=False)
        return w

    @classmethod
    def default(cls, n: int = 1) -> SigmaQuadrature:
        """S = max(20, 20/n) and Q = 256; the integrand tail is below e^(-40 n)."""
        return cls(radius=max(20.0, 20.0 / n), count=256)

    @classmethod
    def for_theta_range(cls, n: int, theta_max: float, margin: float = 8.0):
        """Default rule, refined so that the alias period 2 pi Q / S clears theta_max."""
        quad = cls.default(n)
        need = quad.radius * (2 * theta_max + margin) / (2 * np.pi)
        if need <= quad.count:
            return quad
        count = int(math.ceil(need / 2)) * 2
        logger.debug(f"Refining sigma quadrature to Q={count} for |theta| <= {theta_max}")
        return cls(radius=quad.radius, count=count)

    def alias_period(self) -> float:
        """Period in theta of the trapezoid sum."""
        return 2 * np.pi * self.count / self.radius


def sigma_factors(sigma: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Return 2s/sinh(2s) and s/tanh(2s), using their limits 1 and 1/2 near s = 0."""
    sigma = np.asarray(sigma, dtype=float)
    small = np.abs(sigma) < 1e-8
    s = np.where(small, 1.0, sigma)
    a = np.where(small, 1.0, 2 * s / np.sinh(2 * s))
    c = np.where(small, 0.5, s / np.tanh(2 * s))
    return a, c


_THETA = -1
"""Marker of the theta-axis in partial derivative tuples."""

# Multiplier of the sigma-integrand for each partial derivative, as a list of
# (scale, z-axes of the monomial, sigma-factor name). Only orders <= 2 occur.


def _partial_terms(axes: Tuple[int, ...]) -> List[Tuple[float, Tuple[int, ...], str]]:
    zs = tuple(sorted(a for a in axes if a != _THETA))
    nt = len(axes) - len(zs)
    if len(axes) == 0:
        return [(1.0, (), "1")]
    if len(axes) == 1:
        return [(1.0, (), "S")] if nt else [(-1.0, zs, "C")]
    if nt == 2:
        return [(1.0, (), "S2")]
    if nt == 1:
        return [(-1.0, zs, "CS")]
    c, d = zs
    res = [(1.0, (c, d), "C2")]
    if c == d:
        res.append((-1.0, (), "C"))
    return res


def _field_terms(field: int, n: int, right: bool) -> List[Tuple[float, Tuple[int, ...], int]]:
    """Expand the 1-based field index into (scale, z-axes, partial axis) terms.

    Fields 1..2n are Z_j = d_j + 2 z_{n+j} d_theta, Z_{n+j} = d_{n+j} - 2 z_j d_theta
    (or their right-invariant versions with the opposite theta-coefficient),
    field 2n+1 is Theta = d_theta.
    """
    if field == 2 * n + 1:
        return [(1.0, (), _THETA)]
    if not 1 <= field <= 2 * n:
        raise ValueError(f"Field index must be in 1..{2 * n + 1}, got {field}")
    a = field - 1
    sign = -1.0 if right else 1.0
    if a < n:
        return [(1.0, (), a), (2.0 * sign, (a + n,), _THETA)]
    return [(1.0, (), a), (-2.0 * sign, (a - n,), _THETA)]


def field_symbol_terms(
    fields: Sequence[int], n: int, right: bool = False
) -> Dict[str, List[Tuple[float, Tuple[int, ...]]]]:
    """Polynomial coefficients, per sigma-factor, of a product of fields applied to H.

    The result maps each sigma-factor name to a list of monomials
    (scale, z-axes) whose sum multiplies that factor under the integral.
    """
    if not 0 <= len(fields) <= 2:
        raise ValueError("Only fields of order <= 2 are supported")

    # expand the differential operator into (coefficient monomial, partial axes)
    ops: List[Tuple[float, Tuple[int, ...], Tuple[int, ...]]] = [(1.0, (), ())]
    for field in reversed(fields):
        new_ops = []
        for scale, mono, axes in ops:
            for fs, fmono, faxis in _field_terms(field, n, right):
                # P (c D) = P(c) D + c P D with P = fs * z^fmono * d_faxis
                count = mono.count(faxis) if faxis != _THETA else 0
                if count:
                    rest = list(mono)
                    rest.remove(faxis)
                    new_ops.append((count * fs * scale, fmono + tuple(rest), axes))
                new_ops.append((fs * scale, fmono + mono, axes + (faxis,)))
        ops = new_ops

    res: Dict[str, List[Tuple[float, Tuple[int, ...]]]] = {}
    for scale, mono, axes in ops:
        for ps, pmono, g in _partial_terms(axes):
            res.setdefault(g, []).append((scale * ps, tuple(sorted(mono + pmono))))
    return res


def _field_degree(fields: Sequence[int], n: int) -> int:
    """Homogeneous degree of a product of fields (Theta counts twice)."""
    return sum(2 if f == 2 * n + 1 else 1 for f in fields)


def _sigma_factor_values(quad: SigmaQuadrature, n: int) -> Dict[str, np.ndarray]:
    sig = quad.nodes
    a, c = sigma_factors(sig)
    s = 0.5j * sig
    base = quad.weights * a**n
    return {
        "1": base,
        "C": base * c,
        "C2": base * c**2,
        "S": base * s,
        "CS": base * c * s,
        "S2": base * s**2,
        "_c": c,
    }


def sigma_table(
    r2: np.ndarray,
    theta: np.ndarray,
    n: int,
    quad: SigmaQuadrature,
    names: Sequence[str] = ("1",),
) -> Dict[str, np.ndarray]:
    """Sigma-integrals sum_q w_q A_q^n g_q exp(-r2 C_q / 2 + i sigma_q theta / 2).

    Evaluated for every pair of the 1-D arrays r2 and theta as a matrix product,
    giving one (len(r2), len(theta)) complex table per factor name g.
    """
    fac = _sigma_factor_values(quad, n)
    r2 = np.asarray(r2, dtype=float).ravel()
    theta = np.asarray(theta, dtype=float).ravel()
    gauss = np.exp(-0.5 * np.outer(r2, fac["_c"]))
    phase = np.exp(0.5j * np.outer(quad.nodes, theta))
    norm = (4 * np.pi) ** -(n + 1)
    return {g: norm * (gauss * fac[g]) @ phase for g in names}


def _check_z(z: Sequence[float]) -> np.ndarray:
    z = np.asarray(z, dtype=float).ravel()
    if len(z) < 2 or len(z) % 2:
        raise ValueError(f"z must have even length 2n >= 2, got {len(z)}")
    return z


def _quad_for(n: int, theta_max: float, quad: Optional[SigmaQuadrature]):
    if quad is None:
        return SigmaQuadrature.for_theta_range(n, theta_max)
    if quad.alias_period() < 2 * theta_max:
        logger.warning(
            f"sigma quadrature alias period {quad.alias_period():.1f} is below "
            f"2|theta| = {2 * theta_max:.1f}"
        )
    return quad


def heisenberg_kernel(
    z: Sequence[float], theta: float, quad: Optional[SigmaQuadrature] = None
) -> float:
    """Heisenberg heat kernel H at time 1 by quadrature of its sigma-integral."""
    return heisenberg_kernel_derivative((), z, theta, 1.0, quad)


def heisenberg_kernel_t(
    z: Sequence[float], theta: float, t: float, quad: Optional[SigmaQuadrature] = None
) -> float:
    """H_t(z, theta) = t^-(n+1) H(z / sqrt(t), theta / t)."""
    return heisenberg_kernel_derivative((), z, theta, t, quad)


def heisenberg_kernel_derivative(
    fields: Sequence[int],
    z: Sequence[float],
    theta: float,
    t: float,
    quad: Optional[SigmaQuadrature] = None,
    right: bool = False,
) -> float:
    """Apply fields (1-based Z_j, 2n+1 for Theta) to H_t and evaluate at (z, theta).

    The fields act analytically under the sigma-integral. With right=True the
    right-invariant fields are used instead of the left-invariant ones.

    Raises:
        QuadratureError: If the quadrature leaves an imaginary residue.
    """
    _check_t(t)
    z = _check_z(z)
    n = len(z) // 2
    zeta, tau = z / math.sqrt(t), float(theta) / t
    quad = _quad_for(n, abs(tau), quad)
    terms = field_symbol_terms(tuple(fields), n, right)
    table = sigma_table(np.array([zeta @ zeta]), np.array([tau]), n, quad, list(terms))
    val = 0j
    for g, monos in terms.items():
        poly = sum(s * math.prod(zeta[i] for i in mono) for s, mono in monos)
        val += poly * table[g][0, 0]
    val = check_real(np.asarray(val), "Heisenberg kernel", error=QuadratureError)
    scale = t ** -(n + 1) * t ** (-_field_degree(fields, n) / 2)
    return float(val) * scale


def _heisenberg_grid_n(grid: Grid) -> int:
    if grid.dims < 3 or grid.dims % 2 == 0:
        raise ValueError(f"Heisenberg grids have 2n+1 axes, got {grid.dims}")
    return (grid.dims - 1) // 2


def heisenberg_kernel_derivative_grid(
    fields: Sequence[int],
    grid: Grid,
    t: float,
    quad: Optional[SigmaQuadrature] = None,
    right: bool = False,
) -> GridFunction:
    """Fields applied to H_t, sampled on a (2n+1)-axis grid with theta last."""
    _check_t(t)
    n = _heisenberg_grid_n(grid)
    axes = grid.axes()
    zmesh = np.meshgrid(*[a / math.sqrt(t) for a in axes[:-1]], indexing="ij", sparse=True)
    tau = axes[-1] / t
    quad = _quad_for(n, float(np.max(np.abs(tau))), quad)

    r2 = np.broadcast_to(sum(c**2 for c in zmesh), grid.shape[:-1])
    r2u, inverse = np.unique(r2, return_inverse=True)
    terms = field_symbol_terms(tuple(fields), n, right)
    table = sigma_table(r2u, tau, n, quad, list(terms))

    vals = np.zeros(grid.shape, dtype=complex)
    for g, monos in terms.items():
        tg = table[g][inverse.ravel()].reshape(grid.shape)
        poly = sum(s * math.prod((zmesh[i] for i in mono), start=1.0) for s, mono in monos)
        vals += np.asarray(poly)[..., None] * tg
    vals = check_real(vals, "Heisenberg kernel", error=QuadratureError)
    scale = t ** -(n + 1) * t ** (-_field_degree(fields, n) / 2)
    logger.debug(f"Heisenberg kernel fields {tuple(fields)} at t={t} on {grid.shape}")
    return GridFunction(grid=grid, values=vals * scale)


def heisenberg_kernel_grid(
    grid: Grid, t: float, quad: Optional[SigmaQuadrature] = None
) -> GridFunction:
    """H_t sampled on a (2n+1)-axis grid with theta last."""
    return heisenberg_kernel_derivative_grid((), grid, t, quad)


def heisenberg_kernel_rtheta(
    r: np.ndarray,
    theta: np.ndarray,
    t: float,
    n: int,
    quad: Optional[SigmaQuadrature] = None,
) -> np.ndarray:
    """Table of H_t over all pairs of radii |z| = r and theta values."""
    _check_t(t)
    r = np.asarray(r, dtype=float)
    tau = np.asarray(theta, dtype=float) / t
    quad = _quad_for(n, float(np.max(np.abs(tau), initial=0.0)), quad)
    table = sigma_table((r / math.sqrt(t)) ** 2, tau, n, quad)["1"]
    vals = check_real(table, "Heisenberg kernel", error=QuadratureError)
    return vals * t ** -(n + 1)


def field_decay_check(
    fields: Sequence[int],
    n: int,
    q: float,
    t_list: Sequence[float],
    base: Optional[Grid] = None,
) -> DecayFit:
    """Fit the decay of ||P H_t||_{L^q} for a product P of Heisenberg fields."""
    if len(t_list) < 3:
        raise ValueError(f"Need at least 3 times, got {len(t_list)}")
    spec = KernelSpec.heisenberg(n)
    base = base or default_kernel_grid(spec, points=32)
    exps = spec.scaling_exponents()
    norms = []
    for t in t_list:
        grid = base.scaled([t**a for a in exps])
        gf = heisenberg_kernel_derivative_grid(fields, grid, t)
        norms.append(weighted_lp_norm(gf, p=q))
    fit = decay_fit(t_list, norms)
    logger.info(f"||{tuple(fields)} H_t||_L{q} decays with slope {fit.slope:.4f}")
    return fit
