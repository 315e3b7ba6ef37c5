"""Heisenberg group algebra, group convolution and the group moment decomposition.

Points are (z, theta) in R^2n x R with the composition law
(z, theta) o (z', theta') = (z + z', theta + theta' + 1/2 <B z, z'>)
for the step-two matrix B = 4 [[0, I], [-I, 0]]. Coordinates are exponential
coordinates of the first kind, so Exp and Log are the identity on coordinates.
"""

from __future__ import annotations

import math
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, Extra, Field, root_validator, validator
from scipy.interpolate import RegularGridInterpolator
from typing_extensions import Literal

from .core import DimensionSplit, Grid, GridFunction, MultiIndex, TableDomainError
from .kernels import (
    SigmaQuadrature,
    heisenberg_kernel_derivative,
    heisenberg_kernel_rtheta,
)
from .log import logger
from .moments import (
    DilationRemainder,
    SampledFunction,
    TestFunction,
    gauss_legendre,
    moment,
    y_moment,
)
from .norms import quad_integral
from .parallel import pmap


class HPoint(BaseModel):
    """Point (z, theta) of the Heisenberg group of dimension 2n+1."""

    z: Tuple[float, ...]
    theta: float = 0.0

    class Config:
        frozen = True
        extra = Extra.forbid

    @validator("z")
    def check_z(cls, v):
        """z has even positive length and finite entries."""
        if len(v) < 2 or len(v) % 2:
            raise ValueError(f"z must have even length 2n >= 2, got {len(v)}")
        if not all(math.isfinite(c) for c in v):
            raise ValueError("coordinates must be finite")
        return v

    @validator("theta")
    def check_theta(cls, v):
        """theta is finite."""
        if not math.isfinite(v):
            raise ValueError("coordinates must be finite")
        return v

    @classmethod
    def identity(cls, n: int) -> HPoint:
        return cls(z=(0.0,) * (2 * n), theta=0.0)

    @classmethod
    def from_array(cls, coords: Sequence[float]) -> HPoint:
        """Build a point from its 2n+1 coordinates, theta last."""
        coords = [float(c) for c in coords]
        return cls(z=tuple(coords[:-1]), theta=coords[-1])

    @property
    def n(self) -> int:
        return len(self.z) // 2

    def as_array(self) -> np.ndarray:
        return np.array(self.z + (self.theta,))


def symplectic_matrix(n: int) -> np.ndarray:
    """The matrix B = 4 [[0, I], [-I, 0]] of the twisted part of the group law."""
    eye = np.eye(n)
    zero = np.zeros((n, n))
    return 4 * np.block([[zero, eye], [-eye, zero]])


def _check_same_n(v: HPoint, w: HPoint):
    if v.n != w.n:
        raise ValueError(f"Points of H^{v.n} and H^{w.n} cannot be composed")


def h_compose(v: HPoint, w: HPoint) -> HPoint:
    """Group law (z, theta) o (z', theta')."""
    _check_same_n(v, w)
    z, zp = np.array(v.z), np.array(w.z)
    theta = v.theta + w.theta + 0.5 * float(symplectic_matrix(v.n) @ z @ zp)
    return HPoint(z=tuple(z + zp), theta=theta)


def h_inverse(v: HPoint) -> HPoint:
    return HPoint(z=tuple(-c for c in v.z), theta=-v.theta)


def h_dilate(lam: float, v: HPoint) -> HPoint:
    """Group dilation (z, theta) -> (lam z, lam^2 theta)."""
    if not lam > 0:
        raise ValueError(f"Dilation factor must be positive, got {lam}")
    return HPoint(z=tuple(lam * c for c in v.z), theta=lam**2 * v.theta)


def h_exp(coefficients: Sequence[float]) -> HPoint:
    """Exp(sum_j v_j Z_j + v_theta Theta) for the coefficient vector (v, v_theta)."""
    return HPoint.from_array(coefficients)


def h_log(v: HPoint) -> np.ndarray:
    """Inverse of h_exp."""
    return v.as_array()


def h_exp_log_check(v: HPoint, s: float = 1.0) -> float:
    """Residual of Exp(Log v) = v and of Exp(s Log v) = s v (coordinatewise)."""
    round_trip = np.max(np.abs(h_exp(h_log(v)).as_array() - v.as_array()))
    scaled = np.max(np.abs(h_exp(s * h_log(v)).as_array() - s * v.as_array()))
    return float(max(round_trip, scaled))


def h_field_apply(field: int, u: TestFunction, p: HPoint, right: bool = False) -> float:
    """Evaluate (Z u)(p) for the field with 1-based index (2n+1 for Theta)."""
    if u.dim != 2 * p.n + 1:
        raise ValueError(f"Test function of dim {u.dim} does not live on H^{p.n}")
    return float(u.apply_field(field, right)(*p.as_array()))


# ---- Taylor formula and decomposition


def h_taylor_check(
    phi: TestFunction,
    p: HPoint,
    variant: Literal["split", "group"] = "split",
    nodes: int = 64,
) -> float:
    """Residual of the first-order Taylor formula on the group at p.

    The "split" variant expands along (s z, 0) with a separate theta-remainder
    int_0^1 theta (Theta phi)(z, s theta) ds. The "group" variant expands along
    Exp(s Log p) with all 2n+1 fields in the first- and second-order sums.
    """
    if variant not in ("split", "group"):
        raise ValueError(f"Unknown Taylor variant '{variant}'")
    n = p.n
    if phi.dim != 2 * n + 1:
        raise ValueError(f"Test function of dim {phi.dim} does not live on H^{n}")
    h = p.as_array()
    zero = np.zeros_like(h)
    ts, ws = gauss_legendre(nodes)
    last = 2 * n if variant == "split" else 2 * n + 1

    rhs = float(phi(*zero))
    for i in range(1, last + 1):
        rhs += h[i - 1] * float(phi.apply_field(i)(*zero))

    if variant == "split":
        path = [ts * c for c in h[:-1]] + [np.zeros_like(ts)]
    else:
        path = [ts * c for c in h]
    for i in range(1, last + 1):
        for j in range(1, last + 1):
            coef = h[i - 1] * h[j - 1]
            if coef == 0:
                continue
            vals = phi.apply_fields((i, j))(*path)
            rhs += coef * float(np.sum(ws * (1 - ts) * vals))

    if variant == "split":
        path = [np.full_like(ts, c) for c in h[:-1]] + [ts * h[-1]]
        vals = phi.apply_field(2 * n + 1)(*path)
        rhs += h[-1] * float(np.sum(ws * vals))

    return abs(float(phi(*h)) - rhs)


def _theta_split(f: SampledFunction) -> DimensionSplit:
    if f.dim < 3 or f.dim % 2 == 0:
        raise ValueError(f"Functions on the Heisenberg group have 2n+1 axes, got {f.dim}")
    return DimensionSplit(m=f.dim - 1, n=1)


def h_remainder_F(f: SampledFunction) -> DilationRemainder:
    """F(z, theta) = -int_0^1 (theta/s) f(z, theta/s) ds / s."""
    _theta_split(f)
    return DilationRemainder.build(
        f,
        (f.dim - 1,),
        monomial=MultiIndex.of(1),
        weight_power=0,
        coefficient=-1.0,
        jacobian=1,
    )


def _check_jk(j: int, k: int, n: int):
    for i in (j, k):
        if not 1 <= i <= 2 * n:
            raise ValueError(f"Field index must be in 1..{2 * n}, got {i}")


def _pair_index(j: int, k: int, n: int) -> MultiIndex:
    return MultiIndex.unit(2 * n, j - 1).plus(MultiIndex.unit(2 * n, k - 1))


def h_remainder_Fjk(
    f: SampledFunction, j: int, k: int, theta_scaled: bool = False, theta_points: int = 1024
) -> SampledFunction:
    """F_jk(z) = int_0^1 (1-s) (z_j/s)(z_k/s) g(z/s) ds / s^2n on R^2n.

    Here g is the theta-marginal of f. With theta_scaled=True the same function
    is computed by quadrature of f(z/s, theta/s) over theta with the Jacobian
    1/s of that substitution.
    """
    split = _theta_split(f)
    n = split.m // 2
    _check_jk(j, k, n)
    kappa = _pair_index(j, k, n)
    if not theta_scaled:
        marginal = y_moment(f, split, MultiIndex.zeros(1))
        return DilationRemainder.build(
            marginal,
            range(2 * n),
            monomial=kappa,
            weight_power=1,
            coefficient=1.0,
            jacobian=2 * n,
        )

    xi, wi = np.polynomial.legendre.leggauss(64)
    theta = Grid.cube(1, f.radius, theta_points).axes()[0]
    dtheta = 2 * f.radius / theta_points

    def one(z: np.ndarray) -> float:
        r = float(np.linalg.norm(z))
        if r == 0 or r >= f.radius:
            return 0.0
        lo = math.log(r / f.radius)
        s = np.exp(lo * (1 - xi) / 2)
        ds = -lo * wi / 2 * s
        args = [np.broadcast_to((c / s)[:, None], (len(s), len(theta))) for c in z]
        vals = f(*args, theta[None, :] / s[:, None]).sum(axis=1) * dtheta / s
        mono = kappa.monomial([c / s for c in z])
        return float(np.sum((1 - s) * mono * vals * s ** (-2 * n) * ds))

    def evaluate(*coords):
        shape = coords[0].shape
        pts = np.stack([c.ravel() for c in coords], axis=-1)
        return np.array([one(z) for z in pts]).reshape(shape)

    return SampledFunction(evaluator=evaluate, dim=2 * n, radius=f.radius, points=f.points)


class HDecomposition(BaseModel):
    """Terms of the group moment decomposition paired with a test function."""

    pairing: float
    mass_term: float
    moment_term: float
    theta_term: float
    z_term: float

    class Config:
        extra = Extra.forbid

    @property
    def total(self) -> float:
        return self.mass_term + self.moment_term + self.theta_term + self.z_term

    @property
    def residual(self) -> float:
        return abs(self.pairing - self.total)


def h_decomposition(f: SampledFunction, phi: TestFunction) -> HDecomposition:
    """Pair f and the terms of its decomposition with phi.

    f = (int f) delta_0 - sum_j (int z_j f) Z_j delta_0 + Theta F
        + sum_jk Z_j Z_k (F_jk delta_0(theta)),
    where the remainder pairings are -int F (Theta phi) and
    int F_jk(z) (Z_j Z_k phi)(z, 0) dz.
    """
    split = _theta_split(f)
    n = split.m // 2
    if phi.dim != f.dim:
        raise ValueError("f and phi must have the same dimension")
    gf = f.sample()
    pairing = quad_integral(GridFunction(grid=gf.grid, values=gf.values * phi(*gf.grid.mesh())))

    zero = [0.0] * f.dim
    mass = moment(f, MultiIndex.zeros(f.dim)) * float(phi(*zero))
    first = 0.0
    for j in range(1, 2 * n + 1):
        m_j = moment(f, MultiIndex.unit(f.dim, j - 1))
        first += m_j * float(phi.apply_field(j)(*zero))

    theta_term = -h_remainder_F(f).pair(phi.apply_field(2 * n + 1))

    def pair_jk(jk: Tuple[int, int]) -> float:
        j, k = jk
        zz = phi.apply_fields((j, k))
        return h_remainder_Fjk(f, j, k).pair(lambda *z: zz(*z, 0.0))

    pairs = [(j, k) for j in range(1, 2 * n + 1) for k in range(1, 2 * n + 1)]
    z_term = float(sum(pmap(pair_jk, pairs)))
    return HDecomposition(
        pairing=pairing,
        mass_term=mass,
        moment_term=first,
        theta_term=theta_term,
        z_term=z_term,
    )


def h_decomposition_check(f: SampledFunction, phi: TestFunction) -> float:
    """Absolute difference between <f, phi> and the paired decomposition of f."""
    dec = h_decomposition(f, phi)
    logger.debug(f"group decomposition: <f,phi>={dec.pairing:.12g}, terms={dec.total:.12g}")
    return dec.residual


# ---- convolution


class HGridFunction(GridFunction):
    """Grid function on the Heisenberg group; the last axis is theta."""

    @root_validator(skip_on_failure=True)
    def check_axes(cls, values):
        """The grid has 2n+1 axes."""
        dims = values["grid"].dims
        if dims < 3 or dims % 2 == 0:
            raise ValueError(f"Heisenberg grids have 2n+1 axes, got {dims}")
        return values

    @property
    def n(self) -> int:
        return (self.grid.dims - 1) // 2

    @classmethod
    def sample(cls, grid: Grid, fn: Callable[..., np.ndarray]) -> HGridFunction:
        return cls(grid=grid, values=GridFunction.from_function(grid, fn).values)

    def dilation_exponents(self) -> Tuple[float, ...]:
        """Exponents of the self-similar scaling: 1/2 on z-axes, 1 on theta."""
        return (0.5,) * (2 * self.n) + (1.0,)

    def nodes(self) -> np.ndarray:
        """All node coordinates as a (nodes, 2n+1) array in C order."""
        mesh = np.meshgrid(*self.grid.axes(), indexing="ij")
        return np.stack([c.ravel() for c in mesh], axis=-1)


def relative_argument(v: np.ndarray, w: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """z- and theta-parts of v^-1 o w for all pairs of rows of v and w.

    Returns arrays of shape (len(w), len(v), 2n) and (len(w), len(v)).
    """
    n = (v.shape[1] - 1) // 2
    vz, vt = v[:, :-1], v[:, -1]
    wz, wt = w[:, :-1], w[:, -1]
    dz = wz[:, None, :] - vz[None, :, :]
    twist = vz[None, :, n:] * wz[:, None, :n] - vz[None, :, :n] * wz[:, None, n:]
    dt = wt[:, None] - vt[None, :] - 2 * twist.sum(axis=-1)
    return dz, dt


class HeisenbergKernelTable(BaseModel):
    """H_t tabulated over radii |z| <= r_max and |theta| <= theta_max.

    H_t only depends on |z| and is even in theta, so a two-dimensional table
    with linear interpolation covers all arguments.
    """

    n: int = Field(..., ge=1)
    t: float = Field(..., gt=0)
    r_max: float = Field(..., gt=0)
    theta_max: float = Field(..., gt=0)
    values: np.ndarray
    interpolator: Optional[RegularGridInterpolator] = None

    class Config:
        arbitrary_types_allowed = True
        allow_mutation = False
        extra = Extra.forbid

    @validator("interpolator", pre=True, always=True)
    def make_interpolator(cls, v, values):
        """Linear interpolation on the (r, |theta|) nodes."""
        if "values" not in values or "r_max" not in values or "theta_max" not in values:
            return v
        nr, nt = values["values"].shape
        r = np.linspace(0, values["r_max"], nr)
        theta = np.linspace(0, values["theta_max"], nt)
        return RegularGridInterpolator(
            (r, theta), values["values"], method="linear", bounds_error=False, fill_value=None
        )

    @classmethod
    def build(
        cls,
        n: int,
        t: float,
        r_max: float,
        theta_max: float,
        quad: Optional[SigmaQuadrature] = None,
        r_points: int = 513,
        theta_points: int = 1025,
    ) -> HeisenbergKernelTable:
        r = np.linspace(0, r_max, r_points)
        theta = np.linspace(0, theta_max, theta_points)
        logger.debug(f"Tabulating H_t at t={t} on |z|<={r_max:.3g}, |theta|<={theta_max:.3g}")
        vals = heisenberg_kernel_rtheta(r, theta, t, n, quad)
        return cls(n=n, t=t, r_max=r_max, theta_max=theta_max, values=vals)

    def covers(self, r_max: float, theta_max: float) -> bool:
        return r_max <= self.r_max and theta_max <= self.theta_max

    def __call__(self, dz: np.ndarray, dtheta: np.ndarray) -> np.ndarray:
        """H_t at (dz, dtheta); dz has the 2n coordinates on its last axis."""
        r = np.sqrt(np.sum(dz**2, axis=-1))
        pts = np.stack([r, np.abs(dtheta)], axis=-1)
        return self.interpolator(pts.reshape(-1, 2)).reshape(r.shape)


def reachable_box(source: Grid, output: Grid) -> Tuple[float, float]:
    """Bounds of |z| and |theta| over all arguments v^-1 o w of a convolution."""
    n = (source.dims - 1) // 2
    sv = [max(abs(a[0]), abs(a[-1])) for a in source.axes()]
    sw = [max(abs(a[0]), abs(a[-1])) for a in output.axes()]
    r_max = math.sqrt(sum((a + b) ** 2 for a, b in zip(sv[:-1], sw[:-1])))
    twist = sum(sv[n + j] * sw[j] + sv[j] * sw[n + j] for j in range(n))
    theta_max = sv[-1] + sw[-1] + 2 * twist
    return r_max, theta_max


def h_convolve_points(
    f: HGridFunction,
    kernel: Callable[[np.ndarray, np.ndarray], np.ndarray],
    points: np.ndarray,
    chunk: int = 256,
) -> np.ndarray:
    """(f * g)(w) = sum_v f(v) g(v^-1 o w) prod h_i for every row w of points.

    Source nodes where f vanishes to machine precision are skipped.
    """
    nodes = f.nodes()
    weights = f.values.ravel() * f.grid.cell_volume
    keep = np.abs(weights) > 1e-14 * np.max(np.abs(weights), initial=0.0)
    nodes, weights = nodes[keep], weights[keep]
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if points.shape[1] != f.grid.dims:
        raise ValueError(f"Output points need {f.grid.dims} coordinates")

    def block(start: int) -> np.ndarray:
        dz, dt = relative_argument(nodes, points[start : start + chunk])  # noqa: E203
        return kernel(dz, dt) @ weights

    starts = list(range(0, len(points), chunk))
    logger.debug(f"Group convolution: {len(weights)} source nodes, {len(points)} outputs")
    return np.concatenate(pmap(block, starts)) if starts else np.zeros(0)


def h_convolve(
    f: HGridFunction,
    t: float,
    quad: Optional[SigmaQuadrature] = None,
    output: Optional[Grid] = None,
    table: Optional[HeisenbergKernelTable] = None,
) -> HGridFunction:
    """u = f * H_t sampled on the output grid (default: the grid of f).

    H_t is drawn from an interpolation table covering every reachable argument.

    Raises:
        TableDomainError: If a given table does not cover the reachable arguments.
    """
    output = output or f.grid
    if output.dims != f.grid.dims:
        raise ValueError("Source and output grids must have the same axes")
    r_max, theta_max = reachable_box(f.grid, output)
    if table is None:
        table = HeisenbergKernelTable.build(f.n, t, r_max, theta_max, quad)
    elif not table.covers(r_max, theta_max):
        msg = f"Kernel table (|z|<={table.r_max:.3g}, |theta|<={table.theta_max:.3g}) "
        msg += f"does not cover the reachable box ({r_max:.3g}, {theta_max:.3g})"
        raise TableDomainError(msg)
    elif table.n != f.n or table.t != t:
        raise ValueError(f"Kernel table is for n={table.n}, t={table.t}")

    mesh = np.meshgrid(*output.axes(), indexing="ij")
    points = np.stack([c.ravel() for c in mesh], axis=-1)
    vals = h_convolve_points(f, table, points)
    return HGridFunction(grid=output, values=vals.reshape(output.shape))


def kernel_field_evaluator(
    fields: Sequence[int], t: float, quad: Optional[SigmaQuadrature] = None
) -> Callable[[np.ndarray, np.ndarray], np.ndarray]:
    """Pointwise evaluator of the fields applied to H_t, usable as convolution kernel."""

    def evaluate(dz: np.ndarray, dtheta: np.ndarray) -> np.ndarray:
        zs = dz.reshape(-1, dz.shape[-1])
        ths = np.ravel(dtheta)
        vals: List[float] = [
            heisenberg_kernel_derivative(fields, z, th, t, quad) for z, th in zip(zs, ths)
        ]
        return np.array(vals).reshape(np.shape(dtheta))

    return evaluate
