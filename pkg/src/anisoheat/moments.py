"""Moments, remainder functionals and checks of the moment decompositions.

A function f is decomposed into derivatives of the Dirac delta weighted by its
moments, plus derivatives of explicit remainder functions. The remainders are
dilation integrals of f over t in (0, 1], evaluated here by Gauss-Legendre
quadrature. Test functions are sympy expressions, so that all derivatives
entering the Taylor-type identities are exact.
"""

from __future__ import annotations

import math
from enum import Enum
from functools import lru_cache
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import sympy
from numpy.polynomial.legendre import leggauss
from pydantic import BaseModel, Extra, Field, validator
from scipy.interpolate import RegularGridInterpolator

from .core import (
    DimensionSplit,
    Grid,
    GridFunction,
    MultiIndex,
    WeightSpec,
    multi_indices,
    multi_indices_upto,
)
from .log import logger
from .norms import mixed_norm, quad_integral, weighted_lp_norm
from .parallel import pmap

_CHUNK = 1 << 18
"""Rough upper bound on the number of evaluations done in one vectorized call."""


@lru_cache(maxsize=16)
def gauss_legendre(nodes: int, lo: float = 0.0, hi: float = 1.0):
    """Gauss-Legendre nodes and weights on [lo, hi]."""
    x, w = leggauss(nodes)
    half = (hi - lo) / 2
    return lo + half * (x + 1), half * w


def _broadcast(coords: Sequence) -> Tuple[List[np.ndarray], Tuple[int, ...]]:
    arrs = np.broadcast_arrays(*[np.asarray(c, dtype=float) for c in coords])
    return arrs, arrs[0].shape if arrs else ()


# ----


class SampledFunction(BaseModel):
    """A function on all of R^N that is negligible outside the box [-R, R]^N.

    The declared radius R bounds where the function is numerically nonzero;
    integrals over R^N are computed by the trapezoid rule on that box.
    """

    evaluator: Optional[Callable] = None
    dim: int = Field(..., ge=1)
    split: Optional[DimensionSplit] = None
    radius: float = Field(..., gt=0)
    points: int = Field(64, ge=8)
    moment_order: Optional[int] = None
    """Largest |alpha| for which the moments are finite (None: all)."""

    class Config:
        arbitrary_types_allowed = True
        allow_mutation = False
        extra = Extra.forbid

    @validator("points")
    def check_even(cls, v):
        """Box grids need an even number of points."""
        if v % 2:
            raise ValueError(f"points must be even, got {v}")
        return v

    @validator("split")
    def check_split(cls, v, values):
        """The split must cover the dimension."""
        if v is not None and "dim" in values and v.N != values["dim"]:
            raise ValueError(f"split {v.m}+{v.n} does not fit dim {values['dim']}")
        return v

    def _evaluate(self, coords: List[np.ndarray]) -> np.ndarray:
        return self.evaluator(*coords)

    def __call__(self, *coords) -> np.ndarray:
        """Evaluate at broadcastable coordinate arrays, one per axis."""
        if len(coords) != self.dim:
            raise ValueError(f"Expected {self.dim} coordinates, got {len(coords)}")
        arrs, shape = _broadcast(coords)
        return np.broadcast_to(np.asarray(self._evaluate(arrs), dtype=float), shape)

    def box_grid(self, points: Optional[int] = None) -> Grid:
        """Grid on the declared box [-R, R)^N."""
        return Grid.cube(self.dim, self.radius, points or self.points)

    def sample(self, grid: Optional[Grid] = None) -> GridFunction:
        """Sample on the given grid (default: the declared box)."""
        return GridFunction.from_function(grid or self.box_grid(), self)

    def dilated(self, lam: float) -> SampledFunction:
        """Return z -> f(lam z)."""
        if not lam > 0:
            raise ValueError(f"Dilation factor must be positive, got {lam}")
        return SampledFunction(
            evaluator=lambda *c: self(*[lam * x for x in c]),
            dim=self.dim,
            split=self.split,
            radius=self.radius / lam,
            points=self.points,
            moment_order=self.moment_order,
        )

    @classmethod
    def gaussian(
        cls,
        dim: int,
        variance: float = 0.5,
        center: Optional[Sequence[float]] = None,
        mass: Optional[float] = None,
        split: Optional[DimensionSplit] = None,
        points: int = 64,
    ) -> SampledFunction:
        """exp(-|z - c|^2 / (2 variance)), rescaled to the given mass if requested."""
        c = np.zeros(dim) if center is None else np.asarray(center, dtype=float)
        if c.shape != (dim,):
            raise ValueError(f"center must have length {dim}")
        amp = 1.0
        if mass is not None:
            amp = mass / (2 * np.pi * variance) ** (dim / 2)

        def gauss(*coords):
            r2 = sum((x - ci) ** 2 for x, ci in zip(coords, c))
            return amp * np.exp(-r2 / (2 * variance))

        radius = 8 * math.sqrt(variance) + float(np.max(np.abs(c), initial=0.0))
        return cls(evaluator=gauss, dim=dim, split=split, radius=radius, points=points)

    @classmethod
    def from_test_function(
        cls,
        phi: TestFunction,
        radius: float,
        split: Optional[DimensionSplit] = None,
        points: int = 64,
    ) -> SampledFunction:
        """Use a (rapidly decaying) test function as datum."""
        return cls(evaluator=phi, dim=phi.dim, split=split, radius=radius, points=points)

    @classmethod
    def from_grid(
        cls, gf: GridFunction, split: Optional[DimensionSplit] = None
    ) -> SampledFunction:
        """Cubic interpolation of grid samples, extended by zero outside the box."""
        interp = RegularGridInterpolator(
            gf.grid.axes(),
            np.real(gf.values),
            method="cubic",
            bounds_error=False,
            fill_value=0.0,
        )

        def evaluate(*coords):
            pts = np.stack(coords, axis=-1)
            return interp(pts.reshape(-1, len(coords))).reshape(pts.shape[:-1])

        return cls(
            evaluator=evaluate,
            dim=gf.grid.dims,
            split=split,
            radius=max(gf.grid.extents),
            points=max(gf.grid.points),
        )


class DilationRemainder(SampledFunction):
    """Remainder of the form c int_0^1 (1-t)^q (x_B/t)^kappa g(x_B/t, x_rest) t^-d dt.

    Only the axes in the block B are dilated. Because g is negligible outside its
    box, the integrand vanishes for t < |x_B| / R and the t-integral is taken
    over [|x_B| / R, 1] after substituting t = e^u.
    """

    base: SampledFunction
    block: Tuple[int, ...]
    monomial: MultiIndex
    weight_power: int = Field(..., ge=0)
    coefficient: float
    jacobian: int
    nodes: int = 64

    @validator("monomial")
    def check_monomial(cls, v, values):
        """The monomial lives on the block and has positive order."""
        if "block" in values and v.dim != len(values["block"]):
            raise ValueError("monomial length must match the block")
        if v.order() < 1:
            raise ValueError("dilation remainders need a monomial of order >= 1")
        return v

    @classmethod
    def build(cls, base: SampledFunction, block: Sequence[int], **kwargs):
        """Construct the remainder with the box data taken from its base."""
        return cls(
            base=base,
            block=tuple(block),
            dim=base.dim,
            split=base.split,
            radius=base.radius,
            points=base.points,
            **kwargs,
        )

    def _evaluate(self, coords: List[np.ndarray]) -> np.ndarray:
        shape = coords[0].shape
        flat = [c.ravel() for c in coords]
        rb = np.sqrt(sum(flat[a] ** 2 for a in self.block))
        out = np.zeros(rb.shape)
        active = np.nonzero((rb > 0) & (rb < self.radius))[0]
        xi, wi = leggauss(self.nodes)
        chunk = max(1, _CHUNK // self.nodes)
        for start in range(0, len(active), chunk):
            idx = active[start : start + chunk]  # noqa: E203
            lo = np.log(rb[idx] / self.radius)[:, None]
            u = lo * (1 - xi[None, :]) / 2
            du = -lo * wi[None, :] / 2
            t = np.exp(u)
            args = []
            for a in range(self.dim):
                x = flat[a][idx][:, None]
                args.append(x / t if a in self.block else np.broadcast_to(x, t.shape))
            vals = self.base(*args)
            mono = self.monomial.monomial([args[a] for a in self.block])
            integrand = (1 - t) ** self.weight_power * mono * vals * t ** (1 - self.jacobian)
            out[idx] = self.coefficient * np.sum(integrand * du, axis=1)
        return out.reshape(shape)

    def pair(self, psi: Callable[..., np.ndarray], nodes: int = 32) -> float:
        """Return int R(x) psi(x) dx, computed after the substitution x_B = t z_B.

        This rewrites the pairing as
        c int_0^1 (1-t)^q t^(|B|-d) int z_B^kappa g(z) psi(t z_B, z_rest) dz dt,
        whose integrand is smooth in t.
        """
        grid = self.base.box_grid()
        mesh = grid.mesh()
        weight = self.base(*mesh) * self.monomial.monomial([mesh[a] for a in self.block])
        ts, ws = gauss_legendre(nodes)
        total = 0.0
        for t, w in zip(ts, ws):
            args = [t * c if a in self.block else c for a, c in enumerate(mesh)]
            inner = np.sum(weight * psi(*args)) * grid.cell_volume
            total += w * (1 - t) ** self.weight_power * t ** (len(self.block) - self.jacobian) * inner
        return float(self.coefficient * total)


# ----


class TestFunction:
    """Smooth function given by a sympy expression, with exact derivatives.

    Coordinates are z1..zN; on the Heisenberg group the last one is theta.
    """

    __test__ = False

    def __init__(self, expr, symbols: Sequence[sympy.Symbol]):
        self.expr = sympy.sympify(expr)
        self.symbols = tuple(symbols)
        self._fn = sympy.lambdify(self.symbols, self.expr, modules="numpy")
        self._derivatives: Dict[Tuple[int, ...], TestFunction] = {}
        self._fields: Dict[Tuple[int, bool], TestFunction] = {}

    @property
    def dim(self) -> int:
        return len(self.symbols)

    @staticmethod
    def coordinates(dim: int, heisenberg: bool = False) -> Tuple[sympy.Symbol, ...]:
        """Standard coordinate symbols z1..zN (theta last on the Heisenberg group)."""
        if heisenberg:
            return sympy.symbols(f"z1:{dim}", real=True) + (sympy.Symbol("theta", real=True),)
        return sympy.symbols(f"z1:{dim + 1}", real=True)

    @classmethod
    def from_expr(cls, expr: Union[str, sympy.Expr], dim: int, heisenberg: bool = False):
        """Parse an expression in the standard coordinates."""
        syms = cls.coordinates(dim, heisenberg)
        local = {str(s): s for s in syms}
        return cls(sympy.sympify(expr, locals=local), syms)

    @classmethod
    def polynomial_gaussian(
        cls,
        dim: int,
        coefficients: Dict[Tuple[int, ...], float],
        variance: float = 0.5,
        center: Optional[Sequence[float]] = None,
        heisenberg: bool = False,
    ) -> TestFunction:
        """sum_alpha c_alpha (z-c)^alpha * exp(-|z-c|^2 / (2 variance))."""
        syms = cls.coordinates(dim, heisenberg)
        c = [0.0] * dim if center is None else [float(x) for x in center]
        shifted = [s - ci for s, ci in zip(syms, c)]
        poly = sum(
            coef * sympy.Mul(*[x**e for x, e in zip(shifted, exps)])
            for exps, coef in coefficients.items()
        )
        gauss = sympy.exp(-sum(x**2 for x in shifted) / (2 * sympy.Float(variance)))
        return cls(poly * gauss, syms)

    @classmethod
    def random(
        cls,
        rng: np.random.Generator,
        dim: int,
        degree: int = 2,
        heisenberg: bool = False,
    ) -> TestFunction:
        """Random polynomial times a random shifted Gaussian."""
        coeffs = {
            idx.exponents: float(rng.uniform(-1, 1))
            for idx in multi_indices_upto(dim, degree)
        }
        coeffs[(0,) * dim] = 1.0 + abs(coeffs[(0,) * dim])
        variance = float(rng.uniform(0.2, 0.6))
        center = rng.uniform(-0.3, 0.3, size=dim)
        return cls.polynomial_gaussian(dim, coeffs, variance, center, heisenberg)

    def __call__(self, *coords) -> np.ndarray:
        arrs, shape = _broadcast(coords)
        return np.broadcast_to(np.asarray(self._fn(*arrs), dtype=float), shape)

    def derivative(self, alpha: MultiIndex) -> TestFunction:
        """Exact partial derivative D^alpha."""
        if alpha.dim != self.dim:
            raise ValueError(f"Multi-index of length {alpha.dim} does not fit dim {self.dim}")
        key = alpha.exponents
        if key not in self._derivatives:
            args = [(s, e) for s, e in zip(self.symbols, key) if e]
            expr = sympy.diff(self.expr, *args) if args else self.expr
            self._derivatives[key] = TestFunction(expr, self.symbols)
        return self._derivatives[key]

    def field_expr(self, field: int, right: bool = False) -> sympy.Expr:
        """Heisenberg field (1-based Z_j, 2n+1 for Theta) applied symbolically."""
        n = (self.dim - 1) // 2
        z, theta = self.symbols[:-1], self.symbols[-1]
        if field == 2 * n + 1:
            return sympy.diff(self.expr, theta)
        if not 1 <= field <= 2 * n:
            raise ValueError(f"Field index must be in 1..{2 * n + 1}, got {field}")
        a = field - 1
        coef = 2 * z[a + n] if a < n else -2 * z[a - n]
        if right:
            coef = -coef
        return sympy.diff(self.expr, z[a]) + coef * sympy.diff(self.expr, theta)

    def apply_field(self, field: int, right: bool = False) -> TestFunction:
        """Return Z u (or its right-invariant counterpart) as a test function."""
        if self.dim < 3 or self.dim % 2 == 0:
            raise ValueError("Heisenberg fields need 2n+1 coordinates")
        key = (field, right)
        if key not in self._fields:
            self._fields[key] = TestFunction(self.field_expr(field, right), self.symbols)
        return self._fields[key]

    def apply_fields(self, fields: Sequence[int]) -> TestFunction:
        """Apply fields right to left: apply_fields((j, k)) is Z_j Z_k u."""
        res = self
        for f in reversed(fields):
            res = res.apply_field(f)
        return res

    def compose_left(self, g) -> TestFunction:
        """Return p -> u(g o p) for a Heisenberg point g (with attributes z, theta)."""
        n = (self.dim - 1) // 2
        z, theta = self.symbols[:-1], self.symbols[-1]
        gz = [sympy.Float(v) for v in g.z]
        twist = 2 * sum(gz[n + j] * z[j] - gz[j] * z[n + j] for j in range(n))
        subs = {zi: gi + zi for zi, gi in zip(z, gz)}
        subs[theta] = sympy.Float(g.theta) + theta + twist
        return TestFunction(self.expr.xreplace(subs), self.symbols)


# ----


def _check_moment_order(f: SampledFunction, order: int):
    if f.moment_order is not None and order > f.moment_order:
        msg = f"Moment of order {order} diverges: f has finite moments "
        msg += f"only up to order {f.moment_order}"
        raise ValueError(msg)


def moment(f: SampledFunction, alpha: MultiIndex) -> float:
    """Return int f(z) z^alpha dz over the declared box."""
    if alpha.dim != f.dim:
        raise ValueError(f"Multi-index of length {alpha.dim} does not fit dim {f.dim}")
    _check_moment_order(f, alpha.order())
    gf = f.sample()
    vals = gf.values * alpha.monomial(gf.grid.mesh())
    return quad_integral(GridFunction(grid=gf.grid, values=vals))


class MomentTable(BaseModel):
    """Moments int f z^alpha dz for a fixed index set, keyed by exponent tuples."""

    order: int
    entries: Dict[Tuple[int, ...], float]

    class Config:
        extra = Extra.forbid

    def __getitem__(self, alpha: MultiIndex) -> float:
        return self.entries[alpha.exponents]

    def __contains__(self, alpha: MultiIndex) -> bool:
        return alpha.exponents in self.entries

    def indices(self) -> List[MultiIndex]:
        return [MultiIndex(exponents=e) for e in self.entries]

    @classmethod
    def build(cls, f: SampledFunction, indices: Sequence[MultiIndex]) -> MomentTable:
        """Compute all requested moments from one sampling of f."""
        indices = list(indices)
        order = max((a.order() for a in indices), default=0)
        _check_moment_order(f, order)
        gf = f.sample()
        mesh = gf.grid.mesh()

        def one(alpha: MultiIndex) -> float:
            vals = gf.values * alpha.monomial(mesh)
            return quad_integral(GridFunction(grid=gf.grid, values=vals))

        values = pmap(one, indices)
        return cls(order=order, entries={a.exponents: v for a, v in zip(indices, values)})


class DecompositionRule(str, Enum):
    """Moment decompositions: isotropic, split (x, y) and mixed-order."""

    isotropic = "lemma2_1"
    split = "lemma2_3"
    mixed_order = "lemma3_3"


def _check_split(f: SampledFunction, split: Optional[DimensionSplit]) -> DimensionSplit:
    split = split or f.split
    if split is None:
        raise ValueError("This decomposition needs a split (m, n)")
    if split.N != f.dim:
        raise ValueError(f"split {split.m}+{split.n} does not fit dim {f.dim}")
    return split


def _check_lp_range(p: float, d: int, what: str):
    if p < 1:
        raise ValueError(f"Norm exponent must satisfy p >= 1, got p={p}")
    if p > 1 and d > 1 and not p < d / (d - 1):
        raise ValueError(f"{what} is bounded in L^p only for p < {d}/({d}-1), got p={p}")


def main_term_indices(
    rule: DecompositionRule, k: int, dim: int, split: Optional[DimensionSplit] = None
) -> List[MultiIndex]:
    """Index set of the delta-terms of a decomposition."""
    if rule == DecompositionRule.mixed_order:
        if split is None:
            raise ValueError("The mixed-order decomposition needs a split (m, n)")
        return [
            a
            for a in multi_indices_upto(dim, k)
            if a.split(split.m)[0].order() + 2 * a.split(split.m)[1].order() <= k
        ]
    return multi_indices_upto(dim, k)


def decomposition_table(
    f: SampledFunction,
    k: int,
    rule: DecompositionRule,
    split: Optional[DimensionSplit] = None,
) -> MomentTable:
    """Coefficients (-1)^|alpha| / alpha! * moment of the delta-terms D^alpha delta_0."""
    if rule != DecompositionRule.isotropic:
        split = _check_split(f, split)
    if rule == DecompositionRule.mixed_order and k % 2 == 0:
        raise ValueError(f"k must be odd, got k={k}")
    indices = main_term_indices(rule, k, f.dim, split)
    moments = MomentTable.build(f, indices)
    entries = {
        a.exponents: (-1) ** a.order() / a.factorial() * moments[a] for a in indices
    }
    return MomentTable(order=k, entries=entries)


def remainder_F_alpha(f: SampledFunction, alpha: MultiIndex, k: int) -> DilationRemainder:
    """Remainder F_alpha of the isotropic decomposition, for |alpha| = k+1."""
    if alpha.dim != f.dim:
        raise ValueError(f"Multi-index of length {alpha.dim} does not fit dim {f.dim}")
    if alpha.order() != k + 1:
        raise ValueError(f"F_alpha needs |alpha| = k+1 = {k + 1}, got {alpha.order()}")
    coef = (k + 1) * (-1) ** (k + 1) / alpha.factorial()
    return DilationRemainder.build(
        f,
        range(f.dim),
        monomial=alpha,
        weight_power=k,
        coefficient=coef,
        jacobian=f.dim,
    )


def remainder_F_gamma(
    f: SampledFunction,
    split: Optional[DimensionSplit],
    gamma: MultiIndex,
    k: int,
    half: bool = False,
) -> DilationRemainder:
    """Remainder F_gamma dilating only the y-block.

    With half=False this is the order-(k+1) remainder (|gamma| = k+1), with
    half=True the mixed-order variant for odd k and |gamma| = (k+1)/2.
    """
    split = _check_split(f, split)
    if gamma.dim != split.n:
        raise ValueError(f"gamma must have length n={split.n}, got {gamma.dim}")
    if half:
        if k % 2 == 0:
            raise ValueError(f"k must be odd, got k={k}")
        order = (k + 1) // 2
    else:
        order = k + 1
    if gamma.order() != order:
        raise ValueError(f"F_gamma needs |gamma| = {order}, got {gamma.order()}")
    coef = order * (-1) ** order / gamma.factorial()
    return DilationRemainder.build(
        f,
        split.y_axes(),
        monomial=gamma,
        weight_power=order - 1,
        coefficient=coef,
        jacobian=split.n,
    )


def y_moment(
    f: SampledFunction, split: Optional[DimensionSplit], gamma: MultiIndex
) -> SampledFunction:
    """x -> int f(x, y) y^gamma dy, as a function on R^m."""
    split = _check_split(f, split)
    if gamma.dim != split.n:
        raise ValueError(f"gamma must have length n={split.n}, got {gamma.dim}")
    ygrid = Grid.cube(split.n, f.radius, f.points)
    ynodes = [a.ravel() for a in np.meshgrid(*ygrid.axes(), indexing="ij")]
    yweight = gamma.monomial(ynodes) * ygrid.cell_volume * np.ones(len(ynodes[0]))

    def evaluate(*xs):
        shape = xs[0].shape
        flat = [x.ravel() for x in xs]
        out = np.empty(len(flat[0]))
        chunk = max(1, _CHUNK // len(yweight))
        for start in range(0, len(out), chunk):
            sl = slice(start, start + chunk)
            args = [x[sl][:, None] for x in flat] + [y[None, :] for y in ynodes]
            out[sl] = f(*args) @ yweight
        return out.reshape(shape)

    return SampledFunction(
        evaluator=evaluate, dim=split.m, radius=f.radius, points=f.points
    )


def remainder_R_betagamma(
    f: SampledFunction,
    split: Optional[DimensionSplit],
    beta: MultiIndex,
    gamma: MultiIndex,
    k: int,
    rule: DecompositionRule = DecompositionRule.split,
) -> DilationRemainder:
    """Remainder [R f]_{beta gamma} on R^m, the x-dilation integral of the y-moment."""
    split = _check_split(f, split)
    if beta.dim != split.m or gamma.dim != split.n:
        msg = f"Expected index lengths ({split.m}, {split.n}), "
        msg += f"got ({beta.dim}, {gamma.dim})"
        raise ValueError(msg)
    b, g = beta.order(), gamma.order()
    if rule == DecompositionRule.split:
        if b + g != k + 1 or g > k:
            raise ValueError(f"Need |beta|+|gamma| = k+1 and |gamma| <= k, got {b}, {g}")
    elif rule == DecompositionRule.mixed_order:
        if k % 2 == 0:
            raise ValueError(f"k must be odd, got k={k}")
        if b + 2 * g != k + 1 or 2 * g > k - 1:
            msg = f"Need |beta|+2|gamma| = k+1 and |gamma| <= (k-1)/2, got {b}, {g}"
            raise ValueError(msg)
    else:
        raise ValueError(f"rule {rule.value} has no [R f] remainders")
    coef = (-1) ** b * b / beta.factorial()
    return DilationRemainder.build(
        y_moment(f, split, gamma),
        range(split.m),
        monomial=beta,
        weight_power=b - 1,
        coefficient=coef,
        jacobian=split.m,
    )


# ---- Taylor identities


def _point(z: Sequence[float]) -> np.ndarray:
    return np.asarray(z, dtype=float).ravel()


def taylor_check(phi: TestFunction, z: Sequence[float], k: int, nodes: int = 64) -> float:
    """Residual of Taylor's formula of order k with integral remainder at z."""
    z = _point(z)
    zero = np.zeros_like(z)
    ts, ws = gauss_legendre(nodes)
    rhs = 0.0
    for a in multi_indices_upto(len(z), k):
        rhs += float(phi.derivative(a)(*zero)) * a.monomial(z) / a.factorial()
    for a in multi_indices(len(z), k + 1):
        vals = phi.derivative(a)(*[ts * zi for zi in z])
        integral = np.sum(ws * (1 - ts) ** k * vals)
        rhs += (k + 1) * a.monomial(z) / a.factorial() * integral
    return abs(float(phi(*z)) - rhs)


def taylor_split_check(
    phi: TestFunction,
    z: Sequence[float],
    k: int,
    split: DimensionSplit,
    nodes: int = 64,
) -> float:
    """Residual of the split (x, y) Taylor identity at z = (x, y).

    Taylor expansion in y at fixed x up to order k, followed by Taylor
    expansion of each coefficient in x up to order k - |gamma|.
    """
    z = _point(z)
    if len(z) != split.N or phi.dim != split.N:
        raise ValueError(f"Point and test function must have dimension {split.N}")
    x, y = z[: split.m], z[split.m :]  # noqa: E203
    zero = np.zeros_like(z)
    ts, ws = gauss_legendre(nodes)

    rhs = 0.0
    for a in multi_indices_upto(split.N, k):
        rhs += float(phi.derivative(a)(*zero)) * a.monomial(z) / a.factorial()

    for gamma in multi_indices_upto(split.n, k):
        g = gamma.order()
        for beta in multi_indices(split.m, k + 1 - g):
            args = [ts * xi for xi in x] + [np.zeros_like(ts)] * split.n
            vals = phi.derivative(beta.concat(gamma))(*args)
            integral = np.sum(ws * (1 - ts) ** (k - g) * vals)
            coef = (k + 1 - g) * beta.monomial(x) / beta.factorial()
            rhs += coef * integral * gamma.monomial(y) / gamma.factorial()

    for gamma in multi_indices(split.n, k + 1):
        args = [np.full_like(ts, xi) for xi in x] + [ts * yi for yi in y]
        vals = phi.derivative(MultiIndex.zeros(split.m).concat(gamma))(*args)
        integral = np.sum(ws * (1 - ts) ** k * vals)
        rhs += (k + 1) * gamma.monomial(y) / gamma.factorial() * integral

    return abs(float(phi(*z)) - rhs)


# ---- decompositions


def _pairing(f: SampledFunction, phi: Callable) -> float:
    gf = f.sample()
    vals = gf.values * phi(*gf.grid.mesh())
    return quad_integral(GridFunction(grid=gf.grid, values=vals))


def _restricted(fn: TestFunction, split: DimensionSplit) -> Callable:
    """x -> fn(x, 0)."""

    def restricted(*xs):
        return fn(*xs, *([0.0] * split.n))

    return restricted


def decomposition_pairing(
    f: SampledFunction,
    phi: TestFunction,
    k: int,
    rule: DecompositionRule,
    split: Optional[DimensionSplit] = None,
) -> Tuple[float, float]:
    """Return <f, phi> and the pairing of the decomposition of f with phi.

    Delta-terms contribute moment / alpha! * (D^alpha phi)(0), a term D^alpha F
    contributes (-1)^|alpha| int F D^alpha phi and a term
    D_x^beta [R f] D_y^gamma delta_0 contributes
    (-1)^|beta| int [R f](x) (D^(beta,gamma) phi)(x, 0) dx, up to the
    factorial weights of the decomposition.
    """
    if phi.dim != f.dim:
        raise ValueError("f and phi must have the same dimension")
    lhs = _pairing(f, phi)
    zero = [0.0] * f.dim

    table = decomposition_table(f, k, rule, split)
    rhs = 0.0
    for alpha in table.indices():
        # (-1)^|alpha| from the table and from <D^alpha delta_0, phi> cancel
        rhs += (-1) ** alpha.order() * table[alpha] * float(phi.derivative(alpha)(*zero))

    if rule == DecompositionRule.isotropic:
        for alpha in multi_indices(f.dim, k + 1):
            rem = remainder_F_alpha(f, alpha, k)
            rhs += (-1) ** (k + 1) * rem.pair(phi.derivative(alpha))
        return lhs, rhs

    split = _check_split(f, split)
    half = rule == DecompositionRule.mixed_order
    order = (k + 1) // 2 if half else k + 1
    for gamma in multi_indices(split.n, order):
        rem = remainder_F_gamma(f, split, gamma, k, half=half)
        d = MultiIndex.zeros(split.m).concat(gamma)
        rhs += (-1) ** order * rem.pair(phi.derivative(d))

    gmax = (k - 1) // 2 if half else k
    for gamma in multi_indices_upto(split.n, gmax):
        border = k + 1 - (2 if half else 1) * gamma.order()
        for beta in multi_indices(split.m, border):
            rem = remainder_R_betagamma(f, split, beta, gamma, k, rule)
            dphi = phi.derivative(beta.concat(gamma))
            sign = (-1) ** beta.order() / gamma.factorial()
            rhs += sign * rem.pair(_restricted(dphi, split))
    return lhs, rhs


def verify_decomposition(
    f: SampledFunction,
    phi: TestFunction,
    k: int,
    rule: DecompositionRule,
    split: Optional[DimensionSplit] = None,
) -> float:
    """Absolute difference of <f, phi> and the pairing of the decomposition of f."""
    lhs, rhs = decomposition_pairing(f, phi, k, rule, split)
    logger.debug(f"{rule.value} k={k}: <f,phi>={lhs:.12g}, decomposition={rhs:.12g}")
    return abs(lhs - rhs)


# ---- remainder bounds


class BoundCheck(BaseModel):
    """A remainder norm compared against the weighted norm of f bounding it."""

    name: str
    index: str
    lhs: float
    rhs: float

    class Config:
        extra = Extra.forbid

    def holds(self, slack: float = 1e-6) -> bool:
        return self.lhs <= self.rhs + slack


def remainder_bounds(
    f: SampledFunction,
    k: int,
    rule: DecompositionRule,
    split: Optional[DimensionSplit] = None,
    p: float = 1.0,
) -> List[BoundCheck]:
    """Norms of every remainder of a decomposition against their bounds.

    Raises:
        ValueError: If p lies outside the range where the bounds are stated.
    """
    res = []
    gf = f.sample()
    if rule == DecompositionRule.isotropic:
        _check_lp_range(p, f.dim, "F_alpha")
        rhs = weighted_lp_norm(gf, WeightSpec.radial(k + 1), p)
        for alpha in multi_indices(f.dim, k + 1):
            lhs = weighted_lp_norm(remainder_F_alpha(f, alpha, k).sample(), p=p)
            res.append(BoundCheck(name="F_alpha", index=str(alpha), lhs=lhs, rhs=rhs))
        return res

    split = _check_split(f, split)
    _check_lp_range(p, split.n, "F_gamma")
    _check_lp_range(p, split.m, "[R f]")
    half = rule == DecompositionRule.mixed_order
    order = (k + 1) // 2 if half else k + 1
    rhs = weighted_lp_norm(gf, WeightSpec.split_power(split, 0.0, order), p)
    for gamma in multi_indices(split.n, order):
        lhs = weighted_lp_norm(remainder_F_gamma(f, split, gamma, k, half).sample(), p=p)
        res.append(BoundCheck(name="F_gamma", index=str(gamma), lhs=lhs, rhs=rhs))

    gmax = (k - 1) // 2 if half else k
    for gamma in multi_indices_upto(split.n, gmax):
        border = k + 1 - (2 if half else 1) * gamma.order()
        for beta in multi_indices(split.m, border):
            rem = remainder_R_betagamma(f, split, beta, gamma, k, rule)
            lhs = weighted_lp_norm(rem.sample(), p=p)
            rhs = mixed_norm(gf, split, beta, gamma, p)
            name = "[R f]"
            res.append(BoundCheck(name=name, index=f"{beta}{gamma}", lhs=lhs, rhs=rhs))
    return res
