"""Moment expansions of heat flows, their errors and the per-theorem rate experiments."""

from __future__ import annotations

import math
from enum import Enum
from typing import FrozenSet, List, Optional, Sequence, Tuple

import numpy as np
import scipy.fft
from pydantic import BaseModel, Extra, Field, root_validator

from .core import (
    DimensionSplit,
    Grid,
    GridFunction,
    MultiIndex,
    WeightSpec,
    check_real,
    multi_indices_upto,
)
from .fit import DecayFit, decay_fit
from .heisenberg import HGridFunction, h_convolve
from .kernels import (
    KernelFamily,
    KernelSpec,
    derivative_multiplier,
    grid_function_from_symbol,
    heisenberg_kernel_derivative_grid,
)
from .log import logger
from .moments import MomentTable, SampledFunction
from .norms import weighted_lp_norm, xp_norm
from .parallel import pmap
from .settings import get_settings

__all__ = [
    "DecayFit",
    "decay_fit",
    "ExpansionKind",
    "ExpansionRule",
    "LambdaSet",
    "lambda_set",
    "term_decay_rate",
    "term_partition",
    "TheoremId",
    "GridSettings",
    "ExperimentReport",
    "experiment_grid",
    "build_approximant",
    "solve",
    "expansion_error",
    "check_preconditions",
    "run_theorem",
]


class ExpansionKind(str, Enum):
    """Index sets of the moment expansions."""

    isotropic_full = "isotropic-full"
    """|alpha| <= k"""

    split_full = "split-full"
    """|(beta, gamma)| <= k"""

    mixed_order = "mixed-order"
    """|beta| + 2|gamma| <= k"""

    heisenberg_first_order = "heisenberg-first-order"
    """mass and first z-moments"""


class ExpansionRule(BaseModel):
    """Which moment terms enter an approximant."""

    kind: ExpansionKind
    k: int = Field(1, ge=0)
    p: float = Field(1.0, ge=1)

    class Config:
        frozen = True
        extra = Extra.forbid

    @root_validator(skip_on_failure=True)
    def check_first_order(cls, values):
        """The Heisenberg expansion has a fixed term set of order one."""
        if values["kind"] == ExpansionKind.heisenberg_first_order and values["k"] != 1:
            raise ValueError("heisenberg-first-order expansions have k = 1")
        return values

    def compatible_with(self, spec: KernelSpec) -> bool:
        if self.kind == ExpansionKind.heisenberg_first_order:
            return spec.family == KernelFamily.heisenberg
        if self.kind == ExpansionKind.isotropic_full:
            return spec.is_fft
        return spec.is_fft and spec.split is not None

    def indices(self, dim: int, split: Optional[DimensionSplit] = None) -> List[MultiIndex]:
        """Multi-indices of the moments entering the expansion."""
        if self.kind == ExpansionKind.heisenberg_first_order:
            return [MultiIndex.zeros(dim)] + [MultiIndex.unit(dim, a) for a in range(dim - 1)]
        full = multi_indices_upto(dim, self.k)
        if self.kind != ExpansionKind.mixed_order:
            return full
        if split is None:
            raise ValueError("mixed-order expansions need a split (m, n)")
        return [
            a for a in full if a.split(split.m)[0].order() + 2 * a.split(split.m)[1].order() <= self.k
        ]


# ---- index bookkeeping of the anisotropic estimate


class LambdaSet(BaseModel):
    """Pairs (a, b) with k+1-2N(1-1/p) <= a+2b and a+b <= k."""

    pairs: FrozenSet[Tuple[int, int]]

    class Config:
        frozen = True
        extra = Extra.forbid

    def __contains__(self, ab: Tuple[int, int]) -> bool:
        return tuple(ab) in self.pairs

    def __len__(self) -> int:
        return len(self.pairs)

    def sorted(self) -> List[Tuple[int, int]]:
        return sorted(self.pairs)


def lambda_set(p: float, k: int, N: int) -> LambdaSet:  # noqa: N803
    """Enumerate the pairs of orders whose terms decay slower than the remainder."""
    if p < 1 or k < 0:
        raise ValueError(f"Need p >= 1 and k >= 0, got p={p}, k={k}")
    lower = k + 1 - 2 * N * (1 - 1 / p)
    pairs = {
        (a, b)
        for a in range(k + 1)
        for b in range(k + 1)
        if lower <= a + 2 * b and a + b <= k
    }
    return LambdaSet(pairs=frozenset(pairs))


def term_decay_rate(beta: MultiIndex, gamma: MultiIndex, p: float, N: int) -> float:  # noqa: N803
    """Decay exponent of the term D_x^beta D_y^gamma G_t in L^p for the mixed-order flow."""
    return beta.order() / 4 + gamma.order() / 2 + N / 2 * (1 - 1 / p)


class TermPartition(BaseModel):
    """Terms of the full split expansion, by decay against t^-(k+1)/4."""

    slow: List[str]
    fast: List[str]
    lambda_pairs: List[Tuple[int, int]]

    class Config:
        extra = Extra.forbid


def term_partition(split: DimensionSplit, k: int, p: float = 1.0) -> TermPartition:
    """Split the terms |(beta, gamma)| <= k into slower and faster than the remainder."""
    slow, fast = [], []
    for alpha in multi_indices_upto(split.N, k):
        beta, gamma = alpha.split(split.m)
        rate = term_decay_rate(beta, gamma, p, split.N)
        (slow if rate < (k + 1) / 4 else fast).append(f"{beta}{gamma}")
    return TermPartition(slow=slow, fast=fast, lambda_pairs=lambda_set(p, k, split.N).sorted())


# ---- experiments


class TheoremId(str, Enum):
    """Decay statements that can be checked by a rate experiment."""

    isotropic = "intro-isotropic"
    isotropic_split = "thm2_5"
    mixed_order = "thm3_2"
    mixed_order_odd = "thm1_1"
    heisenberg = "thm1_3"
    mixed_isotropic = "sec3-isotropic"

    @property
    def family(self) -> KernelFamily:
        if self in (TheoremId.isotropic, TheoremId.isotropic_split):
            return KernelFamily.isotropic
        if self == TheoremId.heisenberg:
            return KernelFamily.heisenberg
        return KernelFamily.mixed

    def rule(self, k: int, p: float) -> ExpansionRule:
        kinds = {
            TheoremId.isotropic: ExpansionKind.isotropic_full,
            TheoremId.isotropic_split: ExpansionKind.split_full,
            TheoremId.mixed_order: ExpansionKind.mixed_order,
            TheoremId.mixed_order_odd: ExpansionKind.mixed_order,
            TheoremId.heisenberg: ExpansionKind.heisenberg_first_order,
            TheoremId.mixed_isotropic: ExpansionKind.split_full,
        }
        return ExpansionRule(kind=kinds[self], k=k, p=p)

    def target_slope(self, k: int) -> float:
        if self in (TheoremId.isotropic, TheoremId.isotropic_split):
            return -(k + 1) / 2
        if self == TheoremId.heisenberg:
            return -1.0
        return -(k + 1) / 4

    @property
    def tolerance(self) -> float:
        return 0.07 if self == TheoremId.heisenberg else 0.05

    @property
    def default_times(self) -> List[float]:
        if self == TheoremId.heisenberg:
            return [1.0, 2.0, 4.0, 8.0, 16.0]
        return [float(2**i) for i in range(7)]


def _dims_text(split: Optional[DimensionSplit], dim: int) -> str:
    return f"{split.m}+{split.n}" if split else str(dim)


def check_preconditions(
    theorem: TheoremId,
    k: int,
    p: float,
    dim: int,
    split: Optional[DimensionSplit] = None,
):
    """Check the hypotheses of a decay statement on (k, p) and the dimensions.

    Raises:
        ValueError: Naming the violated condition.
    """
    if k < 0:
        raise ValueError(f"k must be >= 0, got k={k}")
    if p < 1:
        raise ValueError(f"p must satisfy p >= 1, got p={p}")

    if theorem.family == KernelFamily.heisenberg:
        if dim < 3 or dim % 2 == 0:
            raise ValueError(f"{theorem.value} needs data on R^(2n+1), got dim={dim}")
    elif theorem != TheoremId.isotropic and split is None:
        raise ValueError(f"{theorem.value} needs a split (m, n)")
    if split is not None and split.N != dim:
        raise ValueError(f"split {_dims_text(split, dim)} does not fit dim {dim}")

    if theorem in (TheoremId.isotropic, TheoremId.mixed_isotropic):
        if dim >= 2 and not p < dim / (dim - 1):
            raise ValueError(f"{theorem.value} requires p < N/(N-1) = {dim / (dim - 1):g}")
    elif theorem == TheoremId.isotropic_split:
        for name, d in (("m", split.m), ("n", split.n)):
            if d > 1 and not p < d / (d - 1):
                raise ValueError(f"thm2_5 requires p < {name}/({name}-1) = {d / (d - 1):g}")
    elif theorem == TheoremId.mixed_order_odd:
        if k % 2 == 0:
            raise ValueError(f"thm1_1: k must be odd, got k={k}")
        if p != 1:
            raise ValueError(f"thm1_1 requires p = 1, got p={p}")
    elif theorem == TheoremId.mixed_order:
        if p != 1:
            raise ValueError(f"thm3_2 requires p = 1, got p={p}")
    elif theorem == TheoremId.heisenberg:
        if k != 1:
            raise ValueError(f"thm1_3 expands to first order: k must be 1, got k={k}")
        if p != 1:
            raise ValueError(f"thm1_3 requires p = 1, got p={p}")


class GridSettings(BaseModel):
    """Resolution of the self-similar experiment grids."""

    spacing: float = Field(0.4, gt=0)
    """Largest node spacing of FFT grids."""
    mixed_x_extent: float = Field(32.0, gt=0)
    diffusive_extent: float = Field(12.0, gt=0)
    heisenberg_points: int = Field(32, ge=8)
    heisenberg_source_points: int = Field(16, ge=8)
    heisenberg_z_extent: float = Field(8.0, gt=0)
    heisenberg_theta_extent: float = Field(20.0, gt=0)

    class Config:
        extra = Extra.forbid


def _even_fast_len(target: float) -> int:
    size = scipy.fft.next_fast_len(max(8, int(math.ceil(target))))
    while size % 2:
        size = scipy.fft.next_fast_len(size + 1)
    return size


def experiment_grid(
    spec: KernelSpec, t: float, radius: float, settings: Optional[GridSettings] = None
) -> Grid:
    """Grid holding the solution at time t of data supported in [-radius, radius]^N.

    Extents grow with the anisotropic scaling t^a_i; FFT grids keep a fixed
    spacing, the Heisenberg grid a fixed number of points.
    """
    settings = settings or GridSettings()
    exps = spec.scaling_exponents()
    if spec.family == KernelFamily.heisenberg:
        n = spec.heisenberg_n
        base = (settings.heisenberg_z_extent,) * (2 * n) + (settings.heisenberg_theta_extent,)
        ext = tuple(b * t**a + radius for b, a in zip(base, exps))
        return Grid(extents=ext, points=(settings.heisenberg_points,) * spec.dim)

    if spec.family == KernelFamily.mixed:
        base = (settings.mixed_x_extent,) * spec.split.m + (settings.diffusive_extent,) * spec.split.n
    else:
        base = (settings.diffusive_extent,) * spec.dim
    ext = tuple(b * t**a + radius for b, a in zip(base, exps))
    points = tuple(_even_fast_len(2 * e / settings.spacing) for e in ext)
    return Grid(extents=ext, points=points)


def _check_rule(spec: KernelSpec, rule: ExpansionRule, f: SampledFunction):
    if not rule.compatible_with(spec):
        raise ValueError(f"Rule {rule.kind.value} does not apply to the {spec.family.value} flow")
    if f.dim != spec.dim:
        raise ValueError(f"Datum of dim {f.dim} does not fit the {spec.dim}-dim flow")


def build_approximant(
    f: SampledFunction,
    spec: KernelSpec,
    rule: ExpansionRule,
    t: float,
    grid: Grid,
    moments: Optional[MomentTable] = None,
) -> GridFunction:
    """Sum of the moment-weighted kernel derivatives selected by the rule.

    For the Euclidean flows this is
    sum_alpha (-1)^|alpha| / alpha! (int f z^alpha) D^alpha G_t, for the
    Heisenberg flow (int f) H_t - sum_j (int z_j f) Z~_j H_t with the
    right-invariant fields Z~_j.
    """
    _check_rule(spec, rule, f)
    indices = rule.indices(spec.dim, spec.split)
    moments = moments or MomentTable.build(f, indices)

    if spec.family == KernelFamily.heisenberg:
        n = spec.heisenberg_n
        mass = moments[MultiIndex.zeros(spec.dim)]
        vals = mass * heisenberg_kernel_derivative_grid((), grid, t).values
        for j in range(1, 2 * n + 1):
            m_j = moments[MultiIndex.unit(spec.dim, j - 1)]
            if m_j == 0:
                continue
            zh = heisenberg_kernel_derivative_grid((j,), grid, t, right=True)
            vals = vals - m_j * zh.values
        return GridFunction(grid=grid, values=vals)

    multiplier = np.zeros(grid.shape, dtype=complex)
    for alpha in indices:
        coef = (-1) ** alpha.order() / alpha.factorial() * moments[alpha]
        multiplier += coef * derivative_multiplier(grid, alpha)
    symbol = spec.symbol(grid, t) * multiplier
    return grid_function_from_symbol(grid, symbol, f"{rule.kind.value} approximant")


def solve(
    f: SampledFunction,
    spec: KernelSpec,
    t: float,
    grid: Grid,
    settings: Optional[GridSettings] = None,
) -> GridFunction:
    """Solution at time t of the heat flow of the spec with initial datum f."""
    if f.dim != spec.dim:
        raise ValueError(f"Datum of dim {f.dim} does not fit the {spec.dim}-dim flow")
    if spec.family == KernelFamily.heisenberg:
        settings = settings or GridSettings()
        source = HGridFunction.sample(f.box_grid(settings.heisenberg_source_points), f)
        return h_convolve(source, t, output=grid)

    workers = get_settings().threads
    fh = scipy.fft.fftn(f.sample(grid).values, workers=workers)
    vals = scipy.fft.ifftn(fh * spec.symbol(grid, t), workers=workers)
    return GridFunction(grid=grid, values=check_real(vals, f"{spec.family.value} solution"))


def expansion_error(
    f: SampledFunction,
    spec: KernelSpec,
    rule: ExpansionRule,
    t: float,
    norm: Optional[WeightSpec] = None,
    grid: Optional[Grid] = None,
    settings: Optional[GridSettings] = None,
    moments: Optional[MomentTable] = None,
) -> float:
    """Weighted L^p norm (p from the rule) of solution minus approximant at time t."""
    grid = grid or experiment_grid(spec, t, f.radius, settings)
    u = solve(f, spec, t, grid, settings)
    approx = build_approximant(f, spec, rule, t, grid, moments)
    err = weighted_lp_norm(u - approx, norm, rule.p)
    logger.info(f"{rule.kind.value} k={rule.k}: error {err:.6e} at t={t}")
    return err


# ---- reports

MAX_CONSTANT_GROWTH = 3.0
"""Constants may grow by less than this factor over the t-range of a passing run."""


def _growth(constants: Sequence[float]) -> float:
    return max(constants) / constants[0]


def _verdict(
    fit: DecayFit,
    target: float,
    tolerance: float,
    constants: Sequence[float],
    max_growth: float = MAX_CONSTANT_GROWTH,
) -> bool:
    return fit.slope <= target + tolerance and _growth(constants) < max_growth


class GridMeta(BaseModel):
    """Extents and point counts of a grid used in an experiment."""

    t: float
    extents: Tuple[float, ...]
    points: Tuple[int, ...]

    class Config:
        extra = Extra.forbid


class ExperimentReport(BaseModel):
    """Outcome of a rate experiment for one decay statement."""

    theorem: TheoremId
    family: KernelFamily
    dims: str
    k: int
    p: float
    t_list: List[float]
    errors: List[float]
    fit: DecayFit
    target_slope: float
    tolerance: float
    passed: bool
    rhs_norm: float
    """Weighted norm of the datum on the right-hand side of the statement."""
    constants: List[float]
    """error(t) / (t^target * rhs_norm) for every t."""
    grids: List[GridMeta] = []
    partition: Optional[TermPartition] = None
    max_growth: float = Field(MAX_CONSTANT_GROWTH, gt=1)
    """Largest accepted ratio of a later constant to the first one."""

    class Config:
        extra = Extra.forbid

    @root_validator(skip_on_failure=True)
    def check_passed(cls, values):
        """The verdict is determined by the slopes and the growth of the constants."""
        keys = ("fit", "target_slope", "tolerance", "constants", "max_growth")
        if values["passed"] != _verdict(*(values[k] for k in keys)):
            raise ValueError("passed must match the slope and constant-growth checks")
        return values

    def constant_drift(self) -> float:
        """Ratio of largest to smallest right-hand-side constant over the t-range."""
        return max(self.constants) / min(self.constants)

    def constant_growth(self) -> float:
        """Ratio of the largest constant to the one at the first time."""
        return _growth(self.constants)

    def rows(self) -> np.ndarray:
        """Plot-ready (t, error, constant) rows."""
        return np.column_stack([self.t_list, self.errors, self.constants])


def rhs_weight(theorem: TheoremId, k: int, dim: int, split: Optional[DimensionSplit]):
    """Weight of the datum norm on the right-hand side (None for the X^p norm)."""
    if theorem in (TheoremId.isotropic, TheoremId.mixed_isotropic):
        return WeightSpec.radial(k + 1)
    if theorem == TheoremId.mixed_order:
        return WeightSpec.additive(split, k + 1, k + 1)
    if theorem == TheoremId.mixed_order_odd:
        return WeightSpec.additive(split, k + 1, (k + 1) / 2)
    if theorem == TheoremId.heisenberg:
        return WeightSpec.additive(DimensionSplit(m=dim - 1, n=1), 2, 1)
    return None


def run_theorem(
    theorem: TheoremId,
    f: SampledFunction,
    k: int = 1,
    p: float = 1.0,
    t_list: Optional[Sequence[float]] = None,
    settings: Optional[GridSettings] = None,
    tolerance: Optional[float] = None,
) -> ExperimentReport:
    """Measure the expansion error over t_list and compare its decay with the statement.

    Raises:
        ValueError: If (k, p) or the datum violate the hypotheses of the statement.
    """
    theorem = TheoremId(theorem)
    split = f.split
    check_preconditions(theorem, k, p, f.dim, split)
    if theorem.family == KernelFamily.heisenberg:
        spec = KernelSpec.heisenberg((f.dim - 1) // 2)
    elif theorem.family == KernelFamily.mixed:
        spec = KernelSpec.mixed(split.m, split.n)
    else:
        spec = KernelSpec.isotropic(f.dim, split)
    rule = theorem.rule(k, p)
    t_list = [float(t) for t in (t_list or theorem.default_times)]
    target = theorem.target_slope(k)
    tolerance = theorem.tolerance if tolerance is None else tolerance

    partition = None
    if theorem == TheoremId.mixed_order:
        partition = term_partition(split, k, p)
        logger.info(f"terms slower than t^-(k+1)/4: {partition.slow}")
        logger.info(f"Lambda({p:g},{k}) = {partition.lambda_pairs}")

    moments = MomentTable.build(f, rule.indices(spec.dim, spec.split))
    grids = [experiment_grid(spec, t, f.radius, settings) for t in t_list]

    def one(tg: Tuple[float, Grid]) -> float:
        t, grid = tg
        return expansion_error(f, spec, rule, t, None, grid, settings, moments)

    errors = pmap(one, list(zip(t_list, grids)))
    fit = decay_fit(t_list, errors)

    weight = rhs_weight(theorem, k, f.dim, split)
    if weight is None:
        rhs = xp_norm(f.sample(), split, k, p)
    else:
        rhs = weighted_lp_norm(f.sample(), weight, p)
    constants = [e / (t**target * rhs) for t, e in zip(t_list, errors)]

    passed = _verdict(fit, target, tolerance, constants)
    logger.info(
        f"{theorem.value}: slope {fit.slope:.4f} vs target {target:.4f} "
        f"(+{tolerance}), constant growth {_growth(constants):.3f} "
        f"-> {'pass' if passed else 'FAIL'}"
    )
    return ExperimentReport(
        theorem=theorem,
        family=spec.family,
        dims=_dims_text(split, f.dim),
        k=k,
        p=p,
        t_list=t_list,
        errors=errors,
        fit=fit,
        target_slope=target,
        tolerance=tolerance,
        passed=passed,
        rhs_norm=rhs,
        constants=constants,
        grids=[GridMeta(t=t, extents=g.extents, points=g.points) for t, g in zip(t_list, grids)],
        partition=partition,
    )

