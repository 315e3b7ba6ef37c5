"""Configuration of rate experiments, as read from a JSON or YAML file."""

from __future__ import annotations

import math
from enum import Enum
from pathlib import Path
from typing import Dict, List, Optional, Tuple

from pydantic import BaseModel, Extra, Field, root_validator, validator

from .asymptotics import (
    ExperimentReport,
    GridSettings,
    TheoremId,
    check_preconditions,
    run_theorem,
)
from .core import DimensionSplit, MultiIndex
from .kernels import KernelFamily, KernelSpec, default_kernel_grid, kernel_derivative
from .moments import SampledFunction, TestFunction


class DatumKind(str, Enum):
    """Families of initial data."""

    gaussian = "gaussian"
    shifted_gaussian = "shifted-gaussian"
    polynomial_gaussian = "polynomial-gaussian"
    kernel = "kernel"
    """the fundamental solution of the same flow at time `time`"""


class DatumSpec(BaseModel):
    """Initial datum selector: a named family with its parameters."""

    kind: DatumKind = DatumKind.gaussian
    variance: float = Field(0.25, gt=0)
    center: Optional[List[float]] = None
    mass: Optional[float] = 1.0
    coefficients: Dict[str, float] = {}
    """Polynomial coefficients keyed by comma-separated exponents, e.g. "1,0"."""
    time: float = Field(1.0, gt=0)
    points: int = Field(64, ge=8)

    class Config:
        extra = Extra.forbid

    @validator("coefficients")
    def check_exponents(cls, v):
        """Keys are comma-separated nonnegative integers."""
        for key in v:
            try:
                exps = [int(e) for e in key.split(",")]
            except ValueError:
                raise ValueError(f"Invalid exponent key '{key}'")
            if any(e < 0 for e in exps):
                raise ValueError(f"Negative exponent in key '{key}'")
        return v

    @root_validator(skip_on_failure=True)
    def check_kind(cls, values):
        """Shifted Gaussians need a center, polynomial data need coefficients."""
        kind = values["kind"]
        if kind == DatumKind.shifted_gaussian and not values["center"]:
            raise ValueError("shifted-gaussian data need a center")
        if kind == DatumKind.polynomial_gaussian and not values["coefficients"]:
            raise ValueError("polynomial-gaussian data need coefficients")
        return values

    def exponents(self) -> Dict[Tuple[int, ...], float]:
        return {tuple(int(e) for e in k.split(",")): c for k, c in self.coefficients.items()}

    def build(self, spec: KernelSpec) -> SampledFunction:
        """Sample the datum for the flow of the given kernel."""
        dim, split = spec.dim, spec.split
        if self.center is not None and len(self.center) != dim:
            raise ValueError(f"center must have length {dim}")

        if self.kind in (DatumKind.gaussian, DatumKind.shifted_gaussian):
            return SampledFunction.gaussian(
                dim, self.variance, self.center, self.mass, split, self.points
            )

        if self.kind == DatumKind.polynomial_gaussian:
            coeffs = self.exponents()
            if any(len(e) != dim for e in coeffs):
                raise ValueError(f"exponent keys must have {dim} entries")
            phi = TestFunction.polynomial_gaussian(dim, coeffs, self.variance, self.center)
            shift = max((abs(c) for c in self.center or []), default=0.0)
            radius = 8 * math.sqrt(self.variance) + shift
            return SampledFunction.from_test_function(phi, radius, split, self.points)

        if not spec.is_fft:
            raise ValueError("kernel data are only available for the Euclidean flows")
        grid = default_kernel_grid(spec, self.time)
        if spec.family == KernelFamily.mixed:
            beta, gamma = MultiIndex.zeros(split.m), MultiIndex.zeros(split.n)
        else:
            beta, gamma = MultiIndex.zeros(dim), MultiIndex.zeros(0)
        kernel = kernel_derivative(spec, beta, gamma, self.time, grid)
        return SampledFunction.from_grid(kernel, split)


class OutputSpec(BaseModel):
    """Where reports are written."""

    report: Path = Path("report.json")
    table: Path = Path("errors.csv")

    class Config:
        extra = Extra.forbid


class ExperimentConfig(BaseModel):
    """A rate experiment: statement, dimensions, datum, times and outputs."""

    theorem: TheoremId
    dim: Optional[int] = Field(None, ge=1)
    """Dimension of the isotropic flow without split."""
    m: Optional[int] = Field(None, ge=1)
    n: Optional[int] = Field(None, ge=1)
    """Split (m, n); on the Heisenberg group n alone gives R^(2n+1)."""
    k: int = Field(1, ge=0)
    p: float = Field(1.0, ge=1)
    t_list: Optional[List[float]] = None
    tolerance: Optional[float] = Field(None, gt=0)
    grid: GridSettings = GridSettings()
    datum: DatumSpec = DatumSpec()
    output: OutputSpec = OutputSpec()

    class Config:
        extra = Extra.forbid

    @validator("t_list")
    def check_times(cls, v):
        """At least three positive, strictly increasing times."""
        if v is None:
            return v
        if len(v) < 3:
            raise ValueError(f"t_list needs at least 3 times, got {len(v)}")
        if v[0] <= 0 or any(b <= a for a, b in zip(v, v[1:])):
            raise ValueError("t_list must be positive and strictly increasing")
        return v

    @root_validator(skip_on_failure=True)
    def check_theorem(cls, values):
        """Resolve the dimensions and check the hypotheses of the statement."""
        theorem, m, n, dim = values["theorem"], values["m"], values["n"], values["dim"]
        if theorem == TheoremId.heisenberg:
            if n is None:
                raise ValueError("thm1_3 needs n")
            if m is not None:
                raise ValueError("thm1_3 takes n only")
            total, split = 2 * n + 1, None
        elif m is not None and n is not None:
            split = DimensionSplit(m=m, n=n)
            if dim is not None and dim != split.N:
                raise ValueError(f"dim={dim} contradicts m+n={split.N}")
            total = split.N
        elif m is not None or n is not None:
            raise ValueError("give both m and n")
        elif dim is not None:
            total, split = dim, None
        else:
            raise ValueError("give the dimensions: dim, or m and n")
        check_preconditions(theorem, values["k"], values["p"], total, split)
        return values

    def split(self) -> Optional[DimensionSplit]:
        if self.theorem == TheoremId.heisenberg or self.m is None:
            return None
        return DimensionSplit(m=self.m, n=self.n)

    def kernel_spec(self) -> KernelSpec:
        split = self.split()
        if self.theorem == TheoremId.heisenberg:
            return KernelSpec.heisenberg(self.n)
        if self.theorem.family == KernelFamily.mixed:
            return KernelSpec.mixed(split.m, split.n)
        return KernelSpec.isotropic(split.N if split else self.dim, split)

    def build_datum(self) -> SampledFunction:
        return self.datum.build(self.kernel_spec())

    def run(self) -> ExperimentReport:
        """Run the configured experiment."""
        return run_theorem(
            self.theorem,
            self.build_datum(),
            self.k,
            self.p,
            self.t_list,
            self.grid,
            self.tolerance,
        )
