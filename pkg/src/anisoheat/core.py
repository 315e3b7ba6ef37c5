"""Core types of anisoheat: multi-indices, dimension splits, grids and weights."""

from __future__ import annotations

import itertools
import math
from enum import Enum
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, Extra, Field, root_validator, validator

# ----


class NumericDomainError(ArithmeticError):
    """Raised when sampled values are not finite."""


class NumericConsistencyError(ArithmeticError):
    """Raised when a discarded imaginary residue exceeds its threshold."""


class QuadratureError(NumericConsistencyError):
    """Raised when the sigma-quadrature of the Heisenberg kernel is not real."""


class TableDomainError(ValueError):
    """Raised when a convolution argument leaves a precomputed kernel table."""


IMAG_TOLERANCE: float = 1e-10
"""Largest discarded imaginary residue (relative to the real part) we accept."""


def check_real(values: np.ndarray, what: str, *, error=NumericConsistencyError):
    """Return the real part of values, failing if the imaginary part is too large."""
    values = np.asarray(values)
    if not np.iscomplexobj(values):
        return values
    scale = max(1.0, float(np.max(np.abs(values.real), initial=0.0)))
    residue = float(np.max(np.abs(values.imag), initial=0.0))
    if residue > IMAG_TOLERANCE * scale:
        msg = f"{what}: imaginary residue {residue:.3e} exceeds "
        msg += f"{IMAG_TOLERANCE:.0e} (grid or quadrature too coarse)"
        raise error(msg)
    return values.real


# ----


class MultiIndex(BaseModel):
    """Vector of nonnegative integer exponents."""

    exponents: Tuple[int, ...]

    class Config:
        frozen = True
        extra = Extra.forbid

    @validator("exponents", each_item=True)
    def check_nonnegative(cls, v):
        """Reject negative exponents."""
        if v < 0:
            raise ValueError(f"multi-index entries must be >= 0, got {v}")
        return v

    @classmethod
    def of(cls, *exponents: int) -> MultiIndex:
        """Build a multi-index from its entries."""
        return cls(exponents=tuple(exponents))

    @classmethod
    def zeros(cls, dim: int) -> MultiIndex:
        """Return the zero multi-index of given length."""
        return cls(exponents=(0,) * dim)

    @classmethod
    def unit(cls, dim: int, axis: int) -> MultiIndex:
        """Return the multi-index with a single 1 at the given (0-based) axis."""
        exps = [0] * dim
        exps[axis] = 1
        return cls(exponents=tuple(exps))

    @property
    def dim(self) -> int:
        return len(self.exponents)

    def order(self) -> int:
        """Return |alpha|, the sum of the entries."""
        return sum(self.exponents)

    def factorial(self) -> int:
        """Return alpha!, the product of the factorials of the entries."""
        return math.prod(math.factorial(e) for e in self.exponents)

    def concat(self, other: MultiIndex) -> MultiIndex:
        """Return the multi-index (self, other) in the joint dimension."""
        return MultiIndex(exponents=self.exponents + other.exponents)

    def split(self, m: int) -> Tuple[MultiIndex, MultiIndex]:
        """Split into (beta, gamma) after the first m entries."""
        return (
            MultiIndex(exponents=self.exponents[:m]),
            MultiIndex(exponents=self.exponents[m:]),
        )

    def plus(self, other: MultiIndex) -> MultiIndex:
        """Entrywise sum of two multi-indices of equal length."""
        if other.dim != self.dim:
            raise ValueError(f"Cannot add multi-indices of lengths {self.dim}, {other.dim}")
        return MultiIndex(
            exponents=tuple(a + b for a, b in zip(self.exponents, other.exponents))
        )

    def monomial(self, coords: Sequence[np.ndarray]):
        """Evaluate z^alpha for coordinate arrays (one per axis, broadcastable)."""
        if len(coords) != self.dim:
            raise ValueError(f"Expected {self.dim} coordinate arrays, got {len(coords)}")
        res = 1.0
        for c, e in zip(coords, self.exponents):
            if e:
                res = res * np.asarray(c) ** e
        return res

    def __str__(self) -> str:
        return "(" + ",".join(map(str, self.exponents)) + ")"


def multi_indices(dim: int, order: int) -> List[MultiIndex]:
    """Return all multi-indices of given length with |alpha| = order.

    The result is in lexicographically decreasing order of the exponent tuples,
    e.g. (2,0), (1,1), (0,2).
    """
    if dim < 0 or order < 0:
        return []
    if dim == 0:
        return [MultiIndex(exponents=())] if order == 0 else []
    res = []
    for head in range(order, -1, -1):
        for tail in multi_indices(dim - 1, order - head):
            res.append(MultiIndex(exponents=(head,) + tail.exponents))
    return res


def multi_indices_upto(dim: int, order: int) -> List[MultiIndex]:
    """Return all multi-indices with |alpha| <= order, graded by order."""
    return list(
        itertools.chain.from_iterable(multi_indices(dim, o) for o in range(order + 1))
    )


class DimensionSplit(BaseModel):
    """Splitting z = (x, y) of R^N into an m-dimensional and n-dimensional block."""

    m: int = Field(..., ge=1)
    n: int = Field(..., ge=1)

    class Config:
        frozen = True
        extra = Extra.forbid

    @property
    def N(self) -> int:  # noqa: N802
        return self.m + self.n

    def x_axes(self) -> Tuple[int, ...]:
        return tuple(range(self.m))

    def y_axes(self) -> Tuple[int, ...]:
        return tuple(range(self.m, self.N))


# ----


class Grid(BaseModel):
    """Uniform tensor grid on the box prod_i [-L_i, L_i) with M_i nodes per axis.

    Node i on axis a sits at -L_a + i*h_a with spacing h_a = 2 L_a / M_a,
    so for even M_a the node with index M_a/2 is the origin.
    """

    extents: Tuple[float, ...]
    points: Tuple[int, ...]

    class Config:
        frozen = True
        extra = Extra.forbid

    @root_validator(skip_on_failure=True)
    def check_valid(cls, values):
        """Check that extents are positive and point counts even and >= 8."""
        ext, pts = values["extents"], values["points"]
        if len(ext) != len(pts) or len(ext) == 0:
            raise ValueError("extents and points must be non-empty and of equal length")
        if any(not (math.isfinite(e) and e > 0) for e in ext):
            raise ValueError(f"extents must be positive and finite, got {ext}")
        if any(p < 8 or p % 2 for p in pts):
            raise ValueError(f"point counts must be even and >= 8, got {pts}")
        return values

    @classmethod
    def cube(cls, dims: int, extent: float, points: int) -> Grid:
        """Return a grid with the same extent and point count on every axis."""
        return cls(extents=(float(extent),) * dims, points=(int(points),) * dims)

    @property
    def dims(self) -> int:
        return len(self.points)

    @property
    def shape(self) -> Tuple[int, ...]:
        return tuple(self.points)

    @property
    def spacing(self) -> Tuple[float, ...]:
        return tuple(2 * e / p for e, p in zip(self.extents, self.points))

    @property
    def cell_volume(self) -> float:
        return math.prod(self.spacing)

    @property
    def node_count(self) -> int:
        return math.prod(self.points)

    def axes(self) -> List[np.ndarray]:
        """Return the 1-D node coordinates of every axis."""
        return [
            -e + h * np.arange(p)
            for e, h, p in zip(self.extents, self.spacing, self.points)
        ]

    def mesh(self) -> List[np.ndarray]:
        """Return sparse (broadcastable) node coordinates in ij indexing."""
        return np.meshgrid(*self.axes(), indexing="ij", sparse=True)

    def frequencies(self) -> List[np.ndarray]:
        """Return the angular FFT frequencies 2*pi*fftfreq(M, h) of every axis."""
        return [
            2 * np.pi * np.fft.fftfreq(p, d=h) for p, h in zip(self.points, self.spacing)
        ]

    def frequency_mesh(self) -> List[np.ndarray]:
        """Return sparse angular frequencies in FFT (unshifted) order."""
        return np.meshgrid(*self.frequencies(), indexing="ij", sparse=True)

    def origin_index(self) -> Tuple[int, ...]:
        return tuple(p // 2 for p in self.points)

    def scaled(self, factors: Sequence[float]) -> Grid:
        """Return a grid with every extent multiplied by the given factor."""
        if len(factors) != self.dims:
            raise ValueError(f"Expected {self.dims} scaling factors")
        return Grid(
            extents=tuple(e * f for e, f in zip(self.extents, factors)),
            points=self.points,
        )

    def sub(self, axes: Sequence[int]) -> Grid:
        """Return the grid restricted to the given axes."""
        return Grid(
            extents=tuple(self.extents[a] for a in axes),
            points=tuple(self.points[a] for a in axes),
        )


class GridFunction(BaseModel):
    """Immutable samples of a scalar field on a grid."""

    grid: Grid
    values: np.ndarray

    class Config:
        arbitrary_types_allowed = True
        allow_mutation = False
        extra = Extra.forbid

    @validator("values", pre=True)
    def freeze_values(cls, v):
        """Store a private read-only copy of the samples."""
        arr = np.array(v, copy=True)
        if not (np.issubdtype(arr.dtype, np.floating) or np.iscomplexobj(arr)):
            arr = arr.astype(float)
        arr.setflags(write=False)
        return arr

    @root_validator(skip_on_failure=True)
    def check_shape(cls, values):
        """Check that there is exactly one value per grid node."""
        grid, vals = values["grid"], values["values"]
        if vals.shape != grid.shape:
            raise ValueError(f"values of shape {vals.shape} do not fit grid {grid.shape}")
        return values

    @classmethod
    def from_function(cls, grid: Grid, fn: Callable[..., np.ndarray]) -> GridFunction:
        """Sample a function of the node coordinates (one argument per axis)."""
        vals = np.broadcast_to(np.asarray(fn(*grid.mesh())), grid.shape)
        return cls(grid=grid, values=vals)

    def _check_same_grid(self, other: GridFunction):
        if other.grid != self.grid:
            raise ValueError("Grid functions live on different grids")

    def __add__(self, other: GridFunction) -> GridFunction:
        self._check_same_grid(other)
        return GridFunction(grid=self.grid, values=self.values + other.values)

    def __sub__(self, other: GridFunction) -> GridFunction:
        self._check_same_grid(other)
        return GridFunction(grid=self.grid, values=self.values - other.values)

    def __mul__(self, c: complex) -> GridFunction:
        return GridFunction(grid=self.grid, values=c * self.values)

    __rmul__ = __mul__

    def __neg__(self) -> GridFunction:
        return GridFunction(grid=self.grid, values=-self.values)


# ----


class WeightKind(str, Enum):
    """Supported weight shapes."""

    radial = "radial"
    """|z|^a"""

    split = "split"
    """|x|^a |y|^b"""

    additive = "additive"
    """1 + |x|^a + |y|^b"""


class WeightSpec(BaseModel):
    """Nonnegative weight function used in weighted L^p norms."""

    kind: WeightKind = WeightKind.radial
    a: float = Field(0.0, ge=0)
    b: float = Field(0.0, ge=0)
    split: Optional[DimensionSplit] = None

    class Config:
        frozen = True
        extra = Extra.forbid

    @root_validator(skip_on_failure=True)
    def check_split(cls, values):
        """Split and additive weights need to know the (x, y) splitting."""
        if values["kind"] != WeightKind.radial and values["split"] is None:
            raise ValueError(f"weight kind '{values['kind'].value}' needs a split")
        return values

    @classmethod
    def unit(cls) -> WeightSpec:
        return cls(kind=WeightKind.radial, a=0.0)

    @classmethod
    def radial(cls, a: float) -> WeightSpec:
        return cls(kind=WeightKind.radial, a=a)

    @classmethod
    def split_power(cls, split: DimensionSplit, a: float, b: float) -> WeightSpec:
        return cls(kind=WeightKind.split, a=a, b=b, split=split)

    @classmethod
    def additive(cls, split: DimensionSplit, a: float, b: float) -> WeightSpec:
        return cls(kind=WeightKind.additive, a=a, b=b, split=split)

    def evaluate(self, grid: Grid) -> np.ndarray:
        """Return the weight at every grid node."""
        mesh = grid.mesh()
        if self.kind == WeightKind.radial:
            r = np.sqrt(sum(c**2 for c in mesh))
            return np.broadcast_to(r**self.a, grid.shape)

        split = self.split
        if split.N != grid.dims:
            raise ValueError(f"split {split.m}+{split.n} does not fit grid dim {grid.dims}")
        rx = np.sqrt(sum(mesh[i] ** 2 for i in split.x_axes()))
        ry = np.sqrt(sum(mesh[i] ** 2 for i in split.y_axes()))
        if self.kind == WeightKind.split:
            w = rx**self.a * ry**self.b
        else:
            w = 1.0 + rx**self.a + ry**self.b
        return np.broadcast_to(w, grid.shape)
