"""Tensor trapezoid quadrature and the weighted, mixed and X^p norms."""

from typing import Optional

import numpy as np

from .core import (
    DimensionSplit,
    GridFunction,
    MultiIndex,
    NumericDomainError,
    WeightSpec,
    multi_indices_upto,
)


def quad_integral(f: GridFunction) -> float:
    """Integrate grid samples by the tensor trapezoid rule (sum times cell volume).

    Raises:
        NumericDomainError: If some sample is not finite.
    """
    vals = f.values
    if not np.all(np.isfinite(vals)):
        raise NumericDomainError("Cannot integrate non-finite samples")
    return float(np.real(vals.sum())) * f.grid.cell_volume


def _check_p(p: float):
    if not p >= 1:
        raise ValueError(f"Norm exponent must satisfy p >= 1, got p={p}")


def weighted_lp_norm(
    f: GridFunction, w: Optional[WeightSpec] = None, p: float = 1.0
) -> float:
    """Return (int w^p |f|^p)^(1/p); without a weight this is the plain L^p norm."""
    _check_p(p)
    w = w or WeightSpec.unit()
    integrand = (w.evaluate(f.grid) * np.abs(f.values)) ** p
    return quad_integral(GridFunction(grid=f.grid, values=integrand)) ** (1 / p)


def mixed_norm(
    f: GridFunction,
    split: DimensionSplit,
    beta: MultiIndex,
    gamma: MultiIndex,
    p: float = 1.0,
) -> float:
    """Mixed norm of L^p(R^m, |x|^|beta|; L^1(R^n, |y|^|gamma|)).

    The first m grid axes are the x-axes, the remaining n axes the y-axes.
    """
    _check_p(p)
    if beta.dim != split.m or gamma.dim != split.n:
        msg = f"Expected index lengths ({split.m}, {split.n}), "
        msg += f"got ({beta.dim}, {gamma.dim})"
        raise ValueError(msg)
    grid = f.grid
    if grid.dims != split.N:
        raise ValueError(f"split {split.m}+{split.n} does not fit grid dim {grid.dims}")
    if not np.all(np.isfinite(f.values)):
        raise NumericDomainError("Cannot integrate non-finite samples")

    mesh = grid.mesh()
    rx = np.sqrt(sum(mesh[i] ** 2 for i in split.x_axes()))
    ry = np.sqrt(sum(mesh[i] ** 2 for i in split.y_axes()))
    hy = np.prod([grid.spacing[i] for i in split.y_axes()])
    hx = np.prod([grid.spacing[i] for i in split.x_axes()])

    inner = np.sum(ry ** gamma.order() * np.abs(f.values), axis=split.y_axes()) * hy
    rx = rx.reshape(rx.shape[: split.m])
    outer = np.sum((rx ** beta.order() * inner) ** p) * hx
    return float(outer) ** (1 / p)


def xp_norm(f: GridFunction, split: DimensionSplit, k: int, p: float = 1.0) -> float:
    """Natural norm of the anisotropic space X^p at order k.

    Sum over all gamma with |gamma| <= k of the mixed norms with x-weight
    exponent k+1-|gamma| and y-weight exponent |gamma|, plus the
    L^p norm with weight |y|^(k+1).
    """
    if k < 0:
        raise ValueError(f"Order must satisfy k >= 0, got k={k}")
    total = 0.0
    for gamma in multi_indices_upto(split.n, k):
        beta = MultiIndex(exponents=(k + 1 - gamma.order(),) + (0,) * (split.m - 1))
        total += mixed_norm(f, split, beta, gamma, p)
    w = WeightSpec.split_power(split, 0.0, k + 1)
    return total + weighted_lp_norm(f, w, p)
