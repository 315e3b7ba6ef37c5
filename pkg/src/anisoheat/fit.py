"""Least-squares decay fits of error norms against time on log-log scale."""

from typing import Sequence, Tuple

import numpy as np
from pydantic import BaseModel, Extra


class DecayFit(BaseModel):
    """Result of fitting log(err) = intercept + slope * log(t)."""

    slope: float
    intercept: float
    max_residual: float
    """Largest absolute residual of the fit (in log units)."""
    residual_spread: float
    """Width max - min of the residual band (in log units)."""
    t_range: Tuple[float, float]

    class Config:
        extra = Extra.forbid


def decay_fit(t_list: Sequence[float], err_list: Sequence[float]) -> DecayFit:
    """Fit a power law err ~ C t^slope by ordinary least squares on logarithms.

    Args:
        t_list: At least three strictly increasing positive times.
        err_list: Matching strictly positive error values.

    Returns:
        The fitted slope, intercept and largest residual.

    Raises:
        ValueError: For too few samples, non-increasing times or
            nonpositive errors (whose logarithm is undefined).
    """
    t = np.asarray(t_list, dtype=float)
    e = np.asarray(err_list, dtype=float)
    if t.shape != e.shape or t.ndim != 1:
        raise ValueError("t_list and err_list must be 1-D and of equal length")
    if len(t) < 3:
        raise ValueError(f"Need at least 3 (t, error) pairs, got {len(t)}")
    if np.any(t <= 0) or np.any(np.diff(t) <= 0):
        raise ValueError("Times must be positive and strictly increasing")
    if np.any(~np.isfinite(e)) or np.any(e <= 0):
        raise ValueError("Errors must be finite and positive to take logarithms")

    lt, le = np.log(t), np.log(e)
    design = np.stack([np.ones_like(lt), lt], axis=1)
    (intercept, slope), *_ = np.linalg.lstsq(design, le, rcond=None)
    residual = le - (intercept + slope * lt)
    return DecayFit(
        slope=float(slope),
        intercept=float(intercept),
        max_residual=float(np.max(np.abs(residual))),
        residual_spread=float(np.ptp(residual)),
        t_range=(float(t[0]), float(t[-1])),
    )
