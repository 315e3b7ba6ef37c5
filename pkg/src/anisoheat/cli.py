"""CLI interface of anisoheat (see `anisoheat --help`)."""

import sys
from pathlib import Path
from typing import Callable, List, Optional

import numpy as np
import typer
from pydantic import ValidationError
from ruamel.yaml.error import YAMLError

from .core import DimensionSplit, MultiIndex
from .formats.export import dump_yaml, write_grid_function, write_report
from .formats.parse import load_config
from .heisenberg import HPoint, h_decomposition_check, h_taylor_check
from .kernels import (
    KernelFamily,
    KernelSpec,
    default_kernel_grid,
    heisenberg_kernel_derivative_grid,
    kernel_derivative,
)
from .log import log_level, logger
from .settings import get_settings
from .moments import (
    DecompositionRule,
    SampledFunction,
    TestFunction,
    taylor_check,
    taylor_split_check,
    verify_decomposition,
)
from .norms import quad_integral, weighted_lp_norm

app = typer.Typer()


@app.callback()
def main() -> None:
    """Check moment expansions of heat flows numerically."""
    try:
        get_settings()
    except ValidationError as e:
        typer.echo(f"Invalid ANISOHEAT_* environment settings:\n{e}", err=True)
        raise typer.Exit(code=2)


LEMMAS = ("2.1", "2.2", "2.3", "3.3", "4.4", "4.5")
"""Identities that `verify` can check."""


def _check_lemma(lemma: str):
    """Validate lemma argument."""
    if lemma in LEMMAS:
        return lemma
    raise typer.BadParameter(f"Unknown identity. Supported: {', '.join(LEMMAS)}")


def _parse_ints(value: Optional[str]) -> Optional[List[int]]:
    if not value:
        return None
    try:
        return [int(v) for v in value.split(",")]
    except ValueError:
        raise typer.BadParameter(f"Expected comma-separated integers, got '{value}'")


_family_opt = typer.Option(KernelFamily.isotropic, help="Which heat flow.")
_m_opt = typer.Option(1, min=1, help="Dimension m of the x-block.")
_n_opt = typer.Option(1, min=1, help="Dimension n of the y-block (or of H^n).")
_dim_opt = typer.Option(2, min=1, help="Dimension of the isotropic flow.")
_t_opt = typer.Option(..., "--t", help="Time t > 0.")
_points_opt = typer.Option(
    None, min=8, help="Points per axis [default: 128, or 64 on the Heisenberg group]."
)
_extent_opt = typer.Option(None, help="Half-width of the box on every axis.")
_derivative_opt = typer.Option(
    None,
    help=(
        "Derivative to sample: comma-separated exponents (Euclidean flows) "
        "or 1-based field indices, 2n+1 for Theta (Heisenberg)."
    ),
)
_out_opt = typer.Option(Path("kernel.csv"), help="Output file (.csv, or .h5 with [h5]).")

_lemma_opt = typer.Option(..., callback=_check_lemma, help=f"One of {', '.join(LEMMAS)}.")
_k_opt = typer.Option(1, min=0, help="Expansion order k.")
_instances_opt = typer.Option(20, min=1, help="Number of random instances.")
_seed_opt = typer.Option(0, help="Seed of the random instances.")
_tolerance_opt = typer.Option(1e-6, help="Largest accepted residual.")

_config_arg = typer.Argument(
    ...,
    exists=True,
    dir_okay=False,
    readable=True,
    help="Path of JSON or YAML file with the experiment configuration.",
)

_verbose_opt = typer.Option(0, "--verbose", "-v", min=0, max=3)


@app.command()
def kernel(
    family: KernelFamily = _family_opt,
    m: int = _m_opt,
    n: int = _n_opt,
    dim: int = _dim_opt,
    t: float = _t_opt,
    points: Optional[int] = _points_opt,
    extent: Optional[float] = _extent_opt,
    derivative: Optional[str] = _derivative_opt,
    out: Path = _out_opt,
    verbose: int = _verbose_opt,
) -> None:
    """Sample a fundamental solution (or a derivative of it) at time t.

    Writes the samples and prints mass and L1/L2 norms.
    """
    logger.setLevel(log_level[verbose])
    if not t > 0:
        raise typer.BadParameter("t must be positive", param_hint="--t")
    if points is not None and points % 2:
        raise typer.BadParameter("points must be even", param_hint="--points")
    if family == KernelFamily.heisenberg:
        spec = KernelSpec.heisenberg(n)
    elif family == KernelFamily.mixed:
        spec = KernelSpec.mixed(m, n)
    else:
        spec = KernelSpec.isotropic(dim)

    default_points = 128 if spec.is_fft else 64
    grid = default_kernel_grid(spec, t, points or default_points)
    if extent is not None:
        grid = grid.scaled([extent / e for e in grid.extents])

    orders = _parse_ints(derivative)
    if spec.is_fft:
        alpha = MultiIndex(exponents=tuple(orders or [0] * spec.dim))
        if alpha.dim != spec.dim:
            raise typer.BadParameter(f"need {spec.dim} exponents", param_hint="--derivative")
        m_split = spec.split.m if family == KernelFamily.mixed else spec.dim
        beta, gamma = alpha.split(m_split)
        gf = kernel_derivative(spec, beta, gamma, t, grid)
    else:
        fields = orders or []
        if len(fields) > 2 or any(not 1 <= f <= 2 * n + 1 for f in fields):
            msg = f"need at most two field indices in 1..{2 * n + 1}"
            raise typer.BadParameter(msg, param_hint="--derivative")
        gf = heisenberg_kernel_derivative_grid(fields, grid, t)

    write_grid_function(out, gf)
    summary = {
        "family": family.value,
        "t": t,
        "points": list(grid.points),
        "extents": [float(e) for e in grid.extents],
        "mass": quad_integral(gf),
        "l1": weighted_lp_norm(gf, p=1),
        "l2": weighted_lp_norm(gf, p=2),
        "output": str(out),
    }
    dump_yaml(summary, sys.stdout)


def _instances(
    lemma: str, k: int, dim: int, split: DimensionSplit, n: int, rng: np.random.Generator
) -> Callable[[], float]:
    """Return a function computing the residual of one random instance."""

    def datum(d: int, heis: bool = False, points: int = 64, split=None) -> SampledFunction:
        phi = TestFunction.random(rng, d, degree=2, heisenberg=heis)
        return SampledFunction.from_test_function(phi, 7.0, split, points)

    def point(d: int) -> np.ndarray:
        return rng.uniform(-1, 1, size=d) / np.sqrt(d)

    if lemma == "2.1":

        def iso() -> float:
            rule = DecompositionRule.isotropic
            res = verify_decomposition(datum(dim), TestFunction.random(rng, dim), k, rule)
            return max(res, taylor_check(TestFunction.random(rng, dim), point(dim), k))

        return iso
    if lemma == "2.2":
        return lambda: taylor_split_check(
            TestFunction.random(rng, split.N), point(split.N), k, split
        )
    if lemma in ("2.3", "3.3"):
        rule = DecompositionRule.split if lemma == "2.3" else DecompositionRule.mixed_order

        def dec() -> float:
            f = datum(split.N, split=split)
            return verify_decomposition(f, TestFunction.random(rng, split.N), k, rule, split)

        return dec

    hdim = 2 * n + 1
    if lemma == "4.4":

        def taylor() -> float:
            phi = TestFunction.random(rng, hdim, heisenberg=True)
            p = HPoint.from_array(point(hdim))
            return max(h_taylor_check(phi, p), h_taylor_check(phi, p, "group"))

        return taylor
    return lambda: h_decomposition_check(
        datum(hdim, heis=True, points=48), TestFunction.random(rng, hdim, heisenberg=True)
    )


@app.command()
def verify(
    lemma: str = _lemma_opt,
    k: int = _k_opt,
    dim: int = _dim_opt,
    m: int = _m_opt,
    n: int = _n_opt,
    instances: int = _instances_opt,
    seed: int = _seed_opt,
    tolerance: float = _tolerance_opt,
    verbose: int = _verbose_opt,
) -> None:
    """Check a moment decomposition or Taylor identity on random instances.

    Prints the largest residual and fails if it exceeds the tolerance.
    """
    logger.setLevel(log_level[verbose])
    if lemma == "3.3" and k % 2 == 0:
        raise typer.BadParameter("k must be odd", param_hint="--k")
    rng = np.random.default_rng(seed)
    one = _instances(lemma, k, dim, DimensionSplit(m=m, n=n), n, rng)
    residuals = []
    for i in range(instances):
        residuals.append(one())
        logger.debug(f"instance {i}: residual {residuals[-1]:.3e}")
    worst = max(residuals)
    passed = bool(worst < tolerance)
    summary = {
        "lemma": lemma,
        "k": k,
        "instances": instances,
        "max_residual": float(worst),
        "tolerance": tolerance,
        "passed": passed,
    }
    dump_yaml(summary, sys.stdout)
    if not passed:
        raise typer.Exit(code=1)


@app.command()
def rates(config: Path = _config_arg, verbose: int = _verbose_opt) -> None:
    """Run a rate experiment and write its report.

    Writes the report as JSON and the (t, error) pairs as CSV, then fails if
    the fitted decay is slower than the statement allows or the
    bound constant grows over the t-range.
    """
    logger.setLevel(log_level[verbose])
    try:
        cfg = load_config(config)
    except (ValueError, YAMLError) as e:
        typer.echo(f"Invalid configuration '{config}':\n{e}", err=True)
        raise typer.Exit(code=2)

    report = cfg.run()
    write_report(report, cfg.output.report, cfg.output.table)
    summary = {
        "theorem": report.theorem.value,
        "slope": report.fit.slope,
        "target": report.target_slope,
        "tolerance": report.tolerance,
        "constant_drift": report.constant_drift(),
        "passed": report.passed,
        "report": str(cfg.output.report),
        "table": str(cfg.output.table),
    }
    dump_yaml(summary, sys.stdout)
    if not report.passed:
        raise typer.Exit(code=1)
