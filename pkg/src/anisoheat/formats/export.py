"""Writing sampled fields, error tables and reports to disk."""

from pathlib import Path
from typing import IO, Any, Dict, Optional, Sequence, Union

import numpy as np
from ruamel.yaml import YAML

from ..asymptotics import ExperimentReport
from ..core import GridFunction

try:
    import h5py
except ImportError:
    _has_h5 = False
else:
    _has_h5 = True


def _require_h5py():
    """Raise exception if h5py is not installed."""
    if not _has_h5:
        raise ImportError("Install anisoheat with [h5] extra for HDF5 support!")


PathLike = Union[str, Path]


def write_csv(path: PathLike, rows: np.ndarray, header: Sequence[str]):
    """Write rows as comma-separated values with one header line (deterministic)."""
    rows = np.atleast_2d(np.asarray(rows, dtype=float))
    if rows.shape[1] != len(header):
        raise ValueError(f"{len(header)} header columns for {rows.shape[1]} data columns")
    np.savetxt(
        path,
        rows,
        fmt="%.17g",
        delimiter=",",
        newline="\n",
        header=",".join(header),
        comments="",
    )


def grid_function_rows(gf: GridFunction) -> np.ndarray:
    """One row (node coordinates..., value) per grid node in C order."""
    mesh = np.meshgrid(*gf.grid.axes(), indexing="ij")
    cols = [c.ravel() for c in mesh] + [np.real(gf.values).ravel()]
    return np.column_stack(cols)


def write_grid_function(
    path: PathLike, gf: GridFunction, names: Optional[Sequence[str]] = None
):
    """Write samples as CSV (or HDF5, for a .h5/.hdf5 suffix)."""
    if Path(path).suffix in (".h5", ".hdf5"):
        write_hdf5(path, gf)
        return
    names = list(names or [f"z{i + 1}" for i in range(gf.grid.dims)])
    write_csv(path, grid_function_rows(gf), names + ["value"])


def write_hdf5(path: PathLike, gf: GridFunction, attrs: Optional[Dict[str, Any]] = None):
    """Write samples as dataset `values` with the grid as attributes."""
    _require_h5py()
    with h5py.File(path, "w") as f:
        ds = f.create_dataset("values", data=np.real(gf.values))
        ds.attrs["extents"] = np.array(gf.grid.extents)
        ds.attrs["points"] = np.array(gf.grid.points)
        for key, value in (attrs or {}).items():
            ds.attrs[key] = value


def write_report(report: ExperimentReport, json_path: PathLike, csv_path: PathLike):
    """Write the report as JSON and its (t, error, constant) table as CSV."""
    Path(json_path).write_text(report.json(indent=2) + "\n", encoding="utf-8")
    write_csv(csv_path, report.rows(), ["t", "error", "constant"])


def dump_yaml(data: Dict[str, Any], stream: IO[str]):
    """Print a human-readable summary."""
    yaml = YAML()
    yaml.default_flow_style = False
    yaml.dump(data, stream)
