"""Tests for experiment configurations, parsing and export."""
import io
import json

import numpy as np
import pytest
from anisoheat.asymptotics import ExperimentReport, TheoremId
from anisoheat.config import DatumKind, DatumSpec, ExperimentConfig, OutputSpec
from anisoheat.core import Grid, GridFunction
from anisoheat.formats.export import (
    dump_yaml,
    grid_function_rows,
    write_csv,
    write_grid_function,
    write_report,
)
from anisoheat.formats.parse import load_config, load_json_or_yaml, loads_json_or_yaml
from anisoheat.kernels import KernelFamily, KernelSpec
from anisoheat.norms import quad_integral
from pydantic import ValidationError

SMALL = {"theorem": "intro-isotropic", "dim": 1, "t_list": [1, 2, 4]}


def test_config_dimensions():
    cfg = ExperimentConfig.parse_obj(SMALL)
    assert cfg.theorem == TheoremId.isotropic
    assert cfg.split() is None
    assert cfg.kernel_spec() == KernelSpec.isotropic(1)
    assert cfg.output == OutputSpec()

    cfg = ExperimentConfig(theorem="thm3_2", m=1, n=2)
    assert cfg.split().N == 3
    assert cfg.kernel_spec().family == KernelFamily.mixed

    cfg = ExperimentConfig(theorem="thm2_5", m=1, n=1, dim=2)
    assert cfg.kernel_spec().split.m == 1

    cfg = ExperimentConfig(theorem="thm1_3", n=1)
    assert cfg.split() is None
    assert cfg.kernel_spec().dim == 3

    with pytest.raises(ValidationError):
        ExperimentConfig(theorem="thm1_3")
    with pytest.raises(ValidationError):
        ExperimentConfig(theorem="thm1_3", m=1, n=1)
    with pytest.raises(ValidationError):
        ExperimentConfig(theorem="thm3_2", m=1)
    with pytest.raises(ValidationError):
        ExperimentConfig(theorem="thm3_2", m=1, n=1, dim=3)
    with pytest.raises(ValidationError):
        ExperimentConfig(theorem="intro-isotropic")
    with pytest.raises(ValidationError):
        ExperimentConfig(theorem="thm9")


def test_config_checks():
    with pytest.raises(ValidationError, match="k must be odd"):
        ExperimentConfig(theorem="thm1_1", m=1, n=1, k=2)
    with pytest.raises(ValidationError):
        ExperimentConfig(theorem="intro-isotropic", dim=2, p=2.0)
    with pytest.raises(ValidationError, match="at least 3"):
        ExperimentConfig(theorem="intro-isotropic", dim=1, t_list=[1, 2])
    with pytest.raises(ValidationError, match="increasing"):
        ExperimentConfig(theorem="intro-isotropic", dim=1, t_list=[1, 4, 2])
    with pytest.raises(ValidationError):
        ExperimentConfig(theorem="intro-isotropic", dim=1, t_list=[0, 1, 2])
    with pytest.raises(ValidationError):
        ExperimentConfig(theorem="intro-isotropic", dim=1, unknown=1)
    with pytest.raises(ValidationError):
        ExperimentConfig(theorem="intro-isotropic", dim=1, grid={"spacing": 0})


def test_datum_spec():
    assert DatumSpec().kind == DatumKind.gaussian
    assert DatumSpec(kind="shifted-gaussian", center=[1.0]).center == [1.0]
    with pytest.raises(ValidationError):
        DatumSpec(kind="shifted-gaussian")
    with pytest.raises(ValidationError):
        DatumSpec(kind="polynomial-gaussian")
    with pytest.raises(ValidationError):
        DatumSpec(kind="polynomial-gaussian", coefficients={"a,b": 1.0})
    with pytest.raises(ValidationError):
        DatumSpec(kind="polynomial-gaussian", coefficients={"1,-1": 1.0})
    with pytest.raises(ValidationError):
        DatumSpec(variance=0)

    spec = DatumSpec(kind="polynomial-gaussian", coefficients={"0,0": 1.0, "1,0": 2.0})
    assert spec.exponents() == {(0, 0): 1.0, (1, 0): 2.0}


def test_datum_build():
    iso2 = KernelSpec.isotropic(2)
    f = DatumSpec().build(iso2)
    assert quad_integral(f.sample()) == pytest.approx(1.0, abs=1e-10)

    f = DatumSpec(kind="shifted-gaussian", center=[1.0, 0.0], mass=2.0).build(iso2)
    assert quad_integral(f.sample()) == pytest.approx(2.0, abs=1e-10)
    assert f(1.0, 0.0) > f(-1.0, 0.0)
    with pytest.raises(ValueError):
        DatumSpec(kind="shifted-gaussian", center=[1.0]).build(iso2)

    # (1 + z1) exp(-|z|^2 / 0.5) integrates to the Gaussian mass
    spec = DatumSpec(kind="polynomial-gaussian", coefficients={"0,0": 1.0, "1,0": 1.0})
    f = spec.build(iso2)
    assert quad_integral(f.sample()) == pytest.approx(2 * np.pi * 0.25, rel=1e-8)
    with pytest.raises(ValueError):
        DatumSpec(kind="polynomial-gaussian", coefficients={"1": 1.0}).build(iso2)

    kernel = DatumSpec(kind="kernel", time=0.5).build(KernelSpec.mixed(1, 1))
    assert kernel.split.m == 1
    assert quad_integral(kernel.sample()) == pytest.approx(1.0, abs=1e-3)
    with pytest.raises(ValueError):
        DatumSpec(kind="kernel").build(KernelSpec.heisenberg(1))


def test_config_run():
    report = ExperimentConfig.parse_obj(SMALL).run()
    assert report.passed
    assert report.t_list == [1.0, 2.0, 4.0]


def test_loads_json_or_yaml(tmp_path):
    assert loads_json_or_yaml('{"a": [1, 2]}') == {"a": [1, 2]}
    assert loads_json_or_yaml("a:\n  - 1\n  - 2\n") == {"a": [1, 2]}

    yml = tmp_path / "cfg.yaml"
    yml.write_text("theorem: intro-isotropic\ndim: 1\nt_list: [1, 2, 4]\n")
    assert load_json_or_yaml(yml) == SMALL
    assert load_config(yml) == ExperimentConfig.parse_obj(SMALL)

    js = tmp_path / "cfg.json"
    js.write_text(json.dumps(SMALL))
    assert load_config(js) == ExperimentConfig.parse_obj(SMALL)

    lst = tmp_path / "list.yaml"
    lst.write_text("- 1\n- 2\n")
    with pytest.raises(ValueError):
        load_json_or_yaml(lst)

    bad = tmp_path / "bad.yaml"
    bad.write_text("theorem: thm1_1\nm: 1\nn: 1\nk: 2\n")
    with pytest.raises(ValidationError):
        load_config(bad)


def test_write_csv(tmp_path):
    path = tmp_path / "rows.csv"
    write_csv(path, np.array([[1.0, 0.1], [2.0, 1 / 3]]), ["t", "error"])
    lines = path.read_text().splitlines()
    assert lines[0] == "t,error"
    assert len(lines) == 3
    assert float(lines[2].split(",")[1]) == 1 / 3

    with pytest.raises(ValueError):
        write_csv(path, np.zeros((2, 3)), ["t", "error"])


def test_write_grid_function(tmp_path):
    grid = Grid(extents=(1.0, 2.0), points=(8, 8))
    gf = GridFunction.from_function(grid, lambda x, y: x + 10 * y)
    rows = grid_function_rows(gf)
    assert rows.shape == (64, 3)
    assert np.allclose(rows[:, 2], rows[:, 0] + 10 * rows[:, 1])

    path = tmp_path / "gf.csv"
    write_grid_function(path, gf, ["x", "y"])
    assert path.read_text().splitlines()[0] == "x,y,value"
    write_grid_function(path, gf)
    assert path.read_text().splitlines()[0] == "z1,z2,value"


def test_write_hdf5(tmp_path):
    h5py = pytest.importorskip("h5py")
    grid = Grid(extents=(1.0,), points=(8,))
    gf = GridFunction.from_function(grid, lambda x: x**2)
    path = tmp_path / "gf.h5"
    write_grid_function(path, gf)
    with h5py.File(path, "r") as f:
        assert np.allclose(f["values"][()], gf.values)
        assert list(f["values"].attrs["points"]) == [8]


def test_write_report(tmp_path):
    report = ExperimentConfig.parse_obj(SMALL).run()
    js, csv = tmp_path / "report.json", tmp_path / "errors.csv"
    write_report(report, js, csv)
    assert ExperimentReport.parse_file(js) == report
    lines = csv.read_text().splitlines()
    assert lines[0] == "t,error,constant"
    assert len(lines) == 4


def test_dump_yaml():
    buf = io.StringIO()
    dump_yaml({"passed": True, "slope": -1.0}, buf)
    assert "passed: true" in buf.getvalue()
    assert "slope: -1.0" in buf.getvalue()
