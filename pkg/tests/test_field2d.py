import json
import math

import numpy as np
import pytest

from conftest import DATA
from shearlab import field2d
from shearlab.errors import ConfigError, DimensionError, RegimeError
from shearlab.field2d import Field2D, evolve_2d


def heat(ny=32):
    return Field2D.from_function(lambda X, Y: np.sin(X), ny, transport=False, potential=False)


def test_field_validation():
    with pytest.raises(DimensionError):
        Field2D(np.zeros(8))
    with pytest.raises(ConfigError):
        Field2D(np.zeros((8, 8)), eps=2.0)
    with pytest.raises(ConfigError):
        Field2D(np.zeros((8, 8)), nu=0.0)


def test_heat_oracle():
    ev = evolve_2d(heat(), 1.0, 0.01)
    X, _ = ev.final.grids()
    assert np.max(np.abs(ev.final.h - math.exp(-1.0) * np.sin(X))) < 1e-6
    assert ev.final.time == pytest.approx(1.0)


def test_weighted_invariants():
    f = Field2D.from_function(lambda X, Y: np.sin(X) * np.cos(2 * Y) + 0.3 * np.cos(Y), 64,
                              eps=0.5, nu=0.2)
    f = Field2D(f.h - f.weighted_mean(), eps=0.5, nu=0.2)
    ev = evolve_2d(f, 0.5)
    assert np.max(np.abs(ev.weighted_mean)) < 1e-8
    assert np.all(np.diff(ev.weighted_norm2) <= 1e-12 * ev.weighted_norm2[:-1])


def test_cfl_refusal():
    f = Field2D.from_function(lambda X, Y: np.sin(X), 32, nu=1e-3)
    with pytest.raises(RegimeError):
        evolve_2d(f, 0.1, 1.0)
    assert field2d.max_stable_dt(f) < 1e-3


def test_alias_alarm():
    f = Field2D.from_function(lambda X, Y: np.sin(X), 64, eps=0.5, nu=0.05)
    with pytest.raises(field2d.AliasingAlarm):
        evolve_2d(f, 1.0)
    ev = evolve_2d(f, 1.0, alias_check="record")
    assert ev.alias_fraction > field2d.ALIAS_TOL


def test_snapshot_schedule():
    s = field2d.snapshot_schedule(0.01, 1.0)
    assert s == pytest.approx([0.0, 0.1, 0.2, 0.4, 0.8, 1.0])
    ev = evolve_2d(heat(), 0.4, 0.01, snapshots=s[:4])
    assert [sn.time for sn in ev.snapshots] == pytest.approx(s[:4])


def test_project_mode_convention():
    f = Field2D.from_function(lambda X, Y: np.sin(X), 32, nu=0.1)
    st = field2d.project_mode(f, 1)
    np.testing.assert_allclose(st.field, -1j, atol=1e-14)
    assert st.frame == "h_time"
    with pytest.raises(DimensionError):
        field2d.project_mode(f, 11)


def test_parseval(rng):
    # at eps = 0 the weights depend on y only, so the bands split the norm exactly
    hh = np.fft.rfft2(rng.standard_normal((32, 32)))
    hh[:, 11:] = 0
    f = Field2D(np.fft.irfft2(hh, s=(32, 32)), eps=0.0, nu=0.1)
    total = sum(field2d.parseval_weight(k) * field2d.band_energy(f, k) for k in range(11))
    assert total == pytest.approx(f.weighted_norm2(), rel=1e-12)


def test_pgm_golden():
    f = Field2D.from_function(lambda X, Y: np.sin(X), 4)
    assert field2d.pgm_bytes(f.h) == (DATA / "sin_x_n4.pgm").read_bytes()
    assert field2d.pgm_bytes(np.zeros((4, 4)))[-16:] == bytes([127]) * 16
    with pytest.raises(RegimeError):
        field2d.pgm_bytes(np.full((4, 4), np.nan))


def test_render_sidecar(tmp_path):
    f = Field2D.from_function(lambda X, Y: np.sin(X), 4, nu=0.5)
    img, meta = field2d.render_field(f, tmp_path / "a.pgm")
    assert img.read_bytes() == (DATA / "sin_x_n4.pgm").read_bytes()
    side = json.loads(meta.read_text())
    assert side["max"] == pytest.approx(1.0) and side["nu"] == 0.5


def test_trace_csv():
    ev = evolve_2d(heat(), 0.05, 0.01)
    lines = ev.trace_csv().splitlines()
    assert lines[0] == "t,weighted_norm2,flat_norm2,weighted_mean"
    assert len(lines) == ev.t.size + 1


def test_cross_solver_coarse():
    rep = field2d.compare_with_mode_solver(64, 0.05, 0.05, 1e-4)
    assert rep["max_abs_diff"] < 1e-5
