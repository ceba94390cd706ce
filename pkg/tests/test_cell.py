import json

import numpy as np
import pytest

from conftest import random_profile
from oracles import LJ_COS, LJ_SIN3, fd_cell_solve
from shearlab import cell
from shearlab.errors import AdmissibilityError, DimensionError, SolvabilityError
from shearlab.flow import Profile1D, build_model


def test_zero_rhs():
    m = build_model(Profile1D.zero(), Profile1D.sin(1), 256)
    s = cell.solve_cell(Profile1D.zero(), m)
    assert np.all(s.chi == 0) and s.A == 0 and s.B == 0


def test_flat_cosine():
    m = build_model(Profile1D.zero(), Profile1D.zero(), 256)
    s = cell.solve_cell(Profile1D.cos(3, -3.0), m)
    np.testing.assert_allclose(s.chi, np.cos(3 * s.y) / 3, atol=1e-13)
    assert s.residual < 1e-10


def test_fd_oracle_sin():
    m = build_model(Profile1D.zero(), Profile1D.sin(1), 256)
    s = cell.solve_cell(Profile1D.sin(1), m)
    y, chi = fd_cell_solve(np.sin, np.sin, lambda y: np.cos(y) - 1)
    assert np.max(np.abs(chi[:: 8192 // s.grid_size] - s.chi)) < 1e-6


def test_fd_oracle_random_pairs(rng):
    for _ in range(10):
        v = random_profile(rng, max_n=3, scale=0.8)
        u = random_profile(rng, max_n=4)
        m = build_model(u, v, 256)
        phi = u - Profile1D(m.centering)
        s = cell.solve_cell(phi, m)
        y, chi = fd_cell_solve(phi, v, m.V)
        assert np.max(np.abs(chi[:: 8192 // s.grid_size] - s.chi)) < 1e-6


def test_solution_invariants(rng):
    v = random_profile(rng, max_n=3)
    m = build_model(Profile1D.zero(), v, 256)
    s = cell.solve_cell(-v, m)
    mu = m.resampled(s.grid_size).mu
    assert abs(np.sum(s.chi * mu)) < 1e-10
    assert s.residual <= cell.RESIDUAL_TOL


def test_unsolvable():
    m = build_model(Profile1D.zero(), Profile1D.zero(), 64)
    with pytest.raises(SolvabilityError) as e:
        cell.solve_cell(Profile1D(0.5, ((1, 1.0, 0.0),)), m)
    assert e.value.weighted_mean == pytest.approx(0.5)


def test_degenerate_grid():
    m = build_model(Profile1D.zero(), Profile1D.zero(), 64)
    with pytest.raises(DimensionError):
        cell.solve_cell(np.zeros(3), m)


def test_grid_rhs_interpolated():
    m = build_model(Profile1D.zero(), Profile1D.zero(), 256)
    y = np.linspace(0, 2 * np.pi, 64, endpoint=False)
    s = cell.solve_cell(-3 * np.cos(3 * y), m)
    np.testing.assert_allclose(s.chi, np.cos(3 * s.y) / 3, atol=1e-12)


def test_D_u_examples(flat_model):
    assert cell.diffusivity_u(build_model(Profile1D.zero(), Profile1D.zero(), 64))[1] == 0.0
    sol, d = cell.diffusivity_u(flat_model)
    assert d == pytest.approx(0.5, abs=1e-12)
    np.testing.assert_allclose(sol.chi, -np.cos(3 * sol.y) / 3, atol=1e-13)
    m2 = build_model(flat_model.u.scale(2.0), Profile1D.zero(), 256)
    assert cell.diffusivity_u(m2)[1] == pytest.approx(4 * d, rel=1e-13)


def test_D_u_requires_centering():
    with pytest.raises(AdmissibilityError):
        cell.diffusivity_u(build_model(Profile1D(1.0), Profile1D.zero(), 64))


def test_D_v_examples():
    sol, d = cell.diffusivity_v(build_model(Profile1D.zero(), Profile1D.zero(), 64))
    assert d == 1.0 and np.all(sol.chi == 0)
    m = build_model(Profile1D.zero(), Profile1D.sin(1), 256)
    assert cell.diffusivity_v(m, 2048)[1] == pytest.approx(LJ_COS, abs=1e-10)
    m3 = build_model(Profile1D.zero(), Profile1D.cos(3, -3.0), 256)  # V = sin 3y
    assert cell.diffusivity_v(m3, 2048)[1] == pytest.approx(LJ_SIN3, abs=1e-10)


def test_lifson_jackson():
    assert cell.lifson_jackson(build_model(Profile1D.zero(), Profile1D.zero(), 64)) == 1.0
    m = build_model(Profile1D.zero(), Profile1D.sin(1), 256)
    assert cell.lifson_jackson(m) == pytest.approx(LJ_COS, abs=1e-12)


def test_depletion_and_lj_equivalence(rng):
    for _ in range(20):
        v = random_profile(rng, max_n=4, scale=1.5)
        m = build_model(Profile1D.zero(), v, 256)
        d = cell.diffusivity_v(m, 2048)[1]
        lj = cell.lifson_jackson(m, 2048)
        assert d < 1.0
        assert lj <= 1.0
        assert abs(d - lj) < 1e-8


def test_u_equals_v_identities():
    # u = v = -3 cos 3y: the y-diffusivity built from chi_u is Lifson-Jackson,
    # and D_u itself is its complement.
    u = Profile1D.cos(3, -3.0)
    m = build_model(u, u, 256)
    assert m.admissible
    sol, d_u = cell.diffusivity_u(m)
    mu = m.resampled(sol.grid_size).mu
    lj = cell.lifson_jackson(m, sol.grid_size)
    assert abs(np.sum((1 + sol.dchi) ** 2 * mu) - lj) < 1e-8
    assert d_u == pytest.approx(1 - lj, abs=1e-10)


def test_auxiliary_corrector():
    m0 = build_model(Profile1D.zero(), Profile1D.zero(), 64)
    g0 = cell.auxiliary_corrector_g(m0, cell.diffusivity_v(m0)[0])
    assert np.all(np.abs(g0.chi) < 1e-14)
    m = build_model(Profile1D.zero(), Profile1D.sin(1), 256)
    cv, dv = cell.diffusivity_v(m)
    mu = m.resampled(cv.grid_size).mu
    g = (1 + cv.dchi) ** 2 - dv
    assert abs(np.sum(g * mu)) < 1e-12
    sg = cell.auxiliary_corrector_g(m, cv)
    assert sg.residual < 1e-6
    y, chi = fd_cell_solve(lambda yy: -np.interp(yy, cv.y, g, period=2 * np.pi), np.sin,
                           lambda yy: np.cos(yy) - 1)
    assert np.max(np.abs(chi[:: 8192 // sg.grid_size] - sg.chi)) < 1e-5


def test_serialization():
    m = build_model(Profile1D.zero(), Profile1D.sin(1), 64)
    s, _ = cell.diffusivity_v(m, 64)
    d = json.loads(s.to_json())
    assert set(d) >= {"A", "B", "diffusivity", "residual"}
    lines = s.to_csv().splitlines()
    assert lines[0] == "y,chi" and len(lines) == 65
