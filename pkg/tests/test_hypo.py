import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from shearlab import hypo
from shearlab.errors import ConfigError, DimensionError, InsufficientDataError, RegimeError
from shearlab.flow import Profile1D, build_model
from shearlab.modes import ModeState, evolve_mode


@pytest.mark.parametrize("C0", [2.0, 3.0, 10.0])
def test_as_stated_ratios(C0):
    c = hypo.coefficients(C0, "as_stated")
    r = c.ratios()
    assert r["beta0^2/(alpha0*gamma0)"] == pytest.approx(1 / 6, rel=1e-12)
    assert r["alpha0^2/beta0"] == pytest.approx(1 / (2 * C0), rel=1e-12)
    assert r["gamma0/sqrt(beta0)"] == pytest.approx(1 / (2 * C0), rel=1e-12)
    rep = c.constraint_report()
    assert not rep["all_satisfied"]
    assert not rep["constraints"]["beta0^2/(alpha0*gamma0)"]["satisfied"]


@settings(max_examples=30)
@given(st.floats(2.0, 1e3))
def test_feasible_saturates(C0):
    c = hypo.coefficients(C0, "feasible")
    r, b = c.ratios(), c.bounds()
    for key in r:
        assert r[key] == pytest.approx(b[key], rel=1e-10)
    assert c.constraint_report()["all_satisfied"]
    assert c.eps0 == pytest.approx(2 * math.sqrt(c.beta0) / C0)


def test_feasible_values():
    c = hypo.coefficients(2.0)
    assert c.beta0 == pytest.approx(1 / 96, rel=1e-12)
    assert c.eps0 == pytest.approx(0.10206207261596575, rel=1e-12)


def test_coefficient_errors():
    with pytest.raises(RegimeError):
        hypo.coefficients(1.5)
    with pytest.raises(ConfigError):
        hypo.coefficients(2.0, "loose")


def test_scaling_and_regime_gate():
    c = hypo.coefficients()
    a, b, g = hypo.scale_coefficients(c, 1e-3, 2)
    assert a == pytest.approx(c.alpha0 * math.sqrt(5e-4))
    assert b == pytest.approx(c.beta0 / 2)
    assert g == pytest.approx(c.gamma0 / (math.sqrt(1e-3) * 2**1.5))
    with pytest.raises(hypo.RegimeViolation):
        hypo.scale_coefficients(c, 0.2, 1)
    hypo.scale_coefficients(c, 0.2, 1, check_regime=False)


def test_functional_on_constant_without_shear():
    m = build_model(Profile1D.zero(), Profile1D.zero(), 64)
    st_ = ModeState(1, 1e-3, np.ones(64))
    phi, comp = hypo.functional(st_, hypo.coefficients(), m)
    assert phi == pytest.approx(0.5)
    assert comp["dnorm2"] == comp["cross"] == comp["shear2"] == 0.0


def test_functional_zero_and_positive(rng):
    m = build_model(Profile1D.cos(3, -3.0), Profile1D.sin(1), 128)
    c = hypo.coefficients()
    assert hypo.functional(ModeState(1, 1e-3, np.zeros(128)), c, m)[0] == 0.0
    for _ in range(20):
        f = rng.standard_normal(128) + 1j * rng.standard_normal(128)
        phi, comp = hypo.functional(ModeState(1, 1e-3, f), c, m)
        # the constraints make Phi equivalent to |f|^2 + alpha|f'|^2 + gamma|u'f|^2
        assert phi >= 0.25 * comp["norm2"]


def test_functional_errors():
    m = build_model(Profile1D.zero(), Profile1D.zero(), 64)
    with pytest.raises(DimensionError):
        hypo.functional_components(np.ones(32), 1, m)
    with pytest.raises(RegimeError):
        hypo.functional_components(np.full(64, np.nan), 1, m)


def test_spectral_inequality_examples():
    m = build_model(Profile1D.cos(3, -3.0), Profile1D.zero(), 128)
    assert hypo.spectral_inequality_check(np.zeros(128), 0.1, m, 2.0).passed
    flat = build_model(Profile1D.zero(), Profile1D.zero(), 128)
    rep = hypo.spectral_inequality_check(np.ones(128), 0.1, flat, 2.0)
    assert not rep.passed and math.isinf(rep.required_C0)


def test_worst_case_constant_bounds_random_fields(rng):
    m = build_model(Profile1D.cos(3, -3.0), Profile1D.sin(1), 128)
    sigma = 0.3
    sharp = hypo.worst_case_constant(sigma, m)
    g = rng.standard_normal((200, 128))
    rep = hypo.spectral_inequality_check(g, sigma, m, sharp)
    assert rep.passed and rep.required_C0 <= sharp * (1 + 1e-9)


def test_calibrate_C0_floor():
    m = build_model(Profile1D.cos(3, -3.0), Profile1D.zero(), 256)
    C0, c = hypo.calibrate_C0(m, 1e-3)
    assert C0 == 2.0 and c.C0 == 2.0


def _synthetic(phi, t, nu=1e-3):
    comps = np.zeros((t.size, 4))
    comps[:, 0] = 2 * phi
    return hypo.FunctionalTrace(t, comps, 1, nu, 0.0, 0.0, 0.0)


def test_certificate_on_exact_exponential():
    c = hypo.coefficients()
    r = c.eps0 * math.sqrt(1e-3)
    t = np.linspace(0, 100, 2001)
    cert = hypo.decay_certificate(_synthetic(np.exp(-1.5 * r * t), t), c)
    assert cert.passed and cert.certified_eps == pytest.approx(1.5 * r, rel=1e-9)


def test_certificate_detects_slow_decay():
    c = hypo.coefficients()
    r = c.eps0 * math.sqrt(1e-3)
    t = np.linspace(0, 100, 2001)
    phi = np.where(t < 50, np.exp(-2 * r * t), np.exp(-2 * r * 50 - 0.5 * r * (t - 50)))
    cert = hypo.decay_certificate(_synthetic(phi, t), c)
    assert not cert.derivative_ok
    assert cert.first_violation == pytest.approx(50.05, abs=0.06)


def test_certificate_vacuous_and_underresolved():
    c = hypo.coefficients()
    t = np.linspace(0, 10, 11)
    assert hypo.decay_certificate(_synthetic(np.zeros(11), t), c).vacuous
    with pytest.raises(InsufficientDataError):
        hypo.decay_certificate(_synthetic(np.exp(-t), t), c)


def test_trace_csv_and_phi_consistency():
    m = build_model(Profile1D.cos(3, -3.0), Profile1D.zero(), 64)
    tr, _ = evolve_mode(ModeState(1, 1e-3, np.ones(64)), m, 1.0, 0.01)
    np.testing.assert_allclose(tr.phi, tr.recompute_phi(), rtol=1e-14)
    lines = tr.to_csv().splitlines()
    assert lines[0] == "t,norm2,phi,dnorm2,cross,shear2" and len(lines) == tr.t.size + 1
