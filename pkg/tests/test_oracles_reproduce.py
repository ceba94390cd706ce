import numpy as np
import pytest
from scipy import special

import oracles


def test_frozen_constants_reproduce():
    assert oracles.uniform_average(lambda y: np.exp(np.cos(y))) == pytest.approx(oracles.I0_1, abs=1e-14)
    assert 2 * np.pi * oracles.uniform_average(lambda y: np.exp(1 - np.cos(y))) == pytest.approx(oracles.Z1_SIN, rel=1e-14)
    assert oracles.lifson_jackson(np.cos) == pytest.approx(oracles.LJ_COS, abs=1e-14)
    assert oracles.lifson_jackson(lambda y: np.sin(3 * y)) == pytest.approx(oracles.LJ_SIN3, abs=1e-14)


def test_constants_against_bessel():
    # closed forms: <e^{cos y}> = I0(1), Lifson-Jackson for a single cosine = 1/I0(1)^2
    assert oracles.I0_1 == pytest.approx(special.i0(1.0), rel=1e-15)
    assert oracles.LJ_COS == pytest.approx(1 / special.i0(1.0) ** 2, rel=1e-14)
    assert oracles.Z1_SIN == pytest.approx(2 * np.pi * np.e * special.i0(1.0), rel=1e-14)


def test_fd_solver_on_closed_form():
    y, chi = oracles.fd_cell_solve(lambda y: -9 * np.cos(3 * y), lambda y: 0 * y, lambda y: 0 * y, 4096)
    assert np.max(np.abs(chi - np.cos(3 * y))) < 1e-5
