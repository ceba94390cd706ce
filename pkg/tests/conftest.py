import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from shearlab.flow import Profile1D, build_model  # noqa: E402

DATA = Path(__file__).parent / "data"


@pytest.fixture
def kolmogorov():
    return Profile1D.cos(3, -3.0)


@pytest.fixture
def flat_model(kolmogorov):
    return build_model(kolmogorov, Profile1D.zero(), 256)


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


def random_profile(rng, max_n=6, scale=1.0, mean=0.0, grid=256):
    n_modes = rng.integers(1, max_n + 1)
    modes = tuple((int(n), *(scale * rng.standard_normal(2) / n)) for n in rng.choice(np.arange(1, max_n + 1), n_modes, replace=False))
    return Profile1D(mean, modes, grid)


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split("[")[1].split("]")[0])):
            terminalreporter.write_line(line)
