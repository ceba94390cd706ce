"""One-dimensional periodic cell problems and effective diffusivities.

The generator of the fast variable is ``L = d^2/dy^2 + v d/dy``. For a right
hand side phi with zero mean against mu, the unique solution of
``L chi = phi`` with ``int chi dmu = 0`` is::

    chi(y) = B + int_0^y e^{V(s)} [A + int_0^s phi e^{-V}] ds

with A fixed by periodicity and B by the mean-zero condition.  All nested
integrals are evaluated spectrally on the collocation grid.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np

from . import spectral
from .errors import ConsistencyError, DimensionError, SolvabilityError
from .flow import Profile1D, ShearModel

CELL_GRID = 1024
SOLVABILITY_TOL = 1e-8
RESIDUAL_TOL = 1e-8
MAX_CELL_GRID = 16384


@dataclass(frozen=True)
class CellSolution:
    y: np.ndarray = field(repr=False)
    chi: np.ndarray = field(repr=False)
    dchi: np.ndarray = field(repr=False)
    A: float
    B: float
    residual: float
    diffusivity: float
    weighted_mean: float = 0.0

    @property
    def grid_size(self) -> int:
        return self.y.size

    def to_json(self) -> str:
        return json.dumps(
            {
                "A": self.A,
                "B": self.B,
                "diffusivity": self.diffusivity,
                "residual": self.residual,
                "grid_size": self.grid_size,
            },
            indent=2,
        )

    def to_csv(self) -> str:
        rows = ["y,chi"]
        rows += [f"{y!r},{c!r}" for y, c in zip(self.y.tolist(), self.chi.tolist())]
        return "\n".join(rows) + "\n"


def _rhs_on_grid(phi, n: int) -> np.ndarray:
    if isinstance(phi, Profile1D):
        return phi.sample(n)
    phi = np.asarray(phi, dtype=float)
    if phi.ndim != 1 or phi.size < 8:
        raise DimensionError(f"right-hand side must be a 1D grid function, got shape {phi.shape}")
    return spectral.resample(phi, n)


def _solve_once(phi: np.ndarray, model: ShearModel) -> CellSolution:
    y = model.y
    V = model.V(y)
    eV = np.exp(V)
    mu = model.mu

    wmean = float(np.sum(phi * mu))
    if abs(wmean) > SOLVABILITY_TOL:
        raise SolvabilityError(wmean)

    # inner integral F(y) = int_0^y phi e^{-V}; periodic by solvability
    F, _ = spectral.antiderivative(phi * np.exp(-V))
    A = -float(np.mean(eV * F) / np.mean(eV))
    g = eV * (A + F)
    G, _ = spectral.antiderivative(g)
    B = -float(np.sum(mu * G))
    chi = B + G

    dchi = spectral.differentiate(chi)
    d2chi = spectral.differentiate(chi, 2)
    v = model.v(y)
    residual = float(np.max(np.abs(v * dchi + d2chi - phi)))
    return CellSolution(y, chi, dchi, A, B, residual, float(np.sum(dchi**2 * mu)), wmean)


def solve_cell(phi, model: ShearModel, n: int = CELL_GRID, tol: float = RESIDUAL_TOL) -> CellSolution:
    """Solve ``v chi' + chi'' = phi`` with ``int chi dmu = 0``.

    ``phi`` may be a Profile1D or a band-limited grid function (it is
    trigonometrically interpolated onto the cell grid).  The grid is
    doubled while the measured residual exceeds ``tol``.  The returned
    ``diffusivity`` field is ``||chi'||^2``; callers override it.
    """
    while True:
        m = model.resampled(n)
        sol = _solve_once(_rhs_on_grid(phi, n), m)
        if sol.residual <= tol or n >= MAX_CELL_GRID:
            return sol
        n *= 2


def diffusivity_u(model: ShearModel, n: int = CELL_GRID) -> tuple[CellSolution, float]:
    """D_u = ||chi_u'||^2 with L chi_u = -u; requires a centred u."""
    model.require_admissible()
    if model.u.is_zero():
        y = spectral.grid(n)
        z = np.zeros(n)
        return CellSolution(y, z, z, 0.0, 0.0, 0.0, 0.0), 0.0
    sol = solve_cell(-model.u, model, n)
    return sol, sol.diffusivity


def diffusivity_v(model: ShearModel, n: int = CELL_GRID) -> tuple[CellSolution, float]:
    """D_v = ||1 + chi_v'||^2 with L chi_v = -v."""
    sol = solve_cell(-model.v, model, n)
    mu = model.resampled(sol.grid_size).mu
    d = float(np.sum((1.0 + sol.dchi) ** 2 * mu))
    sol = replace(sol, diffusivity=d)
    return sol, d


def lifson_jackson(model: ShearModel, n: int = CELL_GRID) -> float:
    """1 / (<e^V> <e^{-V}>) with uniform averages over one period."""
    V = model.V.sample(n)
    return float(1.0 / (np.mean(np.exp(V)) * np.mean(np.exp(-V))))


def auxiliary_corrector_g(model: ShearModel, cell_v: CellSolution) -> CellSolution:
    """Solve L chi_g = -g for g = (1 + chi_v')^2 - D_v."""
    n = cell_v.grid_size
    mu = model.resampled(n).mu
    g = (1.0 + cell_v.dchi) ** 2 - cell_v.diffusivity
    mean = float(np.sum(g * mu))
    if abs(mean) > SOLVABILITY_TOL:
        raise ConsistencyError(f"int g dmu = {mean:.3e}; D_v is inconsistent with chi_v")
    return solve_cell(-g, model, n)
