"""Hypocoercive energy functional, its coefficients, and decay certificates.

For a single x-band ``f_k`` (so that d/dx acts as ``ik``)::

    Phi = 1/2 [ |f|^2 + alpha |f'|^2 + 2 beta Re<u' ik f, f'> + gamma |u' ik f|^2 ]

with norms in L^2(mu) and the scaling

    alpha = alpha0 sqrt(nu/k),  beta = beta0/k,  gamma = gamma0/(sqrt(nu) k^1.5).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from . import spectral
from .errors import ConfigError, DimensionError, InsufficientDataError, RegimeError
from .flow import ShearModel
from .io import csv_text

MODES = ("as_stated", "feasible")
NU0 = 0.05
CERT_SLACK = 0.02
MIN_SAMPLES_PER_EFOLD = 50


class RegimeViolation(RegimeError):
    pass


@dataclass(frozen=True)
class HypoCoefficients:
    C0: float
    delta0: float
    alpha0: float
    beta0: float
    gamma0: float
    eps0: float
    mode: str

    def ratios(self) -> dict[str, float]:
        return {
            "beta0^2/(alpha0*gamma0)": self.beta0**2 / (self.alpha0 * self.gamma0),
            "alpha0^2/beta0": self.alpha0**2 / self.beta0,
            "gamma0/sqrt(beta0)": self.gamma0 / math.sqrt(self.beta0),
        }

    def bounds(self) -> dict[str, float]:
        c = self.C0
        return {
            "beta0^2/(alpha0*gamma0)": 1.0 / (6.0 * c),
            "alpha0^2/beta0": 1.0 / (2.0 * c),
            "gamma0/sqrt(beta0)": 1.0 / (2.0 * c),
        }

    def constraint_report(self) -> dict:
        r, b = self.ratios(), self.bounds()
        rows = {
            key: {"ratio": r[key], "bound": b[key], "satisfied": r[key] <= b[key] * (1 + 1e-12)}
            for key in r
        }
        return {"mode": self.mode, "C0": self.C0, "constraints": rows,
                "all_satisfied": all(v["satisfied"] for v in rows.values())}

    def to_dict(self) -> dict:
        return {
            "C0": self.C0, "delta0": self.delta0, "alpha0": self.alpha0,
            "beta0": self.beta0, "gamma0": self.gamma0, "eps0": self.eps0, "mode": self.mode,
        }


def coefficients(C0: float = 2.0, mode: str = "feasible") -> HypoCoefficients:
    """Explicit (alpha0, beta0, gamma0, eps0) for a given constant C0 >= 2.

    ``as_stated`` evaluates the displayed formulas literally; its first
    constraint ratio is 1/6 independently of C0.  ``feasible`` divides
    alpha0 and gamma0 by sqrt(C0) and beta0 by C0, which saturates all three
    constraints, and recomputes eps0 = 2 sqrt(beta0)/C0.
    """
    if mode not in MODES:
        raise ConfigError(f"mode: expected one of {MODES}, got {mode!r}")
    if not C0 >= 2.0:
        raise RegimeError(f"C0 must be >= 2, got {C0}")
    d = (288.0 * C0**3) ** -0.25
    a, b, g = 12.0 * C0 * d**3, d * d, d / (2.0 * C0)
    if mode == "as_stated":
        return HypoCoefficients(C0, d, a, b, g, 2.0 * d / C0, mode)
    s = math.sqrt(C0)
    a, b, g = a / s, b / C0, g / s
    return HypoCoefficients(C0, d, a, b, g, 2.0 * math.sqrt(b) / C0, mode)


def scale_coefficients(coeffs: HypoCoefficients, nu: float, k: int, nu0: float = NU0,
                       check_regime: bool = True) -> tuple[float, float, float]:
    if nu <= 0 or k < 1:
        raise RegimeError(f"need nu > 0 and k >= 1 (nu={nu}, k={k})")
    if check_regime and nu / k > nu0:
        raise RegimeViolation(f"nu/k = {nu / k:.3g} exceeds the regime gate nu0 = {nu0}")
    return (coeffs.alpha0 * math.sqrt(nu / k), coeffs.beta0 / k,
            coeffs.gamma0 / (math.sqrt(nu) * k**1.5))


def functional_components(f: np.ndarray, k: int, model: ShearModel) -> np.ndarray:
    """(|f|^2, |f'|^2, Re<u' ik f, f'>, |u' ik f|^2) for one or many fields (last axis = y)."""
    f = np.asarray(f)
    if f.shape[-1] != model.grid_size:
        raise DimensionError(f"field has {f.shape[-1]} nodes, model grid has {model.grid_size}")
    if not np.all(np.isfinite(f)):
        raise RegimeError("field contains non-finite values")
    mu = model.mu
    up = model.u.derivative().sample(model.grid_size)
    fy = spectral.differentiate(f)
    tx = 1j * k * up * f
    return np.stack([
        np.sum(np.abs(f) ** 2 * mu, axis=-1),
        np.sum(np.abs(fy) ** 2 * mu, axis=-1),
        np.real(np.sum(tx * np.conj(fy) * mu, axis=-1)),
        np.sum(np.abs(tx) ** 2 * mu, axis=-1),
    ], axis=-1)


def combine(components: np.ndarray, alpha: float, beta: float, gamma: float) -> np.ndarray:
    c = np.asarray(components)
    return 0.5 * (c[..., 0] + alpha * c[..., 1] + 2.0 * beta * c[..., 2] + gamma * c[..., 3])


def functional(state, coeffs: HypoCoefficients, model: ShearModel, nu0: float = NU0,
               check_regime: bool = True) -> tuple[float, dict]:
    """Phi_k of a ModeState plus the four components it is built from."""
    a, b, g = scale_coefficients(coeffs, state.nu, state.k, nu0, check_regime)
    comp = functional_components(state.field, state.k, model)
    names = ("norm2", "dnorm2", "cross", "shear2")
    return float(combine(comp, a, b, g)), dict(zip(names, map(float, comp)))


@dataclass(frozen=True)
class FunctionalTrace:
    t: np.ndarray = field(repr=False)
    components: np.ndarray = field(repr=False)  # (n, 4)
    k: int
    nu: float
    alpha: float
    beta: float
    gamma: float
    frame: str = "f_time"
    phi: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if self.phi is None:
            object.__setattr__(self, "phi", combine(self.components, self.alpha, self.beta, self.gamma))

    @property
    def norm2(self) -> np.ndarray:
        return self.components[:, 0]

    def recompute_phi(self) -> np.ndarray:
        return combine(self.components, self.alpha, self.beta, self.gamma)

    def in_f_time(self) -> FunctionalTrace:
        if self.frame == "f_time":
            return self
        return FunctionalTrace(self.t / self.nu, self.components, self.k, self.nu,
                               self.alpha, self.beta, self.gamma, "f_time", self.phi)

    def concat(self, other: FunctionalTrace) -> FunctionalTrace:
        """Append ``other``, dropping its first sample (the shared endpoint)."""
        return FunctionalTrace(
            np.concatenate([self.t, other.t[1:]]),
            np.concatenate([self.components, other.components[1:]]),
            self.k, self.nu, self.alpha, self.beta, self.gamma, self.frame,
            np.concatenate([self.phi, other.phi[1:]]),
        )

    def to_csv(self) -> str:
        rows = zip(self.t.tolist(), self.norm2.tolist(), self.phi.tolist(),
                   *(self.components[:, j].tolist() for j in range(1, 4)))
        return csv_text(["t", "norm2", "phi", "dnorm2", "cross", "shear2"], rows)


# spectral inequality -------------------------------------------------------


@dataclass(frozen=True)
class SpectralReport:
    passed: bool
    required_C0: float
    C0: float
    sigma: float


def _quadratic_parts(model: ShearModel):
    n = model.grid_size
    mu = model.mu
    D = spectral.diff_matrix(n)
    up = model.u.derivative().sample(n)
    M = np.diag(mu)
    K = D.T @ M @ D
    U = np.diag(up * up * mu)
    return M, K, U


def spectral_inequality_check(g, sigma: float, model: ShearModel, C0: float) -> SpectralReport:
    """Check sigma |g|^2 <= C0 [sigma^2 |g'|^2 + |u' g|^2] on each given field.

    ``g`` is one grid function or a stack of them (rows).  The reported
    constant is the largest ratio LHS / [...] over the set.
    """
    g = np.atleast_2d(np.asarray(g))
    if g.shape[-1] != model.grid_size:
        raise DimensionError(f"field has {g.shape[-1]} nodes, model grid has {model.grid_size}")
    mu = model.mu
    up = model.u.derivative().sample(model.grid_size)
    gy = spectral.differentiate(g)
    lhs = sigma * np.sum(np.abs(g) ** 2 * mu, axis=-1)
    rhs = sigma**2 * np.sum(np.abs(gy) ** 2 * mu, axis=-1) + np.sum(np.abs(up * g) ** 2 * mu, axis=-1)
    nz = lhs > 0
    if not nz.any():
        return SpectralReport(True, 0.0, C0, sigma)
    if np.any(rhs[nz] <= 0):
        return SpectralReport(False, math.inf, C0, sigma)
    req = float(np.max(lhs[nz] / rhs[nz]))
    return SpectralReport(req <= C0, req, C0, sigma)


def worst_case_constant(sigma: float, model: ShearModel) -> float:
    """Sharp discrete constant: sigma / smallest eigenvalue of (sigma^2 K + U, M)."""
    M, K, U = _quadratic_parts(model)
    lam = linalg.eigh(sigma**2 * K + U, M, eigvals_only=True, subset_by_index=[0, 0])[0]
    return float(sigma / lam)


def calibrate_C0(model: ShearModel, nu: float, k: int = 1, mode: str = "feasible",
                 floor: float = 2.0, max_iter: int = 50) -> tuple[float, HypoCoefficients]:
    """Smallest C0 >= floor consistent with the spectral inequality at
    sigma^2 = nu/(beta0 k), where beta0 itself depends on C0."""
    C0 = floor
    for _ in range(max_iter):
        co = coefficients(C0, mode)
        sigma = math.sqrt(nu / (co.beta0 * k))
        need = max(floor, worst_case_constant(sigma, model))
        if need <= C0 * (1 + 1e-12):
            return C0, co
        C0 = need
    raise RegimeError(f"C0 calibration did not converge (last {C0:.4g})")


# decay certificate ---------------------------------------------------------


@dataclass(frozen=True)
class DecayCertificate:
    passed: bool
    envelope_ok: bool
    derivative_ok: bool
    rate: float
    certified_eps: float
    first_violation: float | None
    worst_excess: float
    n_samples: int
    vacuous: bool = False

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def decay_certificate(trace: FunctionalTrace, coeffs: HypoCoefficients, slack: float = CERT_SLACK,
                      rate: float | None = None) -> DecayCertificate:
    """Certify Phi(t) e^{r t} non-increasing with r = eps0 sqrt(nu k) (f-frame time).

    Two checks: the envelope Phi(t) <= e^{-rt} Phi(0) (1 + slack) and, per
    sampling interval, the discrete derivative
    ``dPhi/dt + r Phi <= slack r Phi + tau`` where ``tau`` is a truncation
    estimate built from the three-point second difference.
    """
    tr = trace.in_f_time()
    t, phi = tr.t, tr.phi
    r = coeffs.eps0 * math.sqrt(tr.nu * tr.k) if rate is None else rate
    if phi[0] == 0.0 and np.all(phi == 0.0):
        return DecayCertificate(True, True, True, r, math.inf, None, 0.0, t.size, vacuous=True)
    if t.size < 3:
        raise InsufficientDataError("trace needs at least three samples")
    dt = np.diff(t)
    with np.errstate(divide="ignore", invalid="ignore"):
        dlog = -np.diff(np.log(phi))
    observed = np.max(np.abs(dlog / dt))
    if max(r, observed) * dt.max() > 1.0 / MIN_SAMPLES_PER_EFOLD:
        raise InsufficientDataError(
            f"trace under-resolved: {1.0 / (max(r, observed) * dt.max()):.1f} samples per "
            f"e-folding, need {MIN_SAMPLES_PER_EFOLD}"
        )

    env = phi[0] * np.exp(-r * (t - t[0])) * (1 + slack)
    env_bad = np.flatnonzero(phi > env)

    d = np.diff(phi) / dt
    mid = 0.5 * (phi[1:] + phi[:-1])
    d2 = np.zeros_like(mid)
    second = np.abs(phi[2:] - 2 * phi[1:-1] + phi[:-2])
    d2[:-1] = second
    d2[1:] = np.maximum(d2[1:], second)
    tau = r * d2 / 12.0
    excess = d + r * mid - (slack * r * mid + tau)
    der_bad = np.flatnonzero(excess > 0)

    firsts = []
    if env_bad.size:
        firsts.append(float(t[env_bad[0]]))
    if der_bad.size:
        firsts.append(float(t[der_bad[0] + 1]))
    cert = float(np.min(dlog / dt))
    worst = float(np.max(excess / np.where(mid > 0, r * mid, 1.0)))
    return DecayCertificate(
        not env_bad.size and not der_bad.size, not env_bad.size, not der_bad.size,
        float(r), cert, min(firsts) if firsts else None, worst, int(t.size),
    )
