"""Single x-band evolution of the shear transport equation.

In the f-frame a band ``f_k(t, y)`` obeys::

    df/dt + i k u(y) f = nu (f'' + v f')

and in the h-frame (time multiplied by nu) the transport carries 1/nu and the
right-hand side loses its nu.  Each step is a Strang split: half a step of
the exact pointwise phase, a Crank-Nicolson step of the drift-diffusion
operator, and another half phase.  The drift-diffusion operator is
symmetric in L^2(mu), so the Crank-Nicolson factor is a contraction and the
scheme is non-expansive in the weighted norm.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import linalg

from . import spectral
from .errors import (
    ConfigError,
    DimensionError,
    InsufficientDataError,
    NumericalBlowupError,
    RegimeError,
    StabilityError,
)
from .fitting import loglog_fit
from .flow import Profile1D, ShearModel, build_model
from .hypo import (
    FunctionalTrace,
    HypoCoefficients,
    coefficients,
    functional_components,
    scale_coefficients,
)
from .io import csv_text

FRAMES = ("f_time", "h_time")
GROWTH_TOL = 1e-10
PHASE_CFL = 1.0
MEAN_TOL = 1e-12


@dataclass(frozen=True)
class ModeState:
    k: int
    nu: float
    field: np.ndarray = field(repr=False)
    time: float = 0.0
    frame: str = "f_time"

    def __post_init__(self):
        if self.k < 0:
            raise ConfigError(f"k must be nonnegative, got {self.k}")
        if not self.nu > 0:
            raise ConfigError(f"nu must be positive, got {self.nu}")
        if self.frame not in FRAMES:
            raise ConfigError(f"frame: expected one of {FRAMES}, got {self.frame!r}")
        f = np.array(self.field, dtype=float if self.k == 0 and np.isrealobj(self.field) else complex)
        if self.k == 0 and np.iscomplexobj(f):
            if np.max(np.abs(f.imag), initial=0.0) > 0:
                raise ConfigError("k = 0 field must be real")
            f = f.real.copy()
        f.flags.writeable = False
        object.__setattr__(self, "field", f)

    @property
    def grid_size(self) -> int:
        return self.field.size

    def check(self, model: ShearModel):
        if self.grid_size != model.grid_size:
            raise DimensionError(f"state has {self.grid_size} nodes, model grid has {model.grid_size}")
        if self.k == 0:
            m = float(np.sum(self.field * model.mu))
            if abs(m) > 1e-10 * max(1.0, float(np.max(np.abs(self.field)))):
                raise RegimeError(f"k = 0 field must have zero weighted mean, got {m:.3e}")

    def f_time(self) -> float:
        return self.time / self.nu if self.frame == "h_time" else self.time

    def to_csv(self, model: ShearModel | None = None) -> str:
        y = spectral.grid(self.grid_size)
        f = self.field.astype(complex)
        return csv_text(["y", "re", "im"], zip(y.tolist(), f.real.tolist(), f.imag.tolist()))

    @classmethod
    def from_profile(cls, p: Profile1D, model: ShearModel, k: int, nu: float, frame: str = "f_time"):
        return cls(k, nu, p.sample(model.grid_size), 0.0, frame)


def drift_diffusion_matrix(model: ShearModel) -> np.ndarray:
    """Dense ``f -> f'' + v f'`` written as ``e^V d/dy (e^{-V} d/dy f)``."""
    n = model.grid_size
    D = spectral.diff_matrix(n)
    V = model.V.sample(n)
    return (np.exp(V)[:, None] * D) @ (np.exp(-V)[:, None] * D)


class ModeStepper:
    """Precomputed one-step propagator for fixed (model, k, nu, dt, frame)."""

    def __init__(self, model: ShearModel, k: int, nu: float, dt: float, frame: str = "f_time"):
        if frame not in FRAMES:
            raise ConfigError(f"frame: expected one of {FRAMES}, got {frame!r}")
        if not dt > 0:
            raise ConfigError(f"dt must be positive, got {dt}")
        s = 1.0 / nu if frame == "h_time" else 1.0
        c = 1.0 if frame == "h_time" else nu
        umax = model.u.max_abs()
        limit = PHASE_CFL / (k * umax * s) if k and umax > 0 else math.inf
        if dt > limit * (1 + 1e-12):
            raise StabilityError(dt, limit, "mode-solver step (phase rotation per step must stay below 1 rad)")
        self.model, self.k, self.nu, self.dt, self.frame = model, k, nu, dt, frame
        n = model.grid_size
        L = drift_diffusion_matrix(model)
        eye = np.eye(n)
        cn = linalg.solve(eye - 0.5 * c * dt * L, eye + 0.5 * c * dt * L)
        if k == 0:
            self.S = cn
        else:
            u = model.u.sample(n)
            half = np.exp(-0.5j * k * u * dt * s)
            self.S = half[:, None] * cn * half[None, :]

    def step(self, f: np.ndarray) -> np.ndarray:
        return self.S @ f


def default_dt(model: ShearModel, k: int, nu: float, frame: str = "f_time") -> float:
    umax = model.u.max_abs()
    dt_f = min(0.1 / (k * umax), 0.5) if k and umax > 0 else 0.5
    return dt_f * nu if frame == "h_time" else dt_f


def evolve_mode(state: ModeState, model: ShearModel, T: float, dt: float | None = None,
                coeffs: HypoCoefficients | None = None, record_every: int = 1,
                nu0: float | None = None) -> tuple[FunctionalTrace, ModeState]:
    """Advance ``state`` by time ``T`` (in its own frame) and record the trace.

    The functional uses ``coeffs`` (default: feasible, C0 = 2) scaled to
    (nu, k); the regime gate is applied only when ``nu0`` is given.
    """
    state.check(model)
    dt = default_dt(model, state.k, state.nu, state.frame) if dt is None else dt
    n_steps = max(1, int(math.ceil(T / dt - 1e-9)))
    dt = T / n_steps
    stepper = ModeStepper(model, state.k, state.nu, dt, state.frame)
    coeffs = coeffs or coefficients(2.0, "feasible")
    kk = max(state.k, 1)
    a, b, g = scale_coefficients(coeffs, state.nu, kk, nu0 or 0.0, check_regime=nu0 is not None)

    mu = model.mu
    f = np.array(state.field)
    rec = [f.copy()]
    times = [state.time]
    prev = float(np.sum(np.abs(f) ** 2 * mu))
    for i in range(1, n_steps + 1):
        f = stepper.step(f)
        cur = float(np.sum(np.abs(f) ** 2 * mu))
        if not math.isfinite(cur) or cur > prev * (1 + GROWTH_TOL) + 1e-300:
            raise NumericalBlowupError(
                f"weighted norm grew from {prev:.17g} to {cur:.17g} at step {i} (t={state.time + i * dt:.6g})"
            )
        prev = cur
        if i % record_every == 0 or i == n_steps:
            rec.append(f.copy())
            times.append(state.time + i * dt)
    comps = functional_components(np.array(rec), state.k, model)
    trace = FunctionalTrace(np.array(times), comps, state.k, state.nu, a, b, g, state.frame)
    final = replace(state, field=f, time=state.time + n_steps * dt)
    return trace, final


def evolve_until(state: ModeState, model: ShearModel, efolds: float, dt: float | None = None,
                 chunk: float | None = None, max_time: float = math.inf,
                 coeffs: HypoCoefficients | None = None, record_every: int = 1):
    """Evolve in chunks until |f|^2 has dropped by ``efolds`` e-foldings."""
    dt = default_dt(model, state.k, state.nu, state.frame) if dt is None else dt
    chunk = chunk or 200 * dt
    n0 = float(np.sum(np.abs(state.field) ** 2 * model.mu))
    trace = None
    while True:
        tr, state = evolve_mode(state, model, chunk, dt, coeffs, record_every)
        trace = tr if trace is None else trace.concat(tr)
        if n0 == 0 or math.log(n0 / trace.norm2[-1]) >= efolds:
            return trace, state
        if state.time >= max_time:
            raise InsufficientDataError(
                f"only {math.log(n0 / trace.norm2[-1]):.2f} e-foldings by t={state.time:.4g}"
            )
        chunk *= 2


# rate fits -----------------------------------------------------------------


@dataclass(frozen=True)
class DecayFit:
    lam: float
    r2: float
    window: tuple[float, float]
    lam_provisional: float
    n_points: int


MIN_EFOLDS = 3.0


def measure_decay_rate(trace, policy: str = "transient-discard", min_points: int = 10) -> DecayFit:
    """lambda = -slope/2 of log |f|^2, refitted after dropping t < t0 + 2/lambda_prov.

    ``trace`` is a FunctionalTrace or a ``(t, norm2)`` pair.
    """
    if isinstance(trace, FunctionalTrace):
        t, n2 = trace.t, trace.norm2
    else:
        t, n2 = (np.asarray(a, dtype=float) for a in trace)
    if policy not in ("transient-discard", "full"):
        raise ConfigError(f"unknown window policy {policy!r}")
    if np.any(n2 <= 0):
        raise InsufficientDataError("trace contains vanishing norms")
    logn = np.log(n2)
    if logn[0] - logn[-1] < MIN_EFOLDS:
        raise InsufficientDataError(
            f"trace spans {logn[0] - logn[-1]:.2f} e-foldings of |f|^2, need {MIN_EFOLDS}; use a longer T"
        )

    def fit(sel):
        tt, ll = t[sel], logn[sel]
        A = np.vstack([tt, np.ones_like(tt)]).T
        (slope, icpt), *_ = np.linalg.lstsq(A, ll, rcond=None)
        resid = ll - (slope * tt + icpt)
        ss = np.sum((ll - ll.mean()) ** 2)
        return -slope / 2.0, 1.0 - (np.sum(resid**2) / ss if ss > 0 else 0.0)

    everything = np.ones(t.size, bool)
    lam0, r2 = fit(everything)
    if policy == "full":
        return DecayFit(float(lam0), float(r2), (float(t[0]), float(t[-1])), float(lam0), int(t.size))
    sel = t >= t[0] + 2.0 / lam0 if lam0 > 0 else everything
    if sel.sum() < min_points:
        raise InsufficientDataError(
            f"after discarding t < {t[0] + 2.0 / lam0:.4g} only {sel.sum()} samples remain; use a longer T"
        )
    lam, r2 = fit(sel)
    return DecayFit(float(lam), float(r2), (float(t[sel][0]), float(t[-1])), float(lam0), int(sel.sum()))


# envelope ------------------------------------------------------------------


@dataclass(frozen=True)
class EnvelopeReport:
    skipped: bool
    passed: bool
    c0_min: float
    c0: float | None
    eps_hat: float
    first_violation: float | None
    reason: str = ""

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def semigroup_envelope_check(trace: FunctionalTrace, eps_hat: float, c0: float | None = None,
                             nu0: float | None = None) -> EnvelopeReport:
    """|f(t)|^2 <= c0 |f(0)|^2 exp(-eps_hat sqrt(nu k) t / (1 + |ln nu| + ln k)), f-frame."""
    if trace.k == 0:
        return EnvelopeReport(True, True, 1.0, c0, eps_hat, None,
                              "k = 0 decays by the Poincare estimate; the envelope does not apply")
    tr = trace.in_f_time()
    if nu0 is not None and tr.nu / tr.k > nu0:
        raise RegimeError(f"nu/k = {tr.nu / tr.k:.3g} exceeds the regime gate {nu0}")
    rate = eps_hat * math.sqrt(tr.nu * tr.k) / (1.0 + abs(math.log(tr.nu)) + math.log(tr.k))
    n2 = tr.norm2
    if n2[0] == 0:
        return EnvelopeReport(False, True, 1.0, c0, eps_hat, None, "zero data")
    ratio = n2 / (n2[0] * np.exp(-rate * (tr.t - tr.t[0])))
    c0_min = float(np.max(ratio))
    if c0 is None:
        return EnvelopeReport(False, True, c0_min, None, eps_hat, None)
    bad = np.flatnonzero(ratio > c0)
    first = float(tr.t[bad[0]]) if bad.size else None
    return EnvelopeReport(False, not bad.size, c0_min, c0, eps_hat, first)


# experiments ---------------------------------------------------------------


def kolmogorov(grid_size: int = 256) -> Profile1D:
    return Profile1D.cos(3, -3.0, grid_size)


def decay_rate(model: ShearModel, k: int, nu: float, efolds: float = 12.0, dt: float | None = None,
               record_every: int = 1, initial: np.ndarray | None = None) -> tuple[DecayFit, FunctionalTrace]:
    """Evolve the constant-in-y band (or ``initial``) in the f-frame and fit lambda."""
    f0 = np.ones(model.grid_size) if initial is None else initial
    st = ModeState(k, nu, f0)
    trace, _ = evolve_until(st, model, efolds, dt, record_every=record_every)
    return measure_decay_rate(trace), trace


@dataclass(frozen=True)
class InvarianceReport:
    nus: tuple[float, ...]
    lam_on: tuple[float, ...]
    lam_off: tuple[float, ...]
    slope_on: float
    slope_off: float

    @property
    def ratios(self) -> tuple[float, ...]:
        return tuple(a / b for a, b in zip(self.lam_on, self.lam_off))

    def csv(self) -> str:
        return csv_text(["nu", "lam_on", "lam_off", "ratio"],
                        zip(self.nus, self.lam_on, self.lam_off, self.ratios))

    def to_dict(self) -> dict:
        return {"nu": list(self.nus), "lam_on": list(self.lam_on), "lam_off": list(self.lam_off),
                "ratio": list(self.ratios), "slope_on": self.slope_on, "slope_off": self.slope_off}


def potential_invariance_experiment(u: Profile1D, v_on: Profile1D, v_off: Profile1D | None = None,
                                    k: int = 1, nus=(1e-2, 3e-3, 1e-3, 3e-4, 1e-4),
                                    grid_size: int = 256, efolds: float = 12.0) -> InvarianceReport:
    """Fitted f-frame decay rates with and without the potential drift.

    A constant added to u only rotates the phase of the band, so u need not
    be centred against either measure.
    """
    v_off = v_off or Profile1D.zero()
    on = build_model(u, v_on, grid_size)
    off = on if v_on == v_off else build_model(u, v_off, grid_size)
    lam_on, lam_off = [], []
    for nu in nus:
        a, _ = decay_rate(on, k, nu, efolds)
        lam_on.append(a.lam)
        if off is on:
            lam_off.append(a.lam)
        else:
            b, _ = decay_rate(off, k, nu, efolds)
            lam_off.append(b.lam)
    s_on = loglog_fit(nus, lam_on).slope if len(nus) > 1 else math.nan
    s_off = loglog_fit(nus, lam_off).slope if len(nus) > 1 else math.nan
    return InvarianceReport(tuple(nus), tuple(lam_on), tuple(lam_off), s_on, s_off)
