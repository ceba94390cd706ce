"""Euler-Maruyama ensembles for the shear and cellular-flow SDE systems.

All three systems share the form::

    dX = (u(Y)/nu + p(X)) dt + sx dW1
    dY = (q(X)/nu + v(Y)) dt + sy dW2

with every coefficient a short Fourier series, which is what the kernels
consume.  Noise for path ``i`` at step ``s`` is a pure function of
``(seed, i, s)`` so the ensemble does not depend on how paths are split
across threads.
"""

from __future__ import annotations

import math
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import BACKEND, _em_python
from . import _kernel as _default_kernel
from .errors import ConfigError, InsufficientDataError, NumericalBlowupError, StabilityError
from .fitting import PowerFit, loglog_fit
from .flow import Profile1D, parse_profile
from .io import csv_text
from .rng import INIT_STEP, split_seed, uniforms

KINDS = ("shear_full", "shear_degenerate", "stream")
INITS = ("uniform", "point")
STREAM_WAVENUMBER = 3
MAX_CHECKPOINTS = 1000
DT_CAP = 1e-3
C_STAB = 0.1

HEADER = struct.Struct("<4sIIIdd")
MAGIC = b"SHLB"
FORMAT_VERSION = 1


def _table(p: Profile1D | None) -> np.ndarray:
    rows = []
    if p is not None:
        if p.const != 0.0:
            rows.append((0.0, p.const, 0.0))
        rows += [(float(n), a, b) for n, a, b in p.modes]
    return np.array(rows, dtype=np.float64).reshape(-1, 3)


def _sup(p: Profile1D | None) -> float:
    return 0.0 if p is None else p.max_abs()


@dataclass(frozen=True)
class SdeSpec:
    """Parameters of one ensemble.

    For ``stream`` the profiles are fixed by the stream function
    ``eps*sin(3x) + sin(3y)`` and ``u``/``v`` must be left unset.
    """

    kind: str
    nu: float
    kappa: float = 1.0
    dt: float = 1e-3
    T: float = 1.0
    n_paths: int = 1000
    seed: int = 0
    u: Profile1D | None = None
    v: Profile1D | None = None
    eps: float = 0.0
    init: str = "uniform"
    x0: float = 0.0
    y0: float = 0.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"kind: expected one of {KINDS}, got {self.kind!r}")
        if not self.nu > 0:
            raise ConfigError(f"nu: must be positive, got {self.nu}")
        if not self.kappa >= 0:
            raise ConfigError(f"kappa: must be nonnegative, got {self.kappa}")
        if not self.dt > 0 or not self.T > 0:
            raise ConfigError(f"dt and T must be positive (dt={self.dt}, T={self.T})")
        if self.dt > self.T:
            raise ConfigError(f"dt={self.dt} exceeds horizon T={self.T}")
        if int(self.n_paths) < 1:
            raise ConfigError(f"n_paths: must be >= 1, got {self.n_paths}")
        try:
            split_seed(self.seed)
        except ValueError as exc:
            raise ConfigError(f"seed: {exc}") from None
        if self.init not in INITS:
            raise ConfigError(f"init: expected one of {INITS}, got {self.init!r}")
        if self.kind == "stream":
            if self.u is not None or self.v is not None:
                raise ConfigError("stream kind takes eps, not explicit u/v profiles")
            if not 0.0 <= self.eps <= 1.0:
                raise ConfigError(f"eps: must lie in [0, 1], got {self.eps}")
        elif self.u is None:
            raise ConfigError(f"{self.kind}: profile u is required")
        steps = self.T / self.dt
        if abs(steps - round(steps)) > 1e-6 * steps:
            raise ConfigError(f"T={self.T} is not an integer multiple of dt={self.dt}")

    @property
    def n_steps(self) -> int:
        return int(round(self.T / self.dt))

    @property
    def stride(self) -> int:
        """Smallest divisor of n_steps giving at most MAX_CHECKPOINTS intervals."""
        n = self.n_steps
        s = max(1, math.ceil(n / MAX_CHECKPOINTS))
        while n % s:
            s += 1
        return s

    def profiles(self) -> tuple[Profile1D | None, Profile1D | None, Profile1D | None, Profile1D | None]:
        """(u, v, p, q): x-drift u(y)/nu + p(x), y-drift q(x)/nu + v(y)."""
        if self.kind == "stream":
            m = STREAM_WAVENUMBER
            u = Profile1D.cos(m, -float(m))
            p = Profile1D.cos(m, -m * self.eps) if self.eps else None
            q = Profile1D.cos(m, m * self.eps) if self.eps else None
            return u, u, p, q
        return self.u, self.v, None, None

    def noise(self) -> tuple[float, float]:
        s = math.sqrt(2.0 * self.kappa)
        return (0.0 if self.kind == "shear_degenerate" else s), s

    def max_dt(self) -> float:
        u, v, p, q = self.profiles()
        bx = _sup(u) / self.nu + _sup(p)
        by = _sup(q) / self.nu + _sup(v)
        bound = DT_CAP
        for b in (bx, by):
            if b > 0:
                bound = min(bound, C_STAB / b)
        return bound

    def check_stability(self):
        req = self.max_dt()
        if self.dt > req * (1 + 1e-12):
            raise StabilityError(self.dt, req, "Euler-Maruyama step")

    def to_dict(self) -> dict:
        d = {
            "kind": self.kind,
            "nu": self.nu,
            "kappa": self.kappa,
            "dt": self.dt,
            "T": self.T,
            "n_paths": int(self.n_paths),
            "seed": int(self.seed),
            "init": self.init,
        }
        if self.kind == "stream":
            d["eps"] = self.eps
        else:
            d["u"] = self.u.to_dict()
            d["v"] = (self.v or Profile1D.zero()).to_dict()
        if self.init == "point":
            d["x0"], d["y0"] = self.x0, self.y0
        return d

    @classmethod
    def from_dict(cls, d: dict) -> SdeSpec:
        d = dict(d)
        try:
            for key in ("u", "v"):
                if key in d:
                    d[key] = parse_profile(d[key], name=key)
            if d.get("kind") != "stream" and d.get("v") is None:
                d["v"] = Profile1D.zero()
            return cls(**d)
        except TypeError as exc:
            raise ConfigError(f"sde spec: {exc}") from None


@dataclass(frozen=True)
class PathEnsemble:
    """Positions of every path at the stored checkpoints, unwrapped."""

    t: np.ndarray = field(repr=False)
    pos: np.ndarray = field(repr=False)
    spec: SdeSpec
    backend: str = BACKEND
    meta: dict = field(default_factory=dict)

    @property
    def x(self) -> np.ndarray:
        return self.pos[:, :, 0]

    @property
    def y(self) -> np.ndarray:
        return self.pos[:, :, 1]

    @property
    def n_paths(self) -> int:
        return self.pos.shape[0]

    @property
    def n_checkpoints(self) -> int:
        return self.pos.shape[1]

    @property
    def nu(self) -> float:
        return self.spec.nu

    def index_at(self, t: float, rtol: float = 1e-9) -> int:
        i = int(np.argmin(np.abs(self.t - t)))
        if abs(self.t[i] - t) > rtol * max(1.0, abs(t)):
            raise InsufficientDataError(f"no checkpoint at t={t} (nearest {self.t[i]})")
        return i

    def at(self, t: float) -> np.ndarray:
        return self.pos[:, self.index_at(t), :]

    def summary(self) -> dict[str, np.ndarray]:
        x, y = self.x, self.y
        mx, my = x.mean(axis=0), y.mean(axis=0)
        dx, dy = x - mx, y - my
        return {
            "t": self.t,
            "mean_x": mx,
            "mean_y": my,
            "var_x": (dx * dx).mean(axis=0),
            "var_y": (dy * dy).mean(axis=0),
            "cov_xy": (dx * dy).mean(axis=0),
        }

    def summary_csv(self) -> str:
        s = self.summary()
        cols = list(s)
        return csv_text(cols, zip(*(s[c].tolist() for c in cols)))

    def to_bytes(self) -> bytes:
        """32-byte header then little-endian float64 positions, path-major."""
        spacing = float(self.t[1] - self.t[0]) if self.t.size > 1 else 0.0
        head = HEADER.pack(MAGIC, FORMAT_VERSION, self.n_paths, self.n_checkpoints, spacing, self.nu)
        return head + np.ascontiguousarray(self.pos, dtype="<f8").tobytes()

    @staticmethod
    def read_bytes(data: bytes) -> tuple[dict, np.ndarray]:
        if len(data) < HEADER.size:
            raise InsufficientDataError("truncated trajectory file")
        magic, version, n, m, spacing, nu = HEADER.unpack_from(data)
        if magic != MAGIC or version != FORMAT_VERSION:
            raise InsufficientDataError(f"not a trajectory file (magic {magic!r}, version {version})")
        body = np.frombuffer(data, dtype="<f8", offset=HEADER.size)
        if body.size != n * m * 2:
            raise InsufficientDataError(f"expected {n * m * 2} values, found {body.size}")
        head = {"n_paths": n, "n_checkpoints": m, "dt": spacing, "nu": nu}
        return head, body.reshape(n, m, 2)


def initial_positions(spec: SdeSpec, path_ids: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    if spec.init == "point":
        n = path_ids.size
        return np.full(n, float(spec.x0)), np.full(n, float(spec.y0))
    u1, u2 = uniforms(np.uint64(INIT_STEP), path_ids, spec.seed)
    return 2.0 * np.pi * u2, 2.0 * np.pi * (1.0 - u1)


def _resolve_kernel(backend: str | None):
    if backend is None:
        return _default_kernel, BACKEND
    if backend == "python":
        return _em_python, "python"
    if backend == "compiled":
        if BACKEND != "compiled":
            raise ConfigError("compiled kernel requested but the extension is not built")
        return _default_kernel, "compiled"
    raise ConfigError(f"backend: expected 'compiled' or 'python', got {backend!r}")


def simulate(spec: SdeSpec, threads: int = 1, backend: str | None = None) -> PathEnsemble:
    spec.check_stability()
    kernel, name = _resolve_kernel(backend)
    u, v, p, q = spec.profiles()
    um, vm, pm, qm = (_table(f) for f in (u, v, p, q))
    sx, sy = spec.noise()
    n, stride = int(spec.n_paths), spec.stride
    ids = np.arange(n, dtype=np.uint64)
    x0, y0 = initial_positions(spec, ids)

    def work(lo_hi):
        lo, hi = lo_hi
        return kernel.run_paths(
            np.ascontiguousarray(x0[lo:hi]), np.ascontiguousarray(y0[lo:hi]),
            ids[lo:hi], spec.seed, spec.n_steps, stride, spec.dt, spec.nu,
            sx, sy, um, vm, pm, qm,
        )

    threads = max(1, int(threads))
    cuts = np.linspace(0, n, min(threads, n) + 1).astype(int)
    ranges = list(zip(cuts[:-1], cuts[1:]))
    if len(ranges) == 1:
        pos = work(ranges[0])
    else:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            pos = np.concatenate(list(ex.map(work, ranges)), axis=0)

    finite = np.isfinite(pos).all(axis=(1, 2))
    if not finite.all():
        bad = np.flatnonzero(~finite)
        first = int(bad[0])
        ck = int(np.flatnonzero(~np.isfinite(pos[first]).all(axis=1))[0])
        raise NumericalBlowupError(
            f"{bad.size} of {n} paths became non-finite (first: path {first} by "
            f"t={ck * stride * spec.dt:.6g}); reduce dt={spec.dt}"
        )
    t = np.arange(pos.shape[1]) * (stride * spec.dt)
    return PathEnsemble(t, pos, spec, name, {"stride": stride})


def rescale(ens: PathEnsemble, beta: float, horizon: float | None = None) -> PathEnsemble:
    """X' = nu^(1+beta) X(t/nu^(2 beta)), Y' = nu^beta Y(t/nu^(2 beta))."""
    if not beta > 0:
        raise ConfigError(f"beta must be positive, got {beta}")
    nu = ens.nu
    s = nu ** (2 * beta)
    t = ens.t * s
    keep = slice(None)
    if horizon is not None:
        need = horizon / s
        if ens.t[-1] < need * (1 - 1e-9):
            raise InsufficientDataError(
                f"rescaled horizon {horizon} needs base horizon >= {need:.6g}, have {ens.t[-1]:.6g}"
            )
        keep = slice(0, int(np.searchsorted(t, horizon * (1 + 1e-9), side="right")))
    pos = ens.pos[:, keep, :] * np.array([nu ** (1 + beta), nu**beta])
    meta = dict(ens.meta, beta=beta)
    return replace(ens, t=t[keep], pos=pos, meta=meta)


@dataclass(frozen=True)
class DiffusivityEstimate:
    D_xx: float
    D_yy: float
    D_xy: float
    window: tuple[float, float]
    se_xx: float
    se_yy: float
    se_xy: float
    n_paths: int

    @property
    def matrix(self) -> np.ndarray:
        return np.array([[self.D_xx, self.D_xy], [self.D_xy, self.D_yy]])

    def to_dict(self) -> dict:
        return {
            "D_xx": self.D_xx, "D_yy": self.D_yy, "D_xy": self.D_xy,
            "se_xx": self.se_xx, "se_yy": self.se_yy, "se_xy": self.se_xy,
            "window": list(self.window), "n_paths": self.n_paths,
            "method": "least-squares slope of displacement covariance / 2",
        }


N_BATCHES = 10
MIN_PATHS = 100
MIN_WINDOW = 10


def _cov_slopes(pos: np.ndarray, t: np.ndarray) -> np.ndarray:
    d = pos - pos.mean(axis=0)
    c = np.stack([
        (d[:, :, 0] ** 2).mean(axis=0),
        (d[:, :, 1] ** 2).mean(axis=0),
        (d[:, :, 0] * d[:, :, 1]).mean(axis=0),
    ])
    tc = t - t.mean()
    return (c - c.mean(axis=1, keepdims=True)) @ tc / (tc @ tc) / 2.0


def estimate_diffusivity(ens: PathEnsemble, fit_window: tuple[float, float] | None = None) -> DiffusivityEstimate:
    """Half the growth rate of the displacement covariance over ``fit_window``.

    The fit is ``cov(t) ~ a + 2 D t``; the intercept absorbs the spread of
    the initial law and the transient.  Standard errors come from 10
    contiguous path batches.
    """
    if ens.n_paths < MIN_PATHS:
        raise InsufficientDataError(f"need >= {MIN_PATHS} paths, have {ens.n_paths}")
    T = float(ens.t[-1])
    t0, t1 = fit_window if fit_window is not None else (T / 2, T)
    tol = 1e-9 * max(1.0, T)
    if t0 < -tol or t1 > T + tol or t1 <= t0:
        raise InsufficientDataError(f"fit window [{t0}, {t1}] not inside [0, {T}]")
    sel = (ens.t >= t0 - tol) & (ens.t <= t1 + tol)
    if sel.sum() < MIN_WINDOW:
        raise InsufficientDataError(
            f"fit window [{t0}, {t1}] holds {sel.sum()} checkpoints, need {MIN_WINDOW}"
        )
    t = ens.t[sel]
    pos = ens.pos[:, sel, :]
    full = _cov_slopes(pos, t)
    batches = np.array([_cov_slopes(b, t) for b in np.array_split(pos, N_BATCHES, axis=0)])
    se = batches.std(axis=0, ddof=1) / math.sqrt(N_BATCHES)
    return DiffusivityEstimate(
        max(0.0, float(full[0])), max(0.0, float(full[1])), float(full[2]),
        (float(t[0]), float(t[-1])), float(se[0]), float(se[1]), float(se[2]), ens.n_paths,
    )


@dataclass(frozen=True)
class SweepResult:
    eps: float
    kappa: float
    nu: tuple[float, ...]
    estimates: tuple[DiffusivityEstimate, ...]
    fit: PowerFit
    fit_excess: PowerFit | None

    @property
    def exponent(self) -> float:
        """p in D_xx ~ nu^(-p)."""
        return -self.fit.slope

    def csv(self) -> str:
        rows = [(n, e.D_xx, e.se_xx, n * n * e.D_xx) for n, e in zip(self.nu, self.estimates)]
        return csv_text(["nu", "D_xx", "se_xx", "nu2_D_xx"], rows)

    def to_dict(self) -> dict:
        d = {
            "eps": self.eps, "kappa": self.kappa, "nu": list(self.nu),
            "D_xx": [e.D_xx for e in self.estimates],
            "se_xx": [e.se_xx for e in self.estimates],
            "slope": self.fit.slope, "slope_se": self.fit.slope_se, "exponent": self.exponent,
        }
        if self.fit_excess is not None:
            d["slope_excess"] = self.fit_excess.slope
        return d


def diffusivity_sweep(nus, eps: float = 0.0, kappa: float = 1.0, n_paths: int = 5000,
                      T: float = 50.0, dt: float | None = None, seed: int = 0,
                      threads: int = 1, backend: str | None = None) -> SweepResult:
    """D_xx of the cellular flow across nu and its log-log slope.

    ``fit_excess`` fits D_xx - kappa instead, which isolates the flow-induced
    part when the bare diffusion is not negligible.
    """
    est = []
    for nu in nus:
        spec = SdeSpec("stream", nu, kappa, DT_CAP, T, n_paths, seed, eps=eps)
        step = dt if dt is not None else spec.max_dt()
        step = T / math.ceil(T / step)
        spec = replace(spec, dt=step)
        est.append(estimate_diffusivity(simulate(spec, threads, backend)))
    nus = tuple(float(n) for n in nus)
    fit = loglog_fit(nus, [e.D_xx for e in est])
    excess = [e.D_xx - kappa for e in est]
    fit_ex = loglog_fit(nus, excess) if all(x > 0 for x in excess) else None
    return SweepResult(eps, kappa, nus, tuple(est), fit, fit_ex)


def conjecture_probe(eps_grid, nu_grid, kappa: float = 1.0, **kw) -> list[SweepResult]:
    """Fit p(eps) in D_xx ~ nu^(-p) for each eps; exploratory, no assertion."""
    for e in eps_grid:
        if not 0.0 <= e <= 1.0:
            raise ConfigError(f"eps grid entries must lie in [0, 1], got {e}")
    for n in nu_grid:
        if not 0.0 < n < 1.0:
            raise ConfigError(f"nu grid entries must lie in (0, 1), got {n}")
    return [diffusivity_sweep(nu_grid, eps=e, kappa=kappa, **kw) for e in eps_grid]


def conjecture_csv(results: list[SweepResult]) -> str:
    rows = [(r.eps, r.exponent, r.fit.slope_se, r.fit.r2) for r in results]
    return csv_text(["eps", "exponent", "slope_se", "r2"], rows)
