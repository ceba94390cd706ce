"""Periodic profiles, the potential built from v, and the Gibbs measure.

A :class:`Profile1D` is a band-limited Fourier series on the torus
``[0, 2*pi)``::

    p(y) = const + sum_n a_n cos(n y) + b_n sin(n y)

Keeping profiles band-limited makes differentiation, antidifferentiation
and grid quadrature exact up to rounding, which is what every oracle in
the test-suite leans on.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import spectral
from .errors import AdmissibilityError, ConfigError, DimensionError

MEAN_TOL = 1e-10


@dataclass(frozen=True)
class Profile1D:
    const: float = 0.0
    modes: tuple[tuple[int, float, float], ...] = ()
    grid_size: int = 256

    def __post_init__(self):
        merged: dict[int, list[float]] = {}
        const = float(self.const)
        for n, a, b in self.modes:
            n = int(n)
            if n < 0:
                raise ValueError(f"negative wavenumber {n}")
            if n == 0:
                const += float(a)
                continue
            acc = merged.setdefault(n, [0.0, 0.0])
            acc[0] += float(a)
            acc[1] += float(b)
        modes = tuple(
            (n, ab[0], ab[1]) for n, ab in sorted(merged.items()) if ab[0] != 0.0 or ab[1] != 0.0
        )
        object.__setattr__(self, "const", const)
        object.__setattr__(self, "modes", modes)
        if self.grid_size < 1 or self.grid_size & (self.grid_size - 1):
            raise ValueError(f"grid_size must be a power of two, got {self.grid_size}")

    # construction helpers
    @classmethod
    def zero(cls, grid_size: int = 256) -> Profile1D:
        return cls(0.0, (), grid_size)

    @classmethod
    def cos(cls, n: int, amp: float = 1.0, grid_size: int = 256) -> Profile1D:
        return cls(0.0, ((n, amp, 0.0),), grid_size)

    @classmethod
    def sin(cls, n: int, amp: float = 1.0, grid_size: int = 256) -> Profile1D:
        return cls(0.0, ((n, 0.0, amp),), grid_size)

    @classmethod
    def from_samples(cls, values: np.ndarray, tol: float = 1e-14) -> Profile1D:
        """Recover Fourier coefficients from samples on the uniform grid.

        Only modes strictly below the Nyquist wavenumber are kept; coefficients
        with magnitude below ``tol`` are dropped.
        """
        values = np.asarray(values, dtype=float)
        n = values.size
        fh = np.fft.rfft(values) / n
        modes = []
        for m in range(1, (n + 1) // 2):
            a, b = 2.0 * fh[m].real, -2.0 * fh[m].imag
            if abs(a) > tol or abs(b) > tol:
                modes.append((m, a, b))
        return cls(float(fh[0].real), tuple(modes), n)

    @property
    def mean(self) -> float:
        return self.const

    @property
    def bandwidth(self) -> int:
        return max((n for n, _, _ in self.modes), default=0)

    def __call__(self, y):
        y = np.asarray(y, dtype=float)
        out = np.full(y.shape, self.const)
        for n, a, b in self.modes:
            out = out + a * np.cos(n * y) + b * np.sin(n * y)
        return out

    def grid(self, n: int | None = None) -> np.ndarray:
        return spectral.grid(n or self.grid_size)

    def sample(self, n: int | None = None) -> np.ndarray:
        return self(self.grid(n))

    def with_grid(self, n: int) -> Profile1D:
        return Profile1D(self.const, self.modes, n)

    def derivative(self) -> Profile1D:
        return Profile1D(
            0.0, tuple((n, n * b, -n * a) for n, a, b in self.modes), self.grid_size
        )

    def antiderivative(self) -> Profile1D:
        """Antiderivative vanishing at y = 0; requires a zero-mean profile."""
        if abs(self.const) > MEAN_TOL:
            raise AdmissibilityError("zero-mean condition", self.const)
        modes = tuple((n, -b / n, a / n) for n, a, b in self.modes)
        const = sum(b / n for n, _, b in self.modes)
        return Profile1D(const, modes, self.grid_size)

    def shift(self, s: float) -> Profile1D:
        """Translate: returns q with q(y) = p(y + s)."""
        modes = []
        for n, a, b in self.modes:
            c, d = np.cos(n * s), np.sin(n * s)
            modes.append((n, a * c + b * d, b * c - a * d))
        return Profile1D(self.const, tuple(modes), self.grid_size)

    def scale(self, c: float) -> Profile1D:
        return Profile1D(c * self.const, tuple((n, c * a, c * b) for n, a, b in self.modes), self.grid_size)

    def __add__(self, other: Profile1D) -> Profile1D:
        return Profile1D(self.const + other.const, self.modes + other.modes,
                         max(self.grid_size, other.grid_size))

    def __neg__(self) -> Profile1D:
        return self.scale(-1.0)

    def __sub__(self, other: Profile1D) -> Profile1D:
        return self + (-other)

    def max_abs(self, n: int = 4096) -> float:
        n = max(n, 8 * self.bandwidth + 8)
        return float(np.max(np.abs(self.sample(n)))) if self.modes else abs(self.const)

    def is_zero(self) -> bool:
        return not self.modes and self.const == 0.0

    # serialization
    def to_text(self) -> str:
        lines = [f"{n} {a!r} {b!r}" for n, a, b in self.modes]
        lines.append(f"const {self.const!r}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str, grid_size: int = 256, name: str = "profile") -> Profile1D:
        """Parse ``n cos_coeff sin_coeff`` lines plus an optional ``const c`` line.

        Blank lines and ``#`` comments are ignored.
        """
        const = 0.0
        modes = []
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            try:
                if parts[0] == "const":
                    if len(parts) != 2:
                        raise ValueError("expected 'const <value>'")
                    const += float(parts[1])
                else:
                    if len(parts) != 3:
                        raise ValueError("expected 'n cos_coeff sin_coeff'")
                    n = int(parts[0])
                    if n < 0:
                        raise ValueError("wavenumber must be >= 0")
                    modes.append((n, float(parts[1]), float(parts[2])))
            except ValueError as exc:
                raise ConfigError(f"{name}: line {lineno}: {exc}: {raw.strip()!r}") from None
        return cls(const, tuple(modes), grid_size)

    def to_dict(self) -> dict:
        return {"const": self.const, "modes": [list(m) for m in self.modes]}

    @classmethod
    def from_dict(cls, d: dict, grid_size: int = 256, name: str = "profile") -> Profile1D:
        try:
            modes = tuple((int(m[0]), float(m[1]), float(m[2])) for m in d.get("modes", []))
            return cls(float(d.get("const", 0.0)), modes, grid_size)
        except (TypeError, ValueError, IndexError) as exc:
            raise ConfigError(f"{name}: malformed profile ({exc})") from None


def parse_profile(spec, grid_size: int = 256, name: str = "profile") -> Profile1D:
    """Accept a Profile1D, a text block, or a ``{"const", "modes"}`` mapping."""
    if isinstance(spec, Profile1D):
        return spec.with_grid(grid_size)
    if isinstance(spec, str):
        return Profile1D.from_text(spec, grid_size, name)
    if isinstance(spec, dict):
        return Profile1D.from_dict(spec, grid_size, name)
    if spec is None:
        return Profile1D.zero(grid_size)
    raise ConfigError(f"{name}: expected text block or mapping, got {type(spec).__name__}")


def build_potential(v: Profile1D) -> Profile1D:
    """V(y) = -int_0^y v, which is periodic only when v has zero mean."""
    if abs(v.mean) > MEAN_TOL:
        raise AdmissibilityError("zero-mean condition on v", v.mean)
    return -v.antiderivative()


class WeightedNorm:
    """Inner product and norm of L^2(mu) on grid functions."""

    def __init__(self, weights: np.ndarray):
        self.weights = weights

    def _check(self, f):
        if np.shape(f)[-1] != self.weights.size:
            raise DimensionError(
                f"grid function has {np.shape(f)[-1]} nodes, model grid has {self.weights.size}"
            )

    def inner(self, f, g) -> float:
        self._check(f)
        self._check(g)
        return float(np.real(np.sum(f * np.conj(g) * self.weights, axis=-1)))

    def norm2(self, f) -> float:
        self._check(f)
        return float(np.sum(np.abs(f) ** 2 * self.weights, axis=-1))

    def norm(self, f) -> float:
        return float(np.sqrt(self.norm2(f)))

    def mean(self, f):
        self._check(f)
        return np.sum(f * self.weights, axis=-1)


@dataclass(frozen=True)
class ShearModel:
    """The shear pair (u, v) with potential, partition constant and Gibbs weights.

    ``mu`` holds the probability weights e^{-V(y_j)} / sum_i e^{-V(y_i)} of the
    uniform collocation grid; ``Z1`` is the Lebesgue integral of e^{-V} over
    one period.
    """

    u: Profile1D
    v: Profile1D
    V: Profile1D
    grid_size: int
    Z1: float
    mu: np.ndarray = field(repr=False)
    centering: float = 0.0
    admissible: bool = True

    @property
    def y(self) -> np.ndarray:
        return spectral.grid(self.grid_size)

    @property
    def norm(self) -> WeightedNorm:
        return WeightedNorm(self.mu)

    def sample(self, p: Profile1D) -> np.ndarray:
        return p.sample(self.grid_size)

    def resampled(self, n: int) -> ShearModel:
        if n == self.grid_size:
            return self
        return build_model(self.u, self.v, n)

    def require_admissible(self):
        if not self.admissible:
            raise AdmissibilityError("centering condition on u", self.centering)

    def to_json(self) -> str:
        return json.dumps(
            {
                "u": self.u.to_dict(),
                "v": self.v.to_dict(),
                "V": self.V.to_dict(),
                "grid_size": self.grid_size,
                "Z1": self.Z1,
                "centering": self.centering,
                "admissible": self.admissible,
            },
            indent=2,
        )

    @classmethod
    def from_json(cls, text: str) -> ShearModel:
        d = json.loads(text)
        n = int(d["grid_size"])
        return build_model(Profile1D.from_dict(d["u"]), Profile1D.from_dict(d["v"]), n)


def build_model(u: Profile1D, v: Profile1D, grid_size: int = 256) -> ShearModel:
    if grid_size < 32 or grid_size & (grid_size - 1):
        raise DimensionError(f"grid_size must be a power of two >= 32, got {grid_size}")
    u = u.with_grid(grid_size)
    v = v.with_grid(grid_size)
    V = build_potential(v)
    y = spectral.grid(grid_size)
    w = np.exp(-V(y))
    Z1 = float(2.0 * np.pi * w.mean())
    mu = w / w.sum()
    mu.flags.writeable = False
    centering = float(np.sum(u(y) * mu))
    return ShearModel(u, v, V, grid_size, Z1, mu, centering, abs(centering) <= MEAN_TOL)


def weighted_inner(f, g, model: ShearModel) -> float:
    """sum_j f_j conj(g_j) mu_j (real part), the discrete L^2(mu) pairing."""
    return model.norm.inner(f, g)
