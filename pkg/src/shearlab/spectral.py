"""Fourier helpers on the uniform periodic grid y_j = 2*pi*j/N."""

import numpy as np

TWO_PI = 2.0 * np.pi


def grid(n: int) -> np.ndarray:
    return TWO_PI * np.arange(n) / n


def wavenumbers(n: int) -> np.ndarray:
    """Integer wavenumbers in FFT order with the Nyquist mode zeroed."""
    k = np.fft.fftfreq(n, 1.0 / n)
    if n % 2 == 0:
        k[n // 2] = 0.0
    return k


def differentiate(f: np.ndarray, order: int = 1) -> np.ndarray:
    """Spectral derivative of a periodic grid function (real or complex)."""
    n = f.shape[-1]
    fh = np.fft.fft(f, axis=-1) * (1j * wavenumbers(n)) ** order
    out = np.fft.ifft(fh, axis=-1)
    return out.real if np.isrealobj(f) else out


def antiderivative(f: np.ndarray) -> tuple[np.ndarray, float]:
    """Return (F, mean) with F(y) = int_0^y (f - mean) and F(0) = 0.

    The mean of f is removed before integration so that F is periodic; the
    caller decides whether a nonzero mean is acceptable.
    """
    n = f.shape[-1]
    fh = np.fft.fft(f)
    mean = fh[0] / n
    k = wavenumbers(n)
    safe = np.where(k == 0, 1.0, k)
    gh = np.where(k == 0, 0.0, fh / (1j * safe))
    g = np.fft.ifft(gh)
    g = g - g[0]
    if np.isrealobj(f):
        return g.real, float(mean.real)
    return g, mean


def resample(f: np.ndarray, n: int) -> np.ndarray:
    """Trigonometric interpolation of a band-limited grid function onto n nodes.

    Modes with |k| >= min(m, n)/2 are dropped, so the map is exact only for
    functions band-limited below both Nyquist limits.
    """
    m = f.shape[-1]
    if m == n:
        return np.array(f, copy=True)
    fh = np.fft.fft(f) / m
    k = np.fft.fftfreq(m, 1.0 / m).astype(int)
    keep = np.abs(k) < min(m, n) / 2
    out = np.zeros(n, dtype=complex)
    out[k[keep] % n] = fh[keep]
    g = np.fft.ifft(out) * n
    return g.real if np.isrealobj(f) else g


def diff_matrix(n: int) -> np.ndarray:
    """Dense first-derivative Fourier collocation matrix (skew-symmetric)."""
    eye = np.eye(n)
    d = np.fft.ifft(1j * wavenumbers(n)[:, None] * np.fft.fft(eye, axis=0), axis=0).real
    return 0.5 * (d - d.T)
