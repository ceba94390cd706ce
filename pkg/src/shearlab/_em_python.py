"""Numpy Euler-Maruyama kernel, the fallback when the extension is absent.

Vectorised over paths; noise is drawn in blocks of steps from the same
Philox streams as the compiled kernel.
"""

import numpy as np

from .rng import normals

TWO_PI = 2.0 * np.pi
BLOCK = 64


def _series(m: np.ndarray, y: np.ndarray) -> np.ndarray:
    acc = np.zeros_like(y)
    for n, a, b in m:
        if a != 0.0:
            acc = acc + a * np.cos(n * y)
        if b != 0.0:
            acc = acc + b * np.sin(n * y)
    return acc


def run_paths(x0, y0, path_ids, seed, n_steps, stride, dt, nu, sx, sy, um, vm, pm, qm):
    x = np.array(x0, dtype=float)
    y = np.array(y0, dtype=float)
    path_ids = np.asarray(path_ids, dtype=np.uint64)
    n_ckpt = n_steps // stride + 1
    out = np.empty((x.size, n_ckpt, 2))
    out[:, 0, 0] = x
    out[:, 0, 1] = y
    sqdt = np.sqrt(dt)
    nx = sx * sqdt
    ny = sy * sqdt
    for start in range(0, n_steps, BLOCK):
        steps = np.arange(start, min(start + BLOCK, n_steps), dtype=np.uint64)
        z1, z2 = normals(steps[:, None], path_ids[None, :], seed)
        for j, s in enumerate(range(start, start + steps.size)):
            xr = x - TWO_PI * np.floor(x / TWO_PI)
            yr = y - TWO_PI * np.floor(y / TWO_PI)
            bx = _series(um, yr) / nu + _series(pm, xr)
            by = _series(qm, xr) / nu + _series(vm, yr)
            x = x + bx * dt + nx * z1[j]
            y = y + by * dt + ny * z2[j]
            if (s + 1) % stride == 0:
                out[:, (s + 1) // stride, 0] = x
                out[:, (s + 1) // stride, 1] = y
    return out
