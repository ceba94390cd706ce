# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled Euler-Maruyama kernel with an inline Philox4x32-10 generator.

Mirrors ``shearlab._em_python`` operation for operation; results agree with
the numpy kernel up to libm rounding differences in exp/log/cos/sin.
"""

from libc.math cimport cos, sin, sqrt, log, floor
from libc.stdint cimport uint32_t, uint64_t

import numpy as np

cdef double TWO_PI = 6.283185307179586
cdef double INV_2_53 = 1.0 / 9007199254740992.0


cdef inline void _philox(uint32_t* c, uint32_t k0, uint32_t k1) noexcept nogil:
    cdef uint64_t p0, p1
    cdef uint32_t t0, t1, t2, t3
    cdef int r
    for r in range(10):
        p0 = <uint64_t>c[0] * <uint64_t>3528531795U
        p1 = <uint64_t>c[2] * <uint64_t>3449720151U
        t0 = (<uint32_t>(p1 >> 32)) ^ c[1] ^ k0
        t1 = <uint32_t>p1
        t2 = (<uint32_t>(p0 >> 32)) ^ c[3] ^ k1
        t3 = <uint32_t>p0
        c[0] = t0
        c[1] = t1
        c[2] = t2
        c[3] = t3
        k0 = k0 + <uint32_t>2654435769U
        k1 = k1 + <uint32_t>3144134277U


cdef inline void _normals(uint64_t step, uint64_t path, uint32_t k0, uint32_t k1,
                          double* z1, double* z2) noexcept nogil:
    cdef uint32_t c[4]
    cdef uint64_t a, b
    cdef double u1, u2, r, theta
    c[0] = <uint32_t>step
    c[1] = <uint32_t>(step >> 32)
    c[2] = <uint32_t>path
    c[3] = <uint32_t>(path >> 32)
    _philox(c, k0, k1)
    a = ((<uint64_t>c[1]) << 32) | c[0]
    b = ((<uint64_t>c[3]) << 32) | c[2]
    u1 = (<double>(a >> 11) + 1.0) * INV_2_53
    u2 = (<double>(b >> 11)) * INV_2_53
    r = sqrt(-2.0 * log(u1))
    theta = TWO_PI * u2
    z1[0] = r * cos(theta)
    z2[0] = r * sin(theta)


cdef inline double _series(const double[:, ::1] m, double y) noexcept nogil:
    cdef Py_ssize_t i
    cdef double acc = 0.0
    cdef double n, a, b
    for i in range(m.shape[0]):
        n = m[i, 0]
        a = m[i, 1]
        b = m[i, 2]
        if a != 0.0:
            acc = acc + a * cos(n * y)
        if b != 0.0:
            acc = acc + b * sin(n * y)
    return acc


def philox_block(uint32_t c0, uint32_t c1, uint32_t c2, uint32_t c3,
                 uint32_t k0, uint32_t k1):
    """Raw Philox4x32-10 block, exposed for known-answer tests."""
    cdef uint32_t c[4]
    c[0] = c0
    c[1] = c1
    c[2] = c2
    c[3] = c3
    _philox(c, k0, k1)
    return (c[0], c[1], c[2], c[3])


def normal_pair(uint64_t step, uint64_t path, uint64_t seed):
    cdef double z1, z2
    _normals(step, path, <uint32_t>seed, <uint32_t>(seed >> 32), &z1, &z2)
    return z1, z2


def run_paths(double[::1] x0, double[::1] y0, uint64_t[::1] path_ids, uint64_t seed,
              Py_ssize_t n_steps, Py_ssize_t stride, double dt, double nu,
              double sx, double sy,
              const double[:, ::1] um, const double[:, ::1] vm,
              const double[:, ::1] pm, const double[:, ::1] qm):
    """Integrate paths and return positions at every ``stride``-th step.

    Drift: dX = (u(Y)/nu + p(X)) dt + sx dW1, dY = (q(X)/nu + v(Y)) dt + sy dW2.
    """
    cdef Py_ssize_t n = path_ids.shape[0]
    cdef Py_ssize_t n_ckpt = n_steps // stride + 1
    out = np.empty((n, n_ckpt, 2), dtype=np.float64)
    cdef double[:, :, ::1] o = out
    cdef uint32_t k0 = <uint32_t>seed
    cdef uint32_t k1 = <uint32_t>(seed >> 32)
    cdef double sqdt = sqrt(dt)
    cdef double nx = sx * sqdt
    cdef double ny = sy * sqdt
    cdef Py_ssize_t i, s
    cdef double x, y, xr, yr, bx, by, z1, z2
    cdef uint64_t pid
    with nogil:
        for i in range(n):
            x = x0[i]
            y = y0[i]
            pid = path_ids[i]
            o[i, 0, 0] = x
            o[i, 0, 1] = y
            for s in range(n_steps):
                _normals(<uint64_t>s, pid, k0, k1, &z1, &z2)
                xr = x - TWO_PI * floor(x / TWO_PI)
                yr = y - TWO_PI * floor(y / TWO_PI)
                bx = _series(um, yr) / nu + _series(pm, xr)
                by = _series(qm, xr) / nu + _series(vm, yr)
                x = x + bx * dt + nx * z1
                y = y + by * dt + ny * z2
                if (s + 1) % stride == 0:
                    o[i, (s + 1) // stride, 0] = x
                    o[i, (s + 1) // stride, 1] = y
    return out
