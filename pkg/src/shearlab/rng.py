"""Philox4x32-10 counter-based generator, vectorised with numpy.

Every random number used by the SDE engine is a pure function of
``(seed, path index, step index)``:

    words = philox4x32(counter=(step_lo, step_hi, path_lo, path_hi),
                       key=(seed_lo, seed_hi))

so an ensemble is bit-reproducible no matter how paths are distributed
across workers.  The compiled kernel implements the same block function.
"""

import numpy as np

M0 = np.uint64(0xD2511F53)
M1 = np.uint64(0xCD9E8D57)
W0 = 0x9E3779B9
W1 = 0xBB67AE85
MASK32 = np.uint64(0xFFFFFFFF)
SHIFT32 = np.uint64(32)
ROUNDS = 10

# step counter reserved for initial-condition draws
INIT_STEP = 0xFFFFFFFFFFFFFFFF

TWO_PI = 2.0 * np.pi
INV_2_53 = 1.0 / 9007199254740992.0


def split_seed(seed: int) -> tuple[int, int]:
    seed = int(seed)
    if not 0 <= seed < 2**64:
        raise ValueError(f"seed must be an unsigned 64-bit integer, got {seed}")
    return seed & 0xFFFFFFFF, seed >> 32


def philox4x32(c0, c1, c2, c3, k0: int, k1: int):
    """Apply the 10-round Philox4x32 bijection to broadcastable counter words."""
    c0, c1, c2, c3 = (np.asarray(c, dtype=np.uint64) & MASK32 for c in (c0, c1, c2, c3))
    c0, c1, c2, c3 = np.broadcast_arrays(c0, c1, c2, c3)
    for r in range(ROUNDS):
        ka = np.uint64((k0 + r * W0) & 0xFFFFFFFF)
        kb = np.uint64((k1 + r * W1) & 0xFFFFFFFF)
        p0 = c0 * M0
        p1 = c2 * M1
        c0, c1, c2, c3 = (
            (p1 >> SHIFT32) ^ c1 ^ ka,
            p1 & MASK32,
            (p0 >> SHIFT32) ^ c3 ^ kb,
            p0 & MASK32,
        )
    return c0, c1, c2, c3


def counter_words(step, path):
    step = np.asarray(step, dtype=np.uint64)
    path = np.asarray(path, dtype=np.uint64)
    return step & MASK32, step >> SHIFT32, path & MASK32, path >> SHIFT32


def uniforms(step, path, seed: int):
    """Two 53-bit uniforms per (step, path): the first in (0, 1], the second in [0, 1)."""
    k0, k1 = split_seed(seed)
    r0, r1, r2, r3 = philox4x32(*counter_words(step, path), k0, k1)
    a = (r1 << SHIFT32) | r0
    b = (r3 << SHIFT32) | r2
    u1 = ((a >> np.uint64(11)).astype(np.float64) + 1.0) * INV_2_53
    u2 = (b >> np.uint64(11)).astype(np.float64) * INV_2_53
    return u1, u2


def normals(step, path, seed: int):
    """Two independent standard normals per (step, path) by Box-Muller."""
    u1, u2 = uniforms(step, path, seed)
    r = np.sqrt(-2.0 * np.log(u1))
    theta = TWO_PI * u2
    return r * np.cos(theta), r * np.sin(theta)
