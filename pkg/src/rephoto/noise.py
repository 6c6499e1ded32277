"""Seeded 3D gradient noise (improved-Perlin style) used for model degradation.

Deterministic for a given (seed, point); continuous; exactly zero at the
integer lattice points of the gradient grid; values stay within [-1, 1].
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

# the 12 edge-direction gradients of the improved noise formulation,
# extended to 16 entries so the hash can use a power-of-two modulus
_GRAD = np.array([
    [1, 1, 0], [-1, 1, 0], [1, -1, 0], [-1, -1, 0],
    [1, 0, 1], [-1, 0, 1], [1, 0, -1], [-1, 0, -1],
    [0, 1, 1], [0, -1, 1], [0, 1, -1], [0, -1, -1],
    [1, 1, 0], [-1, 1, 0], [0, -1, 1], [0, -1, -1],
], dtype=np.float64)


@lru_cache(maxsize=32)
def _permutation(seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    p = rng.permutation(256)
    return np.concatenate([p, p]).astype(np.int64)


def _fade(t):
    return t * t * t * (t * (t * 6.0 - 15.0) + 10.0)


def noise3(seed: int, points) -> np.ndarray | float:
    """Evaluate seeded gradient noise at one point or an (N, 3) array of points."""
    p = np.asarray(points, dtype=np.float64)
    scalar = p.ndim == 1
    p = np.atleast_2d(p)
    perm = _permutation(seed)

    pi = np.floor(p).astype(np.int64)
    pf = p - pi
    pi &= 255

    u = _fade(pf[:, 0])
    v = _fade(pf[:, 1])
    w = _fade(pf[:, 2])

    def grad_dot(ox, oy, oz):
        h = perm[perm[perm[pi[:, 0] + ox] + pi[:, 1] + oy] + pi[:, 2] + oz] & 15
        g = _GRAD[h]
        d = pf - (ox, oy, oz)
        return (g * d).sum(axis=1)

    def lerp(a, b, t):
        return a + t * (b - a)

    x00 = lerp(grad_dot(0, 0, 0), grad_dot(1, 0, 0), u)
    x10 = lerp(grad_dot(0, 1, 0), grad_dot(1, 1, 0), u)
    x01 = lerp(grad_dot(0, 0, 1), grad_dot(1, 0, 1), u)
    x11 = lerp(grad_dot(0, 1, 1), grad_dot(1, 1, 1), u)
    y0 = lerp(x00, x10, v)
    y1 = lerp(x01, x11, v)
    out = lerp(y0, y1, w)
    return float(out[0]) if scalar else out
