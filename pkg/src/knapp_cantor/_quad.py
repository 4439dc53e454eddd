"""Small numerical helpers shared by the transform and geometry code."""

from __future__ import annotations

from functools import lru_cache

import numpy as np


@lru_cache(maxsize=64)
def _leggauss(n: int):
    x, w = np.polynomial.legendre.leggauss(n)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def gauss_legendre(lo, hi, n: int):
    """Nodes and weights of an n-point rule on each [lo_i, hi_i].

    ``lo`` and ``hi`` broadcast; the node axis is appended last.
    """
    x, w = _leggauss(int(n))
    lo = np.asarray(lo, dtype=float)[..., None]
    hi = np.asarray(hi, dtype=float)[..., None]
    half = 0.5 * (hi - lo)
    return 0.5 * (hi + lo) + half * x, half * w


def _f(t):
    with np.errstate(divide="ignore", over="ignore"):
        return np.where(t > 0, np.exp(-1.0 / np.where(t > 0, t, 1.0)), 0.0)


def smooth_step(t):
    """C-infinity transition: 0 for t <= 0, 1 for t >= 1."""
    t = np.asarray(t, dtype=float)
    a, b = _f(t), _f(1.0 - t)
    return a / (a + b)


def plateau(u, core: float, outer: float):
    """Even C-infinity plateau: 1 on |u| <= core, 0 on |u| >= outer."""
    u = np.abs(np.asarray(u, dtype=float))
    return smooth_step((outer - u) / (outer - core))
