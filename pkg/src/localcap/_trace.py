"""Compiled level-set tracer.

Coordinates are relative to the traced transmitter and divided by a length
scale, so the own transmitter sits at the origin. Interferers beyond the
near radius enter through a quadratic expansion of their summed power about
the origin.
"""

import numpy as np
from numba import njit

from ._kernels import ipow

OK = 0
MAX_STEPS = 1
FLAT = 2
EXTENT = 3
PROJECTION = 4
BUFFER = 5


@njit(cache=True, nogil=True)
def far_coefficients(far, halfa):
    """Value, gradient and Hessian at the origin of ``sum |z - q|**-alpha``."""
    alpha = 2.0 * halfa
    v = 0.0
    gx = 0.0
    gy = 0.0
    hxx = 0.0
    hxy = 0.0
    hyy = 0.0
    for k in range(far.shape[0]):
        qx = far[k, 0]
        qy = far[k, 1]
        r2 = qx * qx + qy * qy
        f = ipow(r2, halfa)
        a = alpha * f / r2
        v += f
        gx += a * qx
        gy += a * qy
        b = (alpha + 2.0) / r2
        hxx -= a * (1.0 - b * qx * qx)
        hxy += a * b * qx * qy
        hyy -= a * (1.0 - b * qy * qy)
    return np.array([v, gx, gy, hxx, hxy, hyy])


@njit(cache=True, nogil=True)
def log_sir(x, y, near, fc, halfa):
    """log S at (x, y) and its gradient."""
    alpha = 2.0 * halfa
    val = fc[0] + fc[1] * x + fc[2] * y + 0.5 * (fc[3] * x * x + 2.0 * fc[4] * x * y + fc[5] * y * y)
    gx = fc[1] + fc[3] * x + fc[4] * y
    gy = fc[2] + fc[4] * x + fc[5] * y
    for k in range(near.shape[0]):
        dx = x - near[k, 0]
        dy = y - near[k, 1]
        r2 = dx * dx + dy * dy
        f = ipow(r2, halfa)
        a = alpha * f / r2
        val += f
        gx -= a * dx
        gy -= a * dy
    r2 = x * x + y * y
    ls = -halfa * np.log(r2) - np.log(val)
    return ls, -alpha * x / r2 - gx / val, -alpha * y / r2 - gy / val


@njit(cache=True, nogil=True)
def _project(x, y, near, fc, halfa, target, tol):
    # Newton along the gradient onto log S = target
    for _ in range(30):
        ls, gx, gy = log_sir(x, y, near, fc, halfa)
        f = ls - target
        g2 = gx * gx + gy * gy
        if abs(f) <= tol:
            return x, y, True
        if g2 == 0.0:
            return x, y, False
        x -= f * gx / g2
        y -= f * gy / g2
    return x, y, False


@njit(cache=True, nogil=True)
def trace(near, fc, halfa, target, x0, y0, dt, max_steps, closure, min_steps,
          corrector, extent, flat, out):
    """Walk the level set from (x0, y0).

    Returns ``(status, steps, area)`` where ``area`` is the normal-flux
    sum and ``out[:steps]`` holds the vertices.
    """
    x = x0
    y = y0
    area = 0.0
    wind = 0.0
    prev = np.arctan2(y0, x0)
    ext2 = extent * extent
    for k in range(max_steps):
        if k >= out.shape[0]:
            return BUFFER, k, area
        out[k, 0] = x
        out[k, 1] = y
        ls, gx, gy = log_sir(x, y, near, fc, halfa)
        # |grad S| = S |grad log S|
        gn = np.sqrt(gx * gx + gy * gy)
        if np.exp(ls) * gn < flat:
            return FLAT, k, area
        nx = gx / gn
        ny = gy / gn
        area -= 0.5 * (x * nx + y * ny) * dt
        # clockwise quarter turn of the inward normal
        x += ny * dt
        y -= nx * dt
        if corrector:
            x, y, ok = _project(x, y, near, fc, halfa, target, 1e-12)
            if not ok:
                return PROJECTION, k + 1, area
        if x * x + y * y > ext2:
            return EXTENT, k + 1, area
        if not corrector:
            ang = np.arctan2(y, x)
            d = ang - prev
            if d > np.pi:
                d -= 2.0 * np.pi
            elif d < -np.pi:
                d += 2.0 * np.pi
            wind += d
            prev = ang
        if k + 1 >= min_steps:
            if corrector:
                if (x - x0) ** 2 + (y - y0) ** 2 < closure * closure:
                    return OK, k + 1, area
            elif abs(wind) >= 2.0 * np.pi:
                return OK, k + 1, area
    return MAX_STEPS, max_steps, area
