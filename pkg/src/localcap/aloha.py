"""Slotted ALOHA: transmitters form a homogeneous Poisson process.

The total power ``W`` received at a point from a Poisson field of intensity
``lam`` has Laplace transform ``exp(-lam * C * s**gamma)`` with
``gamma = 2 / alpha`` and ``C = pi * Gamma(1 - gamma)``. Everything here is
derived from that transform.
"""

from __future__ import annotations

import cmath
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .exceptions import SeriesDiverging


@dataclass(frozen=True)
class AlohaParams:
    lam: float
    alpha: float

    def __post_init__(self):
        if not self.lam >= 0:
            raise ValueError(f"lambda must be >= 0, got {self.lam}")
        if not self.alpha > 2:
            raise ValueError(f"alpha must be > 2, got {self.alpha}")

    @property
    def gamma(self) -> float:
        return 2.0 / self.alpha

    @property
    def C(self) -> float:
        return math.pi * math.gamma(1.0 - self.gamma)


def laplace_w(s: float, params: AlohaParams) -> float:
    if not s >= 0:
        raise ValueError("the transform variable must be >= 0")
    return math.exp(-params.lam * params.C * s ** params.gamma)


def w_cdf(x: float, params: AlohaParams, tol: float = 1e-14, n_max: int = 2000,
          max_term: float = 1e4) -> float:
    """P(W < x) from the alternating series in ``x**-gamma``.

    For gamma < 1 the series converges for every x, but at small x its terms
    grow to huge sizes before decaying and the sum drowns in rounding error
    (about 3e-14 times the largest term). :class:`SeriesDiverging` is raised
    once a term exceeds ``max_term``, or if ``n_max`` terms were not enough.
    """
    if not x > 0:
        raise ValueError("x must be > 0")
    g = params.gamma
    cl = params.C * params.lam
    if cl == 0 or math.isinf(x):
        return 1.0
    log_base = math.log(cl) - g * math.log(x)
    log_cap = math.log(max_term * math.pi)
    total = 1.0
    for n in range(1, n_max + 1):
        # magnitude envelope without the sine factor, which may vanish
        log_env = n * log_base - math.lgamma(n + 1.0) + math.lgamma(n * g)
        if log_env > log_cap:
            raise SeriesDiverging(f"series terms exceed {max_term:g} at x={x!r}")
        env = math.exp(log_env) / math.pi
        if env < tol and n * g > 1.0:
            break
        total += (-1.0) ** n * math.sin(math.pi * n * g) * env
    else:
        raise SeriesDiverging(f"series not converged after {n_max} terms at x={x!r}")
    return min(1.0, max(0.0, total))


def w_cdf_inverted(x: float, params: AlohaParams) -> float:
    """P(W < x) by direct numerical Laplace inversion.

    The inversion line passes through the real saddle point of
    ``s x - lam C s**gamma``, which keeps the integrand free of cancellation
    where the CDF is tiny. Meant for the small ``x`` where :func:`w_cdf`
    diverges; accuracy drops for very large ``x``.
    """
    if not x > 0:
        raise ValueError("x must be > 0")
    a = params.lam * params.C
    if a == 0:
        return 1.0
    g = params.gamma
    c = (a * g / x) ** (1.0 / (1.0 - g))
    base = c * x - a * c ** g

    def f(t):
        s = complex(c, t)
        return (cmath.exp(s * x - a * s ** g - base) / s).real

    # |L(c + it)| falls like exp(-a t**g cos(pi g / 2)); stop ~e-60 below the peak
    t_end = max(((60.0 + a * c ** g) / (a * math.cos(0.5 * math.pi * g))) ** (1.0 / g), 50.0 * c)
    edges = [0.0]
    e = 0.25 * c
    while e < t_end:
        edges.append(e)
        e *= 2.0
    edges.append(t_end)
    total = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        total += integrate.quad(f, lo, hi, limit=200, epsabs=0.0, epsrel=1e-12)[0]
    if total <= 0:
        return 0.0
    return min(1.0, math.exp(math.log(total / math.pi) + base))


def w_cdf_any(x: float, params: AlohaParams) -> float:
    try:
        return w_cdf(x, params)
    except SeriesDiverging:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", integrate.IntegrationWarning)
            return w_cdf_inverted(x, params)


def coverage_probability(r: float, beta: float, alpha: float, lam: float) -> float:
    """Probability that a transmitter at distance ``r`` is received."""
    if not r > 0:
        raise ValueError("r must be > 0")
    if not beta > 0:
        raise ValueError("beta must be > 0")
    x = r ** (-alpha) / beta
    if x == 0:
        return 0.0
    return w_cdf_any(x, AlohaParams(lam, alpha))


def sigma_aloha(beta: float, alpha: float) -> float:
    """``lam * sigma``: sin(pi g) / (pi g) * beta**-g with g = 2/alpha."""
    if not beta > 0:
        raise ValueError("beta must be > 0")
    if not alpha > 2:
        raise ValueError("alpha must be > 2")
    if math.isinf(alpha):
        return 1.0
    g = 2.0 / alpha
    return math.sin(math.pi * g) / (math.pi * g) * beta ** (-g)


def capacity_aloha(beta: float, alpha: float) -> float:
    return sigma_aloha(beta, alpha)


def sigma_by_quadrature(beta: float, alpha: float, p_cut: float = 1e-8) -> float:
    """``2 pi * integral of p(1, r) r dr``, cut where the coverage drops below ``p_cut``."""
    def p(r):
        return coverage_probability(r, beta, alpha, 1.0)

    r_max = 1.0
    while p(r_max) > p_cut:
        r_max *= 1.5
    val, _ = integrate.quad(lambda r: p(r) * r, 0.0, r_max, limit=200, epsabs=1e-10, epsrel=1e-8)
    # past r_max the coverage falls faster than any power of r, so the dropped
    # tail is far below p_cut * r_max**2
    return 2.0 * math.pi * val


def sample_w(lam: float, alpha: float, size: int, seed=None, n_terms: int = 1000,
             chunk: int = 4096) -> np.ndarray:
    """Draws of W at the origin of a Poisson field.

    The ``n_terms`` strongest contributions are exact (ordered distances come
    from cumulative unit exponentials); the remainder is replaced by its
    conditional mean.
    """
    if not (lam > 0 and alpha > 2):
        raise ValueError("need lam > 0 and alpha > 2")
    rng = np.random.default_rng(seed)
    out = np.empty(size)
    h = 0.5 * alpha
    pl = math.pi * lam
    for start in range(0, size, chunk):
        m = min(chunk, size - start)
        g = np.cumsum(rng.standard_exponential((m, n_terms)), axis=1)
        w = np.sum((g / pl) ** (-h), axis=1)
        w += pl ** h * g[:, -1] ** (1.0 - h) / (h - 1.0)
        out[start:start + m] = w
    return out
