"""Planar domain types and the SIR / interference fields.

All powers assume unit transmit power and zero background noise, so every
quantity here is dimensionless apart from distances, which are in meters.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from .exceptions import CoincidentPoint

#: Guard radius (m) below which a probe is treated as sitting on a transmitter.
COINCIDENCE_RADIUS = 1e-9

#: SIR returned when there is no interferer at all (zero noise).
SIR_INFINITE = math.inf


@dataclass(frozen=True)
class Point2D:
    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f"non-finite coordinates ({self.x}, {self.y})")

    def __array__(self, dtype=None, copy=None):
        return np.array([self.x, self.y], dtype=dtype or float)

    def __iter__(self):
        yield self.x
        yield self.y


PointLike = Union[Point2D, "np.ndarray", tuple, list]


def as_xy(z: PointLike) -> np.ndarray:
    """Return ``z`` as a float array of shape (2,)."""
    arr = np.asarray(z, dtype=float).reshape(-1)
    if arr.shape != (2,):
        raise ValueError(f"expected a planar point, got shape {arr.shape}")
    return arr


@dataclass(frozen=True)
class ChannelParams:
    """Path-loss channel: linear SIR threshold ``beta`` and exponent ``alpha``."""

    beta: float
    alpha: float
    noise: float = 0.0

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError(f"beta must be > 0, got {self.beta}")
        if not self.alpha > 2:
            raise ValueError(f"alpha must be > 2, got {self.alpha}")
        if self.noise != 0:
            raise ValueError("only the noise-free channel is supported")

    @classmethod
    def from_db(cls, beta_db: float, alpha: float) -> "ChannelParams":
        return cls(beta=10.0 ** (beta_db / 10.0), alpha=alpha)


@dataclass(frozen=True)
class Region:
    """Axis-aligned rectangle centred at the origin."""

    half_width: float
    half_height: float

    def __post_init__(self):
        if not (self.half_width > 0 and self.half_height > 0):
            raise ValueError("region half sizes must be strictly positive")

    @classmethod
    def square(cls, side: float) -> "Region":
        return cls(side / 2.0, side / 2.0)

    @property
    def area(self) -> float:
        return 4.0 * self.half_width * self.half_height

    @property
    def width(self) -> float:
        return 2.0 * self.half_width

    @property
    def height(self) -> float:
        return 2.0 * self.half_height

    def contains(self, pts) -> np.ndarray:
        """Half-open membership test, ``-h <= x < h``."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        return (
            (pts[:, 0] >= -self.half_width)
            & (pts[:, 0] < self.half_width)
            & (pts[:, 1] >= -self.half_height)
            & (pts[:, 1] < self.half_height)
        )

    def scaled(self, k: float) -> "Region":
        return Region(self.half_width * k, self.half_height * k)


@dataclass(frozen=True, eq=False)
class TransmitterSet:
    """The simultaneous transmitters of one slot.

    ``points`` is an (n, 2) read-only array; row order is the generation order.
    """

    points: np.ndarray
    region: Region
    scheme_label: str = ""
    seed: int | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        pts = np.array(self.points, dtype=float).reshape(-1, 2)
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    def __len__(self):
        return self.points.shape[0]

    @property
    def density(self) -> float:
        return len(self) / self.region.area

    def validate(self) -> None:
        """Check the structural invariants (inside region, no duplicates)."""
        if not np.all(self.region.contains(self.points)):
            raise ValueError("transmitter outside its region")
        if len(self) > 1:
            uniq = np.unique(self.points, axis=0)
            if uniq.shape[0] != len(self):
                raise ValueError("duplicate transmitter positions")

    def nearest_to(self, z: PointLike = (0.0, 0.0)) -> int:
        d2 = np.sum((self.points - as_xy(z)) ** 2, axis=1)
        return int(np.argmin(d2))

    def translated(self, offset: PointLike) -> "TransmitterSet":
        return TransmitterSet(self.points + as_xy(offset), self.region,
                              self.scheme_label, self.seed, dict(self.meta))

    def scaled(self, k: float) -> "TransmitterSet":
        return TransmitterSet(self.points * k, self.region.scaled(k),
                              self.scheme_label, self.seed, dict(self.meta))


def _sq_distances(z: np.ndarray, pts: np.ndarray) -> np.ndarray:
    d2 = np.sum((pts - z) ** 2, axis=1)
    if d2.size and d2.min() < COINCIDENCE_RADIUS ** 2:
        j = int(np.argmin(d2))
        raise CoincidentPoint(f"probe {tuple(z)} coincides with transmitter {j}")
    return d2


def _points_of(tset) -> np.ndarray:
    if isinstance(tset, TransmitterSet):
        return tset.points
    return np.asarray(tset, dtype=float).reshape(-1, 2)


def _check_index(i: int, n: int) -> int:
    if not -n <= i < n:
        raise IndexError(f"transmitter index {i} out of range for {n} transmitters")
    return i % n


def interference_field(z: PointLike, tset, alpha: float) -> float:
    """Total received power ``sum_j |z - z_j|**-alpha`` at ``z``."""
    d2 = _sq_distances(as_xy(z), _points_of(tset))
    return float(np.sum(d2 ** (-0.5 * alpha)))


def _relative_weights(d2: np.ndarray, alpha: float) -> np.ndarray:
    # powers normalised by the strongest one; avoids overflow for large alpha
    return (d2.min() / d2) ** (0.5 * alpha)


def sir_at(z: PointLike, i: int, tset, alpha: float) -> float:
    """SIR of transmitter ``i`` at ``z``; ``SIR_INFINITE`` without interferers."""
    pts = _points_of(tset)
    i = _check_index(i, pts.shape[0])
    d2 = _sq_distances(as_xy(z), pts)
    if pts.shape[0] == 1:
        return SIR_INFINITE
    w = _relative_weights(d2, alpha)
    # sum the others directly; sum(w) - own cancels when own dominates
    interf = np.sum(w[:i]) + np.sum(w[i + 1:])
    return float(w[i] / interf)


def _grad_log_sir(z: np.ndarray, i: int, pts: np.ndarray, alpha: float):
    diff = z - pts
    d2 = _sq_distances(z, pts)
    w = _relative_weights(d2, alpha)
    mask = np.ones(pts.shape[0], dtype=bool)
    mask[i] = False
    wi = w[mask]
    own = w[i]
    interf = wi.sum()
    g_own = -alpha * diff[i] / d2[i]
    g_int = -alpha * np.sum((wi / d2[mask])[:, None] * diff[mask], axis=0) / interf
    return own / interf, g_own - g_int


def sir_gradient(z: PointLike, i: int, tset, alpha: float) -> np.ndarray:
    """Analytic gradient of :func:`sir_at` with respect to ``z`` (per meter)."""
    pts = _points_of(tset)
    i = _check_index(i, pts.shape[0])
    if pts.shape[0] < 2:
        raise ValueError("the SIR gradient needs at least one interferer")
    sir, glog = _grad_log_sir(as_xy(z), i, pts, alpha)
    return sir * glog


def sir_many(zs, i: int, tset, alpha: float) -> np.ndarray:
    """Vectorised :func:`sir_at` over an (m, 2) array of probe points."""
    pts = _points_of(tset)
    i = _check_index(i, pts.shape[0])
    zs = np.atleast_2d(np.asarray(zs, dtype=float))
    out = np.empty(zs.shape[0])
    if pts.shape[0] == 1:
        out.fill(SIR_INFINITE)
        return out
    others = np.delete(pts, i, axis=0)
    for start in range(0, zs.shape[0], 256):
        blk = zs[start:start + 256]
        d2o = np.sum((blk[:, None, :] - others[None, :, :]) ** 2, axis=2)
        d2i = np.sum((blk - pts[i]) ** 2, axis=1)
        if min(d2o.min(), d2i.min()) < COINCIDENCE_RADIUS ** 2:
            raise CoincidentPoint("probe coincides with a transmitter")
        # ratio form (d_i / d_j)**-alpha keeps everything near unit scale
        ratio = (d2i[:, None] / d2o) ** (0.5 * alpha)
        out[start:start + 256] = 1.0 / ratio.sum(axis=1)
    return out
