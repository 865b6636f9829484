"""Reception areas: boundary bootstrap and level-set contour tracing.

The reception area of transmitter ``i`` is the set where its SIR is at least
``beta``. Its boundary is followed by stepping along the tangent (the inward
unit normal turned a quarter clockwise), so the trace circulates
counterclockwise around the transmitter. After every step a Newton
correction pulls the vertex back onto the level set; the enclosed area is
accumulated from the normal flux and cross-checked with the shoelace
formula.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.optimize import brentq

from . import _trace
from .exceptions import GradientVanished, NoClosure, NoConvergence, NoPositiveRoot
from .geometry import (
    ChannelParams,
    Point2D,
    TransmitterSet,
    _check_index,
    _grad_log_sir,
    _points_of,
    as_xy,
    sir_at,
)

#: Step length at a nearest-neighbour spacing of 25 m; scaled linearly otherwise.
DEFAULT_DT_AT_25M = 0.01

#: |grad S| (per meter) below which the tracer gives up.
FLAT_GRADIENT = 1e-15


@dataclass(frozen=True)
class TraceConfig:
    """Tracer settings.

    ``dt`` is the step in meters. ``None`` means ``0.01 * spacing / 25``
    where ``spacing`` is the distance from the traced transmitter to its
    nearest neighbour, i.e. 0.01 m at 25 m. ``closure_radius`` defaults to
    ``1.5 * dt``. ``far_field_ratio`` sets how far (in units of the contour
    extent) interferers are summed exactly before the remaining ones are
    folded into a quadratic expansion; ``far_field=False`` sums everything.
    """

    dt: float | None = None
    max_steps: int = 5_000_000
    newton_tol: float = 1e-10
    newton_max_iter: int = 50
    closure_radius: float | None = None
    min_steps: int = 10
    corrector: bool = True
    far_field: bool = True
    far_field_ratio: float = 25.0

    def __post_init__(self):
        if self.dt is not None and not (self.dt > 0 and math.isfinite(self.dt)):
            raise ValueError(f"dt must be > 0, got {self.dt}")
        if self.max_steps < 3:
            raise ValueError("max_steps must be at least 3")
        if not self.newton_tol > 0:
            raise ValueError("newton_tol must be > 0")
        if self.newton_max_iter < 1:
            raise ValueError("newton_max_iter must be >= 1")
        if self.closure_radius is not None and not self.closure_radius > 0:
            raise ValueError("closure_radius must be > 0")
        if self.far_field_ratio <= 2:
            raise ValueError("far_field_ratio must exceed 2")

    def step_for(self, spacing: float) -> float:
        return self.dt if self.dt is not None else DEFAULT_DT_AT_25M * spacing / 25.0


@dataclass(frozen=True, eq=False)
class ReceptionContour:
    transmitter: Point2D
    vertices: np.ndarray
    area: float
    step: float
    closed: bool
    shoelace_area: float
    beta: float
    alpha: float
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        v = np.array(self.vertices, dtype=float).reshape(-1, 2)
        v.setflags(write=False)
        object.__setattr__(self, "vertices", v)

    @property
    def steps(self) -> int:
        return self.vertices.shape[0]

    @property
    def area_mismatch(self) -> float:
        """Relative gap between the flux and shoelace areas."""
        return abs(self.area - self.shoelace_area) / self.shoelace_area


def first_guess_radius(d: float, beta: float, alpha: float, corner_angle: float = 0.0) -> float:
    """Boundary distance toward a single interferer at distance ``d``.

    Solves ``(1 - beta**(2/alpha)) r**2 - 2 d cos(angle) r + d**2 = 0`` for
    its positive root.
    """
    if not beta > 1:
        raise NoPositiveRoot(f"no positive root for beta={beta} <= 1")
    if not (d > 0 and alpha > 0):
        raise ValueError("d and alpha must be positive")
    a = 1.0 - beta ** (2.0 / alpha)
    b = -2.0 * d * math.cos(corner_angle)
    c = d * d
    disc = math.sqrt(b * b - 4.0 * a * c)
    # a < 0 < c: exactly one positive root; written to avoid cancellation
    return 2.0 * c / (-b + disc)


def shoelace_area(vertices) -> float:
    v = np.asarray(vertices, dtype=float)
    x, y = v[:, 0], v[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def _nearest_other(pts: np.ndarray, i: int):
    d2 = np.sum((pts - pts[i]) ** 2, axis=1)
    d2[i] = np.inf
    j = int(np.argmin(d2))
    return j, math.sqrt(d2[j])


def _ray(pts, i, direction):
    j, dist = _nearest_other(pts, i)
    toward = (pts[j] - pts[i]) / dist
    if direction is None:
        return toward, 0.0, dist
    u = as_xy(direction)
    u = u / np.linalg.norm(u)
    # several neighbours may tie for nearest; measure the corner to the closest in angle
    rel = pts - pts[i]
    r = np.hypot(rel[:, 0], rel[:, 1])
    ring = np.flatnonzero((r > 0) & (r <= dist * (1.0 + 1e-9)))
    cosines = rel[ring] @ u / r[ring]
    angle = math.acos(max(-1.0, min(1.0, float(cosines.max()))))
    return u, angle, dist


def newton_start(tset, i: int, channel: ChannelParams, config: TraceConfig = TraceConfig(),
                 *, direction=None, full_output: bool = False):
    """Boundary point on a ray from transmitter ``i`` by Newton's method.

    The ray points at the nearest neighbour unless ``direction`` is given,
    in which case the corner angle for the first guess is the angle between
    the ray and the closest (in angle) of the nearest neighbours. Iterates
    on ``log S - log beta`` inside a bracket that Newton steps may not leave.
    """
    pts = _points_of(tset)
    if pts.shape[0] < 2:
        raise ValueError("need at least two transmitters")
    i = _check_index(i, pts.shape[0])
    zi = pts[i]
    u, angle, dist = _ray(pts, i, direction)
    beta, alpha = channel.beta, channel.alpha
    t = first_guess_radius(dist, beta, alpha, angle)
    lo, hi = 0.0, math.inf
    for it in range(1, config.newton_max_iter + 1):
        z = zi + t * u
        s, glog = _grad_log_sir(z, i, pts, alpha)
        if abs(s - beta) <= config.newton_tol * beta:
            p = Point2D(float(z[0]), float(z[1]))
            return (p, it - 1) if full_output else p
        # Newton on log S - log beta, which is close to linear in t
        f = math.log(s / beta)
        if f > 0:
            lo = max(lo, t)
        else:
            hi = min(hi, t)
        fp = float(np.dot(glog, u))
        nxt = t - f / fp if fp != 0 else math.nan
        if not lo < nxt < hi:
            # safeguard: bisect the bracket held so far
            nxt = 0.5 * (lo + hi) if math.isfinite(hi) else 2.0 * t
        t = nxt
    z = zi + t * u
    raise NoConvergence(f"Newton did not converge in {config.newton_max_iter} iterations "
                        f"(last SIR {sir_at(z, i, pts, alpha)!r})")


def boundary_start(tset, i: int, channel: ChannelParams, config: TraceConfig = TraceConfig(),
                   *, direction=None) -> Point2D:
    """Boundary point by Newton, falling back to bisection on log SIR."""
    try:
        return newton_start(tset, i, channel, config, direction=direction)
    except (NoConvergence, NoPositiveRoot):
        pass
    pts = _points_of(tset)
    i = _check_index(i, pts.shape[0])
    zi = pts[i]
    u, _, dist = _ray(pts, i, direction)
    target = math.log(channel.beta)

    def g(t):
        return math.log(sir_at(zi + t * u, i, pts, channel.alpha)) - target

    lo = dist * 1e-9
    hi = dist * 0.5
    if g(hi) > 0:
        hi = dist * (1.0 - 1e-9)
    if g(lo) <= 0 or g(hi) > 0:
        raise NoConvergence("could not bracket the SIR level on the start ray")
    t = brentq(g, lo, hi, xtol=dist * 1e-15, rtol=1e-15, maxiter=500)
    z = zi + t * u
    return Point2D(float(z[0]), float(z[1]))


def trace_contour(tset, i: int, channel: ChannelParams, config: TraceConfig = TraceConfig(),
                  *, start: Point2D | None = None) -> ReceptionContour:
    pts = _points_of(tset)
    if pts.shape[0] < 2:
        raise ValueError("need at least two transmitters")
    i = _check_index(i, pts.shape[0])
    zi = pts[i]
    _, spacing = _nearest_other(pts, i)
    dt = config.step_for(spacing)
    closure = config.closure_radius if config.closure_radius is not None else 1.5 * dt
    if start is None:
        start = boundary_start(pts, i, channel, config)
    L = spacing
    rel = np.delete(pts, i, axis=0) - zi
    rel /= L
    rho = np.sqrt(np.sum(rel ** 2, axis=1))
    z0 = (as_xy(start) - zi) / L
    halfa = 0.5 * channel.alpha
    target = math.log(channel.beta)
    extent = max(2.0 * math.hypot(*z0), 0.5)
    while True:
        if config.far_field:
            cut = config.far_field_ratio * extent
            near = np.ascontiguousarray(rel[rho <= cut])
            fc = _trace.far_coefficients(np.ascontiguousarray(rel[rho > cut]), halfa)
        else:
            near = np.ascontiguousarray(rel)
            fc = np.zeros(6)
        cap = min(config.max_steps, int(8.0 * math.pi * extent * L / dt) + 64)
        while True:
            out = np.empty((cap, 2))
            status, k, area = _trace.trace(near, fc, halfa, target, z0[0], z0[1], dt / L,
                                           config.max_steps, closure / L, config.min_steps,
                                           config.corrector, extent, FLAT_GRADIENT * L, out)
            if status != _trace.BUFFER:
                break
            cap = min(config.max_steps, 2 * cap)
        if status == _trace.EXTENT:
            if extent * L > _extent_limit(tset):
                raise NoClosure("contour left the transmitter region")
            extent *= 2.0
            continue
        break
    if status == _trace.FLAT:
        raise GradientVanished(f"SIR gradient vanished after {k} steps")
    if status == _trace.PROJECTION:
        raise NoClosure(f"level-set projection failed after {k} steps")
    if status == _trace.MAX_STEPS:
        raise NoClosure(f"contour did not close within {config.max_steps} steps (dt={dt})")
    verts = out[:k] * L + zi
    flux_area = area * L * L
    shoe = shoelace_area(verts)
    return ReceptionContour(
        transmitter=Point2D(float(zi[0]), float(zi[1])),
        vertices=verts,
        area=abs(flux_area),
        step=dt,
        closed=True,
        shoelace_area=abs(shoe),
        beta=channel.beta,
        alpha=channel.alpha,
        meta={"index": i, "spacing": spacing, "near": int(near.shape[0]),
              "extent": extent * L},
    )


def _extent_limit(tset) -> float:
    # a contour reaching this far from its transmitter is treated as open
    if isinstance(tset, TransmitterSet):
        return 4.0 * math.hypot(tset.region.width, tset.region.height)
    span = np.ptp(_points_of(tset), axis=0)
    return 1e4 * max(float(np.hypot(*span)), 1.0)


def covers(contour: ReceptionContour, z) -> bool:
    """Even-odd point-in-polygon test; vertices and edges count as inside."""
    if not contour.closed:
        raise ValueError("contour is not closed")
    px, py = as_xy(z)
    v = contour.vertices
    x0, y0 = v[:, 0], v[:, 1]
    x1, y1 = np.roll(x0, -1), np.roll(y0, -1)
    cross = (x1 - x0) * (py - y0) - (y1 - y0) * (px - x0)
    on_seg = ((np.abs(cross) <= 1e-12 * max(1.0, contour.step))
              & (np.minimum(x0, x1) <= px) & (px <= np.maximum(x0, x1))
              & (np.minimum(y0, y1) <= py) & (py <= np.maximum(y0, y1)))
    if on_seg.any():
        return True
    straddle = (y0 > py) != (y1 > py)
    with np.errstate(divide="ignore", invalid="ignore"):
        xs = x0 + (py - y0) * (x1 - x0) / (y1 - y0)
    return bool(np.count_nonzero(straddle & (px < xs)) % 2)


def write_contour(contour: ReceptionContour, path) -> tuple[Path, Path]:
    """Write vertices as ``x,y`` CSV plus a JSON sidecar; returns both paths."""
    path = Path(path)
    np.savetxt(path, contour.vertices, delimiter=",", header="x,y", comments="", fmt="%.17g")
    side = path.with_suffix(".json")
    side.write_text(json.dumps({
        "area": contour.area,
        "shoelace_area": contour.shoelace_area,
        "beta": contour.beta,
        "alpha": contour.alpha,
        "dt": contour.step,
        "steps": contour.steps,
        "transmitter": [contour.transmitter.x, contour.transmitter.y],
    }, indent=2) + "\n")
    return path, side
