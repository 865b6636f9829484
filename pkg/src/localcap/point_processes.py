"""Per-slot transmitter sets for each medium access scheme.

Grid patterns are deterministic lattices; slotted ALOHA is a homogeneous
Poisson process; node colouring and carrier sense are random sequential
inhibition processes run to saturation over continuous uniform candidates
(the infinite node density limit of the sequential construction).
"""

from __future__ import annotations

import csv
import enum
import io
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import _kernels
from .exceptions import RegionTooSmall, ResourceLimit
from .geometry import Point2D, Region, TransmitterSet, as_xy

#: Refuse to materialise more points than this in one set.
MAX_POINTS = 100_000_000

_SQRT3 = math.sqrt(3.0)
# deepest cell refinement of the saturating samplers; a cell this small
# (< 1e-9 of the base cell) is dropped and counted in ``meta["dropped_cells"]``
_MAX_LEVEL = 32


class Lattice(str, enum.Enum):
    square = "square"
    hexagonal = "hexagonal"
    triangular = "triangular"


@dataclass(frozen=True)
class GridKind:
    """A lattice with nearest-neighbour distance ``d`` (meters)."""

    lattice: Lattice
    d: float

    def __post_init__(self):
        object.__setattr__(self, "lattice", Lattice(self.lattice))
        if not self.d > 0:
            raise ValueError("grid spacing d must be > 0")

    @property
    def density(self) -> float:
        d2 = self.d * self.d
        if self.lattice is Lattice.square:
            return 1.0 / d2
        if self.lattice is Lattice.triangular:
            return 2.0 / (_SQRT3 * d2)
        return 4.0 / (3.0 * _SQRT3 * d2)

    @property
    def corner_angle(self) -> float:
        """Angle between the +x ray and the nearest neighbour of the origin site."""
        return math.pi / 6 if self.lattice is Lattice.hexagonal else 0.0

    def bravais(self) -> tuple[np.ndarray, np.ndarray]:
        """Primitive vectors (rows of a 2x2 array) and basis points."""
        d = self.d
        if self.lattice is Lattice.square:
            return np.array([[d, 0.0], [0.0, d]]), np.zeros((1, 2))
        if self.lattice is Lattice.triangular:
            return np.array([[d, 0.0], [d / 2, _SQRT3 * d / 2]]), np.zeros((1, 2))
        # honeycomb: triangular Bravais lattice of constant sqrt(3) d, two sites
        a = _SQRT3 * d
        vecs = np.array([[a, 0.0], [a / 2, 1.5 * d]])
        return vecs, np.array([[0.0, 0.0], [0.0, d]])


def _reduce_offset(offset: np.ndarray, vecs: np.ndarray) -> np.ndarray:
    coeffs = np.linalg.solve(vecs.T, offset)
    return offset - np.floor(coeffs) @ vecs


def gen_grid(kind: GridKind, offset=Point2D(0.0, 0.0), region: Region | None = None,
             *, min_points: int = 100) -> TransmitterSet:
    """All lattice sites inside ``region``, shifted by ``offset`` (mod one cell)."""
    if region is None:
        raise TypeError("gen_grid needs a region")
    vecs, basis = kind.bravais()
    off = _reduce_offset(as_xy(offset), vecs)
    expected = kind.density * region.area
    if expected > MAX_POINTS:
        raise ResourceLimit(f"grid would hold ~{expected:.3g} points")
    # integer coefficient box covering the region
    inv = np.linalg.inv(vecs.T)
    corners = np.array([[sx * region.half_width, sy * region.half_height]
                        for sx in (-1, 1) for sy in (-1, 1)])
    coef = (inv @ (corners - off).T).T
    lo = np.floor(coef.min(axis=0)) - 2
    hi = np.ceil(coef.max(axis=0)) + 2
    ii, jj = np.meshgrid(np.arange(lo[0], hi[0] + 1), np.arange(lo[1], hi[1] + 1),
                         indexing="ij")
    sites = np.column_stack([ii.ravel(), jj.ravel()]) @ vecs
    pts = (sites[:, None, :] + basis[None, :, :]).reshape(-1, 2) + off
    pts = pts[region.contains(pts)]
    # row-major order (y then x) keeps output stable and readable
    pts = pts[np.lexsort((pts[:, 0], pts[:, 1]))]
    if pts.shape[0] < min_points:
        raise RegionTooSmall(
            f"{pts.shape[0]} {kind.lattice.value} sites in region, need {min_points}")
    return TransmitterSet(pts, region, f"grid:{kind.lattice.value}",
                          meta={"d": kind.d, "offset": tuple(off)})


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def gen_poisson(lam: float, region: Region, seed=None) -> TransmitterSet:
    """Homogeneous Poisson process of intensity ``lam`` (per m^2) in ``region``."""
    if not lam > 0:
        raise ValueError("lambda must be > 0")
    mean = lam * region.area
    if mean >= MAX_POINTS:
        raise ResourceLimit(f"expected {mean:.3g} points exceeds {MAX_POINTS}")
    rng = _rng(seed)
    n = rng.poisson(mean)
    x = rng.uniform(-region.half_width, region.half_width, n)
    y = rng.uniform(-region.half_height, region.half_height, n)
    return TransmitterSet(np.column_stack([x, y]), region, "aloha",
                          seed=seed if isinstance(seed, int) else None,
                          meta={"lambda": lam})


@dataclass
class CandidateLog:
    """Every candidate offered to an inhibition sampler, in order."""

    points: np.ndarray
    accepted: np.ndarray


class _Sampler:
    """Shared driver for the two saturating inhibition samplers."""

    def __init__(self, region: Region, radius: float, rng: np.random.Generator,
                 darts_per_cell: float, keep_log: bool):
        self.region = region
        self.rng = rng
        self.darts_per_cell = darts_per_cell
        hw, hh = region.half_width, region.half_height
        # cell diagonal <= radius so that each cell holds at most one point
        cell = radius / math.sqrt(2.0)
        self.nx = max(1, math.ceil(2 * hw / cell))
        self.ny = max(1, math.ceil(2 * hh / cell))
        if self.nx * self.ny > 4 * MAX_POINTS:
            raise ResourceLimit("exclusion radius too small for this region")
        self.gx = 2 * hw / self.nx
        self.gy = 2 * hh / self.ny
        self.occ = np.full((self.nx, self.ny), -1, dtype=np.int64)
        self.pts = np.empty((self.nx * self.ny, 2))
        self.n = 0
        self.log_pts: list[np.ndarray] | None = [] if keep_log else None
        self.log_acc: list[np.ndarray] | None = [] if keep_log else None

    def window(self, reach: float) -> int:
        return max(1, math.ceil(reach / min(self.gx, self.gy)))

    def _darts(self, ax, ay, level):
        m = max(1, int(math.ceil(self.darts_per_cell * ax.shape[0])))
        pick = self.rng.integers(0, ax.shape[0], m)
        u = self.rng.random((m, 2))
        sx = self.gx / 2.0 ** level
        sy = self.gy / 2.0 ** level
        xs = -self.region.half_width + (ax[pick] + u[:, 0]) * sx
        ys = -self.region.half_height + (ay[pick] + u[:, 1]) * sy
        # guard the upper edge against round-off
        np.minimum(xs, np.nextafter(self.region.half_width, 0), out=xs)
        np.minimum(ys, np.nextafter(self.region.half_height, 0), out=ys)
        return xs, ys

    def saturate(self, throw, refine):
        ax, ay = np.meshgrid(np.arange(self.nx, dtype=np.int64),
                             np.arange(self.ny, dtype=np.int64), indexing="ij")
        ax = ax.ravel()
        ay = ay.ravel()
        level = 0
        dropped = 0
        rounds = 0
        while ax.shape[0]:
            xs, ys = self._darts(ax, ay, level)
            acc = np.empty(xs.shape[0], dtype=np.int8)
            self.n = throw(xs, ys, acc)
            if self.log_pts is not None:
                self.log_pts.append(np.column_stack([xs, ys]))
                self.log_acc.append(acc.astype(bool))
            if level >= _MAX_LEVEL:
                dropped = ax.shape[0]
                break
            ax, ay = refine(ax, ay, level)
            level += 1
            rounds += 1
        return {"rounds": rounds, "dropped_cells": dropped}

    def until(self, max_rejections: int, throw, batch: int = 8192):
        """Uniform candidates until ``max_rejections`` consecutive rejections."""
        hw, hh = self.region.half_width, self.region.half_height
        offered = 0
        streak = 0
        acc = np.empty(batch, dtype=np.int8)
        while True:
            xs = self.rng.uniform(-hw, hw, batch)
            ys = self.rng.uniform(-hh, hh, batch)
            self.n, used, streak = throw(xs, ys, acc, streak, max_rejections)
            offered += used
            if used < batch:
                return {"offered": offered}

    def result(self, label: str, seed, meta: dict):
        pts = self.pts[: self.n].copy()
        tset = TransmitterSet(pts, self.region, label,
                              seed=seed if isinstance(seed, int) else None, meta=meta)
        log = None
        if self.log_pts is not None:
            log = CandidateLog(np.concatenate(self.log_pts) if self.log_pts else np.empty((0, 2)),
                               np.concatenate(self.log_acc) if self.log_acc else np.empty(0, bool))
        return tset, log


def gen_coloring(d: float, region: Region, seed=None, *, max_rejections: int | None = None,
                 darts_per_cell: float = 1.0, return_log: bool = False):
    """Saturated random sequential inhibition with exclusion distance ``d``.

    With ``max_rejections=None`` (default) the sampler runs until no point of
    the region can accept another transmitter. Passing an integer instead stops
    after that many consecutive rejected uniform candidates.

    Returns the :class:`TransmitterSet`, or ``(set, CandidateLog)`` when
    ``return_log`` is true.
    """
    if not d > 0:
        raise ValueError("exclusion distance d must be > 0")
    rng = _rng(seed)
    s = _Sampler(region, d, rng, darts_per_cell, return_log and max_rejections is None)
    K = s.window(d)
    hw, hh = region.half_width, region.half_height
    d2 = d * d

    def throw(xs, ys, acc, streak=0, max_streak=0):
        return _kernels.throw_disk(xs, ys, s.occ, s.pts, s.n, hw, hh, s.gx, s.gy, K, d2,
                                   acc, streak, max_streak)

    if max_rejections is None:
        info = s.saturate(
            lambda xs, ys, acc: throw(xs, ys, acc)[0],
            lambda ax, ay, lv: _kernels.refine_disk(ax, ay, lv, s.occ, s.pts, hw, hh,
                                                    s.gx, s.gy, K, d2),
        )
    else:
        info = s.until(max_rejections, throw)
    tset, log = s.result("coloring", seed, {"d": d, **info})
    return (tset, log) if return_log else tset


def gen_csma(theta: float, region: Region, seed=None, alpha: float = 4.0, *,
             max_rejections: int | None = None, darts_per_cell: float = 1.0,
             block_radii: float = 2.0, window_blocks=(1, 3, 8), return_log: bool = False):
    """Saturated carrier-sense inhibition with threshold ``theta``.

    A candidate joins iff the summed power it senses from already accepted
    transmitters is strictly below ``theta``. Nothing is re-checked later, so
    early transmitters may end up sensing more than ``theta``.

    The sensed power is summed exactly over nearby transmitters (square blocks
    of about ``block_radii`` exclusion radii, ``window_blocks[t]`` blocks
    around the candidate for each successive tier ``t``); the remainder is
    bracketed by per-block bounds. When every tier's bracket straddles
    ``theta`` the full exact sum decides.
    """
    if not theta > 0:
        raise ValueError("carrier sense threshold must be > 0")
    if not alpha > 2:
        raise ValueError("alpha must be > 2")
    r0 = theta ** (-1.0 / alpha)
    rng = _rng(seed)
    s = _Sampler(region, r0, rng, darts_per_cell, return_log and max_rejections is None)
    B = max(1, round(block_radii * r0 / min(s.gx, s.gy)))
    shape = (math.ceil(s.nx / B), math.ceil(s.ny / B))
    tiers = np.asarray(window_blocks, dtype=np.int64)
    far_lo = np.zeros((tiers.shape[0],) + shape)
    far_hi = np.zeros((tiers.shape[0],) + shape)
    hw, hh = region.half_width, region.half_height
    ha = 0.5 * alpha

    def throw(xs, ys, acc, streak=0, max_streak=0):
        return _kernels.throw_sense(xs, ys, s.occ, s.pts, s.n, hw, hh, s.gx, s.gy, B, tiers,
                                    ha, theta, far_lo, far_hi, acc, streak, max_streak)

    if max_rejections is None:
        info = s.saturate(
            lambda xs, ys, acc: throw(xs, ys, acc)[0],
            lambda ax, ay, lv: _kernels.refine_sense(ax, ay, lv, s.occ, s.pts, s.n, hw, hh,
                                                     s.gx, s.gy, B, tiers, ha, theta,
                                                     far_lo, far_hi),
        )
    else:
        info = s.until(max_rejections, throw)
    tset, log = s.result("csma", seed, {"theta": theta, "alpha": alpha, "r0": r0, **info})
    return (tset, log) if return_log else tset


def density(tset: TransmitterSet) -> float:
    """Realised intensity: point count over region area (per m^2)."""
    return len(tset) / tset.region.area


def packing_density(tset: TransmitterSet, d: float) -> float:
    """Fraction of the region covered by the radius ``d/2`` exclusion disks."""
    return density(tset) * math.pi * d * d / 4.0


def replay_csma(log: CandidateLog, theta: float, alpha: float) -> np.ndarray:
    """Recompute every accept/reject decision of a carrier-sense run."""
    acc = np.zeros(log.points.shape[0], dtype=bool)
    chosen = []
    ha = 0.5 * alpha
    for k, (x, y) in enumerate(log.points):
        if chosen:
            arr = np.asarray(chosen)
            d2 = (arr[:, 0] - x) ** 2 + (arr[:, 1] - y) ** 2
            if d2.min() == 0:
                continue
            ok = np.sum(d2 ** -ha) < theta
        else:
            ok = True
        if ok:
            acc[k] = True
            chosen.append((x, y))
    return acc


# --------------------------------------------------------------------------
# process specifications


@dataclass(frozen=True)
class ProcessSpec:
    """What to generate each slot, plus where and from which seed.

    Use the ``grid``/``poisson``/``coloring``/``csma`` constructors.
    """

    scheme: str
    region: Region
    seed: int = 0
    kind: GridKind | None = None
    offset: Point2D = Point2D(0.0, 0.0)
    lam: float | None = None
    d: float | None = None
    theta: float | None = None
    randomize_offset: bool = True
    options: dict = field(default_factory=dict, compare=False, hash=False)

    def __post_init__(self):
        if self.scheme not in ("grid", "poisson", "coloring", "csma"):
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.scheme == "grid" and self.kind is None:
            raise ValueError("grid scheme needs a GridKind")
        if self.scheme == "poisson" and not (self.lam or 0) > 0:
            raise ValueError("poisson scheme needs lambda > 0")
        if self.scheme == "coloring" and not (self.d or 0) > 0:
            raise ValueError("coloring scheme needs d > 0")
        if self.scheme == "csma" and not (self.theta or 0) > 0:
            raise ValueError("csma scheme needs theta > 0")

    @classmethod
    def grid(cls, lattice, d, region, seed=0, offset=Point2D(0.0, 0.0), randomize_offset=True):
        return cls("grid", region, seed, kind=GridKind(Lattice(lattice), d),
                   offset=offset, randomize_offset=randomize_offset)

    @classmethod
    def poisson(cls, lam, region, seed=0):
        return cls("poisson", region, seed, lam=lam)

    @classmethod
    def coloring(cls, d, region, seed=0, **options):
        return cls("coloring", region, seed, d=d, options=options)

    @classmethod
    def csma(cls, theta, region, seed=0, **options):
        return cls("csma", region, seed, theta=theta, options=options)

    @property
    def label(self) -> str:
        if self.scheme == "grid":
            return f"grid:{self.kind.lattice.value}"
        return {"poisson": "aloha"}.get(self.scheme, self.scheme)

    @property
    def parameter(self) -> float:
        """The scheme's tuning knob: d, theta or lambda."""
        if self.scheme == "grid":
            return self.kind.d
        return {"poisson": self.lam, "coloring": self.d, "csma": self.theta}[self.scheme]

    def sample_rng(self, sample: int) -> np.random.Generator:
        return np.random.default_rng(np.random.SeedSequence([self.seed, sample]))

    def generate(self, sample: int = 0, alpha: float | None = None) -> TransmitterSet:
        """Transmitter set of slot ``sample``; streams depend only on (seed, sample)."""
        rng = self.sample_rng(sample)
        if self.scheme == "grid":
            off = self.offset
            if self.randomize_offset and sample > 0:
                vecs, _ = self.kind.bravais()
                off = rng.random(2) @ vecs
            tset = gen_grid(self.kind, off, self.region)
        elif self.scheme == "poisson":
            tset = gen_poisson(self.lam, self.region, rng)
        elif self.scheme == "coloring":
            tset = gen_coloring(self.d, self.region, rng, **self.options)
        else:
            if alpha is None:
                raise ValueError("csma generation needs the attenuation exponent")
            tset = gen_csma(self.theta, self.region, rng, alpha, **self.options)
        return replace(tset, seed=self.seed, meta={**tset.meta, "sample": sample})

    def scaled(self, k: float, alpha: float | None = None) -> "ProcessSpec":
        """Homothetic copy: every length multiplied by ``k``."""
        region = self.region.scaled(k)
        if self.scheme == "grid":
            return replace(self, region=region, kind=GridKind(self.kind.lattice, self.kind.d * k),
                           offset=Point2D(self.offset.x * k, self.offset.y * k))
        if self.scheme == "poisson":
            return replace(self, region=region, lam=self.lam / (k * k))
        if self.scheme == "coloring":
            return replace(self, region=region, d=self.d * k)
        if alpha is None:
            raise ValueError("scaling a csma spec needs the attenuation exponent")
        return replace(self, region=region, theta=self.theta * k ** (-alpha))


# --------------------------------------------------------------------------
# CSV round trip


def write_csv(tset: TransmitterSet, path) -> None:
    """Write ``x,y`` rows preceded by ``#`` provenance lines."""
    r = tset.region
    with open(path, "w", newline="") as fh:
        fh.write(f"# scheme_label={tset.scheme_label}\n")
        fh.write(f"# seed={'' if tset.seed is None else tset.seed}\n")
        fh.write(f"# region={r.half_width!r},{r.half_height!r}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x", "y"])
        for x, y in tset.points:
            w.writerow([repr(float(x)), repr(float(y))])


def read_csv(path) -> TransmitterSet:
    header = {}
    rows = []
    text = Path(path).read_text()
    body = []
    for line in text.splitlines():
        if line.startswith("#"):
            key, _, val = line[1:].strip().partition("=")
            header[key.strip()] = val.strip()
        else:
            body.append(line)
    for row in csv.DictReader(io.StringIO("\n".join(body))):
        rows.append((float(row["x"]), float(row["y"])))
    hw, hh = (float(v) for v in header["region"].split(","))
    seed = int(header["seed"]) if header.get("seed") else None
    return TransmitterSet(np.array(rows).reshape(-1, 2), Region(hw, hh),
                          header.get("scheme_label", ""), seed)
