"""Monte Carlo estimation of local capacity ``c = lambda * sigma``.

Each sample draws one transmitter set, picks a transmitter near the centre
of the region and traces its reception area. Samples are independent given
``(spec.seed, sample)``, so they may run in any order and on any number of
threads; results are reduced once, in sample order.
"""

from __future__ import annotations

import csv
import logging
import math
import os
import subprocess
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import __version__, _kernels
from .exceptions import FailureRateExceeded, LocalCapacityError
from .geometry import ChannelParams, Region, TransmitterSet
from .point_processes import ProcessSpec
from .reception import TraceConfig, trace_contour

log = logging.getLogger(__name__)

#: Abort an estimate when more than this fraction of samples fail to trace.
MAX_FAILURE_RATE = 0.10

#: Transmitters are selected, and probes placed, within this fraction of the
#: region's half sizes.
CENTRAL_FRACTION = 0.5


@dataclass(frozen=True)
class CapacityEstimate:
    scheme: str
    parameter: float
    channel: ChannelParams
    mean_sigma: float
    mean_lambda: float
    capacity: float
    stderr_capacity: float
    samples: int
    failures: int
    seed: int
    stderr_sigma: float = 0.0
    stderr_lambda: float = 0.0
    areas: np.ndarray = field(default=None, repr=False, compare=False)
    max_area_mismatch: float = 0.0

    @property
    def failure_rate(self) -> float:
        return self.failures / self.samples


@dataclass(frozen=True)
class ENEstimate:
    mean_n: float
    stderr: float
    probes: int
    samples: int
    max_count: int


def worker_count(workers: int | None = None) -> int:
    """Threads to use: explicit value, else ``LC_THREADS``, else 1."""
    if workers is None:
        env = os.environ.get("LC_THREADS", "").strip()
        workers = int(env) if env else 1
    return max(1, int(workers))


def _map(fn, items, workers):
    n = worker_count(workers)
    if n == 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))


def central_region(region: Region) -> Region:
    return region.scaled(CENTRAL_FRACTION)


class SampleCache:
    """Keeps generated transmitter sets so several estimators can share them."""

    def __init__(self):
        self._sets = {}

    def get(self, spec: ProcessSpec, sample: int, alpha: float) -> TransmitterSet:
        key = (repr(spec), sample, alpha if spec.scheme == "csma" else None)
        tset = self._sets.get(key)
        if tset is None:
            tset = spec.generate(sample, alpha=alpha)
            self._sets[key] = tset
        return tset

    def __len__(self):
        return len(self._sets)


def _realize(spec, sample, alpha, cache):
    if cache is None:
        return spec.generate(sample, alpha=alpha)
    return cache.get(spec, sample, alpha)


def _select(tset: TransmitterSet, rng: np.random.Generator, selection: str) -> int:
    if selection == "nearest":
        return tset.nearest_to((0.0, 0.0))
    if selection != "central":
        raise ValueError(f"unknown selection rule {selection!r}")
    inner = np.flatnonzero(central_region(tset.region).contains(tset.points))
    if inner.size == 0:
        return tset.nearest_to((0.0, 0.0))
    return int(rng.choice(inner))


def _intensity(spec: ProcessSpec, tset: TransmitterSet) -> float:
    if spec.scheme == "grid":
        return spec.kind.density
    inner = central_region(tset.region)
    return float(np.count_nonzero(inner.contains(tset.points))) / inner.area


def _ratio_stderr(a: np.ndarray, b: np.ndarray) -> float:
    # delta method for mean(a) * mean(b) with paired samples
    n = a.size
    if n < 2:
        return 0.0
    ma, mb = a.mean(), b.mean()
    cov = np.cov(np.vstack([a, b]), ddof=1)
    var = mb * mb * cov[0, 0] + ma * ma * cov[1, 1] + 2.0 * ma * mb * cov[0, 1]
    return math.sqrt(max(var, 0.0) / n)


def estimate_capacity(spec: ProcessSpec, channel: ChannelParams, samples: int,
                      trace: TraceConfig = TraceConfig(), *, selection: str = "central",
                      workers: int | None = None, cache: SampleCache | None = None,
                      max_failure_rate: float = MAX_FAILURE_RATE) -> CapacityEstimate:
    """Estimate ``lambda``, ``sigma`` and ``c`` over ``samples`` slots.

    ``selection="central"`` traces a transmitter drawn uniformly from the
    central window, which samples the typical transmitter. ``"nearest"``
    traces the transmitter closest to the origin; for random schemes its
    cell is size-biased and so is its area.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")

    def one(s):
        tset = _realize(spec, s, channel.alpha, cache)
        rng = np.random.default_rng(np.random.SeedSequence([spec.seed, s, 1]))
        i = _select(tset, rng, selection)
        lam = _intensity(spec, tset)
        try:
            c = trace_contour(tset, i, channel, trace)
        except LocalCapacityError as exc:
            log.warning("sample %d failed: %s", s, exc)
            return math.nan, lam, math.nan
        return c.area, lam, c.area_mismatch

    rows = _map(one, range(samples), workers)
    areas = np.array([r[0] for r in rows])
    lams = np.array([r[1] for r in rows])
    mism = np.array([r[2] for r in rows])
    ok = np.isfinite(areas)
    failures = int(samples - ok.sum())
    if failures > max_failure_rate * samples:
        raise FailureRateExceeded(f"{failures} of {samples} traces failed")
    a, l = areas[ok], lams[ok]
    n = a.size
    ms, ml = float(a.mean()), float(l.mean())
    return CapacityEstimate(
        scheme=spec.label,
        parameter=spec.parameter,
        channel=channel,
        mean_sigma=ms,
        mean_lambda=ml,
        capacity=ms * ml,
        stderr_capacity=_ratio_stderr(a, l),
        samples=samples,
        failures=failures,
        seed=spec.seed,
        stderr_sigma=float(a.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0,
        stderr_lambda=float(l.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0,
        areas=areas,
        max_area_mismatch=float(np.nanmax(mism)) if ok.any() else math.nan,
    )


def received_counts(tset: TransmitterSet, probes, channel: ChannelParams) -> np.ndarray:
    """Number of transmitters each probe receives at SIR >= beta."""
    probes = np.ascontiguousarray(np.atleast_2d(np.asarray(probes, dtype=float)))
    pts = np.ascontiguousarray(tset.points)
    return _kernels.received_counts(probes, pts, 0.5 * channel.alpha, channel.beta)


def estimate_en_direct(spec: ProcessSpec, channel: ChannelParams, samples: int,
                       probes_per_sample: int = 400, *, workers: int | None = None,
                       cache: SampleCache | None = None) -> ENEstimate:
    """Average number of transmitters received at uniform probes in the central window."""
    if samples < 1 or probes_per_sample < 1:
        raise ValueError("samples and probes_per_sample must be >= 1")

    def one(s):
        tset = _realize(spec, s, channel.alpha, cache)
        inner = central_region(tset.region)
        rng = np.random.default_rng(np.random.SeedSequence([spec.seed, s, 2]))
        u = rng.random((probes_per_sample, 2)) * 2.0 - 1.0
        probes = u * np.array([inner.half_width, inner.half_height])
        counts = received_counts(tset, probes, channel)
        return counts.mean(), int(counts.max())

    rows = _map(one, range(samples), workers)
    means = np.array([r[0] for r in rows])
    se = float(means.std(ddof=1) / math.sqrt(samples)) if samples > 1 else 0.0
    return ENEstimate(float(means.mean()), se, probes_per_sample * samples, samples,
                      max(r[1] for r in rows))


@dataclass(frozen=True)
class HomothetyReport:
    k: float
    area: float
    area_scaled: float
    area_ratio: float
    capacity_ratio: float
    ok: bool


def homothety_check(spec: ProcessSpec, channel: ChannelParams, k: float,
                    trace: TraceConfig = TraceConfig(), rtol: float = 0.01) -> HomothetyReport:
    """Trace the central transmitter of a grid at spacing d and k*d."""
    if not k > 0:
        raise ValueError("k must be > 0")
    if spec.scheme != "grid":
        raise ValueError("homothety_check needs a grid spec")
    base = replace(spec, randomize_offset=False)
    scaled = base.scaled(k)
    t0 = base.generate(0)
    t1 = scaled.generate(0)
    a0 = trace_contour(t0, t0.nearest_to((0, 0)), channel, trace).area
    a1 = trace_contour(t1, t1.nearest_to((0, 0)), channel, trace).area
    ratio = a1 / a0
    cap = (a1 * scaled.kind.density) / (a0 * base.kind.density)
    ok = abs(ratio / (k * k) - 1.0) <= rtol and abs(cap - 1.0) <= rtol
    return HomothetyReport(k, a0, a1, ratio, cap, ok)


# --------------------------------------------------------------------------
# results CSV

RESULT_FIELDS = ["scheme", "beta", "alpha", "d_or_theta", "samples", "lambda", "sigma",
                 "capacity", "stderr", "seed", "version"]


def code_version() -> str:
    """``git describe`` of the source tree when available, else the package version."""
    here = Path(__file__).resolve().parent
    try:
        out = subprocess.run(["git", "describe", "--always", "--dirty", "--tags"], cwd=here,
                             capture_output=True, text=True, timeout=5)
        if out.returncode == 0 and out.stdout.strip():
            return out.stdout.strip()
    except (OSError, subprocess.SubprocessError):
        pass
    return __version__


def result_row(est: CapacityEstimate, version: str | None = None) -> dict:
    return {
        "scheme": est.scheme,
        "beta": repr(float(est.channel.beta)),
        "alpha": repr(float(est.channel.alpha)),
        "d_or_theta": "" if est.parameter is None else repr(float(est.parameter)),
        "samples": est.samples,
        "lambda": repr(float(est.mean_lambda)),
        "sigma": repr(float(est.mean_sigma)),
        "capacity": repr(float(est.capacity)),
        "stderr": repr(float(est.stderr_capacity)),
        "seed": est.seed,
        "version": version if version is not None else code_version(),
    }


def write_results(rows, path, comments=()) -> None:
    with open(path, "w", newline="") as fh:
        for line in comments:
            fh.write(f"# {line}\n")
        w = csv.DictWriter(fh, fieldnames=RESULT_FIELDS, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow(r)
