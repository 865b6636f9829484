import math

import numpy as np
import pytest
from scipy.optimize import brentq

from localcap import (ChannelParams, FailureRateExceeded, NoClosure, ProcessSpec, Region,
                      SampleCache, estimate_capacity, estimate_en_direct, homothety_check,
                      sir_at)
from localcap import capacity as capmod
from localcap.capacity import RESULT_FIELDS, received_counts, result_row, worker_count, write_results


def polar_area(tset, i, channel, rays=720):
    """Area of a star-shaped reception region from root-found boundary radii.

    Independent of the tracer: brentq on the scalar SIR along each ray, then
    the periodic trapezoid rule for half the integral of r(phi)**2.
    """
    z = tset.points[i]
    nn = np.sort(np.hypot(*(tset.points - z).T))[1]
    radii = []
    for phi in np.linspace(0, 2 * np.pi, rays, endpoint=False):
        u = np.array([np.cos(phi), np.sin(phi)])
        radii.append(brentq(lambda t: sir_at(z + t * u, i, tset, channel.alpha) - channel.beta,
                            1e-6 * nn, 0.5 * nn, xtol=1e-12))
    return 0.5 * np.mean(np.square(radii)) * 2 * np.pi


@pytest.mark.parametrize("lattice", ["square", "triangular", "hexagonal"])
def test_grid_capacity_matches_polar_oracle(lattice, channel):
    spec = ProcessSpec.grid(lattice, 25.0, Region.square(2000), randomize_offset=False)
    est = estimate_capacity(spec, channel, 1, selection="nearest")
    tset = spec.generate(0)
    area = polar_area(tset, tset.nearest_to((0, 0)), channel)
    assert est.mean_sigma == pytest.approx(area, rel=1e-3)
    assert est.mean_lambda == spec.kind.density


def test_grid_capacity_offset_invariant(channel):
    spec = ProcessSpec.grid("triangular", 25.0, Region.square(2000), seed=5)
    est = estimate_capacity(spec, channel, 4)
    assert est.stderr_capacity < 1e-3 * est.capacity
    assert est.failures == 0


def test_reproducible_bit_identical(channel):
    spec = ProcessSpec.coloring(25.0, Region.square(600), seed=12)
    a = estimate_capacity(spec, channel, 6)
    b = estimate_capacity(spec, channel, 6)
    assert a == b
    assert np.array_equal(a.areas, b.areas)


def test_threads_do_not_change_result(channel, monkeypatch):
    spec = ProcessSpec.poisson(1 / 625, Region.square(600), seed=3)
    one = estimate_capacity(spec, channel, 6, workers=1)
    monkeypatch.setenv("LC_THREADS", "3")
    assert worker_count() == 3
    many = estimate_capacity(spec, channel, 6)
    assert one == many and np.array_equal(one.areas, many.areas)


def test_selection_rules(channel):
    spec = ProcessSpec.poisson(1 / 625, Region.square(600), seed=1)
    estimate_capacity(spec, channel, 2, selection="nearest")
    with pytest.raises(ValueError):
        estimate_capacity(spec, channel, 2, selection="median")


def test_failures_are_counted(channel, monkeypatch):
    real = capmod.trace_contour
    calls = {"n": 0}

    def flaky(tset, i, ch, cfg):
        calls["n"] += 1
        if calls["n"] % 20 == 0:
            raise NoClosure("synthetic")
        return real(tset, i, ch, cfg)

    monkeypatch.setattr(capmod, "trace_contour", flaky)
    spec = ProcessSpec.poisson(1 / 625, Region.square(500), seed=2)
    est = estimate_capacity(spec, channel, 20)
    assert est.failures == 1 and est.failure_rate == 0.05
    assert np.isnan(est.areas).sum() == 1


def test_failure_rate_abort(channel, monkeypatch):
    def broken(*args):
        raise NoClosure("synthetic")

    monkeypatch.setattr(capmod, "trace_contour", broken)
    spec = ProcessSpec.poisson(1 / 625, Region.square(500))
    with pytest.raises(FailureRateExceeded):
        estimate_capacity(spec, channel, 5)


def test_received_counts_brute_force(channel):
    spec = ProcessSpec.poisson(1 / 625, Region.square(300), seed=4)
    tset = spec.generate(0)
    probes = np.random.default_rng(0).uniform(-100, 100, (60, 2))
    counts = received_counts(tset, probes, channel)
    brute = [sum(sir_at(z, i, tset, 4.0) >= 10.0 for i in range(len(tset))) for z in probes]
    assert list(counts) == brute
    assert set(counts) <= {0, 1}


def test_received_counts_below_unit_beta():
    pts = np.array([[0.0, 0.0], [10.0, 0.0]])
    from localcap import TransmitterSet
    tset = TransmitterSet(pts, Region.square(100))
    # at the midpoint both have SIR 1
    assert received_counts(tset, [[5.0, 3.0]], ChannelParams(0.9, 4.0))[0] == 2


def test_en_identity_small_coloring(channel):
    spec = ProcessSpec.coloring(25.0, Region.square(800), seed=21)
    cache = SampleCache()
    est = estimate_capacity(spec, channel, 40, cache=cache)
    en = estimate_en_direct(spec, channel, 40, 300, cache=cache)
    assert len(cache) == 40
    assert en.max_count <= 1
    assert abs(est.capacity - en.mean_n) <= 2 * (est.stderr_capacity + en.stderr)


@pytest.mark.parametrize("k, ratio", [(1.0, 1.0), (2.0, 4.0), (0.5, 0.25)])
def test_homothety_check(channel, k, ratio):
    spec = ProcessSpec.grid("square", 25.0, Region.square(2000))
    rep = homothety_check(spec, channel, k)
    assert rep.ok
    assert rep.area_ratio == pytest.approx(ratio, rel=1e-3)
    assert rep.capacity_ratio == pytest.approx(1.0, rel=1e-3)
    if k == 1.0:
        assert rep.area_ratio == 1.0


def test_result_rows(tmp_path, channel):
    spec = ProcessSpec.grid("square", 25.0, Region.square(2000))
    est = estimate_capacity(spec, channel, 1)
    row = result_row(est, version="test")
    assert list(row) == RESULT_FIELDS
    p = tmp_path / "r.csv"
    write_results([row], p, comments=["provenance line"])
    lines = p.read_text().splitlines()
    assert lines[0] == "# provenance line" and lines[1] == ",".join(RESULT_FIELDS)
    assert float(lines[2].split(",")[7]) == pytest.approx(est.capacity)


def test_samples_validated(channel):
    with pytest.raises(ValueError):
        estimate_capacity(ProcessSpec.poisson(1e-3, Region.square(500)), channel, 0)
