import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.spatial import cKDTree

from localcap import (GridKind, Lattice, ProcessSpec, Region, RegionTooSmall, gen_coloring,
                      gen_csma, gen_grid, gen_poisson, packing_density)
from localcap.point_processes import read_csv, replay_csma, write_csv


def nn_distances(pts):
    d, _ = cKDTree(pts).query(pts, k=2)
    return d[:, 1]


@pytest.mark.parametrize("lattice, neighbours", [("square", 4), ("triangular", 6),
                                                 ("hexagonal", 3)])
def test_lattice_spacing_and_coordination(lattice, neighbours):
    ts = gen_grid(GridKind(lattice, 25.0), (0, 0), Region.square(500))
    inner = ts.points[np.all(np.abs(ts.points) < 150, axis=1)]
    tree = cKDTree(ts.points)
    for z in inner[:20]:
        assert len(tree.query_ball_point(z, 25.0 + 1e-6)) - 1 == neighbours
    assert nn_distances(ts.points).min() == pytest.approx(25.0, rel=1e-12)


def test_square_grid_count_is_exact():
    ts = gen_grid(GridKind("square", 25.0), (0, 0), Region.square(2000))
    assert len(ts) == 6400


@pytest.mark.parametrize("lattice, expected", [
    ("square", 1 / 625), ("triangular", 2 / (math.sqrt(3) * 625)),
    ("hexagonal", 4 / (3 * math.sqrt(3) * 625))])
def test_lattice_density(lattice, expected):
    kind = GridKind(lattice, 25.0)
    assert kind.density == pytest.approx(expected, rel=1e-14)
    ts = gen_grid(kind, (3.0, 7.0), Region.square(2000))
    assert ts.density == pytest.approx(expected, rel=0.02)


def test_hexagonal_corner_angle():
    assert GridKind(Lattice.hexagonal, 1.0).corner_angle == pytest.approx(math.pi / 6)
    assert GridKind(Lattice.square, 1.0).corner_angle == 0.0


def test_region_too_small():
    with pytest.raises(RegionTooSmall):
        gen_grid(GridKind("square", 25.0), (0, 0), Region.square(100))


@settings(max_examples=15)
@given(st.floats(-100, 100), st.floats(-100, 100))
def test_grid_offset_is_a_translation(ox, oy):
    kind = GridKind("triangular", 25.0)
    a = gen_grid(kind, (0, 0), Region.square(600)).points
    b = gen_grid(kind, (ox, oy), Region.square(600)).points
    # every interior offset site is a lattice site shifted by the reduced offset
    off = b[np.argmin(np.sum(b ** 2, axis=1))]
    d, _ = cKDTree(a).query(b[np.all(np.abs(b) < 250, axis=1)] - off)
    assert d.max() < 1e-9


def test_poisson_count_and_seed():
    r = Region.square(1000)
    a = gen_poisson(1e-3, r, 5)
    b = gen_poisson(1e-3, r, 5)
    assert np.array_equal(a.points, b.points)
    assert abs(len(a) - 1000) < 5 * math.sqrt(1000)
    a.validate()


def test_coloring_is_hard_core_and_saturated():
    r = Region.square(600)
    ts = gen_coloring(25.0, r, 11)
    ts.validate()
    assert nn_distances(ts.points).min() >= 25.0
    # saturation: no location of the map can take another transmitter
    probes = np.random.default_rng(0).uniform(-300, 300, (20000, 2))
    d, _ = cKDTree(ts.points).query(probes)
    assert d.max() < 25.0
    assert ts.meta["dropped_cells"] == 0


def test_coloring_rejection_rule_undersaturates():
    r = Region.square(600)
    full = gen_coloring(25.0, r, 2)
    capped = gen_coloring(25.0, r, 2, max_rejections=2000)
    assert nn_distances(capped.points).min() >= 25.0
    assert len(capped) < len(full)


def test_coloring_reproducible():
    r = Region.square(500)
    assert np.array_equal(gen_coloring(25.0, r, 3).points, gen_coloring(25.0, r, 3).points)
    assert not np.array_equal(gen_coloring(25.0, r, 3).points, gen_coloring(25.0, r, 4).points)


def test_coloring_packing_density_band():
    vals = [packing_density(gen_coloring(25.0, Region.square(1000), s), 25.0) for s in range(5)]
    assert 0.52 <= np.mean(vals) <= 0.58


def test_csma_rule_replays_exactly():
    ts, log = gen_csma(1e-5, Region.square(400), 1, 4.0, return_log=True)
    assert log.accepted.sum() == len(ts)
    assert np.array_equal(replay_csma(log, 1e-5, 4.0), log.accepted)
    assert np.array_equal(log.points[log.accepted], ts.points)


def test_csma_separation_and_saturation():
    theta, alpha = 1e-5, 4.0
    ts = gen_csma(theta, Region.square(600), 9, alpha)
    r0 = theta ** (-1 / alpha)
    assert nn_distances(ts.points).min() >= r0 * (1 - 1e-12)
    probes = np.random.default_rng(1).uniform(-300, 300, (5000, 2))
    d2 = np.sum((probes[:, None, :] - ts.points[None]) ** 2, axis=2)
    sensed = np.sum(d2 ** (-alpha / 2), axis=1)
    assert sensed.min() >= theta


@pytest.mark.parametrize("alpha", [3.0, 20.0])
def test_csma_other_exponents(alpha):
    theta = 25.0 ** -alpha
    ts = gen_csma(theta, Region.square(500), 0, alpha)
    assert nn_distances(ts.points).min() >= 25.0 * (1 - 1e-12)
    probes = np.random.default_rng(2).uniform(-250, 250, (3000, 2))
    d2 = np.sum((probes[:, None, :] - ts.points[None]) ** 2, axis=2) / 625.0
    assert np.sum(d2 ** (-alpha / 2), axis=1).min() >= 1.0 - 1e-12


def test_csma_needs_alpha_above_two():
    with pytest.raises(ValueError):
        gen_csma(1e-5, Region.square(400), 0, 2.0)


def test_spec_streams_depend_on_seed_and_sample(desk_region):
    spec = ProcessSpec.coloring(25.0, Region.square(500), seed=4)
    a, b = spec.generate(3), spec.generate(3)
    assert np.array_equal(a.points, b.points)
    assert not np.array_equal(a.points, spec.generate(4).points)


def test_grid_spec_randomises_offset_after_sample_zero():
    spec = ProcessSpec.grid("square", 25.0, Region.square(600), seed=1)
    assert spec.generate(0).meta["offset"] == (0.0, 0.0)
    assert spec.generate(1).meta["offset"] != (0.0, 0.0)


def test_spec_scaling():
    spec = ProcessSpec.csma(1e-5, Region.square(500))
    s2 = spec.scaled(2.0, alpha=4.0)
    assert s2.theta == pytest.approx(1e-5 / 16)
    assert s2.region.width == 1000
    with pytest.raises(ValueError):
        spec.scaled(2.0)


def test_csv_round_trip(tmp_path):
    ts = gen_coloring(25.0, Region.square(300), 8)
    p = tmp_path / "set.csv"
    write_csv(ts, p)
    back = read_csv(p)
    assert np.array_equal(back.points, ts.points)
    assert back.region == ts.region and back.seed == 8 and back.scheme_label == "coloring"
