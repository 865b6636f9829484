import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.spatial.distance import directed_hausdorff

from localcap import (ChannelParams, GridKind, NoClosure, NoPositiveRoot, Region, TraceConfig,
                      boundary_start, covers, first_guess_radius, gen_grid, newton_start,
                      sir_at, sir_many, trace_contour)
from localcap.reception import shoelace_area, write_contour

K4 = 10 ** 0.25


def apollonius_area(d, beta, alpha):
    # SIR >= beta with one interferer is a disc of radius k d / (k^2 - 1), k = beta**(1/alpha)
    k = beta ** (1 / alpha)
    return math.pi * (k * d / (k * k - 1)) ** 2


@pytest.fixture(scope="module")
def square_grid():
    return gen_grid(GridKind("square", 25.0), (0, 0), Region.square(2000))


@pytest.fixture(scope="module")
def square_contour(square_grid):
    ch = ChannelParams(10.0, 4.0)
    return trace_contour(square_grid, square_grid.nearest_to((0, 0)), ch)


def test_first_guess_appendix_value():
    r = first_guess_radius(25.0, 10.0, 4.0, 0.0)
    assert r == pytest.approx(8.99837, abs=1e-4)
    assert (25.0 - r) / r == pytest.approx(K4, abs=1e-12)


def test_first_guess_near_unit_threshold():
    assert first_guess_radius(25.0, 1.0 + 1e-10, 4.0) == pytest.approx(12.5, rel=1e-6)


def test_first_guess_needs_beta_above_one():
    with pytest.raises(NoPositiveRoot):
        first_guess_radius(25.0, 1.0, 4.0)


@given(st.floats(0.01, 1e4), st.floats(1.01, 1e3), st.floats(2.1, 50.0),
       st.sampled_from([0.0, math.pi / 6]))
def test_first_guess_homogeneous(k, beta, alpha, angle):
    r1 = first_guess_radius(25.0, beta, alpha, angle)
    assert first_guess_radius(25.0 * k, beta, alpha, angle) == pytest.approx(k * r1, rel=1e-12)
    assert 0 < r1 < 25.0


def test_newton_two_nodes_is_first_guess(two_nodes, channel):
    p, it = newton_start(two_nodes, 0, channel, full_output=True)
    assert p.x == pytest.approx(25.0 / (1 + K4), rel=1e-12) and p.y == 0.0
    assert it <= 1
    assert sir_at(p, 0, two_nodes, 4.0) == pytest.approx(10.0, rel=1e-10)


@pytest.mark.parametrize("lattice", ["square", "triangular", "hexagonal"])
def test_newton_on_grids(lattice, channel):
    kind = GridKind(lattice, 25.0)
    ts = gen_grid(kind, (0, 0), Region.square(1000))
    i = ts.nearest_to((0, 0))
    for direction in (None, (1.0, 0.0)):
        p, it = newton_start(ts, i, channel, direction=direction, full_output=True)
        assert it <= 8
        assert abs(sir_at(p, i, ts, 4.0) / 10.0 - 1) <= 1e-8


def test_bisection_bootstrap_for_unit_beta(square_grid):
    ch = ChannelParams(1.0, 4.0)
    i = square_grid.nearest_to((0, 0))
    p = boundary_start(square_grid, i, ch)
    assert sir_at(p, i, square_grid, 4.0) == pytest.approx(1.0, rel=1e-8)


def test_square_contour_closes(square_contour):
    c = square_contour
    assert c.closed and c.area > 0
    assert c.area_mismatch <= 0.005
    assert c.step == pytest.approx(0.01)
    # the closing step lands within 1.5 dt of the start, one step past the last vertex
    assert np.hypot(*(c.vertices[-1] - c.vertices[0])) < 2.5 * c.step


def test_square_contour_level_set(square_grid, square_contour):
    i = square_contour.meta["index"]
    s = sir_many(square_contour.vertices[::7], i, square_grid, 4.0)
    assert np.max(np.abs(s / 10.0 - 1)) <= 1e-2


def rotated(v, centre, angle):
    c, s = math.cos(angle), math.sin(angle)
    rel = v - centre
    return centre + rel @ np.array([[c, s], [-s, c]])


def hausdorff(a, b):
    return max(directed_hausdorff(a, b)[0], directed_hausdorff(b, a)[0])


def test_square_contour_fourfold_symmetry(square_contour):
    v = square_contour.vertices
    z = np.array(square_contour.transmitter)
    assert hausdorff(v, rotated(v, z, math.pi / 2)) <= 2 * square_contour.step


def test_triangular_contour_sixfold_symmetry(channel):
    ts = gen_grid(GridKind("triangular", 25.0), (0, 0), Region.square(2000))
    c = trace_contour(ts, ts.nearest_to((0, 0)), channel)
    z = np.array(c.transmitter)
    assert hausdorff(c.vertices, rotated(c.vertices, z, math.pi / 3)) <= 2 * c.step


def test_two_node_oval_matches_apollonius(two_nodes, channel):
    c = trace_contour(two_nodes, 0, channel)
    assert c.area == pytest.approx(apollonius_area(25.0, 10.0, 4.0), rel=1e-3)
    assert c.shoelace_area == pytest.approx(c.area, rel=1e-3)
    s = sir_many(c.vertices[::5], 0, two_nodes, 4.0)
    assert np.max(np.abs(s / 10.0 - 1)) <= 1e-3


@pytest.mark.parametrize("beta, alpha", [(2.0, 3.0), (100.0, 6.0), (10.0, 50.0)])
def test_apollonius_other_channels(two_nodes, beta, alpha):
    c = trace_contour(two_nodes, 0, ChannelParams(beta, alpha))
    assert c.area == pytest.approx(apollonius_area(25.0, beta, alpha), rel=2e-3)


@pytest.mark.parametrize("k", [0.5, 2.0])
def test_homothety(square_grid, square_contour, channel, k):
    scaled = square_grid.scaled(k)
    c = trace_contour(scaled, square_contour.meta["index"], channel)
    assert c.area / square_contour.area == pytest.approx(k * k, rel=1e-3)


def test_translation_invariance(square_grid, square_contour, channel):
    moved = square_grid.translated((1234.5, -987.25))
    c = trace_contour(moved, square_contour.meta["index"], channel)
    assert c.area == pytest.approx(square_contour.area, rel=1e-10)
    assert np.allclose(c.vertices - [1234.5, -987.25], square_contour.vertices, atol=1e-8)


def test_far_field_expansion_matches_exact_sum(square_grid, square_contour, channel):
    exact = trace_contour(square_grid, square_contour.meta["index"], channel,
                          TraceConfig(far_field=False))
    assert exact.area == pytest.approx(square_contour.area, rel=1e-6)


def test_step_refinement_converges(square_grid, square_contour, channel):
    i = square_contour.meta["index"]
    areas = [trace_contour(square_grid, i, channel, TraceConfig(dt=dt)).area
             for dt in (0.04, 0.02, 0.01)]
    d1, d2 = abs(areas[0] - areas[1]), abs(areas[1] - areas[2])
    assert d2 <= d1 + 1e-9
    assert abs(areas[2] - square_contour.area) < 1e-6 * square_contour.area + d2


def test_euler_without_corrector_still_closes(square_grid, square_contour, channel):
    c = trace_contour(square_grid, square_contour.meta["index"], channel,
                      TraceConfig(corrector=False))
    assert c.area == pytest.approx(square_contour.area, rel=0.02)


def test_no_closure_when_steps_run_out(two_nodes, channel):
    with pytest.raises(NoClosure):
        trace_contour(two_nodes, 0, channel, TraceConfig(max_steps=50))


def test_config_validation():
    with pytest.raises(ValueError):
        TraceConfig(dt=0)
    with pytest.raises(ValueError):
        TraceConfig(max_steps=2)


def test_covers(square_contour):
    c = square_contour
    assert covers(c, c.transmitter)
    assert not covers(c, (1e5, 1e5))
    assert covers(c, c.vertices[17])
    z = np.array(c.transmitter)
    assert not covers(c, z + [12.4, 0.0])


def test_shoelace_unit_square():
    assert shoelace_area([[0, 0], [1, 0], [1, 1], [0, 1]]) == 1.0
    assert shoelace_area([[0, 0], [0, 1], [1, 1], [1, 0]]) == -1.0


def test_contour_export(tmp_path, two_nodes, channel):
    c = trace_contour(two_nodes, 0, channel, TraceConfig(dt=0.05))
    csv_path, side = write_contour(c, tmp_path / "oval.csv")
    data = np.loadtxt(csv_path, delimiter=",", skiprows=1)
    assert np.array_equal(data, c.vertices)
    meta = json.loads(side.read_text())
    assert meta["area"] == c.area and meta["steps"] == c.steps and meta["dt"] == 0.05
