import math

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from stkde.core import (
    kernel_spatial,
    kernel_temporal,
    make_grid,
    points_to_voxels,
    voxel_center,
)
from stkde.sequential import (
    SEQUENTIAL,
    run_pb,
    run_pb_bar,
    run_pb_disk,
    run_pb_sym,
    run_vb,
    run_vb_dec,
    vb_dec_bins,
)

from _instances import Instance, rel_diff

POINT_BASED = [run_vb_dec, run_pb, run_pb_disk, run_pb_bar, run_pb_sym]


def brute_force_density(points, g):
    """Direct evaluation of the estimator in plain Python."""
    n = len(points)
    out = np.zeros(g.shape)
    for X in range(g.Gx):
        for Y in range(g.Gy):
            for T in range(g.Gt):
                x, y, t = voxel_center((X, Y, T), g)
                s = 0.0
                for px, py, pt in points:
                    dx, dy, dt = abs(x - px), abs(y - py), abs(t - pt)
                    if math.hypot(dx, dy) < g.hs and dt <= g.ht:
                        s += kernel_spatial(dx / g.hs, dy / g.hs) * kernel_temporal(dt / g.ht)
                out[X, Y, T] = s / (n * g.hs**2 * g.ht) if n else 0.0
    return out


@pytest.fixture(scope="module")
def small():
    g = make_grid((0, 0, 0), (1.0, 0.75, 1.25), 0.125, 0.25, 0.3, 0.6)
    rng = np.random.default_rng(5)
    pts = rng.random((12, 3)) * np.asarray(g.extent) * 0.999
    return pts, g


def test_vb_matches_plain_python(small):
    pts, g = small
    vol, _ = run_vb(pts, g)
    assert rel_diff(vol, brute_force_density(pts, g)) <= 1e-14


@pytest.mark.parametrize("algo", [run_vb, *POINT_BASED])
def test_empty_point_set_gives_zeros(algo):
    g = make_grid((0, 0, 0), (1, 1, 1), 0.125, 0.125, 0.3, 0.3)
    vol, cnt = algo(np.empty((0, 3)), g)
    assert vol.values.shape == (8, 8, 8)
    assert not vol.values.any()
    assert cnt.voxel_updates in (0, 512)


@pytest.mark.parametrize("algo", [run_vb, *POINT_BASED])
def test_single_point_at_voxel_center(algo):
    g = make_grid((0, 0, 0), (9, 9, 9), 1, 1, 2.5, 1.5)
    vol, _ = algo([(4.5, 4.5, 4.5)], g)
    expected = (3 * math.pi / 8) / (g.hs**2 * g.ht)
    assert vol.values[4, 4, 4] == pytest.approx(expected, rel=1e-15)


def test_vb_counter_formula():
    g = make_grid((0, 0, 0), (8, 8, 8), 1, 1, 1.5, 1.5)
    pts = np.random.default_rng(0).random((10, 3)) * 7.99
    _, cnt = run_vb(pts, g)
    assert cnt.distance_tests == 8 * 8 * 8 * 10 == 5120


def test_vb_dec_bitwise_equal_to_vb():
    inst = Instance("t", (16, 16, 16), 100, 2, 3, clusters=3, sigma=0.1)
    pts, g = inst.points(), inst.grid()
    a, ca = run_vb(pts, g)
    b, cb = run_vb_dec(pts, g)
    assert np.array_equal(a.values, b.values)
    assert cb.distance_tests < ca.distance_tests


def test_vb_dec_single_point_tests_only_neighbor_bins():
    g = make_grid((0, 0, 0), (32, 32, 32), 1, 1, 1.5, 1.5)
    assert (g.Hs, g.Ht) == (2, 2)
    p = np.array([[16.3, 9.1, 30.7]])
    _, cnt = run_vb_dec(p, g)
    # independent count: voxels whose (2, 2, 2)-bin is within one bin of the point's
    pb = np.floor(p[0] / 2).astype(int)
    count = 1
    for axis in range(3):
        nb = 16
        count *= sum(1 for b in range(nb) if abs(b - pb[axis]) <= 1) * 2
    assert cnt.distance_tests == count
    assert count < 32**3


def test_vb_dec_bins_preserve_input_order():
    g = make_grid((0, 0, 0), (1, 1, 1), 0.1, 0.1, 0.25, 0.25)
    pts = np.random.default_rng(1).random((300, 3)) * 0.999
    bins, start, order = vb_dec_bins(points_to_voxels(pts, g), g)
    for b in range(len(start) - 1):
        members = order[start[b]:start[b + 1]]
        assert np.all(np.diff(members) > 0)
    assert sorted(order) == list(range(300))


def interior_point(g):
    return np.array([voxel_center((g.Gx // 2, g.Gy // 2, g.Gt // 2), g)]) + 0.1


def test_pb_iterations_interior():
    g = make_grid((0, 0, 0), (20, 20, 20), 1, 1, 2.5, 0.5)
    assert (g.Hs, g.Ht) == (3, 1)
    _, cnt = run_pb(interior_point(g), g)
    assert cnt.distance_tests == 7 * 7 * 3 == 147


def test_pb_disk_and_bar_counts():
    g = make_grid((0, 0, 0), (30, 30, 30), 1, 1, 2.5, 4.5)
    assert (g.Hs, g.Ht) == (3, 5)
    p = interior_point(g)
    _, disk = run_pb_disk(p, g)
    _, bar = run_pb_bar(p, g)
    assert disk.kernel_evals_spatial == 49
    assert bar.kernel_evals_temporal == 11


def test_pb_sym_counts_interior():
    g = make_grid((0, 0, 0), (30, 30, 30), 1, 1, 3.5, 2.5)
    Hs, Ht = g.Hs, g.Ht
    rng = np.random.default_rng(2)
    pts = 12 + rng.random((25, 3)) * 6  # all boxes stay inside the grid
    _, cnt = run_pb_sym(pts, g)
    assert cnt.kernel_evals_spatial + cnt.kernel_evals_temporal == 25 * (
        (2 * Hs + 1) ** 2 + (2 * Ht + 1)
    )
    assert cnt.voxel_updates == 25 * (2 * Hs + 1) ** 2 * (2 * Ht + 1)
    _, pb = run_pb(pts, g)
    assert pb.distance_tests == 25 * (2 * Hs + 1) ** 2 * (2 * Ht + 1)


@pytest.mark.parametrize("algo", POINT_BASED)
def test_equivalence_to_vb(algo):
    inst = Instance("t", (16, 16, 16), 100, 4, 3, clusters=2, sigma=0.15)
    pts, g = inst.points(), inst.grid()
    ref, _ = run_vb(pts, g)
    vol, _ = algo(pts, g)
    assert rel_diff(vol, ref) <= 1e-12


@settings(max_examples=25, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(
    st.integers(3, 12), st.integers(3, 12), st.integers(3, 12),
    st.floats(0.05, 0.6), st.floats(0.05, 0.6),
    st.integers(0, 30), st.integers(0, 2**32 - 1),
)
def test_equivalence_property(Gx, Gy, Gt, hs, ht, n, seed):
    g = make_grid((0, 0, 0), (1, Gy / Gx, 1), 1 / Gx, 1 / Gt, hs, ht)
    pts = np.random.default_rng(seed).random((n, 3)) * np.asarray(g.extent) * 0.999
    ref, _ = run_vb(pts, g)
    for algo in POINT_BASED:
        vol, _ = algo(pts, g)
        assert rel_diff(vol, ref) <= 1e-12
        assert (vol.values >= 0).all()


def test_support_is_the_gate():
    g = make_grid((0, 0, 0), (20, 20, 20), 1, 1, 3.2, 2.2)
    p = np.array([[9.3, 11.8, 6.6]])
    for algo in (run_vb, *POINT_BASED):
        vol, _ = algo(p, g)
        for X in range(g.Gx):
            for Y in range(g.Gy):
                for T in range(g.Gt):
                    x, y, t = voxel_center((X, Y, T), g)
                    inside = math.hypot(x - 9.3, y - 11.8) < g.hs and abs(t - 6.6) <= g.ht
                    if not inside:
                        assert vol.values[X, Y, T] == 0.0


@pytest.mark.parametrize("name", list(SEQUENTIAL))
def test_reflection_symmetry(name):
    g = make_grid((0, 0, 0), (15, 15, 15), 1, 1, 4.5, 3.5)
    vol, _ = SEQUENTIAL[name]([(7.5, 7.5, 7.5)], g)
    v = vol.values
    for axis in range(3):
        flipped = np.flip(v, axis=axis)
        if name.startswith("pb"):
            assert np.array_equal(v, flipped)
        else:
            assert np.max(np.abs(v - flipped)) <= 1e-15 * max(1.0, v.max())


@pytest.mark.parametrize("name", list(SEQUENTIAL))
def test_deterministic(name):
    inst = Instance("t", (16, 16, 16), 100, 3, 2, clusters=3)
    pts, g = inst.points(), inst.grid()
    a, ca = SEQUENTIAL[name](pts, g)
    b, cb = SEQUENTIAL[name](pts, g)
    assert np.array_equal(a.values, b.values)
    assert ca == cb


def test_pb_sym_region_and_existing_volume():
    inst = Instance("t", (16, 16, 16), 50, 3, 2, clusters=2)
    pts, g = inst.points(), inst.grid()
    full, _ = run_pb_sym(pts, g)
    vol, _ = run_pb_sym(pts, g, region=((0, 0, 0), (8, 16, 16)))
    run_pb_sym(pts, g, volume=vol, region=((8, 0, 0), (16, 16, 16)))
    assert rel_diff(vol, full) <= 1e-15
    half, _ = run_pb_sym(pts, g, region=((0, 0, 0), (8, 16, 16)))
    assert not half.values[8:].any()


def test_counters_zero_for_empty_run():
    g = make_grid((0, 0, 0), (1, 1, 1), 0.5, 0.5, 0.5, 0.5)
    _, cnt = run_pb_sym(np.empty((0, 3)), g)
    assert cnt.distance_tests == cnt.kernel_evals == cnt.voxel_updates == 0
