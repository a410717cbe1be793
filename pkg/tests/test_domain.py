import numpy as np
import pytest

from stkde.core import make_grid, points_to_voxels
from stkde.decomposition import (
    Decomposition,
    adjust_decomposition,
    bucket_indices,
    parse_decomposition,
)
from stkde.domain import (
    MemoryBudgetError,
    assign_points_dd,
    dr_memory_estimate,
    run_pb_sym_dd,
    run_pb_sym_dr,
)
from stkde.sequential import run_pb_sym, run_vb

from _instances import Instance, rel_diff

INST = Instance("c32", (32, 32, 32), 500, 3, 2, clusters=3, sigma=0.1)


@pytest.fixture(scope="module")
def inst():
    pts, g = INST.points(), INST.grid()
    ref, _ = run_vb(pts, g)
    return pts, g, ref


@pytest.mark.parametrize("G, k", [(10, 3), (148, 4), (7, 7), (32, 5), (5, 1)])
def test_ranges_partition_axis_and_match_bucketing(G, k):
    dec = Decomposition(k, 1, 1, (G, 1, 1))
    bounds = dec.axis_bounds(0)
    assert bounds[0] == 0 and bounds[-1] == G
    assert np.all(np.diff(bounds) >= 1)
    X = np.arange(G)
    vox = np.column_stack([X, np.zeros(G, int), np.zeros(G, int)])
    owner = bucket_indices(vox, dec)[:, 0]
    for a in range(k):
        assert set(X[owner == a]) == set(range(bounds[a], bounds[a + 1]))


def test_bucket_example():
    dec = Decomposition(4, 1, 1, (148, 1, 1))
    assert bucket_indices(np.array([[147, 0, 0]]), dec)[0, 0] == 3


def test_regions_cover_grid_once():
    dec = Decomposition(3, 2, 4, (10, 7, 9))
    hits = np.zeros(dec.shape, int)
    for s in range(dec.n_subdomains):
        lo, hi = dec.region(s)
        hits[lo[0]:hi[0], lo[1]:hi[1], lo[2]:hi[2]] += 1
    assert (hits == 1).all()


def test_parse_and_validate_decomposition():
    assert parse_decomposition("2x3x4", (8, 8, 8)).counts == (2, 3, 4)
    with pytest.raises(ValueError):
        parse_decomposition("2x3", (8, 8, 8))
    with pytest.raises(ValueError):
        parse_decomposition("9x1x1", (8, 8, 8))
    with pytest.raises(ValueError):
        Decomposition(0, 1, 1, (8, 8, 8))


def test_adjust_decomposition_example():
    g = make_grid((0, 0, 0), (32, 32, 32), 1, 1, 3.5, 0.5)
    assert g.Hs == 4
    dec = adjust_decomposition(Decomposition(8, 8, 8, g.shape), g)
    assert dec.counts == (3, 3, 8)


def brute_force_lists(vox, g, dec):
    H = (g.Hs, g.Hs, g.Ht)
    out = []
    for s in range(dec.n_subdomains):
        lo, hi = dec.region(s)
        rows = []
        for i, v in enumerate(vox):
            if all(max(v[k] - H[k], 0) < hi[k] and min(v[k] + H[k], g.shape[k] - 1) >= lo[k]
                   for k in range(3)):
                rows.append(i)
        out.append(rows)
    return out


@pytest.mark.parametrize("counts", [(1, 1, 1), (2, 3, 1), (4, 4, 4), (5, 2, 7)])
def test_assign_points_matches_brute_force(inst, counts):
    pts, g, _ = inst
    pts = pts[:120]
    vox = points_to_voxels(pts, g)
    dec = Decomposition(*counts, g.shape)
    got = assign_points_dd(pts, g, dec)
    want = brute_force_lists(vox, g, dec)
    assert [list(l) for l in got] == want


def test_straddling_point_in_two_subdomains():
    g = make_grid((0, 0, 0), (16, 16, 16), 1, 1, 1.5, 0.5)
    dec = Decomposition(2, 1, 1, g.shape)
    lists = assign_points_dd([(7.5, 2.5, 8.5)], g, dec)
    assert [len(l) for l in lists] == [1, 1]
    lists = assign_points_dd([(3.5, 2.5, 8.5)], g, dec)
    assert [len(l) for l in lists] == [1, 0]


def test_dr_single_thread_bitwise(inst):
    pts, g, _ = inst
    a, _ = run_pb_sym(pts, g)
    b, stats = run_pb_sym_dr(pts, g, threads=1)
    assert np.array_equal(a.values, b.values)
    assert stats.counters == run_pb_sym(pts, g)[1]


@pytest.mark.parametrize("P", [2, 3, 4])
def test_dr_equivalence(inst, P):
    pts, g, ref = inst
    vol, stats = run_pb_sym_dr(pts, g, threads=P)
    assert rel_diff(vol, ref) <= 1e-12
    again, _ = run_pb_sym_dr(pts, g, threads=P)
    assert np.array_equal(vol.values, again.values)


def test_dr_memory_refusal_large_instance():
    # a 581 x 1536 x 5951 grid
    g = make_grid((0, 0, 0), (581, 1536, 5951), 1, 1, 1, 1)
    assert g.shape == (581, 1536, 5951)
    assert dr_memory_estimate(g, 8) > 128 * 2**30
    with pytest.raises(MemoryBudgetError):
        run_pb_sym_dr(np.empty((0, 3)), g, threads=8, mem_budget=128 * 2**30)


def test_dd_trivial_decomposition_bitwise(inst):
    pts, g, _ = inst
    a, ca = run_pb_sym(pts, g)
    b, stats = run_pb_sym_dd(pts, g, (1, 1, 1))
    assert np.array_equal(a.values, b.values)
    assert stats.work_overhead_ratio == 1.0
    assert stats.replication_factor == 1.0


@pytest.mark.parametrize("counts", [(2, 2, 2), (4, 4, 4), (8, 8, 8), (3, 1, 5)])
def test_dd_equivalence(inst, counts):
    pts, g, ref = inst
    vol, stats = run_pb_sym_dd(pts, g, counts, threads=3)
    assert rel_diff(vol, ref) <= 1e-12
    assert stats.work_overhead_ratio >= 1.0


def test_dd_thread_independent(inst):
    pts, g, _ = inst
    a, sa = run_pb_sym_dd(pts, g, (4, 4, 4), threads=1)
    b, sb = run_pb_sym_dd(pts, g, (4, 4, 4), threads=4)
    assert np.array_equal(a.values, b.values)
    assert sa.counters == sb.counters


def test_dd_replication_bounded_when_subdomains_wide(inst):
    pts, g, _ = inst
    dec = adjust_decomposition(Decomposition(8, 8, 8, g.shape), g)
    _, stats = run_pb_sym_dd(pts, g, dec)
    assert 1.0 <= stats.replication_factor <= 8.0
