import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from stkde.core import (
    DensityVolume,
    DomainError,
    VoxelIndex,
    as_points,
    invariant_planes,
    kernel_spatial,
    kernel_temporal,
    make_grid,
    point_to_voxel,
    points_to_voxels,
    voxel_center,
)


@pytest.mark.parametrize(
    "u, v, expected",
    [(0, 0, math.pi / 2), (1, 0, 0.0), (0.5, 0.5, math.pi / 32)],
)
def test_kernel_spatial(u, v, expected):
    assert kernel_spatial(u, v) == pytest.approx(expected, rel=1e-15, abs=0)


@pytest.mark.parametrize("w, expected", [(0, 0.75), (1, 0.0), (0.5, 0.1875)])
def test_kernel_temporal(w, expected):
    assert kernel_temporal(w) == expected


unit = st.floats(0, 1)


@given(unit, unit, unit, unit)
def test_kernels_nonnegative_and_monotone(u1, u2, v, w):
    lo, hi = min(u1, u2), max(u1, u2)
    assert kernel_spatial(hi, v) <= kernel_spatial(lo, v)
    assert kernel_spatial(v, hi) <= kernel_spatial(v, lo)
    assert kernel_temporal(hi) <= kernel_temporal(lo)
    assert kernel_spatial(u1, v) >= 0 and kernel_temporal(w) >= 0


def test_make_grid_dengue_shape():
    g = make_grid((0, 0, 0), (14800, 19400, 728), 100, 1, 300, 1)
    assert g.shape == (148, 194, 728)
    assert g.Hs == 3
    assert g.Ht == 1


def test_make_grid_ceil():
    assert make_grid((0, 0, 0), (10, 10, 10), 3, 3, 1, 1).shape == (4, 4, 4)


@pytest.mark.parametrize(
    "field, kwargs",
    [
        ("sres", dict(sres=0)),
        ("tres", dict(tres=-1)),
        ("hs", dict(hs=0)),
        ("ht", dict(ht=float("nan"))),
        ("extent_y", dict(extent=(1, 0, 1))),
    ],
)
def test_make_grid_rejects_nonpositive(field, kwargs):
    args = dict(origin=(0, 0, 0), extent=(1, 1, 1), sres=0.1, tres=0.1, hs=0.2, ht=0.2)
    args.update(kwargs)
    with pytest.raises(ValueError, match=field):
        make_grid(**args)


@given(st.floats(0.01, 10), st.floats(0.001, 5), st.floats(0.5, 1.0))
def test_make_grid_monotone_in_resolution(extent, sres, shrink):
    a = make_grid((0, 0, 0), (extent, extent, extent), sres, 1, 1, 1)
    b = make_grid((0, 0, 0), (extent, extent, extent), sres * shrink, 1, 1, 1)
    assert b.Gx >= a.Gx


def test_point_to_voxel_examples():
    g = make_grid((0, 0, 0), (400, 400, 10), 100, 1, 100, 1)
    assert point_to_voxel((250, 0, 0), g).X == 2
    assert point_to_voxel((0, 0, 0), g).X == 0
    assert point_to_voxel((math.nextafter(400, 0), 0, 0), g).X == 3


def test_point_to_voxel_upper_edge_clamps():
    # (x - x0) / sres rounds up to exactly Gx for the largest x below the edge
    g = make_grid((0, 0, 0), (7, 1, 1), 0.7, 1, 1, 1)
    x = math.nextafter(7.0, 0)
    assert math.floor(x / 0.7) == g.Gx
    assert point_to_voxel((x, 0, 0), g).X == g.Gx - 1


def test_point_to_voxel_out_of_domain():
    g = make_grid((0, 0, 0), (1, 1, 1), 0.1, 0.1, 0.2, 0.2)
    with pytest.raises(DomainError):
        point_to_voxel((1.0, 0.5, 0.5), g)
    with pytest.raises(DomainError):
        points_to_voxels([[0.5, -0.1, 0.5]], g)


def test_voxel_center_examples():
    g = make_grid((0, 0, 0), (1000, 1000, 10), 100, 1, 100, 1)
    assert voxel_center((0, 0, 2), g)[0] == 50
    assert voxel_center((0, 0, 2), g)[2] == 2.5
    g2 = make_grid((10, 0, 0), (5, 5, 5), 0.5, 1, 1, 1)
    assert voxel_center((3, 0, 0), g2)[0] == 11.75


@given(
    st.integers(1, 40), st.integers(1, 40), st.integers(1, 40),
    st.floats(0.01, 100), st.floats(0.01, 100), st.floats(-1e3, 1e3),
    st.data(),
)
def test_center_maps_back_to_voxel(Gx, Gy, Gt, sres, tres, x0, data):
    g = make_grid((x0, -x0, 0.5 * x0), (Gx * sres, Gy * sres, Gt * tres), sres, tres, 1, 1)
    X = data.draw(st.integers(0, g.Gx - 1))
    Y = data.draw(st.integers(0, g.Gy - 1))
    T = data.draw(st.integers(0, g.Gt - 1))
    assert point_to_voxel(voxel_center((X, Y, T), g), g) == VoxelIndex(X, Y, T)


def test_points_to_voxels_matches_scalar():
    g = make_grid((-1, 2, 0), (3, 2, 5), 0.3, 0.7, 1, 1)
    rng = np.random.default_rng(0)
    pts = np.asarray(g.origin) + rng.random((200, 3)) * np.asarray(g.extent)
    vec = points_to_voxels(pts, g)
    for p, v in zip(pts, vec):
        assert tuple(v) == tuple(point_to_voxel(p, g))


def test_as_points_validation():
    assert as_points([]).shape == (0, 3)
    with pytest.raises(ValueError):
        as_points([[0, 0]])
    with pytest.raises(ValueError):
        as_points([[0, 0, np.inf]])


def test_density_volume_layout():
    g = make_grid((0, 0, 0), (2, 3, 4), 1, 1, 1, 1)
    vol = DensityVolume(g, np.arange(24, dtype=float).reshape(2, 3, 4))
    assert vol.values.ravel()[vol.linear_index(1, 2, 3)] == vol.values[1, 2, 3]
    with pytest.raises(ValueError):
        DensityVolume(g, np.zeros((2, 3)))


def test_invariant_planes_gate_and_center_weight():
    g = make_grid((0, 0, 0), (9, 9, 9), 1, 1, 2.5, 1.5)
    planes = invariant_planes((4.5, 4.5, 4.5), g)
    assert planes.Ks.shape == (7, 7) and planes.Kt.shape == (5,)
    assert planes.Ks[3, 3] == pytest.approx((math.pi / 2) / (2.5**2 * 1.5))
    assert planes.Kt[2] == 0.75
    # corners are 3 voxels away along both axes: distance 4.24 > 2.5
    assert planes.Ks[0, 0] == 0.0
    assert planes.Kt[0] == 0.0  # |dt| = 2 > 1.5
    assert (planes.Ks >= 0).all() and (planes.Kt >= 0).all()
