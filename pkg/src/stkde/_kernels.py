"""Compiled inner loops shared by every algorithm.

All kernels are ``nogil`` so the drivers can run them concurrently from
plain Python threads. Geometry is passed as two small arrays::

    fp = [x0, y0, t0, sres, tres, hs, ht]      (float64)
    ip = [Gx, Gy, Gt, Hs, Ht]                  (int64)

Counters are an int64 array of length 4, see ``stats.OpCounters``.
Every kernel evaluates voxel centres, gates and kernel arguments with the
same expressions so that all algorithms agree on the geometry bit for bit.
"""

import math

import numpy as np
from numba import njit

DIST, KS, KT, UPD = 0, 1, 2, 3

_jit = dict(nogil=True, cache=True, fastmath=False)


def grid_arrays(g):
    fp = np.array(
        [g.origin[0], g.origin[1], g.origin[2], g.sres, g.tres, g.hs, g.ht],
        dtype=np.float64,
    )
    ip = np.array([g.Gx, g.Gy, g.Gt, g.Hs, g.Ht], dtype=np.int64)
    return fp, ip


@njit(inline="always", **_jit)
def _ks(u, v):
    return (math.pi / 2.0) * (1.0 - u) ** 2 * (1.0 - v) ** 2


@njit(inline="always", **_jit)
def _kt(w):
    return 0.75 * (1.0 - w) ** 2


@njit(inline="always", **_jit)
def _sgate(dx, dy, hs):
    return math.sqrt(dx * dx + dy * dy) < hs


@njit(inline="always", **_jit)
def _center(lo, idx, res):
    return lo + (idx + 0.5) * res


@njit(**_jit)
def vb(pts, fp, ip, norm, out, cnt):
    x0, y0, t0, sres, tres, hs, ht = fp[0], fp[1], fp[2], fp[3], fp[4], fp[5], fp[6]
    n = pts.shape[0]
    for X in range(ip[0]):
        cx = _center(x0, X, sres)
        for Y in range(ip[1]):
            cy = _center(y0, Y, sres)
            for T in range(ip[2]):
                ct = _center(t0, T, tres)
                s = 0.0
                for i in range(n):
                    dx = abs(cx - pts[i, 0])
                    dy = abs(cy - pts[i, 1])
                    dt = abs(ct - pts[i, 2])
                    if _sgate(dx, dy, hs) and dt <= ht:
                        s += _ks(dx / hs, dy / hs) * _kt(dt / ht)
                        cnt[KS] += 1
                        cnt[KT] += 1
                out[X, Y, T] = s / norm
    cnt[DIST] += ip[0] * ip[1] * ip[2] * n
    cnt[UPD] += ip[0] * ip[1] * ip[2]


@njit(**_jit)
def vb_dec(pts, fp, ip, bins, bin_start, bin_order, norm, out, cnt):
    x0, y0, t0, sres, tres, hs, ht = fp[0], fp[1], fp[2], fp[3], fp[4], fp[5], fp[6]
    bsx, bsy, bst = bins[0], bins[1], bins[2]
    nbx, nby, nbt = bins[3], bins[4], bins[5]
    cand = np.empty(pts.shape[0], dtype=np.int64)
    for bx in range(nbx):
        for by in range(nby):
            for bt in range(nbt):
                m = 0
                for ax in range(max(bx - 1, 0), min(bx + 2, nbx)):
                    for ay in range(max(by - 1, 0), min(by + 2, nby)):
                        for at in range(max(bt - 1, 0), min(bt + 2, nbt)):
                            b = (ax * nby + ay) * nbt + at
                            for k in range(bin_start[b], bin_start[b + 1]):
                                cand[m] = bin_order[k]
                                m += 1
                # restore input order so accumulation matches the brute force
                c = np.sort(cand[:m])
                for X in range(bx * bsx, min((bx + 1) * bsx, ip[0])):
                    cx = _center(x0, X, sres)
                    for Y in range(by * bsy, min((by + 1) * bsy, ip[1])):
                        cy = _center(y0, Y, sres)
                        for T in range(bt * bst, min((bt + 1) * bst, ip[2])):
                            ct = _center(t0, T, tres)
                            s = 0.0
                            for j in range(m):
                                i = c[j]
                                dx = abs(cx - pts[i, 0])
                                dy = abs(cy - pts[i, 1])
                                dt = abs(ct - pts[i, 2])
                                if _sgate(dx, dy, hs) and dt <= ht:
                                    s += _ks(dx / hs, dy / hs) * _kt(dt / ht)
                                    cnt[KS] += 1
                                    cnt[KT] += 1
                            out[X, Y, T] = s / norm
                            cnt[DIST] += m
                            cnt[UPD] += 1


@njit(inline="always", **_jit)
def _box(vox, i, ip, lo, hi):
    Hs, Ht = ip[3], ip[4]
    xa = max(vox[i, 0] - Hs, lo[0])
    xb = min(vox[i, 0] + Hs + 1, hi[0])
    ya = max(vox[i, 1] - Hs, lo[1])
    yb = min(vox[i, 1] + Hs + 1, hi[1])
    ta = max(vox[i, 2] - Ht, lo[2])
    tb = min(vox[i, 2] + Ht + 1, hi[2])
    return xa, xb, ya, yb, ta, tb


@njit(**_jit)
def pb(pts, vox, idx, fp, ip, norm, out, cnt):
    x0, y0, t0, sres, tres, hs, ht = fp[0], fp[1], fp[2], fp[3], fp[4], fp[5], fp[6]
    lo = np.zeros(3, dtype=np.int64)
    hi = ip[:3].copy()
    for k in range(idx.shape[0]):
        i = idx[k]
        px, py, pt = pts[i, 0], pts[i, 1], pts[i, 2]
        xa, xb, ya, yb, ta, tb = _box(vox, i, ip, lo, hi)
        for X in range(xa, xb):
            dx = abs(_center(x0, X, sres) - px)
            for Y in range(ya, yb):
                dy = abs(_center(y0, Y, sres) - py)
                for T in range(ta, tb):
                    dt = abs(_center(t0, T, tres) - pt)
                    cnt[DIST] += 1
                    if _sgate(dx, dy, hs) and dt <= ht:
                        out[X, Y, T] += (_ks(dx / hs, dy / hs) * _kt(dt / ht)) / norm
                        cnt[KS] += 1
                        cnt[KT] += 1
                        cnt[UPD] += 1


@njit(**_jit)
def pb_disk(pts, vox, idx, fp, ip, norm, out, cnt):
    x0, y0, t0, sres, tres, hs, ht = fp[0], fp[1], fp[2], fp[3], fp[4], fp[5], fp[6]
    Hs = ip[3]
    lo = np.zeros(3, dtype=np.int64)
    hi = ip[:3].copy()
    Ks = np.zeros((2 * Hs + 1, 2 * Hs + 1))
    for k in range(idx.shape[0]):
        i = idx[k]
        px, py, pt = pts[i, 0], pts[i, 1], pts[i, 2]
        xa, xb, ya, yb, ta, tb = _box(vox, i, ip, lo, hi)
        for X in range(xa, xb):
            dx = abs(_center(x0, X, sres) - px)
            for Y in range(ya, yb):
                dy = abs(_center(y0, Y, sres) - py)
                if _sgate(dx, dy, hs):
                    Ks[X - xa, Y - ya] = _ks(dx / hs, dy / hs) / norm
                else:
                    Ks[X - xa, Y - ya] = 0.0
        nxy = (xb - xa) * (yb - ya)
        cnt[DIST] += nxy
        cnt[KS] += nxy
        for X in range(xa, xb):
            for Y in range(ya, yb):
                w = Ks[X - xa, Y - ya]
                for T in range(ta, tb):
                    dt = abs(_center(t0, T, tres) - pt)
                    cnt[DIST] += 1
                    if dt <= ht:
                        out[X, Y, T] += w * _kt(dt / ht)
                        cnt[KT] += 1
                        cnt[UPD] += 1


@njit(**_jit)
def pb_bar(pts, vox, idx, fp, ip, norm, out, cnt):
    x0, y0, t0, sres, tres, hs, ht = fp[0], fp[1], fp[2], fp[3], fp[4], fp[5], fp[6]
    Ht = ip[4]
    lo = np.zeros(3, dtype=np.int64)
    hi = ip[:3].copy()
    Kt = np.zeros(2 * Ht + 1)
    for k in range(idx.shape[0]):
        i = idx[k]
        px, py, pt = pts[i, 0], pts[i, 1], pts[i, 2]
        xa, xb, ya, yb, ta, tb = _box(vox, i, ip, lo, hi)
        for T in range(ta, tb):
            dt = abs(_center(t0, T, tres) - pt)
            Kt[T - ta] = _kt(dt / ht) if dt <= ht else 0.0
        cnt[DIST] += tb - ta
        cnt[KT] += tb - ta
        for X in range(xa, xb):
            dx = abs(_center(x0, X, sres) - px)
            for Y in range(ya, yb):
                dy = abs(_center(y0, Y, sres) - py)
                for T in range(ta, tb):
                    cnt[DIST] += 1
                    if _sgate(dx, dy, hs):
                        out[X, Y, T] += (_ks(dx / hs, dy / hs) * Kt[T - ta]) / norm
                        cnt[KS] += 1
                        cnt[UPD] += 1


@njit(**_jit)
def pb_sym(pts, vox, idx, fp, ip, norm, lo, hi, off, out, cnt, trace):
    """Scatter the points ``idx`` (in order) restricted to voxels ``[lo, hi)``.

    Writes go to ``out[X - off[0], Y - off[1], T - off[2]]``. If ``trace``
    is non-empty it is indexed like ``out`` and every write increments it.
    """
    x0, y0, t0, sres, tres, hs, ht = fp[0], fp[1], fp[2], fp[3], fp[4], fp[5], fp[6]
    Hs, Ht = ip[3], ip[4]
    tracing = trace.size > 0
    Ks = np.zeros((2 * Hs + 1, 2 * Hs + 1))
    Kt = np.zeros(2 * Ht + 1)
    for k in range(idx.shape[0]):
        i = idx[k]
        xa, xb, ya, yb, ta, tb = _box(vox, i, ip, lo, hi)
        if xa >= xb or ya >= yb or ta >= tb:
            continue
        px, py, pt = pts[i, 0], pts[i, 1], pts[i, 2]
        for X in range(xa, xb):
            dx = abs(_center(x0, X, sres) - px)
            for Y in range(ya, yb):
                dy = abs(_center(y0, Y, sres) - py)
                if _sgate(dx, dy, hs):
                    Ks[X - xa, Y - ya] = _ks(dx / hs, dy / hs) / norm
                else:
                    Ks[X - xa, Y - ya] = 0.0
        for T in range(ta, tb):
            dt = abs(_center(t0, T, tres) - pt)
            Kt[T - ta] = _kt(dt / ht) if dt <= ht else 0.0
        nxy = (xb - xa) * (yb - ya)
        nt = tb - ta
        cnt[DIST] += nxy + nt
        cnt[KS] += nxy
        cnt[KT] += nt
        cnt[UPD] += nxy * nt
        t0o = ta - off[2]
        for X in range(xa, xb):
            for Y in range(ya, yb):
                w = Ks[X - xa, Y - ya]
                row = out[X - off[0], Y - off[1]]
                for j in range(nt):
                    row[t0o + j] += w * Kt[j]
                if tracing:
                    trow = trace[X - off[0], Y - off[1]]
                    for j in range(nt):
                        trow[t0o + j] += 1


@njit(**_jit)
def sym_counts(vox, idx, ip, lo, hi, cnt):
    """Counters ``pb_sym`` would produce, without touching any volume."""
    for k in range(idx.shape[0]):
        xa, xb, ya, yb, ta, tb = _box(vox, idx[k], ip, lo, hi)
        if xa >= xb or ya >= yb or ta >= tb:
            continue
        nxy = (xb - xa) * (yb - ya)
        nt = tb - ta
        cnt[DIST] += nxy + nt
        cnt[KS] += nxy
        cnt[KT] += nt
        cnt[UPD] += nxy * nt


@njit(**_jit)
def sum_copies(copies, out, xa, xb):
    """``out[xa:xb] = sum(copies[p][xa:xb] for p in order)``."""
    P = copies.shape[0]
    for X in range(xa, xb):
        for Y in range(out.shape[1]):
            for T in range(out.shape[2]):
                s = 0.0
                for p in range(P):
                    s += copies[p, X, Y, T]
                out[X, Y, T] = s


@njit(**_jit)
def add_block(out, buf, off):
    """``out[off : off + buf.shape] += buf``."""
    for X in range(buf.shape[0]):
        for Y in range(buf.shape[1]):
            for T in range(buf.shape[2]):
                out[X + off[0], Y + off[1], T + off[2]] += buf[X, Y, T]


@njit(**_jit)
def zero_fill(out, xa, xb):
    for X in range(xa, xb):
        for Y in range(out.shape[1]):
            for T in range(out.shape[2]):
                out[X, Y, T] = 0.0
