"""Compiled inner loops: cell-list neighbour search and Metropolis-Hastings sweeps.

Points are kept in a uniform grid of cells whose side is at least the
interaction range, stored as doubly linked lists so single points can be moved
in O(1).  Points outside the grid are clamped into boundary cells; since the
clamp is monotone per axis, two points within range still land in adjacent
cells, so scanning the 3^d neighbouring cells (skipping out-of-grid ones) is exact.
"""

from __future__ import annotations

import itertools
import math

import numpy as np
from numba import njit

MAX_CELLS = 4_000_000


@njit(cache=True)
def _cell_coords(p, lo, inv_cs, ncell, out):
    for k in range(p.shape[0]):
        c = int(math.floor((p[k] - lo[k]) * inv_cs))
        if c < 0:
            c = 0
        elif c >= ncell[k]:
            c = ncell[k] - 1
        out[k] = c


@njit(cache=True)
def _flat(cc, strides):
    f = 0
    for k in range(cc.shape[0]):
        f += cc[k] * strides[k]
    return f


@njit(cache=True)
def _build(pts, lo, inv_cs, ncell, strides, ntot):
    n, d = pts.shape
    head = np.full(ntot, -1, np.int64)
    nxt = np.full(n, -1, np.int64)
    prv = np.full(n, -1, np.int64)
    cell_of = np.empty(n, np.int64)
    cc = np.empty(d, np.int64)
    for j in range(n):
        _cell_coords(pts[j], lo, inv_cs, ncell, cc)
        f = _flat(cc, strides)
        cell_of[j] = f
        h = head[f]
        nxt[j] = h
        if h >= 0:
            prv[h] = j
        head[f] = j
    return head, nxt, prv, cell_of


@njit(cache=True)
def _scan(p, pts, skip, head, nxt, lo, inv_cs, ncell, strides, offsets, r2, edges2, counts, cc):
    """Accumulate band counts of neighbours of ``p`` into ``counts``; return the
    hard-core flag.  Point ``skip`` is ignored; ``cc`` is scratch space."""
    d = p.shape[0]
    nb = edges2.shape[0]
    rmax2 = edges2[nb - 1]
    hc = False
    _cell_coords(p, lo, inv_cs, ncell, cc)
    for o in range(offsets.shape[0]):
        f = 0
        ok = True
        for k in range(d):
            c = cc[k] + offsets[o, k]
            if c < 0 or c >= ncell[k]:
                ok = False
                break
            f += c * strides[k]
        if not ok:
            continue
        j = head[f]
        while j >= 0:
            if j != skip:
                d2 = 0.0
                for k in range(d):
                    t = pts[j, k] - p[k]
                    d2 += t * t
                if d2 <= rmax2:
                    if d2 < r2:
                        hc = True
                    else:
                        b = 0
                        while d2 > edges2[b]:
                            b += 1
                        counts[b] += 1
            j = nxt[j]
    return hc


@njit(cache=True)
def _count_queries(queries, skip, pts, head, nxt, lo, inv_cs, ncell, strides, offsets, r2, edges2):
    q = queries.shape[0]
    nb = edges2.shape[0]
    counts = np.zeros((q, nb), np.int32)
    hc = np.zeros(q, np.bool_)
    cc = np.empty(queries.shape[1], np.int64)
    for t in range(q):
        hc[t] = _scan(queries[t], pts, skip[t], head, nxt, lo, inv_cs, ncell, strides,
                      offsets, r2, edges2, counts[t], cc)
    return counts, hc


@njit(cache=True)
def _mh_sweep(order, sites, disps, pos, proposals, uniforms, theta2, r2, edges2,
              head, nxt, prv, cell_of, lo, inv_cs, ncell, strides, offsets):
    d = sites.shape[1]
    nb = edges2.shape[0]
    c_old = np.zeros(nb, np.int64)
    c_new = np.zeros(nb, np.int64)
    p_new = np.empty(d)
    cc = np.empty(d, np.int64)
    accepted = 0
    for t in range(order.shape[0]):
        k = order[t]
        for k2 in range(d):
            p_new[k2] = sites[k, k2] + proposals[t, k2]
        for b in range(nb):
            c_new[b] = 0
            c_old[b] = 0
        if _scan(p_new, pos, k, head, nxt, lo, inv_cs, ncell, strides, offsets, r2, edges2,
                 c_new, cc):
            continue
        _scan(pos[k], pos, k, head, nxt, lo, inv_cs, ncell, strides, offsets, r2, edges2,
              c_old, cc)
        dh = 0.0
        for b in range(nb):
            dh += theta2[b] * (c_new[b] - c_old[b])
        if dh > 0.0 and uniforms[t] >= math.exp(-dh):
            continue
        accepted += 1
        for k2 in range(d):
            disps[k, k2] = proposals[t, k2]
            pos[k, k2] = p_new[k2]
        _cell_coords(p_new, lo, inv_cs, ncell, cc)
        f = _flat(cc, strides)
        if f != cell_of[k]:
            # unlink from old cell
            a, b2 = prv[k], nxt[k]
            if a >= 0:
                nxt[a] = b2
            else:
                head[cell_of[k]] = b2
            if b2 >= 0:
                prv[b2] = a
            # push on new cell
            h = head[f]
            nxt[k] = h
            prv[k] = -1
            if h >= 0:
                prv[h] = k
            head[f] = k
            cell_of[k] = f
    return accepted


class CellList:
    """Uniform-grid neighbour structure over a mutable point array.

    ``bounds`` is a pair of corner vectors for the grid; points outside are
    clamped into edge cells.  ``pts`` is held by reference: the MH kernel moves
    points in place and keeps the lists consistent.
    """

    def __init__(self, pts: np.ndarray, cell_size: float, bounds=None):
        self.pts = np.ascontiguousarray(pts, dtype=np.float64)
        n, d = self.pts.shape
        if bounds is None:
            if n:
                lo, hi = self.pts.min(axis=0), self.pts.max(axis=0)
            else:
                lo, hi = np.zeros(d), np.ones(d)
        else:
            lo, hi = (np.asarray(b, dtype=float) for b in bounds)
        extent = np.maximum(hi - lo, 1e-12)
        cs = max(float(cell_size), 1e-12)
        ncell = np.maximum(np.ceil(extent / cs).astype(np.int64), 1)
        while np.prod(ncell) > MAX_CELLS:
            cs *= 1.5
            ncell = np.maximum(np.ceil(extent / cs).astype(np.int64), 1)
        self.lo = lo.astype(np.float64)
        self.inv_cs = 1.0 / cs
        self.ncell = ncell
        self.strides = np.ones(d, np.int64)
        for k in range(d - 2, -1, -1):
            self.strides[k] = self.strides[k + 1] * ncell[k + 1]
        self.offsets = np.array(list(itertools.product((-1, 0, 1), repeat=d)), dtype=np.int64)
        self.head, self.nxt, self.prv, self.cell_of = _build(
            self.pts, self.lo, self.inv_cs, self.ncell, self.strides, int(np.prod(ncell)))

    def band_counts(self, queries, skip, hardcore_r: float, edges) -> tuple[np.ndarray, np.ndarray]:
        """Band counts and hard-core flags at each query; ``skip`` holds, per query,
        the index of a point to ignore (-1 for none)."""
        queries = np.ascontiguousarray(queries, dtype=np.float64).reshape(-1, self.pts.shape[1])
        skip = np.broadcast_to(np.asarray(skip, dtype=np.int64), (len(queries),)).copy()
        edges2 = np.asarray(edges, dtype=np.float64) ** 2
        return _count_queries(queries, skip, self.pts, self.head, self.nxt, self.lo, self.inv_cs,
                              self.ncell, self.strides, self.offsets, float(hardcore_r) ** 2, edges2)

    def mh_sweep(self, order, sites, disps, proposals, uniforms, theta2, hardcore_r, edges) -> int:
        edges2 = np.asarray(edges, dtype=np.float64) ** 2
        return int(_mh_sweep(np.asarray(order, dtype=np.int64), sites, disps, self.pts,
                             proposals, uniforms, np.asarray(theta2, dtype=np.float64),
                             float(hardcore_r) ** 2, edges2, self.head, self.nxt, self.prv,
                             self.cell_of, self.lo, self.inv_cs, self.ncell, self.strides,
                             self.offsets))
