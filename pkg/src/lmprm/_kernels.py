"""Compiled inner loops: collision tests, binary-heap search, SSSP, CRC-64.

Everything here works on plain numpy arrays so the public modules can keep
their dataclass surfaces while the hot paths run without the interpreter.
"""

import numpy as np
from numba import njit

INF = np.inf

# --------------------------------------------------------------------------
# geometry


@njit(cache=True, nogil=True)
def _seg_point_dist2(p, q, c):
    d = p.shape[0]
    dd = 0.0
    dc = 0.0
    for i in range(d):
        u = q[i] - p[i]
        dd += u * u
        dc += (c[i] - p[i]) * u
    t = 0.0
    if dd > 0.0:
        t = dc / dd
        if t < 0.0:
            t = 0.0
        elif t > 1.0:
            t = 1.0
    s = 0.0
    for i in range(d):
        e = p[i] + t * (q[i] - p[i]) - c[i]
        s += e * e
    return s


@njit(cache=True, nogil=True)
def _seg_hits_box(p, q, lo, hi):
    # closed box, slab test
    tmin = 0.0
    tmax = 1.0
    for i in range(p.shape[0]):
        u = q[i] - p[i]
        if u == 0.0:
            if p[i] < lo[i] or p[i] > hi[i]:
                return False
        else:
            t1 = (lo[i] - p[i]) / u
            t2 = (hi[i] - p[i]) / u
            if t1 > t2:
                t1, t2 = t2, t1
            if t1 > tmin:
                tmin = t1
            if t2 < tmax:
                tmax = t2
            if tmin > tmax:
                return False
    return True


@njit(cache=True, nogil=True)
def _in_open_box(x, lo, hi):
    for i in range(x.shape[0]):
        if not (lo[i] < x[i] < hi[i]):
            return False
    return True


@njit(cache=True, nogil=True)
def _cell_range(p, q, grid_lo, cell, dims, lo_idx, hi_idx):
    for i in range(p.shape[0]):
        a = min(p[i], q[i])
        b = max(p[i], q[i])
        ia = int(np.floor((a - grid_lo[i]) / cell))
        ib = int(np.floor((b - grid_lo[i]) / cell))
        if ib < 0 or ia >= dims[i]:
            return False
        lo_idx[i] = max(ia, 0)
        hi_idx[i] = min(ib, dims[i] - 1)
    return True


@njit(cache=True, nogil=True)
def segments_clear_kernel(P, Q, box_lo, box_hi, centers, radii, cell_start,
                          cell_items, grid_lo, cell, dims, rect_lo, rect_hi, out):
    m, d = P.shape
    lo_idx = np.empty(d, np.int64)
    hi_idx = np.empty(d, np.int64)
    idx = np.empty(d, np.int64)
    stamp = np.full(radii.shape[0], -1, np.int64)
    for s in range(m):
        p = P[s]
        q = Q[s]
        ok = _in_open_box(p, box_lo, box_hi) and _in_open_box(q, box_lo, box_hi)
        if ok:
            for j in range(rect_lo.shape[0]):
                if _seg_hits_box(p, q, rect_lo[j], rect_hi[j]):
                    ok = False
                    break
        if ok and radii.shape[0] > 0 and _cell_range(p, q, grid_lo, cell, dims, lo_idx, hi_idx):
            for i in range(d):
                idx[i] = lo_idx[i]
            done = False
            while not done and ok:
                flat = 0
                for i in range(d):
                    flat = flat * dims[i] + idx[i]
                for t in range(cell_start[flat], cell_start[flat + 1]):
                    c = cell_items[t]
                    if stamp[c] == s:
                        continue
                    stamp[c] = s
                    if _seg_point_dist2(p, q, centers[c]) <= radii[c] * radii[c]:
                        ok = False
                        break
                # odometer over the cell box
                i = d - 1
                while i >= 0:
                    idx[i] += 1
                    if idx[i] <= hi_idx[i]:
                        break
                    idx[i] = lo_idx[i]
                    i -= 1
                if i < 0:
                    done = True
        out[s] = ok


# --------------------------------------------------------------------------
# binary heap keyed on (key, vertex) with the g-value riding along


@njit(cache=True, nogil=True)
def _less(k1, v1, k2, v2):
    return k1 < k2 or (k1 == k2 and v1 < v2)


@njit(cache=True, nogil=True)
def _heap_push(hk, hv, hg, size, key, v, g):
    i = size
    while i > 0:
        par = (i - 1) >> 1
        if _less(key, v, hk[par], hv[par]):
            hk[i] = hk[par]
            hv[i] = hv[par]
            hg[i] = hg[par]
            i = par
        else:
            break
    hk[i] = key
    hv[i] = v
    hg[i] = g


@njit(cache=True, nogil=True)
def _heap_pop(hk, hv, hg, size):
    # caller reads the root before calling; size is the pre-pop size
    last = size - 1
    key = hk[last]
    v = hv[last]
    g = hg[last]
    i = 0
    while True:
        c = 2 * i + 1
        if c >= last:
            break
        if c + 1 < last and _less(hk[c + 1], hv[c + 1], hk[c], hv[c]):
            c += 1
        if _less(hk[c], hv[c], key, v):
            hk[i] = hk[c]
            hv[i] = hv[c]
            hg[i] = hg[c]
            i = c
        else:
            break
    if last > 0:
        hk[i] = key
        hv[i] = v
        hg[i] = g


# --------------------------------------------------------------------------
# heuristics: 0 zero, 1 euclidean, 2 landmark


@njit(cache=True, nogil=True)
def _landmark_h(x, dT, fT, gto, gfrom, symmetric):
    h = 0.0
    k = gto.shape[0]
    for l in range(k):
        a = gto[l]
        b = dT[x, l]
        if symmetric:
            if a == INF:
                if b != INF:
                    return INF
                continue
            if b == INF:
                return INF
            t = abs(a - b)
            if t > h:
                h = t
        else:
            # d(l,g) - d(l,x)
            if a == INF:
                if b != INF:
                    return INF
            elif b != INF:
                t = a - b
                if t > h:
                    h = t
            # d(x,l) - d(g,l)
            c = fT[x, l]
            e = gfrom[l]
            if c == INF:
                if e != INF:
                    return INF
            elif e != INF:
                t = c - e
                if t > h:
                    h = t
    return h


@njit(cache=True, nogil=True)
def _heur(x, mode, coords, goal_xy, dT, fT, gto, gfrom, symmetric):
    if mode == 0:
        return 0.0
    if mode == 1:
        s = 0.0
        for i in range(coords.shape[1]):
            e = coords[x, i] - goal_xy[i]
            s += e * e
        return np.sqrt(s)
    return _landmark_h(x, dT, fT, gto, gfrom, symmetric)


@njit(cache=True, nogil=True)
def astar_kernel(offsets, nbrs, w, start, goal, mode, coords, goal_xy, dT, fT,
                 gto, gfrom, symmetric, label, parent, lepoch, hval, hepoch, epoch,
                 hk, hv, hg):
    """Returns (status, iterations, pushes, cost); status 1 found, 0 none, -1 heap overflow.

    hk/hv/hg are caller-owned heap storage. Re-expansions under an
    inconsistent heuristic can outgrow it, in which case the caller
    enlarges the storage and reruns the (deterministic) search.
    """
    size = 0
    iterations = 0
    pushes = 0

    label[start] = 0.0
    parent[start] = -1
    lepoch[start] = epoch
    h0 = _heur(start, mode, coords, goal_xy, dT, fT, gto, gfrom, symmetric)
    hval[start] = h0
    hepoch[start] = epoch
    if h0 == INF:
        return 0, 0, 0, INF
    _heap_push(hk, hv, hg, size, h0, start, 0.0)
    size += 1
    pushes += 1

    while size > 0:
        v = hv[0]
        gv = hg[0]
        _heap_pop(hk, hv, hg, size)
        size -= 1
        if gv > label[v]:
            continue
        iterations += 1
        if v == goal:
            return 1, iterations, pushes, gv
        for e in range(offsets[v], offsets[v + 1]):
            u = nbrs[e]
            cand = gv + w[e]
            if lepoch[u] != epoch:
                lepoch[u] = epoch
                label[u] = INF
            if cand < label[u]:
                label[u] = cand
                parent[u] = v
                if hepoch[u] != epoch:
                    hepoch[u] = epoch
                    hval[u] = _heur(u, mode, coords, goal_xy, dT, fT, gto, gfrom, symmetric)
                hu = hval[u]
                if hu == INF:
                    continue
                if size == hk.shape[0]:
                    return -1, iterations, pushes, INF
                _heap_push(hk, hv, hg, size, cand + hu, u, cand)
                size += 1
                pushes += 1
    return 0, iterations, pushes, INF


@njit(cache=True, nogil=True)
def sssp_kernel(offsets, nbrs, w, source, dist):
    """Full Dijkstra from source; dist is filled in place (inf = unreachable)."""
    n = offsets.shape[0] - 1
    for i in range(n):
        dist[i] = INF
    # every push is a strict relaxation of a distinct edge, so m + 1 slots suffice
    cap = offsets[n] + 1
    hk = np.empty(cap, np.float64)
    hv = np.empty(cap, np.int64)
    hg = np.empty(cap, np.float64)
    dist[source] = 0.0
    _heap_push(hk, hv, hg, 0, 0.0, source, 0.0)
    size = 1
    while size > 0:
        v = hv[0]
        gv = hg[0]
        _heap_pop(hk, hv, hg, size)
        size -= 1
        if gv > dist[v]:
            continue
        for e in range(offsets[v], offsets[v + 1]):
            u = nbrs[e]
            cand = gv + w[e]
            if cand < dist[u]:
                dist[u] = cand
                _heap_push(hk, hv, hg, size, cand, u, cand)
                size += 1


# --------------------------------------------------------------------------
# CRC-64/XZ (ECMA-182 polynomial, reflected)


def _crc64_table():
    poly = np.uint64(0xC96C5795D7870F42)
    table = np.zeros(256, np.uint64)
    for i in range(256):
        c = np.uint64(i)
        for _ in range(8):
            if c & np.uint64(1):
                c = (c >> np.uint64(1)) ^ poly
            else:
                c = c >> np.uint64(1)
        table[i] = c
    return table


_CRC_TABLE = _crc64_table()


@njit(cache=True, nogil=True)
def _crc64_update(crc, data, table):
    for i in range(data.shape[0]):
        crc = table[(crc ^ np.uint64(data[i])) & np.uint64(0xFF)] ^ (crc >> np.uint64(8))
    return crc


def crc64(data, crc=0):
    """CRC-64/XZ of ``data`` (bytes-like); ``crc`` continues a previous value."""
    buf = np.frombuffer(memoryview(data).cast("B"), dtype=np.uint8)
    mask = np.uint64(0xFFFFFFFFFFFFFFFF)
    c = np.uint64(crc) ^ mask
    c = _crc64_update(c, buf, _CRC_TABLE)
    return int(c ^ mask)
