# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled contact-growth kernel.

Same synchronous multi-source growth as ``_growth_py`` (see that module
for the algorithm description); outputs are bit-identical. Claim lists
are kept as linked nodes in flat pools so the whole inner loop runs
without touching Python objects. Nodes created in iteration k are the
propagation frontier for iteration k+1.
"""

import numpy as np


cdef inline bint _list_has(const int[::1] node_id, const int[::1] node_next,
                           int start, int ident) noexcept nogil:
    cdef int cur = start
    while cur != -1:
        if node_id[cur] == ident:
            return True
        cur = node_next[cur]
    return False


cdef inline int _list_len(const int[::1] node_next, int start) noexcept nogil:
    cdef int n = 0
    cdef int cur = start
    while cur != -1:
        n += 1
        cur = node_next[cur]
    return n


cdef int _step(const int[:, ::1] inst, int[:, ::1] depth, int[:, ::1] head,
               int[::1] node_id, int[::1] node_px, int[::1] node_next,
               int n_nodes, int fr_start, int fr_end, int it) noexcept nogil:
    """Propagate one ring from nodes [fr_start, fr_end); returns new node count."""
    cdef int h = inst.shape[0]
    cdef int w = inst.shape[1]
    cdef int i, px, ident, r, c, dr, dc, nr, nc, d
    for i in range(fr_start, fr_end):
        px = node_px[i]
        ident = node_id[i]
        r = px / w
        c = px - r * w
        for dr in range(-1, 2):
            nr = r + dr
            if nr < 0 or nr >= h:
                continue
            for dc in range(-1, 2):
                if dr == 0 and dc == 0:
                    continue
                nc = c + dc
                if nc < 0 or nc >= w:
                    continue
                if inst[nr, nc] != 0:
                    continue
                d = depth[nr, nc]
                if d == -1:
                    depth[nr, nc] = it
                    node_id[n_nodes] = ident
                    node_px[n_nodes] = nr * w + nc
                    node_next[n_nodes] = -1
                    head[nr, nc] = n_nodes
                    n_nodes += 1
                elif d == it:
                    if not _list_has(node_id, node_next, head[nr, nc], ident):
                        node_id[n_nodes] = ident
                        node_px[n_nodes] = nr * w + nc
                        node_next[n_nodes] = head[nr, nc]
                        head[nr, nc] = n_nodes
                        n_nodes += 1
    return n_nodes


cdef long _collect(const int[:, ::1] depth, const int[:, ::1] head,
                   const int[::1] node_id, const int[::1] node_next,
                   int[::1] out_id, int[::1] out_r, int[::1] out_c,
                   bint fill) noexcept nogil:
    """Emit contact triples (tie rule + same-depth adjacency rule).

    With fill False only counts an upper bound on emissions so the
    caller can size the output buffers; with fill True writes triples
    and returns the exact count.
    """
    cdef int h = depth.shape[0]
    cdef int w = depth.shape[1]
    # forward half of the 8-neighborhood: E, SW, S, SE
    cdef int fdr[4]
    cdef int fdc[4]
    fdr[0] = 0; fdc[0] = 1
    fdr[1] = 1; fdc[1] = -1
    fdr[2] = 1; fdc[2] = 0
    fdr[3] = 1; fdc[3] = 1
    cdef long total = 0
    cdef int r, c, d, k, nr, nc, n_p, n_q, cur, curq, hp, hq
    for r in range(h):
        for c in range(w):
            d = depth[r, c]
            if d < 1:
                continue
            hp = head[r, c]
            n_p = _list_len(node_next, hp)
            if n_p >= 2:
                if fill:
                    cur = hp
                    while cur != -1:
                        out_id[total] = node_id[cur]
                        out_r[total] = r
                        out_c[total] = c
                        total += 1
                        cur = node_next[cur]
                else:
                    total += n_p
            for k in range(4):
                nr = r + fdr[k]
                nc = c + fdc[k]
                if nr < 0 or nr >= h or nc < 0 or nc >= w:
                    continue
                if depth[nr, nc] != d:
                    continue
                hq = head[nr, nc]
                n_q = _list_len(node_next, hq)
                if n_p == 1 and n_q == 1 and node_id[hp] == node_id[hq]:
                    continue
                if not fill:
                    total += 2 * (n_p + n_q)
                    continue
                cur = hp
                while cur != -1:
                    out_id[total] = node_id[cur]
                    out_r[total] = r
                    out_c[total] = c
                    total += 1
                    out_id[total] = node_id[cur]
                    out_r[total] = nr
                    out_c[total] = nc
                    total += 1
                    cur = node_next[cur]
                curq = hq
                while curq != -1:
                    if not _list_has(node_id, node_next, hp, node_id[curq]):
                        out_id[total] = node_id[curq]
                        out_r[total] = r
                        out_c[total] = c
                        total += 1
                        out_id[total] = node_id[curq]
                        out_r[total] = nr
                        out_c[total] = nc
                        total += 1
                    curq = node_next[curq]
    return total


def grow(inst_arr, int max_iters):
    """Run the growth; returns (depth, ids, rows, cols) like _growth_py.grow."""
    inst_arr = np.ascontiguousarray(inst_arr, dtype=np.int32)
    cdef int h = inst_arr.shape[0]
    cdef int w = inst_arr.shape[1]
    depth_arr = np.where(inst_arr > 0, 0, -1).astype(np.int32)
    head_arr = np.full((h, w), -1, dtype=np.int32)

    rows, cols = np.nonzero(inst_arr)
    cdef long n0 = rows.size
    cdef long cap = max(1024, 2 * n0)
    node_id_arr = np.empty(cap, dtype=np.int32)
    node_px_arr = np.empty(cap, dtype=np.int32)
    node_next_arr = np.empty(cap, dtype=np.int32)
    if n0 > 0:
        node_id_arr[:n0] = inst_arr[rows, cols]
        node_px_arr[:n0] = (rows.astype(np.int64) * w + cols).astype(np.int32)
        node_next_arr[:n0] = -1
        head_arr[rows, cols] = np.arange(n0, dtype=np.int32)

    cdef long n_nodes = n0
    cdef long fr_start = 0
    cdef long fr_end = n0
    cdef long need
    cdef int it
    for it in range(1, max_iters + 1):
        if fr_end == fr_start:
            break
        need = n_nodes + 8 * (fr_end - fr_start)
        if need > cap:
            cap = max(need, 2 * cap)
            node_id_arr = np.resize(node_id_arr, cap)
            node_px_arr = np.resize(node_px_arr, cap)
            node_next_arr = np.resize(node_next_arr, cap)
        n_new = _step(inst_arr, depth_arr, head_arr,
                      node_id_arr, node_px_arr, node_next_arr,
                      <int> n_nodes, <int> fr_start, <int> fr_end, it)
        fr_start = fr_end
        fr_end = n_new
        n_nodes = n_new

    cdef long bound = _collect(depth_arr, head_arr, node_id_arr, node_next_arr,
                               node_id_arr[:0], node_id_arr[:0], node_id_arr[:0],
                               False)
    out_id_arr = np.empty(bound, dtype=np.int32)
    out_r_arr = np.empty(bound, dtype=np.int32)
    out_c_arr = np.empty(bound, dtype=np.int32)
    cdef long count = 0
    if bound > 0:
        count = _collect(depth_arr, head_arr, node_id_arr, node_next_arr,
                         out_id_arr, out_r_arr, out_c_arr, True)
    return (depth_arr,
            out_id_arr[:count].copy(),
            out_r_arr[:count].copy(),
            out_c_arr[:count].copy())
