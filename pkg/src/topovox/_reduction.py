"""Jitted kernels for persistence computation and GF(2) rank.

Cells are addressed by linear index into the doubled grid (C order) or by
rank: their position in the per-dimension filtration order. Row ranks are
only ever compared within one dimension, so a single rank array covers all
dimensions at once.
"""
from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def union_find_dim0(values, edge_order, e0, e1, e2):
    """Elder-rule union-find over the vertex grid.

    Processes edges in filtration order. Returns finite pairs (already
    filtered of zero persistence), the dropped-pair count, and a flag per
    edge rank marking edges that merged two components.
    """
    s0 = e1 * e2
    s1 = e2
    v0 = (e0 + 1) // 2
    v1 = (e1 + 1) // 2
    v2 = (e2 + 1) // 2
    n_verts = v0 * v1 * v2
    n_edges = edge_order.shape[0]

    parent = np.empty(n_verts, dtype=np.int64)
    size = np.ones(n_verts, dtype=np.int64)
    birth_val = np.empty(n_verts, dtype=np.float64)
    birth_idx = np.empty(n_verts, dtype=np.int64)
    for va in range(v0):
        for vb in range(v1):
            for vc in range(v2):
                vid = (va * v1 + vb) * v2 + vc
                lin = (2 * va) * s0 + (2 * vb) * s1 + (2 * vc)
                parent[vid] = vid
                birth_val[vid] = values[lin]
                birth_idx[vid] = lin

    births = np.empty(n_edges, dtype=np.float64)
    deaths = np.empty(n_edges, dtype=np.float64)
    n_pairs = 0
    dropped = 0
    edge_negative = np.zeros(n_edges, dtype=np.bool_)

    for ei in range(n_edges):
        e = edge_order[ei]
        a = e // s0
        rem = e - a * s0
        b = rem // s1
        c = rem - b * s1
        if a & 1:
            u_lin = e - s0
            w_lin = e + s0
        elif b & 1:
            u_lin = e - s1
            w_lin = e + s1
        else:
            u_lin = e - 1
            w_lin = e + 1

        ua = u_lin // s0
        urem = u_lin - ua * s0
        ub = urem // s1
        uc = urem - ub * s1
        u = ((ua >> 1) * v1 + (ub >> 1)) * v2 + (uc >> 1)

        wa = w_lin // s0
        wrem = w_lin - wa * s0
        wb = wrem // s1
        wc = wrem - wb * s1
        w = ((wa >> 1) * v1 + (wb >> 1)) * v2 + (wc >> 1)

        ru = u
        while parent[ru] != ru:
            parent[ru] = parent[parent[ru]]
            ru = parent[ru]
        rw = w
        while parent[rw] != rw:
            parent[rw] = parent[parent[rw]]
            rw = parent[rw]
        if ru == rw:
            continue

        # elder rule: the component with the older (value, lex) birth survives
        if birth_val[ru] < birth_val[rw] or (
            birth_val[ru] == birth_val[rw] and birth_idx[ru] < birth_idx[rw]
        ):
            elder, younger = ru, rw
        else:
            elder, younger = rw, ru
        edge_negative[ei] = True
        d = values[e]
        bv = birth_val[younger]
        if d != bv:
            births[n_pairs] = bv
            deaths[n_pairs] = d
            n_pairs += 1
        else:
            dropped += 1

        if size[ru] < size[rw]:
            small, big = ru, rw
        else:
            small, big = rw, ru
        parent[small] = big
        size[big] += size[small]
        birth_val[big] = birth_val[elder]
        birth_idx[big] = birth_idx[elder]

    return births[:n_pairs], deaths[:n_pairs], dropped, edge_negative


@njit(cache=True)
def dual_union_find_dim2(values, order2, cube_rank_of_node, val3, n0, n1, n2v, e0, e1, e2):
    """Dimension-2 pairs via union-find on the complement's dual graph.

    In a box, every 2-cycle of the sublevel complex encloses a component of
    the superlevel cube region. Processing 2-cells as dual edges in reverse
    filtration order with an elder rule (the outside region is eldest) yields
    the same (2-cell, cube) pairing as reducing the cube boundary matrix,
    without materializing surface columns.

    Returns finite pairs, the dropped count, the ranks of every paired
    2-cell (the clearing set for the next reduction), and the merge count.
    """
    ncubes = n0 * n1 * n2v
    outside = ncubes
    parent = np.arange(ncubes + 1)
    size = np.ones(ncubes + 1, dtype=np.int64)
    birth_rank = np.empty(ncubes + 1, dtype=np.int64)
    for i in range(ncubes):
        birth_rank[i] = cube_rank_of_node[i]
    birth_rank[outside] = np.int64(2**62)

    births = np.empty(ncubes, dtype=np.float64)
    deaths = np.empty(ncubes, dtype=np.float64)
    cleared = np.empty(ncubes, dtype=np.int64)
    n_pairs = 0
    dropped = 0
    n_merge = 0
    s0 = e1 * e2
    s1 = e2

    for ei in range(order2.shape[0] - 1, -1, -1):
        f = order2[ei]
        a = f // s0
        rem = f - a * s0
        b = rem // s1
        c = rem - b * s1
        if (a & 1) == 0:
            u = outside if a == 0 else (((a - 1) >> 1) * n1 + (b >> 1)) * n2v + (c >> 1)
            w = outside if a == e0 - 1 else (((a + 1) >> 1) * n1 + (b >> 1)) * n2v + (c >> 1)
        elif (b & 1) == 0:
            u = outside if b == 0 else ((a >> 1) * n1 + ((b - 1) >> 1)) * n2v + (c >> 1)
            w = outside if b == e1 - 1 else ((a >> 1) * n1 + ((b + 1) >> 1)) * n2v + (c >> 1)
        else:
            u = outside if c == 0 else ((a >> 1) * n1 + (b >> 1)) * n2v + ((c - 1) >> 1)
            w = outside if c == e2 - 1 else ((a >> 1) * n1 + (b >> 1)) * n2v + ((c + 1) >> 1)

        ru = u
        while parent[ru] != ru:
            parent[ru] = parent[parent[ru]]
            ru = parent[ru]
        rw = w
        while parent[rw] != rw:
            parent[rw] = parent[parent[rw]]
            rw = parent[rw]
        if ru == rw:
            continue

        # reversed time: the component whose birth cube is later in the
        # primal order entered earlier here, so it survives
        if birth_rank[ru] > birth_rank[rw]:
            elder, younger = ru, rw
        else:
            elder, younger = rw, ru
        b_val = values[f]
        d_val = val3[birth_rank[younger]]
        cleared[n_merge] = ei
        n_merge += 1
        if b_val != d_val:
            births[n_pairs] = b_val
            deaths[n_pairs] = d_val
            n_pairs += 1
        else:
            dropped += 1

        if size[ru] < size[rw]:
            small, big = ru, rw
        else:
            small, big = rw, ru
        parent[small] = big
        size[big] += size[small]
        birth_rank[big] = birth_rank[elder]

    return births[:n_pairs], deaths[:n_pairs], dropped, cleared[:n_merge], n_merge


@njit(cache=True)
def reduce_columns(init_pool, init_ptr, skip, n_rows):
    """Left-to-right GF(2) column reduction over sorted row-rank lists.

    ``init_pool`` holds each column's facet row ranks, ascending, back to
    back; ``init_ptr`` delimits columns. Columns flagged in ``skip`` are
    cleared (known zero) and never touched. Returns the pivot row of each
    column (-1 for zero or skipped) and the count of non-skipped columns
    that reduced to zero.

    The pool is append-only; exhausted capacity triggers a compacting
    reallocation that keeps only live column data.
    """
    n_cols = init_ptr.shape[0] - 1
    cap = init_pool.shape[0] * 2 + 64
    pool = np.empty(cap, dtype=np.int64)
    pool[: init_pool.shape[0]] = init_pool
    pool_end = init_pool.shape[0]

    start = np.empty(n_cols, dtype=np.int64)
    length = np.empty(n_cols, dtype=np.int64)
    for j in range(n_cols):
        start[j] = init_ptr[j]
        length[j] = init_ptr[j + 1] - init_ptr[j]

    owner = np.full(n_rows, -1, dtype=np.int64)
    pivot_of_col = np.full(n_cols, -1, dtype=np.int64)
    n_zero = 0

    for j in range(n_cols):
        if skip[j]:
            length[j] = 0
            continue
        while length[j] > 0:
            low = pool[start[j] + length[j] - 1]
            own = owner[low]
            if own < 0:
                owner[low] = j
                pivot_of_col[j] = low
                break
            la = length[j]
            lb = length[own]
            need = la + lb
            if pool_end + need > cap:
                # compact: keep every column's live slice, including the
                # untouched initial lists of columns not yet processed
                live = need
                for q in range(n_cols):
                    live += length[q]
                newcap = cap
                while newcap < 2 * live:
                    newcap *= 2
                newpool = np.empty(newcap, dtype=np.int64)
                pe = 0
                for q in range(n_cols):
                    sq = start[q]
                    for t in range(length[q]):
                        newpool[pe + t] = pool[sq + t]
                    start[q] = pe
                    pe += length[q]
                pool = newpool
                cap = newcap
                pool_end = pe
            # XOR-merge column `own` into column j at the pool tail
            sa = start[j]
            sb = start[own]
            ia = 0
            ib = 0
            wpos = pool_end
            while ia < la and ib < lb:
                x = pool[sa + ia]
                y = pool[sb + ib]
                if x == y:
                    ia += 1
                    ib += 1
                elif x < y:
                    pool[wpos] = x
                    wpos += 1
                    ia += 1
                else:
                    pool[wpos] = y
                    wpos += 1
                    ib += 1
            while ia < la:
                pool[wpos] = pool[sa + ia]
                wpos += 1
                ia += 1
            while ib < lb:
                pool[wpos] = pool[sb + ib]
                wpos += 1
                ib += 1
            start[j] = pool_end
            length[j] = wpos - pool_end
            pool_end = wpos
        if length[j] == 0 and not skip[j]:
            n_zero += 1

    return pivot_of_col, n_zero


@njit(cache=True)
def pack_columns(facet_ranks, n_words):
    """Pack facet row ranks into a dense bit matrix, one row of words per column."""
    n_cols, per_col = facet_ranks.shape
    out = np.zeros((n_cols, n_words), dtype=np.uint64)
    for j in range(n_cols):
        for t in range(per_col):
            r = facet_ranks[j, t]
            out[j, r >> 6] |= np.uint64(1) << np.uint64(r & 63)
    return out


@njit(cache=True)
def gf2_rank(mat):
    """Rank of a packed GF(2) matrix given column-wise; mutates its argument."""
    n_cols, n_words = mat.shape
    owner = np.full(n_words * 64, -1, dtype=np.int64)
    rank = 0
    for j in range(n_cols):
        while True:
            low = -1
            for w in range(n_words - 1, -1, -1):
                x = mat[j, w]
                if x != np.uint64(0):
                    b = 0
                    while x > np.uint64(1):
                        x >>= np.uint64(1)
                        b += 1
                    low = (w << 6) + b
                    break
            if low < 0:
                break
            own = owner[low]
            if own < 0:
                owner[low] = j
                rank += 1
                break
            for w in range(n_words):
                mat[j, w] ^= mat[own, w]
    return rank
