# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled ward-linkage kernel.

Semantics (argmin tie rules, chain handling, Lance-Williams update order)
mirror kernels/_numpy.py exactly; the distance matrix is even built with the
same numpy expression, so merge structures are bit-identical between the two
backends. The distance-sums kernel has no compiled twin: its numpy form rides
on BLAS matmul, which naive C loops do not beat.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport INFINITY

cnp.import_array()


def ward_linkage(object X_in):
    X = np.ascontiguousarray(X_in, dtype=np.float64)
    cdef Py_ssize_t n = X.shape[0]
    if n < 2:
        empty = np.zeros(0, dtype=np.int64)
        return empty, empty.copy(), np.zeros(0, dtype=np.float64)

    sq = np.einsum("ij,ij->i", X, X)
    D_arr = sq[:, None] + sq[None, :] - 2.0 * (X @ X.T)
    np.maximum(D_arr, 0.0, out=D_arr)
    D_arr *= 0.5
    np.fill_diagonal(D_arr, INFINITY)

    cdef double[:, ::1] D = D_arr
    cdef double[::1] size = np.ones(n, dtype=np.float64)
    cdef cnp.uint8_t[::1] active = np.ones(n, dtype=np.uint8)
    cdef long long[::1] node_id = np.arange(n, dtype=np.int64)

    merge_a_arr = np.zeros(n - 1, dtype=np.int64)
    merge_b_arr = np.zeros(n - 1, dtype=np.int64)
    heights_arr = np.zeros(n - 1, dtype=np.float64)
    cdef long long[::1] merge_a = merge_a_arr
    cdef long long[::1] merge_b = merge_b_arr
    cdef double[::1] heights = heights_arr

    chain_arr = np.zeros(n + 1, dtype=np.int64)
    cdef long long[::1] chain = chain_arr
    cdef Py_ssize_t chain_len = 0

    cdef Py_ssize_t t, i, j, x, y, prev, keep, drop, pos
    cdef long long next_node = n, ida, idb
    cdef double dmin, d_xy, s_x, s_y, s_j, val

    for t in range(n - 1):
        if chain_len == 0:
            for i in range(n):
                if active[i]:
                    chain[0] = i
                    chain_len = 1
                    break
        while True:
            x = chain[chain_len - 1]
            y = -1
            dmin = INFINITY
            for j in range(n):
                if j == x or not active[j]:
                    continue
                if D[x, j] < dmin:
                    dmin = D[x, j]
                    y = j
            if chain_len >= 2:
                prev = chain[chain_len - 2]
                if active[prev] and D[x, prev] <= dmin:
                    y = prev
                    dmin = D[x, prev]
            if chain_len >= 2 and y == chain[chain_len - 2]:
                break
            chain[chain_len] = y
            chain_len += 1

        x = chain[chain_len - 1]
        y = chain[chain_len - 2]
        if x < y:
            keep = x
            drop = y
        else:
            keep = y
            drop = x
        d_xy = D[x, y]
        s_x = size[x]
        s_y = size[y]
        for j in range(n):
            if j == keep or j == drop:
                continue
            s_j = size[j]
            val = ((s_x + s_j) * D[x, j] + (s_y + s_j) * D[y, j] - s_j * d_xy) / (s_x + s_y + s_j)
            D[keep, j] = val
            D[j, keep] = val
        D[keep, keep] = INFINITY
        for j in range(n):
            D[drop, j] = INFINITY
            D[j, drop] = INFINITY
        active[drop] = 0
        size[keep] = s_x + s_y
        ida = node_id[x]
        idb = node_id[y]
        if ida < idb:
            merge_a[t] = ida
            merge_b[t] = idb
        else:
            merge_a[t] = idb
            merge_b[t] = ida
        heights[t] = d_xy
        node_id[keep] = next_node
        next_node += 1

        chain_len -= 2
        for pos in range(chain_len):
            if chain[pos] == keep or chain[pos] == drop:
                chain_len = pos
                break

    return merge_a_arr, merge_b_arr, heights_arr
