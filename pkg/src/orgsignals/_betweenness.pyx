# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled Brandes accumulation over an undirected CSR adjacency.

Hot kernel of the per-window centrality pass.  See _betweenness_py for
the pure-Python twin with the identical contract.
"""

import numpy as np


def brandes_accumulate(int[:] indptr, int[:] indices, int n):
    """Sum shortest-path dependencies from every source node.

    indptr/indices describe a symmetric simple graph in CSR form
    (each undirected edge stored in both directions).  Returns a
    float64 array of ordered-pair betweenness scores: the caller
    halves them to count each unordered pair once.
    """
    scores_arr = np.zeros(n, dtype=np.float64)
    dist_arr = np.empty(n, dtype=np.int32)
    sigma_arr = np.empty(n, dtype=np.float64)
    delta_arr = np.empty(n, dtype=np.float64)
    order_arr = np.empty(n, dtype=np.int32)

    cdef double[:] scores = scores_arr
    cdef int[:] dist = dist_arr
    cdef double[:] sigma = sigma_arr
    cdef double[:] delta = delta_arr
    cdef int[:] order = order_arr

    cdef int s, v, w, i, j, head, tail, dv
    cdef double coeff

    for s in range(n):
        for v in range(n):
            dist[v] = -1
            sigma[v] = 0.0
            delta[v] = 0.0
        dist[s] = 0
        sigma[s] = 1.0

        # BFS; `order` doubles as the FIFO queue and the visitation stack
        head = 0
        tail = 0
        order[tail] = s
        tail += 1
        while head < tail:
            v = order[head]
            head += 1
            dv = dist[v]
            for i in range(indptr[v], indptr[v + 1]):
                w = indices[i]
                if dist[w] < 0:
                    dist[w] = dv + 1
                    order[tail] = w
                    tail += 1
                if dist[w] == dv + 1:
                    sigma[w] += sigma[v]

        # dependency accumulation in reverse BFS order; a neighbour v of w
        # is a predecessor iff dist[v] == dist[w] - 1
        for i in range(tail - 1, 0, -1):
            w = order[i]
            coeff = (1.0 + delta[w]) / sigma[w]
            for j in range(indptr[w], indptr[w + 1]):
                v = indices[j]
                if dist[v] == dist[w] - 1:
                    delta[v] += sigma[v] * coeff
            scores[w] += delta[w]

    return scores_arr
