"""Pure-Python Brandes kernel, import-time fallback for the compiled one.

Same contract as the Cython module: ordered-pair betweenness scores over
a symmetric simple CSR adjacency, to be halved by the caller.
"""

from collections import deque

import numpy as np


def brandes_accumulate(indptr, indices, n: int) -> np.ndarray:
    """Sum shortest-path dependencies from every source node."""
    scores = np.zeros(n, dtype=np.float64)
    for s in range(n):
        dist = [-1] * n
        sigma = [0.0] * n
        delta = [0.0] * n
        dist[s] = 0
        sigma[s] = 1.0
        order = []
        queue = deque([s])
        while queue:
            v = queue.popleft()
            order.append(v)
            dv1 = dist[v] + 1
            sv = sigma[v]
            for i in range(indptr[v], indptr[v + 1]):
                w = indices[i]
                if dist[w] < 0:
                    dist[w] = dv1
                    queue.append(w)
                if dist[w] == dv1:
                    sigma[w] += sv
        for w in reversed(order[1:]):
            coeff = (1.0 + delta[w]) / sigma[w]
            dw1 = dist[w] - 1
            for i in range(indptr[w], indptr[w + 1]):
                v = indices[i]
                if dist[v] == dw1:
                    delta[v] += sigma[v] * coeff
            scores[w] += delta[w]
    return scores
