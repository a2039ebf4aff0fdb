"""Bit-parallel multi-source BFS kernels.

Sources are processed 64 at a time: bit ``j`` of ``frontier[v]`` says that
source ``j`` of the current batch reached ``v`` at the current depth.  One
sweep over the CSR arrays advances all 64 searches by one level.
"""

import numba as nb
import numpy as np

_ONE = np.uint64(1)
_M1 = np.uint64(0x5555555555555555)
_M2 = np.uint64(0x3333333333333333)
_M4 = np.uint64(0x0F0F0F0F0F0F0F0F)
_H01 = np.uint64(0x0101010101010101)


@nb.njit(cache=True, inline="always")
def _popcount(x):
    x = x - ((x >> np.uint64(1)) & _M1)
    x = (x & _M2) + ((x >> np.uint64(2)) & _M2)
    x = (x + (x >> np.uint64(4))) & _M4
    return np.int64((x * _H01) >> np.uint64(56))


@nb.njit(cache=True)
def _advance(indptr, indices, frontier, visited, nxt):
    n = len(indptr) - 1
    for v in range(n):
        acc = np.uint64(0)
        for k in range(indptr[v], indptr[v + 1]):
            acc |= frontier[indices[k]]
        nxt[v] = acc & ~visited[v]


@nb.njit(cache=True)
def sphere_counts(indptr, indices, sources, group, n_groups):
    """Count (source, target) pairs by distance and target group.

    Returns ``counts[g, r]`` (pairs whose target lies in group ``g`` at
    distance ``r``) and ``unreached[g]``.
    """
    n = len(indptr) - 1
    counts = np.zeros((n_groups, n + 1), dtype=np.int64)
    group_size = np.zeros(n_groups, dtype=np.int64)
    for v in range(n):
        group_size[group[v]] += 1
    unreached = np.zeros(n_groups, dtype=np.int64)
    visited = np.zeros(n, dtype=np.uint64)
    frontier = np.zeros(n, dtype=np.uint64)
    nxt = np.zeros(n, dtype=np.uint64)
    for b0 in range(0, len(sources), 64):
        nbatch = min(64, len(sources) - b0)
        visited[:] = 0
        frontier[:] = 0
        for j in range(nbatch):
            bit = _ONE << np.uint64(j)
            s = sources[b0 + j]
            visited[s] |= bit
            frontier[s] |= bit
            counts[group[s], 0] += 1
        reached = np.zeros(n_groups, dtype=np.int64)
        for j in range(nbatch):
            reached[group[sources[b0 + j]]] += 1
        r = 0
        while True:
            r += 1
            _advance(indptr, indices, frontier, visited, nxt)
            active = False
            for v in range(n):
                x = nxt[v]
                if x:
                    visited[v] |= x
                    c = _popcount(x)
                    counts[group[v], r] += c
                    reached[group[v]] += c
                    active = True
            frontier, nxt = nxt, frontier
            if not active:
                break
        for g in range(n_groups):
            unreached[g] += nbatch * group_size[g] - reached[g]
    return counts, unreached


@nb.njit(cache=True)
def distance_rows(indptr, indices, sources):
    """Distance matrix ``dist[i, v]`` from ``sources[i]``; -1 if unreachable."""
    n = len(indptr) - 1
    dist = np.full((len(sources), n), -1, dtype=np.int16)
    visited = np.zeros(n, dtype=np.uint64)
    frontier = np.zeros(n, dtype=np.uint64)
    nxt = np.zeros(n, dtype=np.uint64)
    for b0 in range(0, len(sources), 64):
        nbatch = min(64, len(sources) - b0)
        visited[:] = 0
        frontier[:] = 0
        for j in range(nbatch):
            bit = _ONE << np.uint64(j)
            s = sources[b0 + j]
            visited[s] |= bit
            frontier[s] |= bit
            dist[b0 + j, s] = 0
        r = 0
        while True:
            r += 1
            _advance(indptr, indices, frontier, visited, nxt)
            active = False
            for v in range(n):
                x = nxt[v]
                if x:
                    visited[v] |= x
                    active = True
                    for j in range(nbatch):
                        if (x >> np.uint64(j)) & _ONE:
                            dist[b0 + j, v] = r
            frontier, nxt = nxt, frontier
            if not active:
                break
    return dist
