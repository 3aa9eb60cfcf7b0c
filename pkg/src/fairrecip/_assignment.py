"""Numba kernels for the square linear assignment problem.

The solver is the O(d^3) shortest-augmenting-path Hungarian method with row
and column potentials. After solving, ties are resolved towards the
lexicographically smallest optimal permutation (row 0 first) by rotating along
alternating cycles of the tight-edge graph, so results do not depend on the
order in which the augmenting search happened to explore columns.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def _hungarian(cost, col_of, u, v):
    d = cost.shape[0]
    # 1-based bookkeeping; index 0 is the virtual column of the method
    uu = np.zeros(d + 1)
    vv = np.zeros(d + 1)
    p = np.zeros(d + 1, dtype=np.int64)
    way = np.zeros(d + 1, dtype=np.int64)
    minv = np.empty(d + 1)
    used = np.empty(d + 1, dtype=np.bool_)
    for i in range(1, d + 1):
        p[0] = i
        j0 = 0
        minv[:] = np.inf
        used[:] = False
        while True:
            used[j0] = True
            i0 = p[j0]
            delta = np.inf
            j1 = 0
            for j in range(1, d + 1):
                if not used[j]:
                    cur = cost[i0 - 1, j - 1] - uu[i0] - vv[j]
                    if cur < minv[j]:
                        minv[j] = cur
                        way[j] = j0
                    if minv[j] < delta:
                        delta = minv[j]
                        j1 = j
            for j in range(d + 1):
                if used[j]:
                    uu[p[j]] += delta
                    vv[j] -= delta
                else:
                    minv[j] -= delta
            j0 = j1
            if p[j0] == 0:
                break
        while True:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1
            if j0 == 0:
                break
    for j in range(1, d + 1):
        col_of[p[j] - 1] = j - 1
    for i in range(d):
        u[i] = uu[i + 1]
        v[i] = vv[i + 1]


@njit(cache=True)
def _lex_canonicalize(cost, col_of, u, v, tol):
    d = cost.shape[0]
    row_of = np.empty(d, dtype=np.int64)
    for r in range(d):
        row_of[col_of[r]] = r
    tight = np.empty((d, d), dtype=np.bool_)
    for r in range(d):
        for c in range(d):
            tight[r, c] = cost[r, c] - u[r] - v[c] <= tol
    reach = np.empty(d, dtype=np.bool_)
    nxt = np.empty(d, dtype=np.int64)
    queue = np.empty(d, dtype=np.int64)
    for r in range(d):
        t = col_of[r]
        has_smaller = False
        for c in range(t):
            if tight[r, c] and row_of[c] > r:
                has_smaller = True
                break
        if not has_smaller:
            continue
        reach[:] = False
        head = 0
        tail = 0
        for x in range(r + 1, d):
            if tight[x, t]:
                reach[x] = True
                nxt[x] = -1
                queue[tail] = x
                tail += 1
        while head < tail:
            y = queue[head]
            head += 1
            cy = col_of[y]
            for x in range(r + 1, d):
                if not reach[x] and tight[x, cy]:
                    reach[x] = True
                    nxt[x] = y
                    queue[tail] = x
                    tail += 1
        for c in range(t):
            if not tight[r, c]:
                continue
            o = row_of[c]
            if o <= r or not reach[o]:
                continue
            x = o
            while True:
                y = nxt[x]
                if y == -1:
                    col_of[x] = t
                    row_of[t] = x
                    break
                cy = col_of[y]
                col_of[x] = cy
                row_of[cy] = x
                x = y
            col_of[r] = c
            row_of[c] = r
            break


@njit(cache=True)
def solve_min_cost(cost, rel_tol):
    """Column assigned to each row in a minimum-cost perfect assignment."""
    d = cost.shape[0]
    col_of = np.empty(d, dtype=np.int64)
    u = np.empty(d)
    v = np.empty(d)
    _hungarian(cost, col_of, u, v)
    scale = 1.0
    for r in range(d):
        for c in range(d):
            a = abs(cost[r, c])
            if a > scale:
                scale = a
    _lex_canonicalize(cost, col_of, u, v, rel_tol * d * scale)
    return col_of


@njit(cache=True)
def solve_min_cost_batch(costs, rel_tol):
    b = costs.shape[0]
    d = costs.shape[1]
    out = np.empty((b, d), dtype=np.int64)
    for k in range(b):
        out[k] = solve_min_cost(costs[k], rel_tol)
    return out
