"""Transportation simplex with uniform marginals, compiled with numba.

Rows carry supply ``n`` and columns demand ``m`` (integer flows scaled by
``m * n``). Degeneracy is removed by the classic perturbation: every supply
gets ``+1`` and the last demand ``+m`` on a scale ``L = 2m + 1``. Every basic
solution of the perturbed problem is then strictly positive, so pivoting
cannot cycle, and the optimal basis is also optimal for the unperturbed
problem. Exact integer flows are recovered from the final spanning tree.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def _build_tree(m, n, bi, bj, cost, parent, parent_cell, depth, order, pot):
    N = m + n
    nb = bi.shape[0]
    deg = np.zeros(N + 1, np.int64)
    for k in range(nb):
        deg[bi[k] + 1] += 1
        deg[m + bj[k] + 1] += 1
    for v in range(N):
        deg[v + 1] += deg[v]
    fill = deg[:-1].copy()
    adj = np.empty(2 * nb, np.int64)
    for k in range(nb):
        a = bi[k]
        b = m + bj[k]
        adj[fill[a]] = k
        fill[a] += 1
        adj[fill[b]] = k
        fill[b] += 1

    for v in range(N):
        parent[v] = -2
    parent[0] = -1
    parent_cell[0] = -1
    depth[0] = 0
    pot[0] = 0.0
    order[0] = 0
    head = 0
    tail = 1
    while head < tail:
        v = order[head]
        head += 1
        for q in range(deg[v], deg[v + 1]):
            k = adj[q]
            if v < m:
                w = m + bj[k]
            else:
                w = bi[k]
            if parent[w] != -2:
                continue
            parent[w] = v
            parent_cell[w] = k
            depth[w] = depth[v] + 1
            c = cost[bi[k], bj[k]]
            # c_ij = u_i + v_j
            pot[w] = c - pot[v]
            order[tail] = w
            tail += 1
    return tail


@njit(cache=True)
def transport_simplex(cost, max_iter):
    """Return ``(bi, bj, flow, n_pivots)`` for the optimal basis.

    ``flow`` holds exact integer flows for supplies ``n`` per row and demands
    ``m`` per column; divide by ``m * n`` for the coupling.
    """
    m, n = cost.shape
    N = m + n
    nb = N - 1
    L = 2 * m + 1

    supply = np.empty(m, np.int64)
    demand = np.empty(n, np.int64)
    for i in range(m):
        supply[i] = n * L + 1
    for j in range(n):
        demand[j] = m * L
    demand[n - 1] += m

    # north-west corner start: nondegenerate under the perturbation
    bi = np.empty(nb, np.int64)
    bj = np.empty(nb, np.int64)
    flow = np.empty(nb, np.int64)
    s = supply.copy()
    d = demand.copy()
    i = 0
    j = 0
    for k in range(nb):
        f = min(s[i], d[j])
        bi[k] = i
        bj[k] = j
        flow[k] = f
        s[i] -= f
        d[j] -= f
        if s[i] == 0 and i < m - 1:
            i += 1
        else:
            j += 1

    parent = np.empty(N, np.int64)
    parent_cell = np.empty(N, np.int64)
    depth = np.empty(N, np.int64)
    order = np.empty(N, np.int64)
    pot = np.empty(N, np.float64)

    cmax = 0.0
    for i in range(m):
        for j in range(n):
            if abs(cost[i, j]) > cmax:
                cmax = abs(cost[i, j])
    tol = 1e-12 * cmax * (1.0 + np.log2(N))

    total = m * n
    block = max(int(np.sqrt(total)), 10)
    block = min(block, total)
    pos = 0
    path_cells = np.empty(N, np.int64)
    path_dec = np.empty(N, np.bool_)

    n_pivots = 0
    while True:
        _build_tree(m, n, bi, bj, cost, parent, parent_cell, depth, order, pot)

        # block-search pricing
        best = -tol
        ei = -1
        ej = -1
        scanned = 0
        in_block = 0
        while scanned < total:
            r = pos // n
            c = pos - r * n
            rc = cost[r, c] - pot[r] - pot[m + c]
            if rc < best:
                best = rc
                ei = r
                ej = c
            pos += 1
            if pos == total:
                pos = 0
            scanned += 1
            in_block += 1
            if in_block == block:
                if ei >= 0:
                    break
                in_block = 0
        if ei < 0:
            break
        if n_pivots >= max_iter:
            return bi, bj, flow, -1
        n_pivots += 1

        # cycle through the tree between row ei and column ej
        a = ei
        b = m + ej
        npath = 0
        while depth[a] > depth[b]:
            path_cells[npath] = parent_cell[a]
            path_dec[npath] = a < m
            npath += 1
            a = parent[a]
        while depth[b] > depth[a]:
            path_cells[npath] = parent_cell[b]
            path_dec[npath] = b >= m
            npath += 1
            b = parent[b]
        while a != b:
            path_cells[npath] = parent_cell[a]
            path_dec[npath] = a < m
            npath += 1
            a = parent[a]
            path_cells[npath] = parent_cell[b]
            path_dec[npath] = b >= m
            npath += 1
            b = parent[b]

        theta = -1
        leave = -1
        for q in range(npath):
            if path_dec[q]:
                k = path_cells[q]
                if theta < 0 or flow[k] < theta:
                    theta = flow[k]
                    leave = k
        for q in range(npath):
            k = path_cells[q]
            if path_dec[q]:
                flow[k] -= theta
            else:
                flow[k] += theta
        bi[leave] = ei
        bj[leave] = ej
        flow[leave] = theta

    # exact flows of the unperturbed problem on the final tree
    _build_tree(m, n, bi, bj, cost, parent, parent_cell, depth, order, pot)
    res = np.empty(N, np.int64)
    for i in range(m):
        res[i] = n
    for j in range(n):
        res[m + j] = m
    for q in range(N - 1, 0, -1):
        v = order[q]
        f = res[v]
        flow[parent_cell[v]] = f
        res[parent[v]] -= f
    return bi, bj, flow, n_pivots
