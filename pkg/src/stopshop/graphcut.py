"""Min-cut / multilabel machinery for the part segmentation energy.

Binary (two-part) problems are solved by one exact s-t max-flow; more parts
use alpha-expansion where every move is again a single max-flow. Capacities
are kept in floating point, so the solver is exact for the energies we feed
it (up to cancellation noise well below the energy scale).
"""

from __future__ import annotations

from collections import deque

import numpy as np


class MaxFlow:
    """Dinic's algorithm on an adjacency-list residual graph."""

    def __init__(self, n_nodes):
        self.n = n_nodes
        self.to = []
        self.cap = []
        self.adj = [[] for _ in range(n_nodes)]

    def add_edge(self, u, v, cap, rcap=0.0):
        self.adj[u].append(len(self.to))
        self.to.append(v)
        self.cap.append(float(cap))
        self.adj[v].append(len(self.to))
        self.to.append(u)
        self.cap.append(float(rcap))

    def _bfs(self, s, t, eps):
        level = [-1] * self.n
        level[s] = 0
        q = deque([s])
        while q:
            u = q.popleft()
            for e in self.adj[u]:
                v = self.to[e]
                if level[v] < 0 and self.cap[e] > eps:
                    level[v] = level[u] + 1
                    q.append(v)
        self.level = level
        return level[t] >= 0

    def _dfs(self, s, t, eps):
        # iterative blocking-flow: repeated DFS with per-node edge pointers
        ptr = [0] * self.n
        total = 0.0
        path = []
        u = s
        while True:
            if u == t:
                flow = min(self.cap[e] for e in path)
                for e in path:
                    self.cap[e] -= flow
                    self.cap[e ^ 1] += flow
                total += flow
                # back up to the first saturated edge on the path
                for depth, e in enumerate(path):
                    if self.cap[e] <= eps:
                        del path[depth:]
                        break
                u = s if not path else self.to[path[-1]]
                continue
            advanced = False
            while ptr[u] < len(self.adj[u]):
                e = self.adj[u][ptr[u]]
                v = self.to[e]
                if self.cap[e] > eps and self.level[v] == self.level[u] + 1:
                    path.append(e)
                    u = v
                    advanced = True
                    break
                ptr[u] += 1
            if not advanced:
                if u == s:
                    return total
                self.level[u] = -1  # dead end in this phase
                e = path.pop()
                u = self.to[e ^ 1]
                ptr[u] += 1

    def max_flow(self, s, t):
        scale = max((c for c in self.cap), default=1.0)
        eps = 1e-12 * max(scale, 1.0)
        total = 0.0
        while self._bfs(s, t, eps):
            total += self._dfs(s, t, eps)
        self._eps = eps
        return total

    def source_side(self, s):
        """Nodes reachable from s in the residual graph after max_flow."""
        seen = np.zeros(self.n, dtype=bool)
        seen[s] = True
        q = deque([s])
        eps = getattr(self, "_eps", 1e-12)
        while q:
            u = q.popleft()
            for e in self.adj[u]:
                v = self.to[e]
                if not seen[v] and self.cap[e] > eps:
                    seen[v] = True
                    q.append(v)
        return seen


def _solve_binary(theta0, theta1, edges, pairwise):
    """Exact minimizer of a submodular binary energy.

    theta0/theta1: per-node costs for x=0 / x=1.
    pairwise: iterable of (A, B, C, D) = E(0,0), E(0,1), E(1,0), E(1,1) per edge,
    required submodular (B + C >= A + D).
    Returns a boolean array, x[i] = True meaning state 1.
    """
    n = len(theta0)
    g = MaxFlow(n + 2)
    s, t = n, n + 1
    # convention: node on sink side of the cut <=> x = 1
    add0 = np.zeros(n)
    add1 = np.asarray(theta1, dtype=float) - np.asarray(theta0, dtype=float)
    for (i, j), (A, B, C, D) in zip(edges, pairwise):
        # E(xi,xj) = A + (C-A) xi + (D-C) xj + (B+C-A-D) [xi=0, xj=1]
        add1[i] += C - A
        add1[j] += D - C
        w = B + C - A - D
        if w < 0:
            raise ValueError("pairwise term is not submodular")
        if w > 0:
            g.add_edge(i, j, w)
    for i in range(n):
        r = add1[i] - add0[i]
        if r > 0:
            g.add_edge(s, i, r)
        elif r < 0:
            g.add_edge(i, t, -r)
    g.max_flow(s, t)
    side = g.source_side(s)
    return ~side[:n]


def potts_labels(unary, edges, weights, init=None):
    """Minimize sum_i unary[i, l_i] + sum_(i,j) w_ij [l_i != l_j].

    unary: (k, s) finite costs; edges: (E, 2) int; weights: (E,) >= 0.
    s = 2 is solved exactly by one cut; s > 2 by alpha-expansion started
    from `init` (default: per-node argmin of the unary, lowest index on ties).
    """
    unary = np.asarray(unary, dtype=float)
    k, s = unary.shape
    edges = np.asarray(edges, dtype=int).reshape(-1, 2)
    weights = np.asarray(weights, dtype=float).reshape(-1)

    if s == 2:
        x = _solve_binary(unary[:, 0], unary[:, 1],
                          edges, [(0.0, w, w, 0.0) for w in weights])
        return x.astype(int)

    labels = np.argmin(unary, axis=1) if init is None else np.array(init, dtype=int)
    edge_list = [tuple(e) for e in edges]

    def energy(lab):
        e = unary[np.arange(k), lab].sum()
        e += weights[lab[edges[:, 0]] != lab[edges[:, 1]]].sum()
        return e

    best = energy(labels)
    improved = True
    while improved:
        improved = False
        for alpha in range(s):
            theta0 = unary[np.arange(k), labels]  # keep current label
            theta1 = unary[:, alpha]              # switch to alpha
            pw = []
            for (i, j), w in zip(edge_list, weights):
                li, lj = labels[i], labels[j]
                A = w if li != lj else 0.0
                B = w if li != alpha else 0.0
                C = w if alpha != lj else 0.0
                pw.append((A, B, C, 0.0))
            x = _solve_binary(theta0, theta1, edge_list, pw)
            cand = np.where(x, alpha, labels)
            e = energy(cand)
            if e < best - 1e-12 * max(abs(best), 1.0):
                labels, best = cand, e
                improved = True
    return labels
