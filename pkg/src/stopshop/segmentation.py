"""Per-triangle part segmentation with near-stationary boundaries.

The labeling minimizes a seed-distance unary term plus a motion-weighted
cut-length binary term over the triangle dual graph; the binary weight of a
dual edge accumulates, per frame, the edge length times (1 + displacement of
the shared vertices from the animation average), so cuts prefer short,
near-motionless curves.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import dijkstra

from .anim import AnimSequence, average_mesh
from .errors import InvalidSeeds, WarnedUnreachable
from .graphcut import potts_labels

DEFAULT_GAMMA = 100.0


@dataclass(frozen=True)
class SeedSet:
    parts: tuple  # one int array of triangle indices per part

    def __post_init__(self):
        parts = tuple(np.asarray(p, dtype=np.int64).reshape(-1) for p in self.parts)
        if len(parts) < 2:
            raise InvalidSeeds("need at least two seed parts")
        seen = set()
        for p in parts:
            if p.size == 0:
                raise InvalidSeeds("seed part is empty")
            ids = set(map(int, p))
            if seen & ids:
                raise InvalidSeeds("seed parts must be disjoint")
            seen |= ids
        object.__setattr__(self, "parts", parts)

    @property
    def n_parts(self):
        return len(self.parts)


def load_seed_file(path) -> SeedSet:
    """One part per line: whitespace-separated triangle indices."""
    parts = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                parts.append([int(tok) for tok in line.split()])
    return SeedSet(tuple(parts))


def dual_edges(triangles, n_vertices):
    """Adjacent triangle pairs and their shared vertex pairs.

    Returns (pairs, shared): (E, 2) triangle indices with pairs[:,0] < pairs[:,1],
    and (E, 2) the two vertices of the shared edge.
    """
    triangles = np.asarray(triangles)
    edge_map = {}
    pairs, shared = [], []
    for t, tri in enumerate(triangles):
        for a, b in ((0, 1), (1, 2), (2, 0)):
            key = (min(tri[a], tri[b]), max(tri[a], tri[b]))
            other = edge_map.get(key)
            if other is None:
                edge_map[key] = t
            else:
                pairs.append((other, t))
                shared.append(key)
    return (np.asarray(pairs, dtype=np.int64).reshape(-1, 2),
            np.asarray(shared, dtype=np.int64).reshape(-1, 2))


def geodesic_distances(avg, triangles, seeds: SeedSet):
    """Shortest dual-graph distance from every triangle to each seed set, (s, k).

    Edge weight is the centroid-to-centroid distance on the average mesh.
    Triangles in a component without any seed get +inf and raise the
    WarnedUnreachable warning.
    """
    avg = np.asarray(avg, dtype=float)
    triangles = np.asarray(triangles)
    k = triangles.shape[0]
    pairs, _ = dual_edges(triangles, avg.shape[0])
    cent = avg[triangles].mean(axis=1)
    if pairs.size:
        w = np.linalg.norm(cent[pairs[:, 0]] - cent[pairs[:, 1]], axis=1)
        graph = sp.csr_matrix((np.r_[w, w], (np.r_[pairs[:, 0], pairs[:, 1]],
                                             np.r_[pairs[:, 1], pairs[:, 0]])), shape=(k, k))
    else:
        graph = sp.csr_matrix((k, k))
    dist = np.empty((seeds.n_parts, k))
    for j, part in enumerate(seeds.parts):
        d = dijkstra(graph, indices=part)
        dist[j] = d.min(axis=0) if d.ndim == 2 else d
    if np.isinf(dist).all(axis=0).any():
        warnings.warn("triangles unreachable from every seed", WarnedUnreachable)
    return dist


def _binary_weights(anim: AnimSequence, pairs, shared):
    """Per dual edge: sum_f |e_f| * (1 + sum of shared-vertex displacements at f)."""
    avg = average_mesh(anim)
    X = anim.positions
    i, j = shared[:, 0], shared[:, 1]
    elen = np.linalg.norm(X[:, i] - X[:, j], axis=2)          # (n, E)
    disp = (np.linalg.norm(X[:, i] - avg[i], axis=2)
            + np.linalg.norm(X[:, j] - avg[j], axis=2))       # (n, E)
    return (elen * (1.0 + disp)).sum(axis=0)


def _unary_table(dist, slack=0.0):
    """Distance table with unreachable entries made usable by the solver.

    Fully unreachable triangles get 0 for every part (ties resolve to the
    lowest part index downstream); partially unreachable entries get a
    finite cost dominating every feasible labeling (slack adds the binary
    budget to that bound).
    """
    u = np.array(dist.T, dtype=float)  # (k, s)
    all_inf = np.isinf(u).all(axis=1)
    u[all_inf] = 0.0
    finite = u[np.isfinite(u)]
    big = 2.0 * (finite.sum() + slack) + 1.0
    u[np.isinf(u)] = big
    return u, big


def segmentation_energy(anim: AnimSequence, labels, seeds: SeedSet, gamma) -> float:
    """Value of the segmentation objective for a given labeling."""
    labels = np.asarray(labels, dtype=int)
    dist = geodesic_distances(average_mesh(anim), anim.triangles, seeds)
    pairs, shared = dual_edges(anim.triangles, anim.n_vertices)
    unary = dist[labels, np.arange(anim.n_triangles)]
    unary = np.where(np.isinf(unary) & np.isinf(dist).all(axis=0), 0.0, unary)
    e = unary.sum()
    if pairs.size:
        w = _binary_weights(anim, pairs, shared)
        cut = labels[pairs[:, 0]] != labels[pairs[:, 1]]
        e += gamma * w[cut].sum()
    return float(e)


def rescale_to_unit_box(anim: AnimSequence) -> tuple[AnimSequence, float]:
    """Uniformly scale so the average mesh fits a unit bounding box.

    Returns the scaled sequence and the applied factor (positions * factor).
    """
    avg = average_mesh(anim)
    extent = (avg.max(axis=0) - avg.min(axis=0)).max()
    factor = 1.0 / extent if extent > 0 else 1.0
    return AnimSequence(anim.positions * factor, anim.triangles, anim.cuts), factor


def segment_parts(anim: AnimSequence, seeds: SeedSet, gamma=DEFAULT_GAMMA,
                  rescale=True) -> np.ndarray:
    """Optimize the per-triangle part labeling, (k,) ints in [0, s).

    Seed triangles keep their part. s=2 is a single exact min-cut; s>2 runs
    alpha-expansion from the pure-unary labeling. With rescale=True (default)
    the energy is evaluated on the model scaled to a unit bounding box, which
    is the scale at which the default gamma is calibrated.
    """
    if seeds is None or seeds.n_parts < 2:
        raise InvalidSeeds("segmentation needs at least two seed parts")
    work = rescale_to_unit_box(anim)[0] if rescale else anim
    dist = geodesic_distances(average_mesh(work), work.triangles, seeds)
    pairs, shared = dual_edges(work.triangles, work.n_vertices)
    weights = gamma * _binary_weights(work, pairs, shared) if pairs.size else np.zeros(0)
    unary, big = _unary_table(dist, slack=weights.sum())
    for j, part in enumerate(seeds.parts):  # pin seed triangles to their part
        unary[part] = big
        unary[part, j] = 0.0
    init = np.argmin(unary, axis=1)
    return potts_labels(unary, pairs, weights, init=init)
