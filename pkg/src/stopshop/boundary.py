"""Smooth part boundaries: votes, mollification and iso-contour remeshing.

The per-triangle labeling is converted to per-vertex part votes (a partition
of unity), smoothed with an affine row-stochastic operator, and the curves
where the leading vote changes are meshed in by splitting triangles along
edge crossings. Crossing parameters are computed once on the shared topology
and applied to every frame, so the result stays a single-connectivity
animation whose per-frame surfaces are geometrically unchanged.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .anim import AnimSequence, average_mesh
from .errors import DegenerateStar

SNAP_EPS = 1e-12


@dataclass(frozen=True)
class SegmentedAnim:
    anim: AnimSequence
    part_labels: np.ndarray     # (y,) int per output triangle
    seam_vertices: np.ndarray   # sorted vertex indices on part boundaries
    n_parts: int
    # provenance of appended vertices: rows (i, j, t), vertex = (1-t) i + t j
    vertex_sources: np.ndarray


def triangle_areas(positions, triangles):
    """Areas for one frame (m,3 input) or all frames (n,m,3 input)."""
    p = np.asarray(positions, dtype=float)
    tri = np.asarray(triangles)
    a = p[..., tri[:, 1], :] - p[..., tri[:, 0], :]
    b = p[..., tri[:, 2], :] - p[..., tri[:, 0], :]
    return 0.5 * np.linalg.norm(np.cross(a, b), axis=-1)


def vertex_votes(anim: AnimSequence, tri_labels, n_parts=None) -> np.ndarray:
    """Animation-average-area-weighted part indicator per vertex, (s, m).

    Columns sum to one (partition of unity). A vertex whose whole star has
    zero average area raises DegenerateStar.
    """
    tri_labels = np.asarray(tri_labels, dtype=int)
    s = n_parts if n_parts is not None else tri_labels.max() + 1
    m = anim.n_vertices
    area = triangle_areas(anim.positions, anim.triangles).mean(axis=0)  # (k,)
    votes = np.zeros((s, m))
    total = np.zeros(m)
    for c in range(3):
        np.add.at(total, anim.triangles[:, c], area)
        np.add.at(votes, (tri_labels, anim.triangles[:, c]), area)
    dead = np.where(total == 0)[0]
    if dead.size:
        raise DegenerateStar(int(dead[0]))
    return votes / total


def smoothing_operator(avg, triangles, clamp=True) -> sp.csr_matrix:
    """Row-stochastic neighbor-averaging operator from cotangent weights.

    Negative cotangent weights (obtuse triangles) are clamped to zero so every
    row is a convex combination, keeping smoothed votes inside [0, 1].
    """
    avg = np.asarray(avg, dtype=float)
    tri = np.asarray(triangles)
    m = avg.shape[0]
    rows, cols, vals = [], [], []
    for a, b, c in ((0, 1, 2), (1, 2, 0), (2, 0, 1)):
        u = avg[tri[:, a]] - avg[tri[:, c]]
        v = avg[tri[:, b]] - avg[tri[:, c]]
        cos = (u * v).sum(axis=1)
        sin = np.linalg.norm(np.cross(u, v), axis=1)
        cot = 0.5 * cos / np.maximum(sin, 1e-300)
        if clamp:
            cot = np.maximum(cot, 0.0)
        rows.extend((tri[:, a], tri[:, b]))
        cols.extend((tri[:, b], tri[:, a]))
        vals.extend((cot, cot))
    W = sp.csr_matrix((np.concatenate(vals),
                       (np.concatenate(rows), np.concatenate(cols))), shape=(m, m))
    rowsum = np.asarray(W.sum(axis=1)).ravel()
    ok = rowsum > 0
    inv = np.where(ok, 1.0 / np.where(ok, rowsum, 1.0), 0.0)
    N = sp.diags(inv) @ W
    # rows with no usable neighbors stay put
    N = N + sp.diags((~ok).astype(float))
    return N.tocsr()


def smooth_votes(votes, operator, iterations=20, step=0.5) -> np.ndarray:
    """Explicit Laplacian smoothing v <- (1-step) v + step N v, per part.

    The update is affine with rows summing to one, so the partition of unity
    is preserved exactly.
    """
    if not 0.0 < step <= 1.0:
        raise ValueError("step must be in (0, 1]")
    v = np.asarray(votes, dtype=float).T  # (m, s)
    for _ in range(iterations):
        v = (1.0 - step) * v + step * (operator @ v)
    return v.T


def _edge_crossing(votes, i, j, li, lj):
    """Parameter t along edge i->j where the two leading votes tie."""
    da = votes[li, i] - votes[lj, i]  # >= 0 at i
    db = votes[li, j] - votes[lj, j]  # <= 0 at j
    denom = da - db
    return 0.5 if denom <= 0 else float(da / denom)


def extract_smooth_boundary(anim: AnimSequence, votes, min_island=1) -> SegmentedAnim:
    """Remesh along the curves where the leading vote changes.

    New vertices are inserted on edges whose endpoint argmax labels differ, at
    the (shared-topology) parameter where the two top votes are equal; each
    frame interpolates its own positions at that parameter, so per-frame
    geometry is unchanged. Output triangles are labeled by the vote argmax at
    their centroid. Label islands with fewer than `min_island` triangles are
    absorbed into their surroundings.
    """
    votes = np.asarray(votes, dtype=float)
    s, m = votes.shape
    tri = anim.triangles
    vlabel = np.argmax(votes, axis=0)

    new_pts = {}     # (min(i,j), max(i,j)) -> vertex id
    sources = []     # (i, j, t) rows for appended vertices
    vote_cols = [votes[:, v] for v in range(m)]
    next_id = m

    def crossing(i, j):
        nonlocal next_id
        li, lj = vlabel[i], vlabel[j]
        t = _edge_crossing(votes, i, j, li, lj)
        if t <= SNAP_EPS:
            return i
        if t >= 1.0 - SNAP_EPS:
            return j
        key = (min(i, j), max(i, j))
        if key in new_pts:
            return new_pts[key]
        if key != (i, j):
            t = 1.0 - t
        vid = next_id
        next_id += 1
        new_pts[key] = vid
        sources.append((key[0], key[1], t))
        vote_cols.append((1.0 - t) * votes[:, key[0]] + t * votes[:, key[1]])
        return vid

    out_tris = []
    for v0, v1, v2 in tri:
        l0, l1, l2 = vlabel[v0], vlabel[v1], vlabel[v2]
        if l0 == l1 == l2:
            out_tris.append((v0, v1, v2))
            continue
        if l0 != l1 and l1 != l2 and l2 != l0:
            p01, p12, p20 = crossing(v0, v1), crossing(v1, v2), crossing(v2, v0)
            out_tris.extend([(v0, p01, p20), (v1, p12, p01),
                             (v2, p20, p12), (p01, p12, p20)])
        else:
            # one odd corner c against two matching corners a, b (winding kept)
            if l1 == l2:
                c, a, b = v0, v1, v2
            elif l2 == l0:
                c, a, b = v1, v2, v0
            else:
                c, a, b = v2, v0, v1
            pca, pcb = crossing(c, a), crossing(c, b)
            out_tris.extend([(c, pca, pcb), (pca, a, b), (pca, b, pcb)])

    # drop degenerate pieces created by snapped crossings
    out_tris = [t for t in out_tris if len(set(t)) == 3]
    out_tris = np.asarray(out_tris, dtype=np.int64)
    all_votes = np.stack(vote_cols, axis=1)  # (s, m')

    cen_votes = all_votes[:, out_tris].mean(axis=2)  # (s, y)
    labels = np.argmax(cen_votes, axis=0)

    sources = np.asarray(sources, dtype=float).reshape(-1, 3)
    positions = interpolate_new_vertices(anim.positions, sources)
    out = AnimSequence(positions, out_tris, anim.cuts)
    labels = _absorb_islands(out_tris, labels, min_island)
    return SegmentedAnim(out, labels, _seam_vertices(out_tris, labels), s, sources)


def interpolate_new_vertices(positions, sources):
    """Append lerped vertices (rows i, j, t of `sources`) to every frame."""
    if sources.size == 0:
        return positions.copy()
    i = sources[:, 0].astype(int)
    j = sources[:, 1].astype(int)
    t = sources[:, 2][None, :, None]
    extra = (1.0 - t) * positions[:, i] + t * positions[:, j]
    return np.concatenate([positions, extra], axis=1)


def interpolate_vertex_field(field, sources):
    """Same interpolation for a per-vertex scalar/vector field, (m,) or (m, c)."""
    field = np.asarray(field, dtype=float)
    if sources.size == 0:
        return field.copy()
    i = sources[:, 0].astype(int)
    j = sources[:, 1].astype(int)
    t = sources[:, 2]
    t = t[:, None] if field.ndim > 1 else t
    return np.concatenate([field, (1.0 - t) * field[i] + t * field[j]], axis=0)


def _seam_vertices(triangles, labels):
    m = triangles.max() + 1
    lo = np.full(m, -1, dtype=np.int64)
    seam = np.zeros(m, dtype=bool)
    for t, tri in enumerate(triangles):
        for v in tri:
            if lo[v] < 0:
                lo[v] = labels[t]
            elif lo[v] != labels[t]:
                seam[v] = True
    return np.where(seam)[0]


def _absorb_islands(triangles, labels, min_island):
    """Relabel connected same-label components smaller than min_island."""
    if min_island <= 1:
        return labels
    from .segmentation import dual_edges

    labels = labels.copy()
    pairs, _ = dual_edges(triangles, triangles.max() + 1)
    changed = True
    while changed:
        changed = False
        comp = _label_components(len(labels), pairs, labels)
        sizes = np.bincount(comp)
        for c in np.where(sizes < min_island)[0]:
            members = np.where(comp == c)[0]
            nb_labels = []
            for a, b in pairs:
                if comp[a] == c and comp[b] != c:
                    nb_labels.append(labels[b])
                elif comp[b] == c and comp[a] != c:
                    nb_labels.append(labels[a])
            if nb_labels:
                vals, counts = np.unique(nb_labels, return_counts=True)
                labels[members] = vals[np.argmax(counts)]
                changed = True
    return labels


def _label_components(k, pairs, labels):
    parent = np.arange(k)

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for a, b in pairs:
        if labels[a] == labels[b]:
            ra, rb = find(a), find(b)
            if ra != rb:
                parent[ra] = rb
    roots = np.array([find(x) for x in range(k)])
    _, comp = np.unique(roots, return_inverse=True)
    return comp
