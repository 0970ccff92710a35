"""Minimal per-frame deformation making the part-boundary geometry constant.

Each frame is deformed by the displacement field minimizing the discrete
squared-Laplacian energy tr(D^T L^T M^-1 L D), with the seam vertices and
their one-ring pinned to their animation-average positions. The system matrix
lives on the average mesh, so one factorization serves every frame and every
coordinate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .anim import AnimSequence, average_mesh
from .boundary import SegmentedAnim, triangle_areas
from .errors import OverConstrained, SolveFailure


@dataclass(frozen=True)
class FemOperators:
    L: sp.csr_matrix   # symmetric cotangent Laplacian, rows sum to 0
    M: sp.dia_matrix   # lumped (barycentric) mass matrix, diagonal


@dataclass(frozen=True)
class HomogenizedAnim:
    anim: AnimSequence
    part_labels: np.ndarray
    seam_vertices: np.ndarray
    constrained: np.ndarray      # seam plus one-ring, sorted
    seam_target: np.ndarray      # average positions at the constrained set
    n_parts: int


def cotangent_laplacian(avg, triangles) -> sp.csr_matrix:
    """Symmetric cotangent Laplacian with negative diagonal (L 1 = 0)."""
    avg = np.asarray(avg, dtype=float)
    tri = np.asarray(triangles)
    m = avg.shape[0]
    rows, cols, vals = [], [], []
    for a, b, c in ((0, 1, 2), (1, 2, 0), (2, 0, 1)):
        u = avg[tri[:, a]] - avg[tri[:, c]]
        v = avg[tri[:, b]] - avg[tri[:, c]]
        cos = (u * v).sum(axis=1)
        sin = np.linalg.norm(np.cross(u, v), axis=1)
        w = 0.5 * cos / np.maximum(sin, 1e-300)
        i, j = tri[:, a], tri[:, b]
        rows.extend((i, j, i, j))
        cols.extend((j, i, i, j))
        vals.extend((w, w, -w, -w))
    return sp.csr_matrix((np.concatenate(vals),
                          (np.concatenate(rows), np.concatenate(cols))), shape=(m, m))


def mass_matrix(avg, triangles) -> sp.dia_matrix:
    """Barycentric lumped mass: a third of each incident triangle's area."""
    tri = np.asarray(triangles)
    area = triangle_areas(np.asarray(avg, dtype=float), tri)
    m = int(tri.max()) + 1
    diag = np.zeros(m)
    for c in range(3):
        np.add.at(diag, tri[:, c], area / 3.0)
    return sp.diags(diag)


def fem_operators(avg, triangles) -> FemOperators:
    return FemOperators(cotangent_laplacian(avg, triangles), mass_matrix(avg, triangles))


def bilaplacian(ops: FemOperators) -> sp.csr_matrix:
    minv = 1.0 / ops.M.diagonal()
    return (ops.L.T @ sp.diags(minv) @ ops.L).tocsr()


def seam_constraint_set(seg: SegmentedAnim) -> np.ndarray:
    """Seam vertices plus every vertex sharing an edge with one."""
    m = seg.anim.n_vertices
    is_seam = np.zeros(m, dtype=bool)
    is_seam[seg.seam_vertices] = True
    out = is_seam.copy()
    tri = seg.anim.triangles
    for a, b in ((0, 1), (1, 2), (2, 0)):
        out[tri[:, a]] |= is_seam[tri[:, b]]
        out[tri[:, b]] |= is_seam[tri[:, a]]
    if out.all():
        raise OverConstrained("constraint set covers every vertex; mesh too coarse")
    return np.where(out)[0]


class _FrameSolver:
    """Factorized free-vertex block of the bi-Laplacian, reused across frames."""

    def __init__(self, Q, constrained, m):
        free_mask = np.ones(m, dtype=bool)
        free_mask[constrained] = False
        self.free = np.where(free_mask)[0]
        self.constrained = np.asarray(constrained)
        Q = Q.tocsr()
        self.Qff = Q[self.free][:, self.free].tocsc()
        self.Qfc = Q[self.free][:, self.constrained].tocsr()
        try:
            self.solve = spla.factorized(self.Qff)
        except RuntimeError as exc:
            raise SolveFailure(f"free-vertex system is singular: {exc}") from exc

    def displacement(self, d_constrained):
        """Free-vertex displacement given the constrained displacement (c, 3)."""
        rhs = -self.Qfc @ d_constrained
        out = np.column_stack([self.solve(rhs[:, c]) for c in range(rhs.shape[1])])
        if not np.isfinite(out).all():
            raise SolveFailure("non-finite homogenization solve")
        return out


def homogenize_frame(y_f, avg, ops: FemOperators, constrained) -> np.ndarray:
    """Deform one frame so the constrained set sits at its average position."""
    y_f = np.asarray(y_f, dtype=float)
    avg = np.asarray(avg, dtype=float)
    constrained = np.asarray(constrained, dtype=int)
    if constrained.size == 0 or constrained.size >= y_f.shape[0]:
        raise OverConstrained("constrained set must be a nonempty strict subset")
    solver = _FrameSolver(bilaplacian(ops), constrained, y_f.shape[0])
    z = y_f.copy()
    z[constrained] = avg[constrained]
    z[solver.free] += solver.displacement(avg[constrained] - y_f[constrained])
    return z


def homogenize_all(seg: SegmentedAnim) -> HomogenizedAnim:
    """Apply the seam-pinning deformation to every frame, sharing one factorization."""
    avg = average_mesh(seg.anim)
    ops = fem_operators(avg, seg.anim.triangles)
    constrained = seam_constraint_set(seg)
    if constrained.size == 0:
        return HomogenizedAnim(seg.anim, seg.part_labels, seg.seam_vertices,
                               constrained, avg[constrained], seg.n_parts)
    solver = _FrameSolver(bilaplacian(ops), constrained, seg.anim.n_vertices)
    Z = seg.anim.positions.copy()
    target = avg[constrained]
    for f in range(seg.anim.n_frames):
        d_free = solver.displacement(target - Z[f, constrained])
        Z[f, solver.free] += d_free
        Z[f, constrained] = target
    out = AnimSequence(Z, seg.anim.triangles, seg.anim.cuts)
    return HomogenizedAnim(out, seg.part_labels, seg.seam_vertices,
                           constrained, target, seg.n_parts)
