"""Synthetic meshes and animations shared by the tests."""

import numpy as np

from stopshop.anim import AnimSequence


def strip_mesh(k):
    """Triangle strip with k triangles; its dual graph is a path."""
    cols = k // 2 + 2
    bottom = np.column_stack([np.arange(cols), np.zeros(cols), np.zeros(cols)])
    top = np.column_stack([np.arange(cols), np.ones(cols), np.zeros(cols)])
    verts = np.concatenate([bottom, top])  # top row offset by cols
    tris = []
    for i in range(cols - 1):
        tris.append((i, i + 1, cols + i))
        tris.append((i + 1, cols + i + 1, cols + i))
    tris = np.asarray(tris[:k], dtype=np.int64)
    used = np.unique(tris)
    remap = np.full(verts.shape[0], -1)
    remap[used] = np.arange(used.shape[0])
    return verts[used], remap[tris]


def tube_mesh(rings=3, ring_size=3):
    """Open cylinder of `rings` vertex rings, triangulated."""
    verts = []
    for level in range(rings):
        for i in range(ring_size):
            a = 2 * np.pi * i / ring_size
            verts.append([np.cos(a), np.sin(a), float(level)])
    tris = []
    for level in range(rings - 1):
        for i in range(ring_size):
            a = level * ring_size + i
            b = level * ring_size + (i + 1) % ring_size
            c = a + ring_size
            d = b + ring_size
            tris.extend([(a, b, c), (b, d, c)])
    return np.asarray(verts, dtype=float), np.asarray(tris, dtype=np.int64)


def grid_mesh(nx, ny, jitter=0.0, rng=None):
    """Planar triangulated grid with nx * ny vertices."""
    xs, ys = np.meshgrid(np.arange(nx, dtype=float), np.arange(ny, dtype=float))
    verts = np.column_stack([xs.ravel(), ys.ravel(), np.zeros(nx * ny)])
    if jitter and rng is not None:
        verts[:, :2] += rng.uniform(-jitter, jitter, size=(nx * ny, 2))
    tris = []
    for j in range(ny - 1):
        for i in range(nx - 1):
            a = j * nx + i
            tris.extend([(a, a + 1, a + nx), (a + 1, a + nx + 1, a + nx)])
    return verts, np.asarray(tris, dtype=np.int64)


def icosahedron():
    phi = (1.0 + np.sqrt(5.0)) / 2.0
    verts = np.array([
        (-1, phi, 0), (1, phi, 0), (-1, -phi, 0), (1, -phi, 0),
        (0, -1, phi), (0, 1, phi), (0, -1, -phi), (0, 1, -phi),
        (phi, 0, -1), (phi, 0, 1), (-phi, 0, -1), (-phi, 0, 1),
    ], dtype=float)
    tris = np.array([
        (0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
        (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
        (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
        (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1),
    ], dtype=np.int64)
    return verts, tris


def random_anim(rng, n_frames=4, mesh=None, scale=0.1, cuts=None):
    """Random animation: a base mesh plus per-frame noise."""
    if mesh is None:
        mesh = icosahedron()
    verts, tris = mesh
    frames = verts[None] + scale * rng.standard_normal((n_frames,) + verts.shape)
    if cuts is None:
        cuts = np.zeros(n_frames, dtype=bool)
    return AnimSequence(frames, tris, cuts)


def random_part(rng, n_frames, n_vertices, cuts=None, scale=1.0):
    """Random single-part animation; triangles are irrelevant to library ops."""
    from stopshop.library import PartAnim

    frames = scale * rng.standard_normal((n_frames, n_vertices, 3))
    if cuts is None:
        cuts = np.zeros(n_frames, dtype=bool)
    tris = np.array([[0, 1, 2]], dtype=np.int64)
    return PartAnim(frames, tris, np.asarray(cuts, dtype=bool), np.arange(n_vertices))
