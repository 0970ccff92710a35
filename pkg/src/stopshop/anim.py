"""Animated mesh sequences: data model, OBJ ingestion and the temporal difference operator.

An animation is n frames of vertex positions over one shared triangle list.
Frame 0 always starts a clip; further clip starts ("cuts") disable the
velocity coupling across the clip boundary.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import ConnectivityMismatch, EmptyInput


@dataclass(frozen=True)
class AnimSequence:
    positions: np.ndarray  # (n, m, 3) float64
    triangles: np.ndarray  # (k, 3) int
    cuts: np.ndarray       # (n,) bool, cuts[0] is always True

    def __post_init__(self):
        pos = np.ascontiguousarray(self.positions, dtype=np.float64)
        tri = np.ascontiguousarray(self.triangles, dtype=np.int64)
        if pos.ndim != 3 or pos.shape[2] != 3:
            raise ValueError("positions must have shape (n, m, 3)")
        if tri.ndim != 2 or tri.shape[1] != 3:
            raise ValueError("triangles must have shape (k, 3)")
        n, m = pos.shape[0], pos.shape[1]
        if n < 1 or m < 3 or tri.shape[0] < 1:
            raise ValueError("need n >= 1 frames, m >= 3 vertices, k >= 1 triangles")
        if tri.min() < 0 or tri.max() >= m:
            raise ValueError("triangle index out of range")
        referenced = np.zeros(m, dtype=bool)
        referenced[tri.ravel()] = True
        if not referenced.all():
            raise ValueError("every vertex must be referenced by a triangle")
        cuts = np.array(self.cuts, dtype=bool).reshape(-1)
        if cuts.shape[0] != n:
            raise ValueError("cuts length must equal frame count")
        cuts[0] = True
        for a in (pos, tri, cuts):
            a.setflags(write=False)
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "triangles", tri)
        object.__setattr__(self, "cuts", cuts)

    @property
    def n_frames(self):
        return self.positions.shape[0]

    @property
    def n_vertices(self):
        return self.positions.shape[1]

    @property
    def n_triangles(self):
        return self.triangles.shape[0]


def average_mesh(anim: AnimSequence) -> np.ndarray:
    """Per-vertex arithmetic mean of the positions over all frames, (m, 3)."""
    return anim.positions.mean(axis=0)


def diff_operator(cuts: np.ndarray) -> sp.csc_matrix:
    """Forward finite-difference operator G of shape (n, n-1).

    Column g carries -1 at row g and +1 at row g+1; columns touching a cut
    frame are identically zero so no velocity is measured across clip
    boundaries. Frame 0 is implicitly a clip start but does not disable the
    first column.
    """
    cuts = np.asarray(cuts, dtype=bool)
    n = cuts.shape[0]
    rows, cols, vals = [], [], []
    for g in range(n - 1):
        if (cuts[g] and g > 0) or cuts[g + 1]:
            continue
        rows.extend((g, g + 1))
        cols.extend((g, g))
        vals.extend((-1.0, 1.0))
    return sp.csc_matrix((vals, (rows, cols)), shape=(n, max(n - 1, 0)))


def forward_difference(anim: AnimSequence) -> sp.csc_matrix:
    return diff_operator(anim.cuts)


def load_obj(path):
    """Minimal ASCII OBJ reader: vertices and triangular faces only."""
    verts, faces = [], []
    with open(path) as fh:
        for line in fh:
            if line.startswith("v "):
                parts = line.split()
                verts.append([float(parts[1]), float(parts[2]), float(parts[3])])
            elif line.startswith("f "):
                idx = [int(tok.split("/")[0]) - 1 for tok in line.split()[1:]]
                if len(idx) != 3:
                    raise ValueError(f"non-triangular face in {path}")
                faces.append(idx)
    return np.asarray(verts, dtype=np.float64), np.asarray(faces, dtype=np.int64)


def save_obj(path, vertices, triangles):
    with open(path, "w") as fh:
        for v in np.asarray(vertices, dtype=np.float64):
            fh.write("v %.17g %.17g %.17g\n" % (v[0], v[1], v[2]))
        for t in np.asarray(triangles, dtype=np.int64):
            fh.write("f %d %d %d\n" % (t[0] + 1, t[1] + 1, t[2] + 1))


def load_sequence(frame_sources, cut_marks=()) -> AnimSequence:
    """Load an ordered list of OBJ files sharing one connectivity.

    Connectivity is taken from frame 0; any frame whose vertex count or
    triangle list differs raises ConnectivityMismatch with that frame index.
    """
    frame_sources = list(frame_sources)
    if not frame_sources:
        raise EmptyInput("no input frames")
    v0, f0 = load_obj(frame_sources[0])
    frames = [v0]
    for i, src in enumerate(frame_sources[1:], start=1):
        v, f = load_obj(src)
        if v.shape != v0.shape or f.shape != f0.shape or not np.array_equal(f, f0):
            raise ConnectivityMismatch(i)
        frames.append(v)
    n = len(frames)
    cuts = np.zeros(n, dtype=bool)
    cuts[0] = True
    for f in cut_marks:
        cuts[int(f)] = True
    return AnimSequence(np.stack(frames), f0, cuts)


def load_sequence_dir(directory, cut_file=None) -> AnimSequence:
    """Load every *.obj in a directory in lexicographic order."""
    files = sorted(
        os.path.join(directory, f) for f in os.listdir(directory) if f.lower().endswith(".obj")
    )
    marks = load_cut_file(cut_file) if cut_file else ()
    return load_sequence(files, marks)


def save_sequence(directory, anim: AnimSequence, prefix="frame"):
    """Write one OBJ per frame plus a cut file; inverse of load_sequence_dir."""
    os.makedirs(directory, exist_ok=True)
    width = max(4, len(str(anim.n_frames - 1)))
    for f in range(anim.n_frames):
        save_obj(os.path.join(directory, f"{prefix}_{f:0{width}d}.obj"),
                 anim.positions[f], anim.triangles)
    marks = [str(f) for f in range(1, anim.n_frames) if anim.cuts[f]]
    with open(os.path.join(directory, "cuts.txt"), "w") as fh:
        fh.write("\n".join(marks) + ("\n" if marks else ""))


def load_cut_file(path):
    """One frame index per line; blank lines ignored."""
    marks = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                marks.append(int(line))
    return marks


def load_saliency_file(path, n_vertices):
    """Whitespace-separated non-negative weights, one per vertex."""
    with open(path) as fh:
        w = np.array(fh.read().split(), dtype=float)
    if w.shape[0] != n_vertices:
        raise ValueError(f"saliency file has {w.shape[0]} entries, expected {n_vertices}")
    if (w < 0).any():
        raise ValueError("saliency weights must be non-negative")
    if not (w > 0).any():
        raise ValueError("saliency weights must not be all zero")
    return w
