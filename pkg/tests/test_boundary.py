import numpy as np
import pytest

from stopshop.anim import AnimSequence, average_mesh
from stopshop.boundary import (extract_smooth_boundary, interpolate_vertex_field,
                               smooth_votes, smoothing_operator, triangle_areas,
                               vertex_votes)
from stopshop.errors import DegenerateStar

from helpers import grid_mesh, icosahedron, strip_mesh


def static_anim(verts, tris, n=2):
    return AnimSequence(np.stack([verts] * n), tris, np.zeros(n, dtype=bool))


def split_labels(tris, verts, axis=0, threshold=None):
    cents = verts[tris].mean(axis=1)
    if threshold is None:
        threshold = np.median(cents[:, axis])
    return (cents[:, axis] > threshold).astype(int)


def test_interior_vertex_vote_is_pure():
    verts, tris = grid_mesh(5, 5)
    anim = static_anim(verts, tris)
    labels = split_labels(tris, verts)
    votes = vertex_votes(anim, labels, 2)
    np.testing.assert_allclose(votes.sum(axis=0), 1.0, atol=1e-14)
    # a vertex whose star is single-label votes 1.0 for it
    for v in range(anim.n_vertices):
        star = {labels[t] for t in range(len(tris)) if v in tris[t]}
        if len(star) == 1:
            j = star.pop()
            assert votes[j, v] == pytest.approx(1.0, abs=1e-14)


def test_two_equal_triangles_vote_half():
    verts, tris = strip_mesh(2)
    anim = static_anim(verts, tris)
    votes = vertex_votes(anim, np.array([0, 1]), 2)
    shared = sorted(set(tris[0]) & set(tris[1]))
    areas = triangle_areas(verts, tris)
    assert areas[0] == pytest.approx(areas[1])
    for v in shared:
        np.testing.assert_allclose(votes[:, v], [0.5, 0.5], atol=1e-14)


def test_votes_match_weighted_average_oracle():
    rng = np.random.default_rng(20)
    verts, tris = icosahedron()
    pos = verts[None] + 0.2 * rng.standard_normal((3,) + verts.shape)
    anim = AnimSequence(pos, tris, np.zeros(3, dtype=bool))
    labels = rng.integers(0, 3, size=tris.shape[0])
    votes = vertex_votes(anim, labels, 3)
    avg_area = triangle_areas(anim.positions, tris).mean(axis=0)
    for v in range(anim.n_vertices):
        inc = [t for t in range(len(tris)) if v in tris[t]]
        total = sum(avg_area[t] for t in inc)
        for j in range(3):
            expected = sum(avg_area[t] for t in inc if labels[t] == j) / total
            assert votes[j, v] == pytest.approx(expected, rel=1e-12)


def test_degenerate_star_raises():
    verts, tris = strip_mesh(2)
    flat = verts.copy()
    flat[:, :] = 0.0  # all triangles collapse
    anim = static_anim(flat, tris)
    with pytest.raises(DegenerateStar):
        vertex_votes(anim, np.array([0, 1]), 2)


def test_smoothing_identity_and_constants():
    verts, tris = icosahedron()
    op = smoothing_operator(verts, tris)
    rng = np.random.default_rng(21)
    raw = rng.uniform(size=(3, verts.shape[0]))
    raw /= raw.sum(axis=0)
    np.testing.assert_allclose(smooth_votes(raw, op, iterations=0), raw)
    const = np.full((1, verts.shape[0]), 1.0)
    np.testing.assert_allclose(smooth_votes(const, op, iterations=17), const,
                               atol=1e-14)


def test_smoothing_preserves_partition_of_unity():
    rng = np.random.default_rng(22)
    verts, tris = grid_mesh(6, 6, jitter=0.2, rng=rng)
    op = smoothing_operator(verts, tris)
    raw = rng.uniform(size=(4, verts.shape[0]))
    raw /= raw.sum(axis=0)
    out = smooth_votes(raw, op, iterations=50, step=0.5)
    assert np.abs(out.sum(axis=0) - 1.0).max() < 1e-12
    assert out.min() >= -1e-14 and out.max() <= 1.0 + 1e-14


def test_edge_crossing_parameter():
    # votes (0.4, 0.6) -> (0.8, 0.2): equality 0.25 of the way from the second end
    from stopshop.boundary import _edge_crossing

    votes = np.array([[0.8, 0.4], [0.2, 0.6]])
    t = _edge_crossing(votes, 0, 1, 0, 1)  # from vertex 0 toward vertex 1
    assert t == pytest.approx(0.75)  # = 1 - 0.25 measured from vertex 1


def test_piecewise_constant_votes_add_no_vertices():
    verts, tris = grid_mesh(5, 4)
    anim = static_anim(verts, tris)
    # indicator votes whose tie line sits exactly on the x = 2 vertex column
    v0 = np.where(verts[:, 0] < 2, 1.0, np.where(verts[:, 0] > 2, 0.0, 0.5))
    votes = np.stack([v0, 1.0 - v0])
    seg = extract_smooth_boundary(anim, votes)
    assert seg.anim.n_vertices == anim.n_vertices
    np.testing.assert_array_equal(
        seg.part_labels,
        np.argmax(votes[:, seg.anim.triangles].mean(axis=2), axis=0))


def test_extraction_geometry_preserved():
    rng = np.random.default_rng(23)
    verts, tris = grid_mesh(7, 5, jitter=0.15, rng=rng)
    pos = verts[None] + 0.1 * rng.standard_normal((3,) + verts.shape)
    anim = AnimSequence(pos, tris, np.zeros(3, dtype=bool))
    labels = split_labels(tris, average_mesh(anim))
    votes = vertex_votes(anim, labels, 2)
    op = smoothing_operator(average_mesh(anim), tris)
    votes = smooth_votes(votes, op, iterations=10, step=0.5)
    seg = extract_smooth_boundary(anim, votes)

    assert seg.anim.n_triangles >= anim.n_triangles
    # every appended vertex lies on its source edge in every frame
    src = seg.vertex_sources
    for f in range(3):
        pts = seg.anim.positions[f, anim.n_vertices:]
        for row, p in zip(src, pts):
            i, j, t = int(row[0]), int(row[1]), row[2]
            a, b = anim.positions[f, i], anim.positions[f, j]
            expect = (1 - t) * a + t * b
            assert np.linalg.norm(p - expect) < 1e-12
    # original vertices untouched
    np.testing.assert_array_equal(seg.anim.positions[:, :anim.n_vertices],
                                  anim.positions)
    # seam exists for a connected two-part mesh
    assert seg.seam_vertices.size > 0


def test_extraction_labels_are_centroid_argmax():
    rng = np.random.default_rng(24)
    verts, tris = grid_mesh(6, 6, jitter=0.1, rng=rng)
    anim = static_anim(verts, tris)
    labels = split_labels(tris, verts)
    votes = vertex_votes(anim, labels, 2)
    op = smoothing_operator(verts, tris)
    votes = smooth_votes(votes, op, iterations=15)
    seg = extract_smooth_boundary(anim, votes)
    all_votes = np.column_stack([votes,
                                 _lerped(votes, seg.vertex_sources)])
    cen = all_votes[:, seg.anim.triangles].mean(axis=2)
    np.testing.assert_array_equal(seg.part_labels, np.argmax(cen, axis=0))


def _lerped(votes, sources):
    return interpolate_vertex_field(votes.T, sources).T[:, votes.shape[1]:]


def test_hausdorff_like_surface_preservation():
    # sampled points of each remeshed triangle lie on the input surface plane
    rng = np.random.default_rng(25)
    verts, tris = grid_mesh(6, 5, jitter=0.1, rng=rng)
    anim = static_anim(verts, tris)
    labels = split_labels(tris, verts)
    votes = vertex_votes(anim, labels, 2)
    op = smoothing_operator(verts, tris)
    votes = smooth_votes(votes, op, iterations=10)
    seg = extract_smooth_boundary(anim, votes)
    # planar test surface: z must stay exactly 0
    assert np.abs(seg.anim.positions[..., 2]).max() < 1e-12
    # total area is unchanged (exact cover of the original surface)
    a0 = triangle_areas(anim.positions[0], anim.triangles).sum()
    a1 = triangle_areas(seg.anim.positions[0], seg.anim.triangles).sum()
    assert a1 == pytest.approx(a0, rel=1e-12)
