import json
import os

import numpy as np
import pytest

from stopshop.anim import AnimSequence, load_obj, load_sequence_dir, save_obj, save_sequence
from stopshop.errors import EmptyPart, StopShopError
from stopshop.homogenize import HomogenizedAnim
from stopshop.library import assign_labels, total_energy
from stopshop.pipeline import (PipelineConfig, extract_part_submesh,
                               load_fixed_library, report_errors,
                               run_pipeline, uniform_library)

from helpers import tube_mesh


def _wobbling_tube(rng, n_frames=12, rings=6, ring_size=4):
    """Open tube whose ends flap while the middle stays still, so the cheap
    near-stationary cut runs around the middle ring."""
    verts, tris = tube_mesh(rings, ring_size)
    zc = verts[:, 2] - verts[:, 2].mean()
    frames = np.empty((n_frames, verts.shape[0], 3))
    for f in range(n_frames):
        bend = 0.5 * np.sin(2 * np.pi * f / n_frames)
        frames[f] = verts
        frames[f, :, 0] += bend * zc ** 2
    frames += 1e-3 * rng.standard_normal(frames.shape)
    return AnimSequence(frames, tris, np.zeros(n_frames, dtype=bool))


def _write_inputs(tmp_path, anim, seeds=True, ring_triangles=8):
    in_dir = tmp_path / "frames"
    save_sequence(str(in_dir), anim)
    seed_file = None
    if seeds:
        k = anim.n_triangles
        first = " ".join(str(t) for t in range(ring_triangles))
        last = " ".join(str(t) for t in range(k - ring_triangles, k))
        seed_file = tmp_path / "seeds.txt"
        seed_file.write_text(f"{first}\n{last}\n")
    return str(in_dir), (str(seed_file) if seed_file else None)


def _trivial_hom(anim, labels, n_parts):
    return HomogenizedAnim(anim, labels, np.array([], dtype=np.int64),
                           np.array([], dtype=np.int64), np.zeros((0, 3)), n_parts)


def test_extract_whole_mesh_single_part():
    rng = np.random.default_rng(70)
    anim = _wobbling_tube(rng)
    hom = _trivial_hom(anim, np.zeros(anim.n_triangles, dtype=np.int64), 1)
    part = extract_part_submesh(hom, 0)
    assert part.n_vertices == anim.n_vertices
    np.testing.assert_allclose(part.positions, anim.positions)
    np.testing.assert_array_equal(part.triangles, anim.triangles)
    np.testing.assert_array_equal(part.global_vertices, np.arange(anim.n_vertices))


def test_extract_shares_seam_vertices():
    rng = np.random.default_rng(71)
    anim = _wobbling_tube(rng, rings=4, ring_size=4)
    # split the tube in half along the rings; the middle ring is shared
    z = anim.positions[0, anim.triangles].mean(axis=1)[:, 2]
    labels = (z > np.median(z)).astype(np.int64)
    hom = _trivial_hom(anim, labels, 2)
    p0 = extract_part_submesh(hom, 0)
    p1 = extract_part_submesh(hom, 1)
    shared = np.intersect1d(p0.global_vertices, p1.global_vertices)
    assert shared.size > 0
    # shared vertices carry identical positions in both sub-meshes
    l0 = np.searchsorted(p0.global_vertices, shared)
    l1 = np.searchsorted(p1.global_vertices, shared)
    np.testing.assert_array_equal(p0.positions[:, l0], p1.positions[:, l1])
    # every triangle of the original mesh lands in exactly one part
    assert p0.triangles.shape[0] + p1.triangles.shape[0] == anim.n_triangles


def test_extract_empty_part_raises():
    rng = np.random.default_rng(72)
    anim = _wobbling_tube(rng, rings=3, ring_size=3)
    hom = _trivial_hom(anim, np.zeros(anim.n_triangles, dtype=np.int64), 2)
    with pytest.raises(EmptyPart):
        extract_part_submesh(hom, 1)


def test_uniform_library_endpoints():
    rng = np.random.default_rng(73)
    anim = _wobbling_tube(rng, n_frames=10)
    hom = _trivial_hom(anim, np.zeros(anim.n_triangles, dtype=np.int64), 1)
    part = extract_part_submesh(hom, 0)
    lib = uniform_library(part, 3)
    np.testing.assert_allclose(lib.pieces[0], part.positions[0])
    np.testing.assert_allclose(lib.pieces[-1], part.positions[-1])


def test_report_errors_full_library_is_exact_and_beats_baseline():
    rng = np.random.default_rng(74)
    anim = _wobbling_tube(rng, n_frames=8)
    hom = _trivial_hom(anim, np.zeros(anim.n_triangles, dtype=np.int64), 1)
    part = extract_part_submesh(hom, 0)
    from stopshop.library import ReplacementLibrary, Assignment
    lib = ReplacementLibrary(part.positions.copy())
    assign = Assignment(np.arange(8), 8)
    rows = report_errors([part], [lib], [assign], lam=2.0,
                         weights_per_part=[None])
    for row in rows:
        assert row["position_error"] == 0.0
        assert row["velocity_error"] == 0.0
        assert row["baseline_position_error"] >= 0.0


def test_run_pipeline_artifacts(tmp_path):
    rng = np.random.default_rng(75)
    anim = _wobbling_tube(rng)
    in_dir, seed_file = _write_inputs(tmp_path, anim)
    out = tmp_path / "out"
    config = PipelineConfig(in_dir, str(out), seed_file=seed_file,
                            library_sizes=(3,), lam=2.0, restarts=2,
                            smooth_iterations=5)
    manifest = run_pipeline(config)

    for name in ("manifest.json", "assembly_sheet.json", "frame_errors.csv",
                 "energy_log.csv", "part_labels.txt"):
        assert (out / name).exists(), name
    assert not (out / "STALE").exists()
    assert manifest["parts"] == 2
    assert manifest["frames"] == anim.n_frames
    assert manifest["total_pieces"] == 6
    assert manifest["naive_piece_count"] == anim.n_frames * 2
    assert manifest["frames_per_piece_combined"] == pytest.approx(
        anim.n_frames * 2 / 6)

    sheet = json.loads((out / "assembly_sheet.json").read_text())
    assert len(sheet["frames"]) == anim.n_frames
    for row in sheet["frames"]:
        for piece in row["pieces"].values():
            assert (out / "pieces" / f"{piece}.obj").exists()

    # homogenized sequence reloads and matches the recorded vertex count
    hom_seq = load_sequence_dir(str(out / "homogenized"))
    assert hom_seq.n_vertices == manifest["remeshed_vertices"]
    labels = np.loadtxt(out / "part_labels.txt", dtype=int)
    assert labels.shape[0] == hom_seq.n_triangles
    assert set(np.unique(labels)) == {0, 1}


def test_run_pipeline_deterministic(tmp_path):
    rng = np.random.default_rng(76)
    anim = _wobbling_tube(rng, n_frames=8)
    in_dir, seed_file = _write_inputs(tmp_path, anim)
    outputs = []
    for name in ("out_a", "out_b"):
        out = tmp_path / name
        run_pipeline(PipelineConfig(in_dir, str(out), seed_file=seed_file,
                                    library_sizes=(2,), restarts=2,
                                    smooth_iterations=5))
        outputs.append((out / "assembly_sheet.json").read_bytes())
    assert outputs[0] == outputs[1]


def test_run_pipeline_segment_only(tmp_path):
    rng = np.random.default_rng(77)
    anim = _wobbling_tube(rng, n_frames=6)
    in_dir, seed_file = _write_inputs(tmp_path, anim)
    out = tmp_path / "out"
    manifest = run_pipeline(PipelineConfig(in_dir, str(out), seed_file=seed_file,
                                           segment_only=True,
                                           smooth_iterations=5))
    assert manifest["stages"][-1] == "homogenize"
    assert (out / "part_labels.txt").exists()
    assert not (out / "pieces").exists()


def test_run_pipeline_single_part_no_seeds(tmp_path):
    rng = np.random.default_rng(78)
    anim = _wobbling_tube(rng, n_frames=6)
    in_dir, _ = _write_inputs(tmp_path, anim, seeds=False)
    out = tmp_path / "out"
    manifest = run_pipeline(PipelineConfig(in_dir, str(out), library_sizes=(2,),
                                           restarts=2))
    assert manifest["parts"] == 1
    assert manifest["remeshed_vertices"] == anim.n_vertices
    hom_seq = load_sequence_dir(str(out / "homogenized"))
    np.testing.assert_allclose(hom_seq.positions, anim.positions, atol=1e-12)


def test_run_pipeline_sweep_mode(tmp_path):
    rng = np.random.default_rng(79)
    anim = _wobbling_tube(rng, n_frames=8)
    in_dir, _ = _write_inputs(tmp_path, anim, seeds=False)
    out = tmp_path / "out"
    run_pipeline(PipelineConfig(in_dir, str(out), restarts=2, sweep=(1, 4)))
    lines = (out / "error_vs_size.csv").read_text().strip().splitlines()
    assert lines[0] == "part,size,energy"
    rows = [line.split(",") for line in lines[1:]]
    assert [int(r[1]) for r in rows] == [1, 2, 3, 4]
    energies = [float(r[2]) for r in rows]
    assert all(b <= a * (1 + 1e-9) + 1e-12 for a, b in zip(energies, energies[1:]))


def test_fixed_library_round_trip(tmp_path):
    rng = np.random.default_rng(80)
    anim = _wobbling_tube(rng, n_frames=8)
    in_dir, _ = _write_inputs(tmp_path, anim, seeds=False)

    # first run produces a library; reuse it frozen in a second run
    out1 = tmp_path / "out1"
    run_pipeline(PipelineConfig(in_dir, str(out1), library_sizes=(2,),
                                restarts=2))
    lib_dir = tmp_path / "library"
    os.makedirs(lib_dir)
    for f in sorted(os.listdir(out1 / "pieces")):
        os.link(out1 / "pieces" / f, lib_dir / f)
    (lib_dir / "manifest.json").write_text(json.dumps({"frozen": [0, 1]}))

    out2 = tmp_path / "out2"
    manifest = run_pipeline(PipelineConfig(in_dir, str(out2),
                                           fixed_library_dir=str(lib_dir),
                                           library_sizes=(2,), restarts=2))
    assert manifest["total_pieces"] == 2
    for f in sorted(os.listdir(out2 / "pieces")):
        v1, _ = load_obj(str(out1 / "pieces" / f))
        v2, _ = load_obj(str(out2 / "pieces" / f))
        np.testing.assert_allclose(v1, v2, atol=1e-12)


def test_load_fixed_library_validates_vertex_count(tmp_path):
    rng = np.random.default_rng(81)
    anim = _wobbling_tube(rng, n_frames=4)
    hom = _trivial_hom(anim, np.zeros(anim.n_triangles, dtype=np.int64), 1)
    part = extract_part_submesh(hom, 0)
    lib_dir = tmp_path / "library"
    os.makedirs(lib_dir)
    save_obj(str(lib_dir / "p1_001.obj"), np.zeros((3, 3)),
             np.array([[0, 1, 2]]))
    with pytest.raises(StopShopError):
        load_fixed_library(str(lib_dir), part)


def test_pipeline_errors_are_wrapped(tmp_path):
    out = tmp_path / "out"
    with pytest.raises(StopShopError, match="stage 'load'"):
        run_pipeline(PipelineConfig(str(tmp_path / "missing"), str(out)))
    assert (out / "STALE").exists()


def test_cli_end_to_end(tmp_path, capsys):
    from stopshop.cli import main as cli_main

    rng = np.random.default_rng(82)
    anim = _wobbling_tube(rng, n_frames=6)
    in_dir, seed_file = _write_inputs(tmp_path, anim)
    out = tmp_path / "out"
    rc = cli_main(["--input", in_dir, "--out", str(out),
                   "--seeds", seed_file, "--sizes", "2,2",
                   "--restarts", "2", "--smooth-iterations", "5"])
    assert rc == 0
    assert (out / "manifest.json").exists()
    printed = capsys.readouterr().out
    assert str(out) in printed
