"""End-to-end orchestration: segment, homogenize, optimize per part, export.

Every part is independent once the seam is homogenized, so each gets its own
replacement library and per-frame assignment. Artifacts written per run:
piece OBJs, an assembly sheet (JSON shooting instructions), per-iteration
energy logs (CSV), optional error-vs-size curves, per-frame error reports and
a manifest capturing every parameter and the RNG seed.
"""

from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass, field, asdict

import numpy as np

from . import anim as anim_io
from .anim import AnimSequence, average_mesh
from .boundary import (SegmentedAnim, extract_smooth_boundary, interpolate_vertex_field,
                       smooth_votes, smoothing_operator, vertex_votes)
from .errors import EmptyPart, StopShopError
from .homogenize import HomogenizedAnim, homogenize_all
from .library import (Assignment, OptimConfig, PartAnim, ReplacementLibrary,
                      assign_labels, bcd_optimize, bcd_single, per_frame_errors,
                      sweep_library_size, total_energy)
from .segmentation import DEFAULT_GAMMA, SeedSet, load_seed_file, segment_parts


@dataclass
class PipelineConfig:
    input_dir: str
    output_dir: str
    seed_file: str | None = None
    cut_file: str | None = None
    saliency_file: str | None = None
    gamma: float = DEFAULT_GAMMA
    library_sizes: tuple = (8,)       # one entry per part
    lam: float = 2.0
    smooth_iterations: int = 20
    smooth_step: float = 0.5
    min_island: int = 1
    restarts: int = 8
    max_iters: int = 100
    rel_tol: float = 1e-10
    rng_seed: int = 0
    segment_only: bool = False
    sweep: tuple | None = None        # (d_min, d_max)
    error_cap: float | None = None
    fixed_library_dir: str | None = None
    report_baseline: bool = True


def extract_part_submesh(hom: HomogenizedAnim, part: int) -> PartAnim:
    """Sub-mesh of all triangles labeled `part`, with local vertex indexing.

    Seam vertices appear in every adjacent part's sub-mesh; their positions
    are identical across parts by the homogenization constraint.
    """
    mask = hom.part_labels == part
    if not mask.any():
        raise EmptyPart(part)
    tris = hom.anim.triangles[mask]
    verts = np.unique(tris)
    local = np.full(hom.anim.n_vertices, -1, dtype=np.int64)
    local[verts] = np.arange(verts.shape[0])
    return PartAnim(hom.anim.positions[:, verts].copy(), local[tris],
                    hom.anim.cuts.copy(), verts)


def uniform_library(part: PartAnim, d: int) -> ReplacementLibrary:
    """Baseline library: frames sampled uniformly over time."""
    idx = np.unique(np.linspace(0, part.n_frames - 1, d).round().astype(int))
    return ReplacementLibrary(part.positions[idx].copy())


def report_errors(parts, libraries, assignments, lam, weights_per_part,
                  baseline=True):
    """Per-frame position / velocity error rows, optionally with a
    uniform-sampling baseline labeled by the same assignment solver."""
    n = parts[0].n_frames
    rows = []
    base = []
    if baseline:
        for j, (part, lib) in enumerate(zip(parts, libraries)):
            ulib = uniform_library(part, lib.size)
            w = None if weights_per_part is None else weights_per_part[j]
            base.append((ulib, assign_labels(part, ulib, lam, w)))
    for f in range(n):
        row = {"frame": f, "position_error": 0.0, "velocity_error": 0.0}
        if baseline:
            row["baseline_position_error"] = 0.0
            row["baseline_velocity_error"] = 0.0
        rows.append(row)
    for j, (part, lib, assign) in enumerate(zip(parts, libraries, assignments)):
        w = None if weights_per_part is None else weights_per_part[j]
        pos, vel = _frame_error_components(part, lib, assign, lam, w)
        for f in range(n):
            rows[f]["position_error"] += pos[f]
            rows[f]["velocity_error"] += vel[f]
        if baseline:
            ulib, uassign = base[j]
            upos, uvel = _frame_error_components(part, ulib, uassign, lam, w)
            for f in range(n):
                rows[f]["baseline_position_error"] += upos[f]
                rows[f]["baseline_velocity_error"] += uvel[f]
    return rows


def _frame_error_components(part, library, assignment, lam, weights):
    from .library import _pair_active, _weights3

    w3 = _weights3(weights, part.n_vertices)
    resid = part.flat() - library.flat()[assignment.labels]
    pos = 0.5 * (resid * resid * w3).sum(axis=1)
    vel = np.zeros_like(pos)
    active = _pair_active(part.cuts)
    if lam > 0:
        dresid = resid[1:] - resid[:-1]
        pair = 0.5 * lam * (dresid * dresid * w3).sum(axis=1) * active
        vel[:-1] += pair
        vel[1:] += pair
    return pos, vel


def _piece_name(part, index):
    return f"p{part + 1}_{index + 1:03d}"


def load_fixed_library(directory, part: PartAnim) -> ReplacementLibrary:
    """Directory of piece OBJs plus a manifest.json with a "frozen" index list."""
    files = sorted(f for f in os.listdir(directory) if f.lower().endswith(".obj"))
    pieces = []
    for f in files:
        v, _ = anim_io.load_obj(os.path.join(directory, f))
        if v.shape[0] != part.n_vertices:
            raise StopShopError(f"piece {f} vertex count mismatch")
        pieces.append(v)
    frozen = frozenset(range(len(pieces)))
    manifest = os.path.join(directory, "manifest.json")
    if os.path.exists(manifest):
        with open(manifest) as fh:
            frozen = frozenset(json.load(fh).get("frozen", range(len(pieces))))
    return ReplacementLibrary(np.stack(pieces), frozen)


def run_pipeline(config: PipelineConfig) -> dict:
    """Run every stage and write all artifacts; returns the manifest dict."""
    out = config.output_dir
    os.makedirs(out, exist_ok=True)
    stale = os.path.join(out, "STALE")
    with open(stale, "w") as fh:
        fh.write("run in progress or aborted\n")

    stage = "load"
    try:
        seq = anim_io.load_sequence_dir(config.input_dir, config.cut_file)
        weights = None
        if config.saliency_file:
            weights = anim_io.load_saliency_file(config.saliency_file, seq.n_vertices)

        stage = "segment"
        if config.seed_file:
            seeds = load_seed_file(config.seed_file)
            tri_labels = segment_parts(seq, seeds, gamma=config.gamma)
            n_parts = seeds.n_parts
        else:
            tri_labels = np.zeros(seq.n_triangles, dtype=np.int64)
            n_parts = 1

        stage = "boundary"
        if n_parts > 1:
            votes = vertex_votes(seq, tri_labels, n_parts)
            op = smoothing_operator(average_mesh(seq), seq.triangles)
            votes = smooth_votes(votes, op, config.smooth_iterations, config.smooth_step)
            seg = extract_smooth_boundary(seq, votes, min_island=config.min_island)
            if weights is not None:
                weights = interpolate_vertex_field(weights, seg.vertex_sources)
        else:
            seg = SegmentedAnim(seq, tri_labels, np.array([], dtype=np.int64),
                                1, np.zeros((0, 3)))

        stage = "homogenize"
        if n_parts > 1:
            hom = homogenize_all(seg)
        else:
            hom = HomogenizedAnim(seg.anim, seg.part_labels, seg.seam_vertices,
                                  np.array([], dtype=np.int64), np.zeros((0, 3)), 1)
        anim_io.save_sequence(os.path.join(out, "homogenized"), hom.anim)
        np.savetxt(os.path.join(out, "part_labels.txt"),
                   hom.part_labels, fmt="%d")

        manifest = {
            "config": asdict(config),
            "frames": seq.n_frames,
            "input_vertices": seq.n_vertices,
            "remeshed_vertices": hom.anim.n_vertices,
            "parts": n_parts,
        }
        if config.segment_only:
            manifest["stages"] = ["load", "segment", "boundary", "homogenize"]
            _write_manifest(out, manifest)
            os.remove(stale)
            return manifest

        stage = "optimize"
        sizes = list(config.library_sizes)
        if len(sizes) == 1 and n_parts > 1:
            sizes = sizes * n_parts
        if len(sizes) != n_parts:
            raise StopShopError(f"{len(sizes)} library sizes for {n_parts} parts")
        opt_config = OptimConfig(lam=config.lam, restarts=config.restarts,
                                 max_iters=config.max_iters, rel_tol=config.rel_tol,
                                 rng_seed=config.rng_seed)
        parts, libraries, assignments, weights_per_part = [], [], [], []
        energy_rows = []
        sweep_rows = []
        for j in range(n_parts):
            part = extract_part_submesh(hom, j)
            w = None
            if weights is not None:
                w = weights[part.global_vertices]
            part_cfg = OptimConfig(lam=opt_config.lam, restarts=opt_config.restarts,
                                   max_iters=opt_config.max_iters,
                                   rel_tol=opt_config.rel_tol,
                                   rng_seed=opt_config.rng_seed + j)
            if config.sweep is not None:
                lo, hi = config.sweep
                curve = sweep_library_size(part, config.lam, w, part_cfg,
                                           sizes=range(lo, hi + 1))
                for d, energy, _, _ in curve:
                    sweep_rows.append({"part": j + 1, "size": d, "energy": energy})
                _, _, lib, assign = min(curve, key=lambda r: r[1])
                energy = min(r[1] for r in curve)
            elif config.error_cap is not None:
                d, lib, assign = sweep_library_size(part, config.lam, w, part_cfg,
                                                    error_cap=config.error_cap)
                energy = total_energy(part, lib, assign, config.lam, w)
            elif config.fixed_library_dir:
                fixed = load_fixed_library(config.fixed_library_dir, part)
                lib, assign, energy = bcd_optimize(part, fixed.size, config.lam, w,
                                                   part_cfg, fixed_library=fixed)
            else:
                lib, assign, energy, rows = _optimize_with_log(part, j, sizes[j],
                                                               config.lam, w, part_cfg)
                energy_rows.extend(rows)
            parts.append(part)
            libraries.append(lib)
            assignments.append(assign)
            weights_per_part.append(w)

        stage = "export"
        pieces_dir = os.path.join(out, "pieces")
        os.makedirs(pieces_dir, exist_ok=True)
        usage = []
        for j, (part, lib, assign) in enumerate(zip(parts, libraries, assignments)):
            counts = np.bincount(assign.labels, minlength=lib.size)
            for k in range(lib.size):
                anim_io.save_obj(os.path.join(pieces_dir, _piece_name(j, k) + ".obj"),
                                 lib.pieces[k], part.triangles)
                usage.append({"part": j + 1, "piece": _piece_name(j, k),
                              "frames_used": int(counts[k])})

        sheet = {"frames": [
            {"frame": f,
             "pieces": {f"part{j + 1}": _piece_name(j, int(assignments[j].labels[f]))
                        for j in range(n_parts)}}
            for f in range(seq.n_frames)]}
        with open(os.path.join(out, "assembly_sheet.json"), "w") as fh:
            json.dump(sheet, fh, indent=2, sort_keys=True)

        _write_csv(os.path.join(out, "energy_log.csv"), energy_rows,
                   ["part", "restart", "iteration", "energy_after_update",
                    "energy_after_assign"])
        if sweep_rows:
            _write_csv(os.path.join(out, "error_vs_size.csv"), sweep_rows,
                       ["part", "size", "energy"])
        rows = report_errors(parts, libraries, assignments, config.lam,
                             weights_per_part, baseline=config.report_baseline)
        cols = list(rows[0].keys())
        _write_csv(os.path.join(out, "frame_errors.csv"), rows, cols)

        total_pieces = sum(lib.size for lib in libraries)
        manifest.update({
            "stages": ["load", "segment", "boundary", "homogenize", "optimize", "export"],
            "energies": [float(total_energy(p, l, a, config.lam, w))
                         for p, l, a, w in zip(parts, libraries, assignments,
                                               weights_per_part)],
            "piece_usage": usage,
            "total_pieces": total_pieces,
            "naive_piece_count": seq.n_frames * n_parts,
            "frames_per_piece_combined": seq.n_frames * n_parts / total_pieces,
            "frames_per_piece_per_part": [seq.n_frames / lib.size for lib in libraries],
        })
        _write_manifest(out, manifest)
    except Exception as exc:
        raise StopShopError(f"pipeline stage '{stage}' failed: {exc}") from exc
    os.remove(stale)
    return manifest


def _optimize_with_log(part, j, d, lam, weights, config):
    """Best-of-restarts descent, keeping the per-iteration energy trace.

    Mirrors bcd_optimize exactly (same warm start, same seeds, same
    instances); the only addition is the log.
    """
    from .library import _restart_inits

    rows = []
    best = None
    for r, init in enumerate(_restart_inits(part, d, lam, weights, config)):
        lib, assign, energy, history = bcd_single(part, init, d, lam, weights, config)
        for it, (_, e_half, e_full) in enumerate(history):
            rows.append({"part": j + 1, "restart": r, "iteration": it,
                         "energy_after_update": e_half,
                         "energy_after_assign": e_full})
        if best is None or energy < best[2]:
            best = (lib, assign, energy)
    return best[0], best[1], best[2], rows


def _write_csv(path, rows, columns):
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=columns)
        writer.writeheader()
        writer.writerows(rows)


def _write_manifest(out, manifest):
    with open(os.path.join(out, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True, default=str)
