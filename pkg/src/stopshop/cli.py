"""Command-line entry point."""

from __future__ import annotations

import argparse
import json
import sys

from .pipeline import PipelineConfig, run_pipeline


def build_parser():
    p = argparse.ArgumentParser(
        prog="stopshop",
        description="Optimize a 3D-printable replacement-part library for an "
                    "animated mesh sequence.")
    p.add_argument("--input", required=True, help="directory of per-frame OBJ files")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seeds", help="seed file: one line of triangle indices per part")
    p.add_argument("--parts", type=int, help="expected part count (checked against seeds)")
    p.add_argument("--sizes", default="8",
                   help="comma-separated library size per part, e.g. 25,15")
    p.add_argument("--lambda", dest="lam", type=float, default=2.0,
                   help="velocity term weight (default 2)")
    p.add_argument("--gamma", type=float, default=100.0,
                   help="segmentation cut-length weight (default 100, unit bbox)")
    p.add_argument("--weights", help="per-vertex saliency weight file")
    p.add_argument("--cuts", help="cut file: one clip-start frame index per line")
    p.add_argument("--restarts", type=int, default=8)
    p.add_argument("--seed", type=int, default=0, help="RNG seed")
    p.add_argument("--smooth-iterations", type=int, default=20)
    p.add_argument("--smooth-step", type=float, default=0.5)
    p.add_argument("--min-island", type=int, default=1,
                   help="absorb label islands smaller than this many triangles")
    p.add_argument("--segment-only", action="store_true",
                   help="stop after segmentation and homogenization")
    group = p.add_mutually_exclusive_group()
    group.add_argument("--sweep", help="library size range d_min:d_max")
    group.add_argument("--error-cap", type=float,
                       help="grow the library until the max per-frame error meets this cap")
    group.add_argument("--fixed-library", help="directory with pre-defined piece OBJs")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    sweep = None
    if args.sweep:
        lo, hi = args.sweep.split(":")
        sweep = (int(lo), int(hi))
    config = PipelineConfig(
        input_dir=args.input,
        output_dir=args.out,
        seed_file=args.seeds,
        cut_file=args.cuts,
        saliency_file=args.weights,
        gamma=args.gamma,
        library_sizes=tuple(int(s) for s in args.sizes.split(",")),
        lam=args.lam,
        smooth_iterations=args.smooth_iterations,
        smooth_step=args.smooth_step,
        min_island=args.min_island,
        restarts=args.restarts,
        rng_seed=args.seed,
        segment_only=args.segment_only,
        sweep=sweep,
        error_cap=args.error_cap,
        fixed_library_dir=args.fixed_library,
    )
    if args.parts is not None and args.seeds:
        from .segmentation import load_seed_file
        n = load_seed_file(args.seeds).n_parts
        if n != args.parts:
            print(f"error: seed file defines {n} parts, --parts says {args.parts}",
                  file=sys.stderr)
            return 2
    manifest = run_pipeline(config)
    print(json.dumps({k: manifest[k] for k in ("frames", "parts")
                      if k in manifest}, sort_keys=True))
    print(f"artifacts written to {config.output_dir}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
