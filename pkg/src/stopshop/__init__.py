"""Replacement-part libraries for 3D printed stop-motion animation."""

from .anim import (AnimSequence, average_mesh, forward_difference, load_sequence,
                   load_sequence_dir, save_sequence)
from .boundary import (SegmentedAnim, extract_smooth_boundary, smooth_votes,
                       smoothing_operator, vertex_votes)
from .homogenize import (FemOperators, HomogenizedAnim, fem_operators,
                         homogenize_all, homogenize_frame, seam_constraint_set)
from .library import (Assignment, OptimConfig, PartAnim, ReplacementLibrary,
                      assign_labels, bcd_optimize, sweep_library_size,
                      total_energy, update_library)
from .pipeline import PipelineConfig, extract_part_submesh, report_errors, run_pipeline
from .segmentation import SeedSet, geodesic_distances, segment_parts, segmentation_energy

__all__ = [
    "AnimSequence", "average_mesh", "forward_difference", "load_sequence",
    "load_sequence_dir", "save_sequence",
    "SegmentedAnim", "extract_smooth_boundary", "smooth_votes",
    "smoothing_operator", "vertex_votes",
    "FemOperators", "HomogenizedAnim", "fem_operators", "homogenize_all",
    "homogenize_frame", "seam_constraint_set",
    "Assignment", "OptimConfig", "PartAnim", "ReplacementLibrary",
    "assign_labels", "bcd_optimize", "sweep_library_size", "total_energy",
    "update_library",
    "PipelineConfig", "extract_part_submesh", "report_errors", "run_pipeline",
    "SeedSet", "geodesic_distances", "segment_parts", "segmentation_energy",
]
