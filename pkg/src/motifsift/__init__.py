"""SIFT features and a deformation-robustness benchmark on synthetic motif imagery."""
from .bench import BenchmarkRecord, SuiteConfig, aggregate, render_matches, run_cell, run_suite, write_report
from .deform import DeformationSpec, Kind, schedule
from .errors import MotifSiftError
from .matching import Match, match_features, ransac_homography
from .sift import Feature, Keypoint, SiftParams, extract
from .synth import Family, MotifSpec, generate_motif

__version__ = "0.1.0"

__all__ = [
    "BenchmarkRecord", "DeformationSpec", "Family", "Feature", "Keypoint", "Kind", "Match",
    "MotifSiftError", "MotifSpec", "SiftParams", "SuiteConfig", "aggregate", "extract",
    "generate_motif", "match_features", "ransac_homography", "render_matches", "run_cell",
    "run_suite", "schedule", "write_report",
]
