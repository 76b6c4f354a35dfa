"""Trilateration-based detection of cheating anchor nodes in sensor networks."""

from .detect import (DetectionReport, GroupStatistics, classify, cross_check, discriminant,
                     fit_group_statistics, gaussian_density, group_consistency, invert_2x2,
                     mahalanobis_detect, mahalanobis_distance, mle_detect, sample_covariance)
from .geometry import (CanonicalFrame, Point, RangeTriple, canonical_frame, centroid,
                       circles_intersect, solve_canonical, trilaterate)
from .harness import SimulationConfig, emit_csv, run_experiment, run_trial
from .network import (AnchorNode, AttackSpec, Deployment, TrilaterationGroup, deploy,
                      inject_attack, quarantine)
from .radio import NoiseModel, measure_range, true_distance
from .registry import ReferenceRecord, ReferenceStore, build_references, load, save

__version__ = "0.1.0"

__all__ = [
    "AnchorNode",
    "AttackSpec",
    "build_references",
    "canonical_frame",
    "CanonicalFrame",
    "centroid",
    "circles_intersect",
    "classify",
    "cross_check",
    "deploy",
    "Deployment",
    "DetectionReport",
    "discriminant",
    "emit_csv",
    "fit_group_statistics",
    "gaussian_density",
    "group_consistency",
    "GroupStatistics",
    "inject_attack",
    "invert_2x2",
    "load",
    "mahalanobis_detect",
    "mahalanobis_distance",
    "measure_range",
    "mle_detect",
    "NoiseModel",
    "Point",
    "quarantine",
    "RangeTriple",
    "ReferenceRecord",
    "ReferenceStore",
    "run_experiment",
    "run_trial",
    "sample_covariance",
    "save",
    "SimulationConfig",
    "solve_canonical",
    "trilaterate",
    "TrilaterationGroup",
    "true_distance",
]

