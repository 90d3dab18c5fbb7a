"""Corner seeding and optical-flow point tracking."""

from .corners import CornerParams, detect_corners, min_eigenvalue_map
from .flow import FlowParams, TrackSet, loss_summary, prune_lost, track_sequence

__all__ = [
    "CornerParams",
    "FlowParams",
    "TrackSet",
    "detect_corners",
    "loss_summary",
    "min_eigenvalue_map",
    "prune_lost",
    "track_sequence",
]
