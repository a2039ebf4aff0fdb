"""Multistage random leaf-spine networks: generation, metrics, analytical
model, Polarized routing and a cycle-level simulator."""

__version__ = "0.1.0"

from .errors import *  # noqa: F401,F403
from .topology import (FtSpec, MrlsSpec, OftSpec, Topology, build_fat_tree, build_mrls, build_oft,
                       load_topology, parse_topology, save_topology, validate)
from .metrics import metrics_report
from .analytics import prob_dstar_leq, spectrum_sweep, radix_for_endpoints

__all__ = [
    "FtSpec", "MrlsSpec", "OftSpec", "Topology", "build_fat_tree", "build_mrls", "build_oft",
    "load_topology", "parse_topology", "save_topology", "validate", "metrics_report",
    "prob_dstar_leq", "spectrum_sweep", "radix_for_endpoints",
]
