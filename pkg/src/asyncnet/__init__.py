"""Diffusion and fusion-center LMS over asynchronous Bernoulli networks.

Moments of random combination matrices, steady-state MSD and convergence
rate predictions, Monte Carlo simulation of the four strategies and an
experiment harness comparing the two.
"""

__version__ = "0.1.0"

from .config import ExperimentConfig, load_config, materialize
from .compare import ComparisonReport, run_compare
from .data import AgentDataProfile, ScenarioTruth, generate_sample
from .errors import AsyncNetError
from .estimators import CentralizedLMS, DiffusionLMS
from .moments import MomentSet, compute_moments, joint_perron, mean_matrix, perron, second_moment
from .network import BernoulliAsyncModel, Topology, build_topology, sample_realization
from .presets import preset
from .simulator import (average_curves, run_centralized_async, run_centralized_sync,
                        run_diffusion_async, run_diffusion_sync, sample_fusion_vector,
                        simulate, steady_state)
from .theory import STRATEGIES, TheoryReport, msd_general, msd_lms_async, msd_lms_sync, predict

__all__ = [
    "AgentDataProfile", "AsyncNetError", "BernoulliAsyncModel", "CentralizedLMS",
    "ComparisonReport", "DiffusionLMS", "ExperimentConfig", "MomentSet", "STRATEGIES",
    "ScenarioTruth", "TheoryReport", "Topology", "average_curves", "build_topology",
    "compute_moments", "generate_sample", "joint_perron", "load_config", "materialize",
    "mean_matrix", "msd_general", "msd_lms_async", "msd_lms_sync", "perron", "predict",
    "preset", "run_centralized_async", "run_centralized_sync", "run_compare",
    "run_diffusion_async", "run_diffusion_sync", "sample_fusion_vector", "sample_realization",
    "second_moment", "simulate", "steady_state",
]
