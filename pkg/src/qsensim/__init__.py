"""Noisy circuit simulation for distributed quantum sensing pipelines."""

__version__ = "0.1.0"

from .analysis import (
    GHZ_PROBE,
    PRODUCT_PROBE,
    fidelity_exact,
    fisher_report,
    overlap_exact,
    qfi_pure,
    swap_test,
    variational_step,
)
from .channels import (
    QuantumChannel,
    bit_flip,
    dephasing,
    depolarizing,
    readout_flip,
    thermal_relaxation,
)
from .circuit import Circuit, Conditional, Measure
from .config import ConfigError, RunManifest, parse_config
from .experiments import (
    ExperimentConfig,
    RunResult,
    estimate_phase,
    run,
    run_many,
    scaling_experiment,
)
from .noise import NoiseProfile, NoiseScope, attach_noise, default_profile
from .pipeline import PipelineSpec, StageSpec, assemble, plan
from .simulate import qtrajectory, sample_counts, simulate_dense, simulate_trajectories
from .state import MeasurementSpec, OutcomeCounts, QuantumState, measure, postselect

__all__ = [
    "__version__",
    "GHZ_PROBE", "PRODUCT_PROBE", "fidelity_exact", "fisher_report", "overlap_exact",
    "qfi_pure", "swap_test", "variational_step",
    "QuantumChannel", "bit_flip", "dephasing", "depolarizing", "readout_flip", "thermal_relaxation",
    "Circuit", "Conditional", "Measure",
    "ConfigError", "RunManifest", "parse_config",
    "ExperimentConfig", "RunResult", "estimate_phase", "run", "run_many", "scaling_experiment",
    "NoiseProfile", "NoiseScope", "attach_noise", "default_profile",
    "PipelineSpec", "StageSpec", "assemble", "plan",
    "qtrajectory", "sample_counts", "simulate_dense", "simulate_trajectories",
    "MeasurementSpec", "OutcomeCounts", "QuantumState", "measure", "postselect",
]
