"""Walking-ancilla error detection on a three-qubit chain.

Density-matrix simulation, transpilation to {RX(pi/2), RZ, CZ}, a
circuit-level noise model, syndrome sweeps, logical tomography and a
noise-parameter estimator.
"""

from .circuit import (
    Circuit,
    Operation,
    Topology,
    TopologyError,
    build_static_detection,
    build_tomography_circuit,
    build_walking_detection,
)
from .estimator import FitDataset, FitResult, NoiseModelEstimator, fit, generate_synthetic_dataset
from .experiment import (
    LogicalStateSpec,
    Readout,
    TomographySimulator,
    final_state,
    run_error_sweep,
    run_tomography,
    spam_correct,
)
from .noise import DepolConvention, NoiseModel, insert_noise
from .transpile import equivalent_up_to_global_phase, makhlin_invariants, metrics, transpile

__all__ = [
    "Circuit",
    "DepolConvention",
    "FitDataset",
    "FitResult",
    "LogicalStateSpec",
    "NoiseModel",
    "NoiseModelEstimator",
    "Operation",
    "Readout",
    "Topology",
    "TopologyError",
    "TomographySimulator",
    "build_static_detection",
    "build_tomography_circuit",
    "build_walking_detection",
    "equivalent_up_to_global_phase",
    "final_state",
    "fit",
    "generate_synthetic_dataset",
    "insert_noise",
    "makhlin_invariants",
    "metrics",
    "run_error_sweep",
    "run_tomography",
    "spam_correct",
    "transpile",
]
