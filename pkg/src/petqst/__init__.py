"""Threshold quantum state tomography with permutation-equivariant networks."""

from .baseline import direct_invert, mle_refine
from .datagen import Dataset, DatasetSpec, build_dataset, load_dataset, save_dataset, split
from .errors import NumericalError, TqstError, ValidationError
from .numerics import hermitian_eig, matrix_sqrt_psd
from .qstate import NoiseSpec, StateSpec, apply_noise, fidelity, generate_state, purity
from .reconstruct import project_psd, reconstruct_state
from .tqst import MeasurementRecord, ThresholdReport, gini_index, select_measurements, simulate_outcomes

__version__ = "0.1.0"

__all__ = [
    "Dataset",
    "DatasetSpec",
    "MeasurementRecord",
    "NoiseSpec",
    "NumericalError",
    "StateSpec",
    "ThresholdReport",
    "TqstError",
    "ValidationError",
    "apply_noise",
    "build_dataset",
    "direct_invert",
    "fidelity",
    "generate_state",
    "gini_index",
    "hermitian_eig",
    "load_dataset",
    "matrix_sqrt_psd",
    "mle_refine",
    "project_psd",
    "purity",
    "reconstruct_state",
    "save_dataset",
    "select_measurements",
    "simulate_outcomes",
    "split",
]
