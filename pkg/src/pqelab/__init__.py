"""Projective quantum eigensolver and VQE baseline on a shot-sampling
statevector simulator, with readout mitigation, qubit tapering,
postselection and zero-noise extrapolation."""

__version__ = "0.1.0"

from .ansatz import Ansatz, AnsatzOp, combinatorial_ansatz, h2_ansatz, truncate
from .backends import ExactBackend, Sampler, ShotBackend
from .circuits import Circuit, GateOp, fold_cnots
from .engine import NoiseSpec, ShotTable, expectation, run_exact, sample
from .mitigation import (CalibrationMatrix, ExtrapolationPolicy, ParityRule,
                         TaperMap, calibrate_readout, extrapolate, postselect,
                         staircase_transform, taper_parity_custom,
                         taper_standard, unfold_counts)
from .models import (H2Record, TfimSpec, build_h2_observable, build_tfim,
                     correlation_observables, exact_diagonalize,
                     load_h2_dataset, max_reference_overlap)
from .paulis import ObservableSum, PauliString, group_for_measurement
from .solver import (SolverConfig, SolveReport, pqe_solve,
                     residual_reference_shift, residual_three_point,
                     shifted_energy, vqe_gradient, vqe_solve)

__all__ = [
    "Ansatz", "AnsatzOp", "CalibrationMatrix", "Circuit", "ExactBackend",
    "ExtrapolationPolicy", "GateOp", "H2Record", "NoiseSpec", "ObservableSum",
    "ParityRule", "PauliString", "Sampler", "ShotBackend", "ShotTable",
    "SolveReport", "SolverConfig", "TaperMap", "TfimSpec",
    "build_h2_observable", "build_tfim", "calibrate_readout",
    "combinatorial_ansatz", "correlation_observables", "exact_diagonalize",
    "expectation", "extrapolate", "fold_cnots", "group_for_measurement",
    "h2_ansatz", "load_h2_dataset", "max_reference_overlap", "postselect",
    "pqe_solve", "residual_reference_shift", "residual_three_point",
    "run_exact", "sample", "shifted_energy", "staircase_transform",
    "taper_parity_custom", "taper_standard", "truncate", "unfold_counts",
    "vqe_gradient", "vqe_solve",
]
