"""Mesh-free solver for a coupled 1-D piezoelectric wave system.

A physics-informed network with hard-constrained boundary/initial structure,
trained by a three-stage Adam/L-BFGS schedule on numpy alone, and checked
against both the closed-form standing wave and a characteristic-split
finite-difference reference.
"""

from .errors import (
    CheckpointError,
    ConfigurationError,
    ContractViolationError,
    LineSearchError,
    OptimizationError,
    OracleIntegrityError,
    TrainingAbortedError,
    UndefinedMetricError,
)
from .physics import (
    MaterialParameters,
    derive_consistent_parameters,
    exact_solution,
)
from .model import init_parameters, load_checkpoint, predict, save_checkpoint
from .sampler import sample
from .loss import LossWeights, compute_loss, loss_value_and_grad
from .trainer import (
    Stage1Config,
    Stage2Config,
    Stage3Config,
    TrainingConfig,
    TrainingHistory,
    read_history_csv,
    train,
    write_history_csv,
)
from .evaluator import ErrorReport, evaluate, relative_l2
from .fdm_oracle import (
    compare_fdm_pinn,
    convergence_study,
    solve_fdm,
    suggest_nt,
)
from .config import preset_config, resolve_config

__version__ = "0.1.0"

__all__ = [
    "CheckpointError",
    "ConfigurationError",
    "ContractViolationError",
    "LineSearchError",
    "OptimizationError",
    "OracleIntegrityError",
    "TrainingAbortedError",
    "UndefinedMetricError",
    "MaterialParameters",
    "derive_consistent_parameters",
    "exact_solution",
    "init_parameters",
    "load_checkpoint",
    "predict",
    "save_checkpoint",
    "sample",
    "LossWeights",
    "compute_loss",
    "loss_value_and_grad",
    "Stage1Config",
    "Stage2Config",
    "Stage3Config",
    "TrainingConfig",
    "TrainingHistory",
    "read_history_csv",
    "train",
    "write_history_csv",
    "ErrorReport",
    "evaluate",
    "relative_l2",
    "compare_fdm_pinn",
    "convergence_study",
    "solve_fdm",
    "suggest_nt",
    "preset_config",
    "resolve_config",
    "__version__",
]
