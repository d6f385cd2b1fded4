"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """Invalid configuration value (sizes, counts, budgets, file contents)."""


class ContractViolationError(RuntimeError):
    """An operation was called outside its contract (non-scalar
    differentiation, detached graph reused for nesting, and similar)."""


class CheckpointError(RuntimeError):
    """Checkpoint file is malformed (bad magic, version, or payload size)."""


class LineSearchError(RuntimeError):
    """Line search exhausted its evaluation budget without an admissible step."""


class OptimizationError(RuntimeError):
    """Optimizer received non-finite input and aborted."""


class OracleIntegrityError(RuntimeError):
    """The finite-difference oracle detected contamination of the unstable
    characteristic mode; its output cannot be trusted."""


class TrainingAbortedError(RuntimeError):
    """Training hit a non-finite loss; last checkpoint and history preserved."""


class UndefinedMetricError(ValueError):
    """A relative error was requested against a zero-norm reference field."""
