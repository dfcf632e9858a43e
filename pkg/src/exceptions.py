"""
Error hierarchy shared by every module of the package.

Every error carries an ``exit_code`` used by the command line:

- ``UserInputError`` and its subclasses exit with 1 (bad flags, malformed files, invalid shapes).
- ``NumericalError`` and its subclasses exit with 2 (solver failures, divergent losses, non-convergence).
"""


class TrajnetError(Exception):
    """Base class of all package errors."""

    exit_code: int = 1


class UserInputError(TrajnetError):
    exit_code = 1


class NumericalError(TrajnetError):
    exit_code = 2


class UsageError(UserInputError):
    """Unknown flag or malformed command line."""


class ShapeMismatchError(UserInputError, ValueError):
    def __init__(self, op: str, left: tuple, right: tuple) -> None:
        self.op = op
        self.left = tuple(left)
        self.right = tuple(right)
        super().__init__(f"{op}: incompatible shapes {self.left} and {self.right}")


class DimensionError(UserInputError, ValueError):
    pass


class NonFiniteInputError(UserInputError, ValueError):
    pass


class ConfigError(UserInputError, ValueError):
    pass


class DatasetFormatError(UserInputError, ValueError):
    def __init__(self, message: str, line: int | None = None, field: str | None = None) -> None:
        self.line = line
        self.field = field
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field '{field}'")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(f"{prefix}{message}")


class HoldoutError(UserInputError, ValueError):
    pass


class InsufficientPointsError(UserInputError, ValueError):
    pass


class TraceDimensionError(UserInputError, ValueError):
    def __init__(self, dim: int, limit: int) -> None:
        self.dim = dim
        self.limit = limit
        super().__init__(
            f"exact trace needs {dim} forward passes but the limit is {limit}; "
            f"lower the data dimension (e.g. fewer PCA components) or raise solver.trace_limit"
        )


class CheckpointError(UserInputError):
    pass


class ChecksumError(CheckpointError):
    pass


class VersionMismatchError(CheckpointError):
    pass


class TruncatedCheckpointError(CheckpointError):
    pass


class SolverError(NumericalError):
    def __init__(self, message: str, time: float | None = None) -> None:
        self.time = time
        suffix = f" at t={time:.6g}" if time is not None else ""
        super().__init__(f"{message}{suffix}")


class StepLimitExceededError(SolverError):
    pass


class NonFiniteStateError(SolverError):
    pass


class ConvergenceError(NumericalError):
    def __init__(self, message: str, residual: float | None = None, iterations: int | None = None) -> None:
        self.residual = residual
        self.iterations = iterations
        details = []
        if iterations is not None:
            details.append(f"iterations={iterations}")
        if residual is not None:
            details.append(f"marginal residual={residual:.3e}")
        suffix = f" ({', '.join(details)})" if details else ""
        super().__init__(f"{message}{suffix}")


class DivergentLossError(NumericalError):
    def __init__(self, term: str, iteration: int | None = None, value: float | None = None) -> None:
        self.term = term
        self.iteration = iteration
        self.value = value
        at = f" at iteration {iteration}" if iteration is not None else ""
        super().__init__(f"loss term '{term}' is not finite ({value}){at}")


class NegativeAccumulatorError(NumericalError):
    pass
