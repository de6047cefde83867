"""Exception hierarchy shared by all modules."""


class DppFlowError(Exception):
    """Base class for library errors."""


class InvalidInputError(DppFlowError, ValueError):
    pass


class DegenerateInputError(DppFlowError, ValueError):
    pass


class SingularKernelError(DppFlowError, ArithmeticError):
    """A kernel matrix is not numerically positive definite.

    ``suggestion`` carries a hint for the caller, e.g. switching to the soft
    objective, which stays finite for singular kernels.
    """

    def __init__(self, message, suggestion=None):
        super().__init__(message)
        self.suggestion = suggestion


class NumericError(DppFlowError, ArithmeticError):
    pass


class ConvergenceError(NumericError):
    def __init__(self, message, iterations):
        super().__init__(f"{message} (after {iterations} iterations)")
        self.iterations = iterations


class TransportError(NumericError):
    pass


class TrainingError(NumericError):
    def __init__(self, message, step):
        super().__init__(f"{message} at step {step}")
        self.step = step


class IntegrationError(NumericError):
    def __init__(self, message, step):
        super().__init__(f"{message} at step {step}")
        self.step = step


class CheckpointError(DppFlowError):
    pass


class SchemaVersionError(CheckpointError):
    pass


class ConfigError(DppFlowError):
    pass
