"""Exception hierarchy shared by all modules."""


class YamabeError(Exception):
    """Base class; ``stage`` tags the pipeline step that failed."""

    stage = "general"

    def __init__(self, message, stage=None, **details):
        super().__init__(message)
        if stage is not None:
            self.stage = stage
        self.details = details


class InvalidDomainError(YamabeError, ValueError):
    stage = "geometry"


class InvalidMetricError(YamabeError, ValueError):
    stage = "geometry"


class DimensionError(YamabeError, ValueError):
    stage = "shape"


class InvalidExponentError(YamabeError, ValueError):
    stage = "norm"


class SingularSystemError(YamabeError, ArithmeticError):
    stage = "linalg"


class ConvergenceError(YamabeError, RuntimeError):
    stage = "convergence"


class InvalidConformalFactorError(YamabeError, ValueError):
    stage = "conformal"


class PreconditionError(YamabeError, ValueError):
    stage = "precondition"


class WrongCaseError(YamabeError, ValueError):
    stage = "case"


class BarrierValidationError(YamabeError, RuntimeError):
    stage = "barrier"


class DomainSizeError(YamabeError, RuntimeError):
    stage = "local-dirichlet"


class GlueFailureError(YamabeError, RuntimeError):
    stage = "glue"


class MonotonicityError(YamabeError, RuntimeError):
    stage = "iteration"


class DegenerationError(YamabeError, RuntimeError):
    stage = "continuation"


class ConfigError(YamabeError, ValueError):
    stage = "config"


class VerificationError(YamabeError, RuntimeError):
    stage = "verify"
