"""Exception hierarchy shared by all modules."""


class HBOError(Exception):
    """Base class for errors raised by the solver."""


class InvalidArgumentError(HBOError, ValueError):
    pass


class NumericDomainError(HBOError, ValueError):
    pass


class NumericError(HBOError, ArithmeticError):
    """A numerical routine failed (non-finite values, eigensolver failure)."""


class ContaminationError(NumericError):
    """Imaginary residue of a field that should be real exceeded tolerance."""


class StateError(HBOError, RuntimeError):
    """A requested view of a field is stale or missing."""


class PreconditionError(HBOError, ValueError):
    pass


class ConvergenceError(HBOError, RuntimeError):
    def __init__(self, message, history=None):
        super().__init__(message)
        self.history = list(history) if history is not None else []


class InitializationError(HBOError, RuntimeError):
    pass


class StepSizeError(NumericError):
    """Implicit stage equations did not converge; the caller should reduce dt."""


class FormatError(HBOError, ValueError):
    pass


class DependencyError(HBOError, ValueError):
    pass


class UnsupportedError(HBOError, ValueError):
    pass


class EnergyCriticalError(HBOError, ValueError):
    """The Pohozaev denominators vanish for m = (1+s)/(1-s)."""


class ConfigError(HBOError, ValueError):
    """Configuration problems; ``errors`` lists every message with its line."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))
