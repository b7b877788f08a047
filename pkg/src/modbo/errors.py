"""Exception hierarchy shared across the package."""


class ModboError(Exception):
    """Base class for all errors raised by modbo."""


class ParameterError(ModboError, ValueError):
    """A hyperparameter or numeric argument is outside its valid range."""


class StructuralError(ModboError, ValueError):
    """Array shapes or model structure are inconsistent."""


class DomainError(ModboError, ValueError):
    """An input lies outside the domain of a function or box."""


class NumericalError(ModboError, ArithmeticError):
    """Factorization failed even after jitter escalation.

    Attributes
    ----------
    jitter : float
        The last diagonal jitter that was tried.
    """

    def __init__(self, message: str, jitter: float):
        super().__init__(f"{message} (final jitter {jitter:.1e})")
        self.jitter = jitter


class SamplerError(ModboError, RuntimeError):
    """An MCMC chain could not produce usable samples."""


class ProtocolError(ModboError, ValueError):
    """Evaluation-protocol inputs are inconsistent (e.g. metric preconditions)."""
