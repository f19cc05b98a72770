class IabError(Exception):
    """Base class for simulator errors."""


class ParameterError(IabError, ValueError):
    """An input parameter is outside its valid domain."""


class SingularityError(IabError, ValueError):
    """Transmitter and receiver coincide, so the path gain diverges."""


class StateError(IabError, RuntimeError):
    """An operation needs an assignment state that is not present."""


class SizeError(IabError, ValueError):
    """Instance is too large for exhaustive enumeration."""


class TrialError(IabError, RuntimeError):
    """A Monte Carlo trial failed; carries the density and seed that triggered it."""

    def __init__(self, lam: float, seed: int, cause: BaseException):
        super().__init__(f"trial failed at lambda={lam!r}, seed={seed}: {cause!r}")
        self.lam = lam
        self.seed = seed
        self.cause = cause
