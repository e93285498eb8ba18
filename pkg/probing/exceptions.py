"""Exceptions raised by the probing library."""


class ProbingError(Exception):
    """Base class for every error raised by the probing package."""


class ConfigurationError(ProbingError):
    """A configuration document or physical parameter set is invalid."""


class ModeSumNotConverged(ProbingError):
    """A mode sum hit its cutoff before the stall criterion was met."""

    def __init__(self, message, partial=None, last_index=None):
        super().__init__(message)
        self.partial = partial
        self.last_index = last_index


class DegenerateAmplitudeError(ProbingError):
    """The perturbative survival amplitude 1 + eta1 + eta2 is numerically zero."""


class NonPhysicalStateError(ProbingError):
    """A reduced density matrix has eigenvalues outside the tolerance window."""


class QuadratureError(ProbingError):
    """Adaptive quadrature failed to reach its tolerance within the panel budget."""


class OracleTruncationError(ProbingError):
    """The truncated Fock-space oracle lost norm or populated its top levels."""


class OutputWriteError(ProbingError):
    """Writing a sweep artifact to disk failed."""

    def __init__(self, message, path=None):
        super().__init__(f"{message} (path: {path})" if path else message)
        self.path = path
