"""Exception hierarchy shared across the package.

The CLI maps these onto process exit codes: ConfigError -> 2,
BackendError -> 3, DataError -> 4.
"""


class HatesynthError(Exception):
    """Base class for all package errors."""


class ConfigError(HatesynthError):
    """Invalid configuration or precondition violation.

    Carries an optional list of individual violations so callers can report
    every problem at once instead of the first one found.
    """

    def __init__(self, message, violations=None):
        super().__init__(message)
        self.violations = list(violations or [])


class DataError(HatesynthError):
    """Malformed or inconsistent input data."""


class CorpusError(DataError):
    """Corpus file failed to load or violated an invariant."""


class EntityTableError(DataError):
    """Entity table file failed validation."""


class SubstitutionError(DataError):
    """Mask substitution could not be completed."""


class PoolUnderflowError(DataError):
    """A sampling pool has fewer posts than an experiment arm requires."""


class BackendError(HatesynthError):
    """A remote or mock backend failed."""


class TransportError(BackendError):
    """Network-level failure; eligible for retry."""


class EmptyGenerationError(BackendError):
    """The generation backend returned no usable text."""


class GenerationLoopError(BackendError):
    """The generation loop could not complete; carries partial results."""

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = list(partial or [])
