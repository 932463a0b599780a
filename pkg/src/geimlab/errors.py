"""
Exception hierarchy for geimlab.

Every error raised on purpose by the library derives from GeimError, so the
command-line layer can turn it into a machine-readable error record.
"""


class GeimError(Exception):
    """Base class for all geimlab errors."""


class InvalidGeometry(GeimError):
    """Grid or interface layout cannot be realised."""


class GridMismatch(GeimError, ValueError):
    """Two operands live on different grids."""


class EmptySupport(GeimError):
    """A sensor disc does not cover any node of its subdomain."""


class DegenerateSnapshot(GeimError):
    """The training set is numerically zero."""


class DegenerateResidual(GeimError):
    """No dictionary element can see the current greedy residual."""


class SizeMismatch(GeimError, ValueError):
    """Requested dimension or data length does not fit the model."""


class SingularSystem(GeimError):
    """The linear solve failed or produced non-finite values."""


class IncompleteBoundary(GeimError):
    """Dirichlet data does not close the solve region."""


class DictionaryExhausted(GeimError):
    """Not enough unused sensors remain for another series."""


class ConfigError(GeimError, ValueError):
    """Invalid experiment configuration."""
