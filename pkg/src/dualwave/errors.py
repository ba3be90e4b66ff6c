"""Exception hierarchy shared by the library and the command-line front end."""


class DualwaveError(Exception):
    """Base class for all errors raised by this package."""


class InputError(DualwaveError, ValueError):
    """Invalid arguments: bad shapes, out-of-range parameters, unknown names."""


class DataError(DualwaveError):
    """Unreadable or malformed input data (images, CSV files, manifests)."""


class EstimationError(DualwaveError):
    """A spectra fit could not produce a Hurst estimate.

    When a fit was computed before the failure was detected (for example a
    non-negative dual slope) it is attached as ``fit`` for inspection.
    """

    def __init__(self, message, fit=None):
        super().__init__(message)
        self.fit = fit
