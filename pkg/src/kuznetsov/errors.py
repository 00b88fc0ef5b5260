"""Exception hierarchy shared by the solver modules and the CLI."""


class KuznetsovError(Exception):
    """Base class; ``exit_code`` is what the CLI returns for it."""

    exit_code = 1


class InvalidArgumentError(KuznetsovError, ValueError):
    exit_code = 2


class UnsupportedExponentError(InvalidArgumentError):
    """Raised for the excluded exponent p = 3/2 (and p outside the admissible range)."""


class CompatibilityError(KuznetsovError):
    """Strict-mode rejection of boundary/initial data that fail the trace conditions."""

    exit_code = 2

    def __init__(self, message, report):
        super().__init__(message)
        self.report = report


class NumericalFailure(KuznetsovError):
    """Linear solve, eigen-iteration or Newton failure.

    ``payload`` holds whatever partial information is useful for diagnosis
    (last iterate, Newton residual trace, ...).
    """

    exit_code = 4

    def __init__(self, message, payload=None):
        super().__init__(message)
        self.payload = payload


class DegeneracyError(KuznetsovError):
    """The factor 1 - 2 k u dropped to or below the configured guard."""

    exit_code = 3

    def __init__(self, message, node, value, t=None, partial=None):
        super().__init__(message)
        self.node = node
        self.value = value
        self.t = t
        self.partial = partial


class TruncationError(NumericalFailure):
    """Tail of an improper time integral is larger than the requested tolerance."""


class NoLimitError(NumericalFailure):
    """A quantity that should decay does not, so its limit cannot be formed."""


class StudyInvalidError(KuznetsovError):
    """Convergence study with non-monotone errors; ``table`` carries the raw data."""

    exit_code = 4

    def __init__(self, message, table):
        super().__init__(message)
        self.table = table
