"""Exception types shared across the toolkit.

Everything derives from FundusEvalError so the CLI can map any domain
failure to exit code 1 while real I/O problems (OSError) map to 2.
"""


class FundusEvalError(Exception):
    """Base class for all toolkit errors."""


class InvariantError(FundusEvalError, ValueError):
    """A domain value violates one of its declared invariants."""


class RangeError(FundusEvalError, ValueError):
    """An argument lies outside its documented range."""


class FatalFormat(FundusEvalError, ValueError):
    """A file's header or overall structure is unusable (not a row-level issue)."""


class UngradableForSystem(FundusEvalError, ValueError):
    """The grading system requires clinical grades but the image is ungradable."""


class MissingGrade(FundusEvalError, ValueError):
    """A required grade is absent from the record."""


class EmptyPatient(FundusEvalError, ValueError):
    """A patient group contains no records."""


class InfeasibleSplit(FundusEvalError):
    """Stratification tolerance could not be met after the bounded repair passes."""

    def __init__(self, message, best_deviation, tolerance):
        super().__init__(message)
        self.best_deviation = best_deviation
        self.tolerance = tolerance


class UnassignedRecord(FundusEvalError, KeyError):
    """A record is not covered by the split assignment."""


class NoFundusDetected(FundusEvalError):
    """Foreground fraction too small to contain a fundus disk."""


class InvalidBox(FundusEvalError, ValueError):
    """Crop box does not usably overlap the source image."""


class DegenerateClasses(FundusEvalError, ValueError):
    """A class needed for the computation has no members."""


class EmptyMatrix(FundusEvalError, ValueError):
    """Confusion matrix has zero total count."""


class EmptyClass(FundusEvalError, ValueError):
    """A ground-truth row of the confusion matrix is all zero."""


class DegenerateMarginals(FundusEvalError, ValueError):
    """Kappa denominator is zero and observed counts are not purely diagonal."""


class DegenerateReplicates(FundusEvalError):
    """Too many bootstrap replicates lacked both classes."""


class Unattainable(FundusEvalError):
    """No operating point reaches the requested target."""
