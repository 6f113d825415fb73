"""Exception hierarchy shared across the toolkit.

Three broad families map onto the CLI exit codes: configuration problems
(exit 1), data problems (exit 2), and numerical failures (exit 3).
"""


class ExocastError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(ExocastError):
    """Invalid or inconsistent run configuration."""


class DataError(ExocastError):
    """Malformed, missing, or inconsistent input data."""


class NumericalError(ExocastError):
    """A numerical routine was called outside its domain or diverged."""


# --- ingest ---------------------------------------------------------------

class MalformedRow(DataError):
    def __init__(self, line_no: int, detail: str = ""):
        self.line_no = line_no
        super().__init__(f"malformed row at line {line_no}" + (f": {detail}" if detail else ""))


class EmptyInput(DataError):
    pass


class NonMonotonicTimestamps(DataError):
    pass


class DuplicateTimestamp(DataError):
    pass


class MissingDate(DataError):
    pass


class NegativeCount(DataError):
    pass


class MissingEpiDay(DataError):
    def __init__(self, date):
        self.date = date
        super().__init__(f"no epidemiological record for {date}")


class MissingMarketDay(DataError):
    def __init__(self, date):
        self.date = date
        super().__init__(f"no market bars for {date}")


class EmptyRange(DataError):
    pass


class HttpError(DataError):
    def __init__(self, status: int, detail: str = ""):
        self.status = status
        super().__init__(f"HTTP {status}" + (f": {detail}" if detail else ""))


class RateLimited(HttpError):
    def __init__(self, detail: str = ""):
        super().__init__(429, detail or "rate limited")


class TruncatedRange(DataError):
    pass


# --- stats ----------------------------------------------------------------

class EmptySample(NumericalError):
    pass


class NonFiniteInput(NumericalError):
    pass


class InsufficientSamples(NumericalError):
    pass


class ZeroVariance(NumericalError):
    pass


class LengthMismatch(NumericalError):
    pass


class InvalidR(NumericalError):
    pass


class DomainError(NumericalError):
    pass


# --- features -------------------------------------------------------------

class CoverageMismatch(DataError):
    pass


class WindowTooSmall(ConfigError):
    pass


class ZeroVarianceColumn(DataError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"column {name!r} has zero variance on the fit rows")


class ColumnMismatch(DataError):
    pass


class TooFewRows(DataError):
    pass


# --- forest / lstm --------------------------------------------------------

class EmptyDataset(DataError):
    pass


class DimensionMismatch(NumericalError):
    pass


class NoSplits(NumericalError):
    pass


class ZeroActual(NumericalError):
    pass


class ShapeMismatch(NumericalError):
    pass


class NonFiniteActivation(NumericalError):
    pass


class DatasetMismatch(NumericalError):
    pass


class DivergedLoss(NumericalError):
    pass


# --- select / pipeline ----------------------------------------------------

class UnknownFeatureName(DataError):
    pass


class IoError(ExocastError):
    pass
