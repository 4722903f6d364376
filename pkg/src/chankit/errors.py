"""Exception types shared across the toolkit."""


class ChankitError(Exception):
    """Base class for all toolkit errors."""


class ParseError(ChankitError):
    """Input document is malformed or fails schema/dimension checks."""


class CalibrationError(ChankitError):
    """Calibration reference is degenerate (magnitude below the safe floor)."""


class NoSignalError(ChankitError):
    """No sample survived thresholding where signal power is required."""


class RankDeficientError(ChankitError):
    """Model fit impossible: the distance axis carries no variation."""


class InsufficientDataError(ChankitError):
    """Too few data points for the requested statistic."""
