"""Exception types raised by the pipeline stages."""


class FingerGeoError(Exception):
    """Base class for all pipeline errors."""


class AllBackground(FingerGeoError):
    """No foreground pixel survived thresholding (empty or over-dark input)."""


class DegenerateOrientation(FingerGeoError):
    """Second moments are isotropic, so the major axis is undefined."""


class CutAboveFingers(FingerGeoError):
    """The wrist cut removed at least one finger-level profile segment entirely."""


class SegmentationError(FingerGeoError):
    def __init__(self, count, message=None):
        self.count = count
        super().__init__(message or f"expected 5 profile segments, found {count}")


class MissingFinger(FingerGeoError):
    """A finger label is absent or duplicated."""


class EmptyShape(FingerGeoError):
    """A finger mask has no foreground pixels."""


class TooFewRows(FingerGeoError):
    pass


class DegenerateLabels(FingerGeoError):
    """Fewer than two classes, or too few samples per class."""


class AllZeroRelevance(FingerGeoError):
    pass


class BadLayout(FingerGeoError):
    """Feature count is incompatible with the finger-major column layout."""


class EmptyInput(FingerGeoError):
    pass


class LengthMismatch(FingerGeoError):
    pass


class UnknownSubject(FingerGeoError):
    pass


class ZeroMean(FingerGeoError):
    pass


class EmptyScores(FingerGeoError):
    pass


class LayoutError(FingerGeoError):
    def __init__(self, path, message=None):
        self.path = str(path)
        super().__init__(message or f"file does not match layout pattern: {self.path}")


class TooFewSubjects(FingerGeoError):
    pass


class ParamsOutOfRange(FingerGeoError):
    pass


class ConfigError(FingerGeoError):
    """Invalid configuration value (usage error at the CLI)."""
