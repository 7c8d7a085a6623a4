"""Exception types shared across the package."""


class MotioncredError(Exception):
    """Base class for all package errors."""


class IngestError(MotioncredError):
    """Raw sensor stream could not be read."""


class FormatError(IngestError):
    """Stream is readable but does not look like a sensor log (mostly malformed lines)."""


class FusionError(MotioncredError):
    """A requested sensor source is missing from the vectors being fused."""


class TrainingError(MotioncredError):
    """Training preconditions violated (single class, empty slice, ...)."""


class ShapeError(MotioncredError):
    """Feature dimension does not match what the model was trained on."""


class StratificationError(MotioncredError):
    """A class has too few samples to fill every fold."""


class SplitError(MotioncredError):
    """An authentication split cannot be built from the available windows."""


class CalibrationError(MotioncredError):
    """Threshold calibration premise failed (benign scores do not dominate adversarial)."""


class ConfigurationError(MotioncredError):
    """Invalid run configuration or missing model for a verification request."""
