# mlq/services/ml_errors.py
"""Exceptions raised by the ML core."""


class MLError(Exception):
    """Base class for every failure of the ML core."""


class DataError(MLError):
    """The dataset cannot be read or does not match the feature list."""


class TrainingError(MLError):
    pass


class PredictionError(MLError):
    pass


class MetricError(MLError):
    """A metric was requested for a task it does not apply to."""


class ModelDocumentError(MLError):
    """A serialized model document is corrupted or of an unsupported version."""


class BlackboxError(MLError):
    pass


class PresetError(MLError):
    pass
