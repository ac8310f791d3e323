class TrainerError(Exception):
    """Base class for trainer errors."""


class RangeError(TrainerError, ValueError):
    """Argument outside its documented range."""


class EmptyBatch(TrainerError, ValueError):
    """An accumulation window contained no micro-batches."""


class IncompatibleBackbone(TrainerError, TypeError):
    """Backbone does not expose a flat feature vector."""


class DataMismatch(TrainerError, ValueError):
    """Split, manifest and image tree disagree about the dataset."""
