"""Exception types shared across the package."""


class LoglensError(Exception):
    """Base class for all loglens errors."""


class ShapeError(LoglensError):
    """Operands have incompatible shapes."""


class ConfigError(LoglensError):
    """A configuration value is invalid or unknown."""


class NumericError(LoglensError):
    """A computation produced a non-finite value."""


class DivergenceError(NumericError):
    """Training loss became non-finite."""


class CorpusError(LoglensError):
    """A corpus cannot be loaded or is malformed."""


class EmptyCorpusError(CorpusError):
    """An operation received a corpus with no records."""


class ContaminationError(LoglensError):
    """Anomalous-labeled records reached a normals-only training stage."""


class LabelMissingError(LoglensError):
    """A record that must be labeled is unlabeled."""


class EmptyInputError(LoglensError):
    """A sequence with no non-pad tokens cannot be classified."""


class CorruptInputError(LoglensError):
    """Token ids are outside the model vocabulary."""


class CheckpointError(LoglensError):
    """Base class for checkpoint load/save failures."""


class CorruptCheckpointError(CheckpointError):
    """Checkpoint file is truncated or has wrong magic bytes."""


class IncompatibleCheckpointError(CheckpointError):
    """Checkpoint format version is not supported."""


class VocabularyMismatchError(CheckpointError):
    """Checkpoint was written with a different vocabulary."""
