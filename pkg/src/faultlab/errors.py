"""Exception hierarchy shared across the package.

Every failure mode named in the public contracts maps to a distinct class so
callers (and the CLI exit-code mapping) can tell them apart without string
matching.
"""


class FaultlabError(Exception):
    """Base class for all faultlab errors."""


# --- tensor / model ---------------------------------------------------------

class DimensionError(FaultlabError, ValueError):
    """Operand shapes are incompatible."""


class VocabRangeError(FaultlabError, ValueError):
    """A token id is outside the model vocabulary."""


class SequenceTooLongError(FaultlabError, ValueError):
    """An input sequence exceeds the model's max_seq_len."""


class StructureError(FaultlabError, ValueError):
    """A parameter map does not match the canonical layout (missing or
    non-contiguous layer paths, wrong shapes)."""


class SnapshotMismatchError(FaultlabError, ValueError):
    """A parameter snapshot does not fit the model it is restored onto."""


class SiteOccupiedError(FaultlabError, RuntimeError):
    """A hook site already holds an active callback."""


# --- checkpoints -------------------------------------------------------------

class CheckpointError(FaultlabError):
    """Base class for checkpoint container errors."""


class BadMagicError(CheckpointError):
    pass


class TruncatedPayloadError(CheckpointError):
    pass


class OverlappingTensorsError(CheckpointError):
    pass


class ShapeLengthMismatchError(CheckpointError):
    pass


class UnknownDtypeError(CheckpointError):
    pass


class HeaderError(CheckpointError):
    """Malformed header (JSON, names, duplicate entries)."""


# --- faults ------------------------------------------------------------------

class InvalidSpecError(FaultlabError, ValueError):
    """A fault spec violates its parameter constraints."""


class SpecParseError(FaultlabError, ValueError):
    """A fault spec string does not parse."""


class TargetingError(FaultlabError, ValueError):
    """A fault's layer scope matched no tensors in the model."""


class DoubleRevertError(FaultlabError, RuntimeError):
    """A receipt was reverted twice."""


class ForeignReceiptError(FaultlabError, RuntimeError):
    """A receipt was applied to a model that did not produce it."""


# --- data --------------------------------------------------------------------

class DataError(FaultlabError, ValueError):
    """Dataset file is malformed or a dataset precondition fails."""


class EmptyDatasetError(DataError):
    pass


# --- metrics / runner --------------------------------------------------------

class MetricError(FaultlabError, RuntimeError):
    """A metric evaluation failed; message carries the metric name."""


class RunnerError(FaultlabError, RuntimeError):
    """Experiment coordination failure."""


class RunnerIntegrityError(RunnerError):
    """Model integrity was lost during a run (revert failed or baseline
    drifted); the run is aborted."""


class ReportError(FaultlabError, ValueError):
    """Report generation was asked for something the result does not hold."""
