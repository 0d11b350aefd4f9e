"""Exception hierarchy for the nscm package."""


class NscmError(Exception):
    """Base class for all package errors."""


class ParameterError(NscmError, ValueError):
    """An argument violates an operation's preconditions."""


class EntropyRangeError(ParameterError):
    """Requested entropy is unattainable for the given constellation."""


class UndefinedMetricError(NscmError):
    """A metric is undefined for the given input (e.g. PAPR of a zero signal)."""


class SyncFailureError(NscmError):
    """Frame synchronization found no credible correlation peak."""


class EqualizerDivergedError(NscmError):
    """Adaptive equalizer failed to converge (post-training MSE above input power)."""


class DecodeError(NscmError):
    """Distribution-matcher decode failed (composition mismatch or corrupt input)."""


class MetricDataError(NscmError):
    """Measured metric values are mutually inconsistent (e.g. GMI above entropy)."""


class FormatError(NscmError):
    """A serialized waveform file is malformed.

    ``offset`` is the byte position at which parsing failed.
    """

    def __init__(self, message, offset=None):
        super().__init__(message if offset is None else f"{message} (at byte {offset})")
        self.offset = offset


class ConfigError(NscmError):
    """Experiment configuration is invalid (schema violation, unknown keys...)."""


class StageError(NscmError):
    """A pipeline stage failed; carries the stage tag and the original cause."""

    def __init__(self, stage, cause):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause
