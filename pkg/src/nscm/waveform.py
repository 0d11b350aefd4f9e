"""Sampled-signal containers used by every DSP block.

A waveform is an array of samples plus an explicit sample rate in Hz.
Dimensionless amplitudes; any physical scale (volts, amps, sqrt-watts)
is carried by convention of the producing stage.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError


def _check_rate(sample_rate):
    if not np.isfinite(sample_rate) or sample_rate <= 0:
        raise ParameterError(f"sample_rate must be positive and finite, got {sample_rate}")


@dataclass(frozen=True)
class ComplexWaveform:
    """Complex-envelope signal at a given sample rate."""

    samples: np.ndarray
    sample_rate: float

    def __post_init__(self):
        arr = np.asarray(self.samples, dtype=np.complex128)
        _check_rate(self.sample_rate)
        if arr.ndim != 1:
            raise ParameterError("samples must be one-dimensional")
        if arr.size and not np.all(np.isfinite(arr)):
            raise ParameterError("samples contain NaN/Inf")
        object.__setattr__(self, "samples", arr)

    def __len__(self):
        return self.samples.size

    @property
    def duration(self):
        return self.samples.size / self.sample_rate

    def with_samples(self, samples):
        return ComplexWaveform(samples, self.sample_rate)


@dataclass(frozen=True)
class RealWaveform:
    """Real-valued signal (electrical or optical-intensity domain)."""

    samples: np.ndarray
    sample_rate: float

    def __post_init__(self):
        arr = np.asarray(self.samples, dtype=np.float64)
        _check_rate(self.sample_rate)
        if arr.ndim != 1:
            raise ParameterError("samples must be one-dimensional")
        if arr.size and not np.all(np.isfinite(arr)):
            raise ParameterError("samples contain NaN/Inf")
        object.__setattr__(self, "samples", arr)

    def __len__(self):
        return self.samples.size

    @property
    def duration(self):
        return self.samples.size / self.sample_rate

    def with_samples(self, samples):
        return RealWaveform(samples, self.sample_rate)
