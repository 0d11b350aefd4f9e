"""Binary waveform file codec.

Little-endian layout: magic "NSCM" (4 bytes), version u16 = 1, flags u16
(bit 0: complex), sample_rate f64 (Hz), count u64, then f32 samples
(interleaved I,Q for complex). Round-trips within f32 rounding.
"""

import struct

import numpy as np

from .errors import FormatError
from .waveform import ComplexWaveform, RealWaveform

MAGIC = b"NSCM"
VERSION = 1
_HEADER = struct.Struct("<4sHHdQ")


def write_waveform(wave, path) -> None:
    is_complex = np.issubdtype(wave.samples.dtype, np.complexfloating)
    flags = 1 if is_complex else 0
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, flags, float(wave.sample_rate), len(wave)))
        if is_complex:
            inter = np.empty(2 * len(wave), dtype="<f4")
            inter[0::2] = wave.samples.real
            inter[1::2] = wave.samples.imag
            fh.write(inter.tobytes())
        else:
            fh.write(wave.samples.astype("<f4").tobytes())


def read_waveform(path):
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _HEADER.size:
        raise FormatError("truncated header", offset=len(raw))
    magic, version, flags, rate, count = _HEADER.unpack_from(raw, 0)
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}", offset=0)
    if version != VERSION:
        raise FormatError(f"unsupported version {version}", offset=4)
    is_complex = bool(flags & 1)
    per = 8 if is_complex else 4
    need = _HEADER.size + count * per
    if len(raw) < need:
        raise FormatError(
            f"truncated payload: expected {need} bytes, have {len(raw)}", offset=len(raw)
        )
    data = np.frombuffer(raw, dtype="<f4", count=count * (2 if is_complex else 1),
                         offset=_HEADER.size)
    if is_complex:
        samples = data[0::2].astype(np.float64) + 1j * data[1::2].astype(np.float64)
        return ComplexWaveform(samples, rate)
    return RealWaveform(data.astype(np.float64), rate)
