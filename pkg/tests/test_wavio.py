"""Waveform file codec: layout, round trips, error reporting."""

import struct

import numpy as np
import pytest

from nscm.errors import FormatError
from nscm.waveform import ComplexWaveform, RealWaveform
from nscm.wavio import read_waveform, write_waveform


class TestRoundTrip:
    def test_complex_round_trip_f32_quantum(self, tmp_path):
        rng = np.random.default_rng(0)
        x = rng.normal(size=100_000) + 1j * rng.normal(size=100_000)
        wave = ComplexWaveform(x, 90e9)
        path = tmp_path / "c.nscm"
        write_waveform(wave, path)
        back = read_waveform(path)
        assert back.sample_rate == 90e9
        quantum = np.max(np.abs(x)) * 2.0 ** (-23)
        assert np.max(np.abs(back.samples - x)) <= quantum

    def test_real_round_trip(self, tmp_path):
        x = np.linspace(-1, 1, 5000)
        path = tmp_path / "r.nscm"
        write_waveform(RealWaveform(x, 80e9), path)
        back = read_waveform(path)
        assert isinstance(back, RealWaveform)
        assert np.max(np.abs(back.samples - x)) <= 2.0 ** (-23)


class TestGoldenLayout:
    def test_reference_bytes_parse(self, tmp_path):
        # byte layout built by hand: magic, version=1, flags=1 (complex),
        # rate f64, count u64, interleaved f32 I/Q
        samples = [(1.0, -2.0), (0.5, 0.25)]
        blob = struct.pack("<4sHHdQ", b"NSCM", 1, 1, 42.5, 2)
        for i, q in samples:
            blob += struct.pack("<ff", i, q)
        path = tmp_path / "golden.nscm"
        path.write_bytes(blob)
        wave = read_waveform(path)
        assert isinstance(wave, ComplexWaveform)
        assert wave.sample_rate == 42.5
        assert np.allclose(wave.samples, [1.0 - 2.0j, 0.5 + 0.25j])

    def test_written_bytes_match_reference(self, tmp_path):
        wave = ComplexWaveform(np.array([1.0 - 2.0j, 0.5 + 0.25j]), 42.5)
        path = tmp_path / "w.nscm"
        write_waveform(wave, path)
        expect = struct.pack("<4sHHdQ", b"NSCM", 1, 1, 42.5, 2)
        expect += struct.pack("<ffff", 1.0, -2.0, 0.5, 0.25)
        assert path.read_bytes() == expect


class TestErrors:
    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bad.nscm"
        path.write_bytes(b"XXXX" + b"\x00" * 20)
        with pytest.raises(FormatError) as err:
            read_waveform(path)
        assert err.value.offset == 0

    def test_bad_version(self, tmp_path):
        path = tmp_path / "v.nscm"
        path.write_bytes(struct.pack("<4sHHdQ", b"NSCM", 9, 0, 1.0, 0))
        with pytest.raises(FormatError) as err:
            read_waveform(path)
        assert err.value.offset == 4

    def test_truncated_payload_reports_offset(self, tmp_path):
        blob = struct.pack("<4sHHdQ", b"NSCM", 1, 0, 1.0, 10)  # promises 10 floats
        blob += struct.pack("<f", 1.0)
        path = tmp_path / "t.nscm"
        path.write_bytes(blob)
        with pytest.raises(FormatError) as err:
            read_waveform(path)
        assert err.value.offset == len(blob)

    def test_truncated_header(self, tmp_path):
        path = tmp_path / "h.nscm"
        path.write_bytes(b"NSC")
        with pytest.raises(FormatError):
            read_waveform(path)
