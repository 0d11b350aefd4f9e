"""BER, GMI/NGMI, symbol PDFs."""

import math

import numpy as np
import pytest
from scipy import integrate

from nscm.constellation import bpsk, map_symbols, square_qam
from nscm.errors import MetricDataError, ParameterError
from nscm.metrics import ber, gmi_estimate, gmi_from_llrs, ngmi, symbol_pdf
from nscm.shaping import QamShaper, sample_shaped_symbols


class TestBer:
    def test_identical(self):
        bits = np.random.default_rng(0).integers(0, 2, 2000)
        assert ber(bits, bits) == 0.0

    def test_complement(self):
        bits = np.random.default_rng(1).integers(0, 2, 2000)
        assert ber(bits, 1 - bits) == 1.0

    def test_known_flip_count(self):
        rng = np.random.default_rng(2)
        tx = rng.integers(0, 2, 10_000)
        rx = tx.copy()
        pos = rng.choice(10_000, size=5, replace=False)
        rx[pos] ^= 1
        assert ber(tx, rx) == 5e-4

    def test_length_mismatch(self):
        with pytest.raises(ParameterError):
            ber(np.zeros(2000), np.zeros(2001))

    def test_too_short(self):
        with pytest.raises(ParameterError):
            ber(np.zeros(100), np.zeros(100))


class TestGmi:
    def test_noiseless_uniform_qam(self):
        c = square_qam(6)
        rng = np.random.default_rng(0)
        idx = rng.integers(0, 64, 20_000)
        tx = c.points[idx]
        rx = tx + 1e-8 * (rng.normal(size=tx.size) + 1j * rng.normal(size=tx.size))
        est = gmi_estimate(tx, rx, c)
        assert est.gmi > 5.99

    def test_bpsk_0db_matches_quadrature_oracle(self):
        # 1-D quadrature oracle for BPSK over AWGN at Es/N0 = 0 dB:
        # GMI = 1 - E[log2(1 + exp(-2 y / sigma^2))], y ~ N(+-1, sigma^2)
        c = bpsk()
        snr = 1.0
        sigma2 = 1.0 / (2.0 * snr)  # per-dimension variance

        def integrand(y):
            pdf = math.exp(-((y - 1.0) ** 2) / (2 * sigma2)) / math.sqrt(2 * math.pi * sigma2)
            return pdf * np.log2(1 + math.exp(-2.0 * y / sigma2))

        penalty, _ = integrate.quad(integrand, -12, 12, limit=200)
        oracle = 1.0 - penalty

        rng = np.random.default_rng(3)
        idx = rng.integers(0, 2, 200_000)
        tx = c.points[idx]
        noise = math.sqrt(sigma2) * (
            rng.normal(size=tx.size) + 1j * rng.normal(size=tx.size)
        )
        est = gmi_estimate(tx, tx + noise, c)
        assert est.gmi == pytest.approx(oracle, abs=0.02)

    def test_shaped_gmi_capped_by_entropy(self):
        shaper = QamShaper(6, 4.5)
        c = shaper.constellation
        rng = np.random.default_rng(4)
        idx = sample_shaped_symbols(rng, c, 50_000)
        tx = c.points[idx]
        rx = tx + 1e-6 * (rng.normal(size=tx.size) + 1j * rng.normal(size=tx.size))
        est = gmi_estimate(tx, rx, c)
        assert est.gmi == pytest.approx(4.5, abs=0.01)
        assert est.gmi <= c.entropy() + 1e-9

    def test_needs_enough_samples(self):
        c = bpsk()
        with pytest.raises(ParameterError):
            gmi_estimate(c.points[:1] * 100, c.points[:1] * 100, c)

    def test_standard_error_shrinks_as_sqrt_n(self):
        c = square_qam(4)
        rng = np.random.default_rng(5)
        ses = []
        for n in (20_000, 80_000):
            idx = rng.integers(0, 16, n)
            tx = c.points[idx]
            rx = tx + 0.2 * (rng.normal(size=n) + 1j * rng.normal(size=n))
            ses.append(gmi_estimate(tx, rx, c).std_error)
        assert ses[1] == pytest.approx(ses[0] / 2.0, rel=0.25)


class TestNgmi:
    def test_perfect(self):
        assert ngmi(4.5, 4.5, 6) == 1.0

    def test_sd_fec_threshold_value(self):
        assert ngmi(5.148, 6.0, 6) == pytest.approx(0.858)

    def test_hd_fec_threshold_value(self):
        assert ngmi(5.6076, 6.0, 6) == pytest.approx(0.9346)

    def test_arbitrary_arithmetic(self):
        assert ngmi(5.1, 5.5, 6) == pytest.approx(1 - 0.4 / 6)

    def test_gmi_above_entropy_rejected(self):
        with pytest.raises(MetricDataError):
            ngmi(5.0, 4.5, 6)

    def test_entropy_range(self):
        with pytest.raises(ParameterError):
            ngmi(1.0, 7.0, 6)


class TestSymbolPdf:
    def test_uniform_gap(self):
        c = square_qam(6)
        rng = np.random.default_rng(0)
        n = 200_000
        idx = rng.integers(0, 64, n)
        pdf = symbol_pdf(idx, c)
        assert pdf.max() - pdf.min() < 5.0 / math.sqrt(n)

    def test_shaped_inner_heavier_than_outer(self):
        shaper = QamShaper(6, 4.5)
        c = shaper.constellation
        rng = np.random.default_rng(1)
        idx = sample_shaped_symbols(rng, c, 100_000)
        pdf = symbol_pdf(idx, c)
        e = np.abs(c.points) ** 2
        inner = pdf[np.isclose(e, e.min())].sum()
        outer = pdf[np.isclose(e, e.max())].sum()
        assert inner > outer

    def test_single_point_mass(self):
        c = square_qam(6)
        pdf = symbol_pdf(np.full(20_000, 7), c)
        assert pdf[7] == 1.0
        assert pdf.sum() == pytest.approx(1.0)

    def test_complex_decisions_accepted(self):
        c = bpsk()
        pts = c.points[np.random.default_rng(2).integers(0, 2, 20_000)]
        pdf = symbol_pdf(pts + 0.01, c)
        assert pdf.sum() == pytest.approx(1.0)
