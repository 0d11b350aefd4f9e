"""Behavioral model of the analog/optical chain.

DAC, MZM driver path, fiber chromatic dispersion and loss, EDFA + VOA,
PIN-TIA photodetector and the capture ADC, plus analytic and probed
small-signal responses.

Magnitude models (all realized as linear-phase FIR, exact 3 dB points):

* DAC: single-pole, |H| = (1 + (f/f3)^2)^-1/2
* MZM drive path / PIN-TIA / ADC front end: Butterworth-magnitude of
  configurable order (flat passband, knee at the 3 dB point)

Fiber: chirp-free all-pass H(f) = exp(+j pi lambda^2 D L f^2 / c)
(beta2 = -D lambda^2 / (2 pi c) convention), scalar field loss.

Optical power is carried in watts (|E|^2 = instantaneous power);
photocurrents in amperes. All randomness comes in through explicit
generators; passing None disables the corresponding noise.
"""

import math
from dataclasses import dataclass, field, replace
from fractions import Fraction

import numpy as np
from scipy import signal as _sig

from .dsp import resample_rational, tone_amplitude
from .errors import ParameterError
from .waveform import ComplexWaveform, RealWaveform

C_LIGHT = 2.99792458e8  # m/s
PLANCK = 6.62607015e-34  # J s

FRONTEND_FIR_TAPS = 301


def dbm_to_watt(dbm: float) -> float:
    return 1e-3 * 10.0 ** (dbm / 10.0)


def watt_to_dbm(watt: float) -> float:
    return 10.0 * math.log10(watt / 1e-3)


@dataclass(frozen=True)
class DacConfig:
    rate: float = 90e9
    bandwidth_3db: float = 16e9  # None disables the low-pass
    bits: int = 6  # None disables quantization


@dataclass(frozen=True)
class AdcConfig:
    rate: float = 80e9
    cutoff: float = 36e9
    bits: int = 8
    filter_order: int = 4


@dataclass(frozen=True)
class MzmConfig:
    vpi: float = 4.9
    bias: float = 2.45  # quadrature for the default vpi
    drive_scale: float = 0.10  # peak drive as a fraction of vpi at the clip level
    bandwidth_3db: float = 30e9
    filter_order: int = 2


@dataclass(frozen=True)
class PdConfig:
    responsivity: float = 0.8  # A/W
    bandwidth_3db: float = 31e9
    thermal_noise_psd: float = 2.0e-22  # A^2/Hz, one-sided; desk-calibrated, not a paper value
    filter_order: int = 4


@dataclass(frozen=True)
class LinkConfig:
    wavelength: float = 1550.02e-9
    dispersion: float = 17e-6  # s/m^2  (17 ps/nm/km)
    length: float = 100e3  # m
    fiber_loss_db_per_km: float = 0.2
    launch_power_dbm: float = 6.89
    edfa_gain_db: float = 23.0
    edfa_noise_figure_db: float = None  # None: ASE off
    rop_dbm: float = -2.0
    sim_rate: float = 180e9
    mzm: MzmConfig = field(default_factory=MzmConfig)
    dac: DacConfig = field(default_factory=DacConfig)
    adc: AdcConfig = field(default_factory=AdcConfig)
    pd: PdConfig = field(default_factory=PdConfig)

    def __post_init__(self):
        for name, val in [
            ("wavelength", self.wavelength),
            ("length", self.length),
            ("sim_rate", self.sim_rate),
            ("dac.rate", self.dac.rate),
            ("adc.rate", self.adc.rate),
        ]:
            if val is None or val < 0 or (name != "length" and val <= 0):
                raise ParameterError(f"{name} must be positive, got {val}")
        headroom = (
            self.launch_power_dbm
            - self.fiber_loss_db_per_km * self.length / 1e3
            + self.edfa_gain_db
            + 0.01
        )
        if self.rop_dbm > headroom:
            raise ParameterError(
                f"rop {self.rop_dbm} dBm exceeds available power {headroom:.2f} dBm"
            )

    @property
    def loss_db(self) -> float:
        return self.fiber_loss_db_per_km * self.length / 1e3


def _single_pole_mag(f, f3):
    return 1.0 / np.sqrt(1.0 + (f / f3) ** 2)


def _butter_mag(f, f3, order):
    return 1.0 / np.sqrt(1.0 + (f / f3) ** (2 * order))


def _magnitude_fir(mag_fn, rate, numtaps=FRONTEND_FIR_TAPS):
    """Linear-phase FIR matching a prescribed magnitude response."""
    grid = np.linspace(0.0, rate / 2, 1024)
    gains = mag_fn(grid)
    return _sig.firwin2(numtaps, grid, gains, fs=rate)


def _apply_fir(samples, taps):
    return _sig.oaconvolve(samples, taps, mode="same")


def quantize_uniform(samples: np.ndarray, bits) -> np.ndarray:
    """Uniform mid-rise quantizer, full scale at the signal peak."""
    if bits is None or math.isinf(bits):
        return samples
    fs_amp = np.max(np.abs(samples))
    if fs_amp == 0.0:
        return samples
    levels = 1 << int(bits)
    step = 2.0 * fs_amp / levels
    idx = np.clip(np.floor((samples + fs_amp) / step), 0, levels - 1)
    return -fs_amp + (idx + 0.5) * step


def dac_model(x: RealWaveform, cfg: LinkConfig) -> RealWaveform:
    """Quantize to dac.bits then apply the single-pole-equivalent low-pass."""
    if x.sample_rate != cfg.dac.rate:
        raise ParameterError(
            f"dac_model expects waveform at {cfg.dac.rate} Sa/s, got {x.sample_rate}"
        )
    y = quantize_uniform(x.samples, cfg.dac.bits)
    bw = cfg.dac.bandwidth_3db
    if bw is not None and not math.isinf(bw):
        taps = _magnitude_fir(lambda f: _single_pole_mag(f, bw), x.sample_rate)
        y = _apply_fir(y, taps)
    return x.with_samples(y)


def mzm_modulate(v: RealWaveform, cfg: LinkConfig, normalize: bool = True) -> ComplexWaveform:
    """Chirp-free push-pull field E = sqrt(P0) cos(pi (v + bias) / (2 vpi)).

    The drive passes the modulator's bandwidth limit first. With
    ``normalize`` the output mean power equals the configured launch
    power; otherwise the input laser power P0 is taken as 1 W.
    """
    drive = v.samples
    bw = cfg.mzm.bandwidth_3db
    if bw is not None and not math.isinf(bw):
        taps = _magnitude_fir(lambda f: _butter_mag(f, bw, cfg.mzm.filter_order), v.sample_rate)
        drive = _apply_fir(drive, taps)
    e = np.cos(np.pi * (drive + cfg.mzm.bias) / (2.0 * cfg.mzm.vpi)).astype(np.complex128)
    if normalize:
        p = np.mean(np.abs(e) ** 2)
        if p > 0:
            e *= math.sqrt(dbm_to_watt(cfg.launch_power_dbm) / p)
    return ComplexWaveform(e, v.sample_rate)


def fiber_propagate(e: ComplexWaveform, cfg: LinkConfig) -> ComplexWaveform:
    """All-pass chromatic dispersion plus scalar loss; energy exact up to loss."""
    if cfg.length == 0.0:
        return e.with_samples(e.samples)
    f = np.fft.fftfreq(len(e), 1.0 / e.sample_rate)
    phase = np.pi * cfg.wavelength**2 * cfg.dispersion * cfg.length * f**2 / C_LIGHT
    h = np.exp(1j * phase)
    y = np.fft.ifft(np.fft.fft(e.samples) * h)
    y *= 10.0 ** (-cfg.loss_db / 20.0)
    return e.with_samples(y)


def edfa_and_voa(e: ComplexWaveform, cfg: LinkConfig, rng=None) -> ComplexWaveform:
    """Amplify, optionally add ASE, then set the mean power to the ROP."""
    g = 10.0 ** (cfg.edfa_gain_db / 10.0)
    y = e.samples * math.sqrt(g)
    if cfg.edfa_noise_figure_db is not None and rng is not None and cfg.length >= 0:
        nf = 10.0 ** (cfg.edfa_noise_figure_db / 10.0)
        nsp = nf * g / (2.0 * max(g - 1.0, 1e-12))
        s_ase = nsp * (g - 1.0) * PLANCK * (C_LIGHT / cfg.wavelength)  # W/Hz, one pol
        var = s_ase * e.sample_rate
        noise = math.sqrt(var / 2.0) * (
            rng.standard_normal(len(e)) + 1j * rng.standard_normal(len(e))
        )
        y = y + noise
    p = np.mean(np.abs(y) ** 2)
    if p > 0:
        y = y * math.sqrt(dbm_to_watt(cfg.rop_dbm) / p)
    return e.with_samples(y)


def photodetect(e: ComplexWaveform, cfg: LinkConfig, rng=None) -> RealWaveform:
    """Square-law detection: i = R |E|^2 + thermal noise, then the TIA low-pass."""
    i = cfg.pd.responsivity * np.abs(e.samples) ** 2
    if rng is not None and cfg.pd.thermal_noise_psd > 0:
        sigma = math.sqrt(cfg.pd.thermal_noise_psd * e.sample_rate / 2.0)
        i = i + sigma * rng.standard_normal(i.size)
    bw = cfg.pd.bandwidth_3db
    if bw is not None and not math.isinf(bw):
        taps = _magnitude_fir(lambda f: _butter_mag(f, bw, cfg.pd.filter_order), e.sample_rate)
        i = _apply_fir(i, taps)
    return RealWaveform(i, e.sample_rate)


def adc_model(x: RealWaveform, cfg: LinkConfig) -> RealWaveform:
    """Anti-alias low-pass at the cutoff, resample to the ADC rate, quantize."""
    y = x.samples
    co = cfg.adc.cutoff
    if co is not None and not math.isinf(co):
        taps = _magnitude_fir(lambda f: _butter_mag(f, co, cfg.adc.filter_order), x.sample_rate)
        y = _apply_fir(y, taps)
    wave = RealWaveform(y, x.sample_rate)
    if x.sample_rate != cfg.adc.rate:
        ratio = Fraction(cfg.adc.rate).limit_denominator(10**6) / Fraction(
            x.sample_rate
        ).limit_denominator(10**6)
        frac = (ratio.numerator, ratio.denominator)
        if max(frac) > 1000:
            raise ParameterError(
                f"ADC rate {cfg.adc.rate} not rationally related to {x.sample_rate}"
            )
        # tight transition keeps the passband flat out to ~0.92 Nyquist so
        # the 3 dB point of the cutoff filter stays measurable
        wave = resample_rational(wave, frac[0], frac[1], transition=(0.92, 1.02))
    return wave.with_samples(quantize_uniform(wave.samples, cfg.adc.bits))


def analytic_fading(f, cfg: LinkConfig):
    """Small-signal IM/DD double-sideband fading |cos(pi lambda^2 D L f^2 / c)|."""
    f = np.asarray(f, dtype=float)
    arg = np.pi * cfg.wavelength**2 * cfg.dispersion * cfg.length * f**2 / C_LIGHT
    out = np.abs(np.cos(arg))
    return out if out.ndim else float(out)


def analytic_frontend(f, cfg: LinkConfig, parts=("dac", "mzm", "pd", "adc")):
    """Combined closed-form |H| of the selected front-end magnitude models."""
    f = np.asarray(f, dtype=float)
    h = np.ones_like(f)
    if "dac" in parts and cfg.dac.bandwidth_3db is not None:
        h = h * _single_pole_mag(f, cfg.dac.bandwidth_3db)
    if "mzm" in parts and cfg.mzm.bandwidth_3db is not None:
        h = h * _butter_mag(f, cfg.mzm.bandwidth_3db, cfg.mzm.filter_order)
    if "pd" in parts and cfg.pd.bandwidth_3db is not None:
        h = h * _butter_mag(f, cfg.pd.bandwidth_3db, cfg.pd.filter_order)
    if "adc" in parts and cfg.adc.cutoff is not None:
        h = h * _butter_mag(f, cfg.adc.cutoff, cfg.adc.filter_order)
    return h if h.ndim else float(h)


def _noiseless(cfg: LinkConfig) -> LinkConfig:
    return replace(
        cfg,
        dac=replace(cfg.dac, bits=None),
        adc=replace(cfg.adc, bits=None),
        pd=replace(cfg.pd, thermal_noise_psd=0.0),
        edfa_noise_figure_db=None,
    )


def probe_response(cfg: LinkConfig, f_grid, n_samples: int = 1 << 16) -> np.ndarray:
    """Measured end-to-end |H(f)|: small tones through dac->mzm->fiber->pd->adc.

    Noise and quantization are disabled for the probe. Returns the linear
    magnitude (detected current amplitude per volt of drive) per grid
    frequency; compare relative values.
    """
    cfg = _noiseless(cfg)
    f_grid = np.atleast_1d(np.asarray(f_grid, dtype=float))
    if np.any(f_grid <= 0) or np.any(f_grid >= cfg.adc.rate / 2):
        raise ParameterError("probe grid must lie inside (0, adc Nyquist)")
    amp = 1e-3 * cfg.mzm.vpi  # deep small-signal drive
    ratio = Fraction(cfg.sim_rate).limit_denominator(10**6) / Fraction(
        cfg.dac.rate
    ).limit_denominator(10**6)
    up, down = ratio.numerator, ratio.denominator

    out = np.empty(f_grid.size)
    t = np.arange(n_samples) / cfg.dac.rate
    for k, f in enumerate(f_grid):
        v = RealWaveform(amp * np.sin(2 * np.pi * f * t), cfg.dac.rate)
        v = dac_model(v, cfg)
        v = resample_rational(v, up, down)
        e = mzm_modulate(v, cfg)
        e = fiber_propagate(e, cfg)
        e = edfa_and_voa(e, cfg)
        i = photodetect(e, cfg)
        cap = adc_model(i, cfg)
        trimmed = RealWaveform(cap.samples[2000:-2000], cap.sample_rate)
        out[k] = tone_amplitude(trimmed, f) / amp
    return out
