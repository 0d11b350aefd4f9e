"""Per-band receiver DSP.

Frame synchronization by normalized cross-correlation, T/2-spaced LMS
feedforward equalization (training then decision-directed), two-tap
post-filter estimation/application, memory-1 MLSE, and the band-level
pipeline composing them after frequency down-conversion, resampling and
matched filtering.
"""

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy import signal as _sig

from . import _kernels
from .constellation import Constellation, demap_llr, map_symbols
from .dsp import RrcSpec, design_rrc, fir_filter, frequency_shift, resample_rational
from .errors import EqualizerDivergedError, ParameterError, SyncFailureError
from .planner import BandSpec
from .waveform import ComplexWaveform, RealWaveform


@dataclass(frozen=True)
class EqualizerConfig:
    num_taps: int = 33
    step_size: float = 1e-3
    samples_per_symbol: int = 2
    training_symbols: int = 1024

    def __post_init__(self):
        if self.num_taps < 1 or self.num_taps % 2 == 0:
            raise ParameterError("num_taps must be odd and positive")
        if not 0.0 < self.step_size < 0.1:
            raise ParameterError("step_size must be in (0, 0.1)")
        if self.samples_per_symbol != 2:
            raise ParameterError("equalizer is T/2 spaced")
        if self.training_symbols < 10 * self.num_taps:
            raise ParameterError("training_symbols must be >= 10 * num_taps")


@dataclass(frozen=True)
class PostFilter:
    alpha: float

    def __post_init__(self):
        if not 0.0 <= self.alpha < 1.0:
            raise ParameterError("post-filter alpha must be in [0, 1)")


@dataclass(frozen=True)
class TrellisSpec:
    constellation: Constellation
    alpha: float
    memory: int = 1

    def __post_init__(self):
        if self.memory != 1:
            raise ParameterError("only memory-1 trellises are supported")
        if not abs(self.alpha) < 1.0:
            raise ParameterError("|alpha| must be < 1 (minimum phase)")

    @property
    def num_states(self) -> int:
        return self.constellation.points.size


@dataclass(frozen=True)
class SyncResult:
    offset: int
    phase: float
    peak: float


def frame_sync(x: ComplexWaveform, preamble, sps: int) -> SyncResult:
    """Locate the preamble by normalized cross-correlation at T/sps spacing."""
    preamble = np.asarray(preamble, dtype=np.complex128)
    if preamble.size < 64:
        raise ParameterError("preamble must be at least 64 symbols")
    template = np.zeros(preamble.size * sps, dtype=np.complex128)
    template[::sps] = preamble
    if len(x) < template.size:
        raise SyncFailureError("capture shorter than the preamble")

    num = _sig.fftconvolve(x.samples, np.conj(template[::-1]), mode="valid")
    mask = np.zeros(template.size)
    mask[::sps] = 1.0
    energy = _die_positive(
        _sig.fftconvolve(np.abs(x.samples) ** 2, mask[::-1], mode="valid")
    )
    ep = float(np.sum(np.abs(preamble) ** 2))
    peak_curve = np.abs(num) / np.sqrt(energy * ep)
    offset = int(np.argmax(peak_curve))
    peak = float(peak_curve[offset])
    if peak < 0.5:
        raise SyncFailureError(f"correlation peak {peak:.3f} below 0.5")
    return SyncResult(offset=offset, phase=float(np.angle(num[offset])), peak=peak)


def _die_positive(arr, floor=1e-30):
    return np.maximum(arr, floor)


@dataclass(frozen=True)
class EqualizerResult:
    symbols: np.ndarray
    taps: np.ndarray
    errors: np.ndarray
    mse_training: float
    mse_payload: float


def ffe_equalize(
    x,
    training,
    cfg: EqualizerConfig,
    constellation: Constellation,
    n_symbols: int = None,
) -> EqualizerResult:
    """T/2-spaced LMS equalizer; training-directed then decision-directed.

    ``x`` must be aligned so symbol k's tap window is x[2k : 2k+num_taps]
    (i.e. start the array half a window before the first symbol instant).
    Input is normalized to unit RMS first, so decisions are invariant to
    input scaling.
    """
    x = np.asarray(x, dtype=np.complex128)
    training = np.asarray(training, dtype=np.complex128)
    if training.size < cfg.training_symbols:
        raise ParameterError(
            f"need {cfg.training_symbols} training symbols, got {training.size}"
        )
    max_sym = (x.size - cfg.num_taps) // 2 + 1
    n_sym = max_sym if n_symbols is None else min(n_symbols, max_sym)
    if n_sym <= training.size:
        raise ParameterError("no payload symbols left after training")
    rms = math.sqrt(np.mean(np.abs(x) ** 2))
    if rms == 0:
        raise ParameterError("cannot equalize an all-zero signal")
    xn = np.ascontiguousarray(x / rms)
    # Block least-squares fit on the training section seeds the taps:
    # LMS alone needs ~1/(mu |H|^2) symbols for deeply faded spectral
    # modes, far beyond any reasonable preamble; the LMS pass then
    # refines and DD tracks.
    init = _ls_taps(xn, training, cfg.num_taps)
    y, taps, err = _kernels.lms_ffe(
        xn,
        cfg.num_taps,
        cfg.step_size,
        training,
        n_sym,
        constellation.points,
        init,
    )
    tail = max(cfg.training_symbols // 4, 32)
    mse_train = float(np.mean(np.abs(err[training.size - tail : training.size]) ** 2))
    mse_payload = float(np.mean(np.abs(err[training.size :]) ** 2))
    if not np.isfinite(mse_payload) or mse_payload > 1.0:
        # input was normalized to unit power, so MSE above it means divergence
        raise EqualizerDivergedError(
            f"post-training MSE {mse_payload:.3g} exceeds input power"
        )
    return EqualizerResult(y, taps, err, mse_train, mse_payload)


def _ls_taps(x, training, num_taps):
    """Regularized least-squares tap estimate from the training windows."""
    n_train = training.size
    idx = 2 * np.arange(n_train)[:, None] + np.arange(num_taps)[None, :]
    a = x[idx]
    r = a.conj().T @ a
    p = a.conj().T @ training
    reg = 1e-4 * np.trace(r).real / num_taps
    return np.linalg.solve(r + reg * np.eye(num_taps), p)


def estimate_postfilter_alpha(errors) -> PostFilter:
    """Noise-whitening two-tap coefficient from the lag-1 error autocorrelation."""
    e = np.asarray(errors, dtype=np.complex128)
    if e.size < 10_000:
        raise ParameterError(f"need at least 1e4 error samples, got {e.size}")
    denom = float(np.mean(np.abs(e) ** 2))
    if denom == 0.0:
        return PostFilter(0.0)
    lag1 = float(np.mean(e[1:] * np.conj(e[:-1])).real)
    return PostFilter(min(max(lag1 / denom, 0.0), 0.99))


def apply_post_filter(y, pf: PostFilter, y_prev=0.0 + 0.0j) -> np.ndarray:
    """z_k = y_k + alpha * y_{k-1}; y_{-1} is the supplied known symbol."""
    y = np.asarray(y, dtype=np.complex128)
    z = y + pf.alpha * np.concatenate(([y_prev], y[:-1]))
    return z


def _separable(constellation: Constellation):
    """(levels, per-dim priors) when the constellation is a square product
    lattice with product priors in (I index, Q index) ordering; else None."""
    p = constellation.points.size
    n = int(math.isqrt(p))
    if n * n != p:
        return None
    pts = constellation.points.reshape(n, n)
    lv_i = pts[:, 0].real
    lv_q = pts[0, :].imag
    if not (
        np.allclose(pts.real, lv_i[:, None], atol=1e-12)
        and np.allclose(pts.imag, lv_q[None, :], atol=1e-12)
    ):
        return None
    pr = constellation.priors.reshape(n, n)
    pi = pr.sum(axis=1)
    pq = pr.sum(axis=0)
    if not np.allclose(np.outer(pi, pq), pr, atol=1e-12):
        return None
    if not np.allclose(lv_i, lv_q, atol=1e-12):
        return None
    return lv_i.copy(), pi.copy(), pq.copy()


def mlse_viterbi(
    z,
    trellis: TrellisSpec,
    noise_var: float,
    use_priors: bool = True,
    prev_symbol=None,
):
    """Exact memory-1 MLSE: branch metric |z - (x' + alpha x)|^2/(2 s^2) - ln p.

    ``prev_symbol`` (complex value) pins the state before z[0]; None leaves
    the start free. Ties break to the lowest state index. Returns
    (symbol indices, path cost). Square constellations with product priors
    and more than 16 points run as two independent PAM trellises (exact
    factorization of the metric).
    """
    if noise_var <= 0:
        raise ParameterError("noise variance must be positive")
    z = np.asarray(z, dtype=np.complex128)
    if z.size == 0:
        return np.empty(0, dtype=np.int64), 0.0
    const = trellis.constellation
    pts = const.points
    s = pts.size
    inv2s2 = 1.0 / (2.0 * noise_var)
    if use_priors:
        with np.errstate(divide="ignore"):
            nlp = -np.log(const.priors)
        nlp = np.minimum(nlp, 1e12)
    else:
        nlp = np.zeros(s)

    sep = _separable(const) if s > 16 else None
    if sep is not None:
        levels, pi, pq = sep
        n = levels.size
        with np.errstate(divide="ignore"):
            nlp_i = -np.log(pi) if use_priors else np.zeros(n)
            nlp_q = -np.log(pq) if use_priors else np.zeros(n)
        nlp_i = np.minimum(nlp_i, 1e12)
        nlp_q = np.minimum(nlp_q, 1e12)
        known = prev_symbol is not None
        prev_re = float(np.real(prev_symbol)) if known else 0.0
        prev_im = float(np.imag(prev_symbol)) if known else 0.0
        path_i, cost_i = _kernels.viterbi_pam_memory1(
            np.ascontiguousarray(z.real), levels, trellis.alpha, nlp_i, inv2s2, known, prev_re
        )
        path_q, cost_q = _kernels.viterbi_pam_memory1(
            np.ascontiguousarray(z.imag), levels, trellis.alpha, nlp_q, inv2s2, known, prev_im
        )
        return path_i * n + path_q, float(cost_i + cost_q)

    mu = pts[None, :] + trellis.alpha * pts[:, None]  # mu[s, s']
    known = prev_symbol is not None
    if known:
        fmu = pts + trellis.alpha * prev_symbol
    else:
        fmu = pts  # unused
    path, cost = _kernels.viterbi_memory1(
        np.ascontiguousarray(z.real),
        np.ascontiguousarray(z.imag),
        np.ascontiguousarray(mu.real),
        np.ascontiguousarray(mu.imag),
        nlp,
        inv2s2,
        known,
        np.ascontiguousarray(fmu.real),
        np.ascontiguousarray(fmu.imag),
    )
    return path, float(cost)


@dataclass(frozen=True)
class BandRxConfig:
    constellation: Constellation
    preamble: np.ndarray
    n_payload: int
    eq: EqualizerConfig = None
    rrc_span: int = 16
    use_priors: bool = True
    pf_alpha: float = None  # None: estimate from the error sequence
    band_index: int = 0


@dataclass(frozen=True)
class BandResult:
    indices: np.ndarray  # detected payload symbol indices (MLSE path)
    llrs: np.ndarray  # per-bit LLRs of the ISI-cancelled symbols
    alpha: float
    snr_db: float
    noise_var: float  # per-dim, post-FFE
    sync: SyncResult
    eq_mse: float
    taps: np.ndarray


def band_receive(capture: RealWaveform, band: BandSpec, rx: BandRxConfig) -> BandResult:
    """FDC -> resample to 2 sps -> matched RRC -> sync -> FFE -> PF -> MLSE -> demap."""
    try:
        return _band_receive(capture, band, rx)
    except Exception as exc:
        exc.args = (f"band {rx.band_index}: {exc}",) + exc.args[1:]
        raise


def _band_receive(capture: RealWaveform, band: BandSpec, rx: BandRxConfig) -> BandResult:
    eq_cfg = rx.eq if rx.eq is not None else EqualizerConfig()
    if band.center + band.occupied_width / 2 > capture.sample_rate / 2:
        raise ParameterError("band lies outside the capture bandwidth")

    base = frequency_shift(
        ComplexWaveform(capture.samples.astype(np.complex128), capture.sample_rate),
        band.center,
        "down",
    )
    ratio = Fraction(2.0 * band.baud / capture.sample_rate).limit_denominator(10**6)
    two_sps = resample_rational(base, ratio.numerator, ratio.denominator)
    matched = fir_filter(
        two_sps, design_rrc(RrcSpec(band.rolloff, rx.rrc_span, 2))
    )

    preamble = np.asarray(rx.preamble, dtype=np.complex128)
    sync = frame_sync(matched, preamble, 2)

    half = (eq_cfg.num_taps - 1) // 2
    start = sync.offset - half
    sig = matched.samples
    if start < 0:
        sig = np.concatenate([np.zeros(-start, dtype=sig.dtype), sig])
        start = 0
    sig = sig[start:]

    n_total = preamble.size + rx.n_payload
    eq = ffe_equalize(sig, preamble, eq_cfg, rx.constellation, n_symbols=n_total)
    if eq.symbols.size < n_total:
        raise ParameterError(
            f"capture too short: {eq.symbols.size} symbols, need {n_total}"
        )
    y = eq.symbols
    payload_err = eq.errors[preamble.size :]

    if rx.pf_alpha is not None:
        pf = PostFilter(rx.pf_alpha)
    elif payload_err.size >= 10_000:
        pf = estimate_postfilter_alpha(payload_err)
    else:
        pf = PostFilter(0.0)

    z = apply_post_filter(y, pf)
    # noise measured on the tail of the known preamble, past the LMS
    # convergence transient
    tail = max(min(preamble.size // 4, 512), 32)
    lo = preamble.size - tail
    ref = preamble[lo:] + pf.alpha * preamble[lo - 1 : preamble.size - 1]
    w = z[lo : preamble.size] - ref
    noise_var_w = max(float(np.mean(np.abs(w) ** 2)) / 2.0, 1e-12)
    y_err_train = y[lo : preamble.size] - preamble[lo:]
    noise_var_y = max(float(np.mean(np.abs(y_err_train) ** 2)) / 2.0, 1e-12)
    snr_db = 10.0 * math.log10(1.0 / max(2.0 * noise_var_y, 1e-12))

    z_pay = z[preamble.size :]
    trellis = TrellisSpec(rx.constellation, pf.alpha)
    indices, _ = mlse_viterbi(
        z_pay,
        trellis,
        noise_var_w,
        use_priors=rx.use_priors,
        prev_symbol=preamble[-1],
    )

    # ISI-cancelled symbols for soft metrics
    decided = map_symbols(indices, rx.constellation)
    prev = np.concatenate(([preamble[-1]], decided[:-1]))
    z_clean = z_pay - pf.alpha * prev
    llrs, _ = demap_llr(z_clean, rx.constellation, noise_var_w, use_priors=rx.use_priors)

    return BandResult(
        indices=indices,
        llrs=llrs,
        alpha=pf.alpha,
        snr_db=snr_db,
        noise_var=noise_var_y,
        sync=sync,
        eq_mse=eq.mse_payload,
        taps=eq.taps,
    )
