"""Per-band frame construction and composite transmit assembly.

Frame layout per band (symbols): [edge margin | preamble | payload | edge
margin]; all bands share one time duration, so a band carries
payload symbols in proportion to its baud. The configured
``payload_symbols`` is the payload length of the highest-baud band.

Deterministic randomness: the preamble is a fixed seeded QPSK sequence
keyed only by the band index (receivers regenerate it without the data
seed); payload bits come from a stream keyed by (master seed, band index)
so adding a band never perturbs the others' bits.
"""

import math
from dataclasses import dataclass

import numpy as np

from .constellation import Constellation, bpsk, labels_to_bits, map_symbols
from .dsp import RrcSpec, design_rrc, fir_filter, frequency_shift, superpose
from .errors import ParameterError
from .planner import BandSpec, SubcarrierPlan
from .shaping import QamShaper, sample_shaped_symbols
from .waveform import ComplexWaveform, RealWaveform

PREAMBLE_KEY = 0x9EA5
PAYLOAD_KEY = 0xB17


@dataclass(frozen=True)
class FrameConfig:
    preamble_symbols: int = 1024
    payload_symbols: int = 200_000
    edge_margin_symbols: int = 32
    ccdm_block: int = 1000
    shaping: str = "ccdm"  # "ccdm" (bit-true) | "ideal" (i.i.d. from priors)
    rrc_span: int = 16

    def __post_init__(self):
        if self.shaping not in ("ccdm", "ideal"):
            raise ParameterError(f"unknown shaping mode {self.shaping!r}")
        if self.preamble_symbols < 64:
            raise ParameterError("preamble must be at least 64 symbols")


def band_preamble(band_index: int, n_symbols: int) -> np.ndarray:
    """Fixed seeded QPSK preamble; independent of the data seed."""
    rng = np.random.default_rng(np.random.SeedSequence((PREAMBLE_KEY, band_index)))
    pts = np.array([1 + 1j, 1 - 1j, -1 + 1j, -1 - 1j]) / math.sqrt(2.0)
    return pts[rng.integers(0, 4, size=n_symbols)]


def payload_rng(master_seed: int, band_index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence((master_seed, PAYLOAD_KEY, band_index)))


@dataclass
class BandModem:
    """TX/RX agreement for one band: spec, frame sizes, mapping."""

    band: BandSpec
    index: int
    sps: int
    n_payload: int
    frame: FrameConfig
    constellation: Constellation
    shaper: QamShaper = None  # None for BPSK

    @property
    def n_total_symbols(self) -> int:
        return self.frame.preamble_symbols + self.n_payload + 2 * self.frame.edge_margin_symbols

    def preamble(self) -> np.ndarray:
        return band_preamble(self.index, self.frame.preamble_symbols)

    def matched_rate(self) -> float:
        if self.shaper is None:
            return 1.0
        return self.shaper.matched_rate(self.n_payload)

    def generate_payload(self, master_seed: int):
        """Returns (bits, payload symbol indices, margin indices)."""
        rng = payload_rng(master_seed, self.index)
        if self.shaper is None:
            bits = rng.integers(0, 2, size=self.n_payload).astype(np.uint8)
            idx = bits.astype(np.int64)  # BPSK labels: 0 -> +1, 1 -> -1
        elif self.frame.shaping == "ccdm":
            bits = rng.integers(
                0, 2, size=self.shaper.bits_per_payload(self.n_payload)
            ).astype(np.uint8)
            idx = self.shaper.encode(bits, self.n_payload)
        else:
            bits = None
            idx = sample_shaped_symbols(rng, self.constellation, self.n_payload)
        margin = sample_shaped_symbols(
            rng, self.constellation, 2 * self.frame.edge_margin_symbols
        )
        return bits, idx, margin

    def frame_symbols(self, payload_idx, margin_idx) -> np.ndarray:
        m = self.frame.edge_margin_symbols
        margin_pts = map_symbols(margin_idx, self.constellation)
        return np.concatenate(
            [
                margin_pts[:m],
                self.preamble(),
                map_symbols(payload_idx, self.constellation),
                margin_pts[m:],
            ]
        )

    def build_waveform(self, symbols, total_samples: int, dac_rate: float) -> ComplexWaveform:
        """Upsample, RRC-shape, pad to the common length, shift to the carrier."""
        up = np.zeros(symbols.size * self.sps, dtype=np.complex128)
        up[:: self.sps] = symbols * self.band.power_scale
        shaped = fir_filter(
            ComplexWaveform(up, dac_rate),
            design_rrc(RrcSpec(self.band.rolloff, self.frame.rrc_span, self.sps)),
        )
        s = shaped.samples
        if s.size < total_samples:
            s = np.concatenate([s, np.zeros(total_samples - s.size, dtype=s.dtype)])
        else:
            s = s[:total_samples]
        return frequency_shift(ComplexWaveform(s, dac_rate), self.band.center, "up")


def make_modems(plan: SubcarrierPlan, frame: FrameConfig, dac_rate: float):
    """Instantiate per-band modems sharing one frame duration.

    Returns (modems, total_samples at dac_rate). Bauds must sit on the
    integer samples-per-symbol grid of the DAC rate.
    """
    sps = []
    for band in plan.bands:
        if band.modulation is None:
            sps.append(None)
            continue
        ratio = dac_rate / band.baud
        l_i = round(ratio)
        if abs(ratio - l_i) > 1e-6 * ratio:
            raise ParameterError(
                f"baud {band.baud} is not on the {dac_rate} Sa/s integer-sps grid"
            )
        sps.append(int(l_i))
    active = [l for l in sps if l is not None]
    if not active:
        raise ParameterError("plan has no loaded bands")
    l_min = min(active)
    base_total = (
        frame.preamble_symbols + frame.payload_symbols + 2 * frame.edge_margin_symbols
    )
    total_samples = base_total * l_min

    modems = []
    for i, (band, l_i) in enumerate(zip(plan.bands, sps)):
        if l_i is None:
            continue
        n_total = total_samples // l_i
        n_payload = n_total - frame.preamble_symbols - 2 * frame.edge_margin_symbols
        if n_payload < 1000:
            raise ParameterError(
                f"band {i}: only {n_payload} payload symbols fit; shorten the preamble "
                "or raise payload_symbols"
            )
        mod = band.modulation
        if mod.kind == "bpsk":
            const, shaper = bpsk(), None
        else:
            shaper = QamShaper(6, mod.entropy, block_amps=frame.ccdm_block)
            const = shaper.constellation
        modems.append(
            BandModem(
                band=band,
                index=i,
                sps=l_i,
                n_payload=n_payload,
                frame=frame,
                constellation=const,
                shaper=shaper,
            )
        )
    return modems, total_samples


@dataclass(frozen=True)
class BandTxRecord:
    bits: np.ndarray  # payload bits (None in ideal-shaping mode)
    indices: np.ndarray  # payload symbol indices
    label_bits: np.ndarray  # Gray-label bits of the payload symbols


def build_composite(modems, master_seed: int, total_samples: int, dac_rate: float):
    """All band waveforms superposed and taken to the real passband.

    Returns (RealWaveform at dac_rate, list of BandTxRecord).
    """
    records = []
    total = None
    for modem in modems:
        bits, idx, margin = modem.generate_payload(master_seed)
        records.append(
            BandTxRecord(
                bits=bits,
                indices=idx,
                label_bits=labels_to_bits(idx, modem.constellation),
            )
        )
        wave = modem.build_waveform(
            modem.frame_symbols(idx, margin), total_samples, dac_rate
        )
        total = wave if total is None else superpose([total, wave])
    return RealWaveform(total.samples.real, dac_rate), records
