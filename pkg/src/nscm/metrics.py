"""Link metrics: BER, GMI/NGMI, symbol PDFs.

GMI uses the bit-metric decoding rate for shaped signaling,
GMI = H(X) - sum_j E[log2(1 + exp(-(1-2 c_j) LLR_j))], with LLRs from the
exact prior-aware demapper, so GMI <= H(X) structurally and NGMI
= 1 - (H - GMI)/m never exceeds 1.
"""

import math
from dataclasses import dataclass

import numpy as np

from .constellation import Constellation, demap_llr
from .errors import MetricDataError, ParameterError

LN2 = math.log(2.0)


def ber(tx_bits, rx_bits) -> float:
    """Hamming distance over length; streams must match and be >= 1e3 bits."""
    tx = np.asarray(tx_bits).ravel()
    rx = np.asarray(rx_bits).ravel()
    if tx.size != rx.size:
        raise ParameterError(f"bit streams differ in length: {tx.size} vs {rx.size}")
    if tx.size < 1000:
        raise ParameterError("need at least 1e3 bits for a BER estimate")
    return float(np.mean(tx != rx))


@dataclass(frozen=True)
class GmiEstimate:
    gmi: float
    std_error: float
    noise_var: float  # per-dim, after the one-tap scale fit
    scale: complex


def gmi_penalties(llrs, tx_bits) -> np.ndarray:
    """Per-symbol bit-metric penalties sum_j log2(1+exp(-(1-2c) LLR))."""
    signs = 1.0 - 2.0 * np.asarray(tx_bits, dtype=np.float64)
    return np.logaddexp(0.0, -signs * llrs).sum(axis=1) / LN2


def gmi_from_llrs(llrs, tx_label_bits, source_entropy: float):
    """(gmi, standard error) from precomputed LLRs and transmitted label bits."""
    pen = gmi_penalties(llrs, tx_label_bits)
    gmi = source_entropy - float(pen.mean())
    se = float(pen.std(ddof=1) / math.sqrt(pen.size)) if pen.size > 1 else 0.0
    return gmi, se


def gmi_estimate(tx_symbols, rx_symbols, constellation: Constellation) -> GmiEstimate:
    """Monte-Carlo GMI under a circular-Gaussian auxiliary channel.

    The receive sequence is scale-corrected by a one-tap LS fit and the
    noise variance estimated from the residuals; LLRs include the
    constellation priors.
    """
    tx = np.asarray(tx_symbols, dtype=np.complex128).ravel()
    rx = np.asarray(rx_symbols, dtype=np.complex128).ravel()
    if tx.size != rx.size:
        raise ParameterError("tx/rx length mismatch")
    if tx.size < 10_000:
        raise ParameterError("need at least 1e4 symbol pairs")
    # map tx points to indices (tx must consist of constellation points)
    idx = np.argmin(np.abs(tx[:, None] - constellation.points[None, :]), axis=1)
    scale = np.vdot(tx, rx) / np.vdot(tx, tx)
    if scale == 0:
        raise ParameterError("rx is uncorrelated with tx")
    rxn = rx / scale
    noise_var = max(float(np.mean(np.abs(rxn - tx) ** 2)) / 2.0, 1e-15)
    llrs, _ = demap_llr(rxn, constellation, noise_var, use_priors=True)
    bits = constellation.label_bits[idx]
    gmi, se = gmi_from_llrs(llrs, bits, constellation.entropy())
    return GmiEstimate(gmi=gmi, std_error=se, noise_var=noise_var, scale=complex(scale))


def ngmi(gmi: float, source_entropy: float, bits_per_symbol: int) -> float:
    """NGMI = 1 - (H - GMI)/m."""
    if not 0.0 < source_entropy <= bits_per_symbol + 1e-12:
        raise ParameterError(
            f"entropy {source_entropy} outside (0, m={bits_per_symbol}]"
        )
    if gmi > source_entropy + 1e-6:
        raise MetricDataError(f"GMI {gmi} exceeds source entropy {source_entropy}")
    return 1.0 - (source_entropy - gmi) / bits_per_symbol


def symbol_pdf(decided, constellation: Constellation) -> np.ndarray:
    """Empirical probability of each constellation point.

    Accepts symbol indices or complex decisions (mapped to the nearest
    point). Needs at least 1e4 symbols.
    """
    arr = np.asarray(decided)
    if arr.size < 10_000:
        raise ParameterError("need at least 1e4 symbols for a PDF estimate")
    if np.issubdtype(arr.dtype, np.complexfloating):
        idx = np.argmin(np.abs(arr[:, None] - constellation.points[None, :]), axis=1)
    else:
        idx = arr.astype(np.int64)
        if idx.min() < 0 or idx.max() >= constellation.points.size:
            raise ParameterError("symbol index out of range")
    counts = np.bincount(idx, minlength=constellation.points.size)
    return counts / counts.sum()
