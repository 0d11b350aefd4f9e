"""Constellations with bit labels and per-point priors, plus soft demapping.

Square QAM uses per-dimension binary-reflected Gray labels; the label
integer is (gray_I << m/2) | gray_Q and bit 0 of the LLR output is the
label MSB. Points are scaled to unit average energy *under the priors*.

``noise_var`` throughout is the per-real-dimension variance of circular
Gaussian noise, i.e. the auxiliary channel density is
exp(-|r - x|^2 / (2 sigma^2)); for BPSK this reduces to the textbook
LLR = 2 Re(r) / sigma^2.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError

LLR_CAP = 50.0


@dataclass
class Constellation:
    """Points + labels + priors; validated on construction."""

    points: np.ndarray
    labels: np.ndarray  # integer label per point
    priors: np.ndarray

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=np.complex128)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        self.priors = np.asarray(self.priors, dtype=np.float64)
        p = self.points.size
        if p < 2 or (p & (p - 1)) != 0:
            raise ParameterError(f"number of points must be a power of two >= 2, got {p}")
        if self.labels.size != p or self.priors.size != p:
            raise ParameterError("points, labels and priors must have equal length")
        m = int(np.log2(p))
        if np.unique(self.labels).size != p:
            raise ParameterError("labels must be distinct")
        if self.labels.min() < 0 or self.labels.max() >= p:
            raise ParameterError(f"labels must be {m}-bit integers")
        if np.any(self.priors < 0) or abs(self.priors.sum() - 1.0) > 1e-12:
            raise ParameterError("priors must be nonnegative and sum to 1")
        energy = float(np.sum(self.priors * np.abs(self.points) ** 2))
        if abs(energy - 1.0) > 1e-9:
            raise ParameterError(f"average energy under priors must be 1, got {energy}")
        self.m = m

    @property
    def label_bits(self) -> np.ndarray:
        """(P, m) matrix of label bits, bit 0 = MSB."""
        shifts = np.arange(self.m - 1, -1, -1)
        return ((self.labels[:, None] >> shifts[None, :]) & 1).astype(np.uint8)

    def entropy(self) -> float:
        p = self.priors[self.priors > 0]
        return float(-(p * np.log2(p)).sum())


def _gray(i):
    return i ^ (i >> 1)


def pam_levels(bits_per_dim: int) -> np.ndarray:
    """Unnormalized PAM lattice: +/-1, +/-3, ..."""
    n = 1 << bits_per_dim
    return np.arange(-(n - 1), n, 2, dtype=float)


def square_qam_lattice(bits_per_symbol: int) -> np.ndarray:
    """Unnormalized square-QAM lattice points ordered by (I index, Q index)."""
    if bits_per_symbol % 2 != 0 or bits_per_symbol < 2:
        raise ParameterError("square QAM needs an even number of bits per symbol")
    lv = pam_levels(bits_per_symbol // 2)
    n = lv.size
    pts = np.empty(n * n, dtype=np.complex128)
    for i in range(n):
        for q in range(n):
            pts[i * n + q] = lv[i] + 1j * lv[q]
    return pts


def square_qam(bits_per_symbol: int, priors=None) -> Constellation:
    """Gray-labeled square QAM, unit average energy under the priors."""
    pts = square_qam_lattice(bits_per_symbol)
    half = bits_per_symbol // 2
    n = 1 << half
    labels = np.empty(n * n, dtype=np.int64)
    for i in range(n):
        for q in range(n):
            labels[i * n + q] = (_gray(i) << half) | _gray(q)
    if priors is None:
        priors = np.full(n * n, 1.0 / (n * n))
    priors = np.asarray(priors, dtype=float)
    scale = np.sqrt(np.sum(priors * np.abs(pts) ** 2))
    return Constellation(pts / scale, labels, priors)


def bpsk() -> Constellation:
    """BPSK: +1 labeled 0, -1 labeled 1."""
    return Constellation(np.array([1.0 + 0j, -1.0 + 0j]), np.array([0, 1]), np.array([0.5, 0.5]))


def map_symbols(indices, constellation: Constellation) -> np.ndarray:
    """Look up energy-normalized points by index."""
    idx = np.asarray(indices)
    if idx.size and (idx.min() < 0 or idx.max() >= constellation.points.size):
        raise ParameterError("symbol index out of range")
    return constellation.points[idx]


def demap_llr(received, constellation: Constellation, noise_var: float, use_priors: bool = True):
    """Exact log-sum-exp bit LLRs and MAP hard decisions.

    Returns (llrs, hard): llrs has shape (N, m) with sign convention
    LLR = log P(bit=0|r) - log P(bit=1|r), magnitudes capped at +/-50.
    """
    if noise_var <= 0:
        raise ParameterError(f"noise variance must be positive, got {noise_var}")
    r = np.asarray(received, dtype=np.complex128).ravel()
    pts = constellation.points
    m = constellation.m
    bits = constellation.label_bits.astype(bool)  # (P, m)
    if use_priors:
        with np.errstate(divide="ignore"):
            logp = np.log(constellation.priors)
    else:
        logp = np.zeros(pts.size)

    llrs = np.empty((r.size, m))
    hard = np.empty(r.size, dtype=np.int64)
    chunk = 1 << 15
    for lo in range(0, r.size, chunk):
        rc = r[lo : lo + chunk, None]
        metric = -np.abs(rc - pts[None, :]) ** 2 / (2.0 * noise_var) + logp[None, :]
        hard[lo : lo + rc.size] = np.argmax(metric, axis=1)
        mx = metric.max(axis=1, keepdims=True)
        w = np.exp(metric - mx)
        for j in range(m):
            s1 = w[:, bits[:, j]].sum(axis=1)
            s0 = w[:, ~bits[:, j]].sum(axis=1)
            with np.errstate(divide="ignore"):
                llrs[lo : lo + rc.size, j] = np.log(s0) - np.log(s1)
    np.clip(llrs, -LLR_CAP, LLR_CAP, out=llrs)
    return llrs, hard


def labels_to_bits(indices, constellation: Constellation) -> np.ndarray:
    """Concatenated label bits (MSB first) of a symbol-index sequence."""
    return constellation.label_bits[np.asarray(indices)].ravel()
