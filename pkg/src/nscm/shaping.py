"""Probabilistic constellation shaping.

Maxwell-Boltzmann distributions over constellation lattices, entropy
fitting by root search, and a constant-composition distribution matcher
(CCDM) implemented with exact big-integer interval subdivision, so
encode/decode are exactly inverse and the output composition is exact.

Square-QAM payloads are matched per dimension: the amplitude sequence of
each quadrature carries a CCDM block stream while sign bits pass through
uniformly. This keeps the matcher rate loss at the few-hundredth-bit
level for kilo-symbol blocks (a direct 64-ary matcher loses ~0.3 bit at
n=1000).
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize as _opt

from .constellation import Constellation, pam_levels, square_qam, square_qam_lattice
from .errors import DecodeError, EntropyRangeError, ParameterError


def mb_distribution(points, nu: float) -> np.ndarray:
    """Maxwell-Boltzmann priors p_i ~ exp(-nu |x_i|^2) over lattice points."""
    if nu < 0:
        raise ParameterError(f"nu must be nonnegative, got {nu}")
    e = np.abs(np.asarray(points)) ** 2
    w = np.exp(-nu * (e - e.min()))  # shift for numeric range only
    return w / w.sum()


def distribution_entropy(priors) -> float:
    p = np.asarray(priors, dtype=float)
    p = p[p > 0]
    return float(-(p * np.log2(p)).sum())


def mb_entropy(points, nu: float) -> float:
    return distribution_entropy(mb_distribution(points, nu))


@dataclass(frozen=True)
class MbShaping:
    """Fitted shaping parameter and the entropy it induces."""

    nu: float
    entropy: float

    def __post_init__(self):
        if self.nu < 0:
            raise ParameterError("nu must be nonnegative")


def mb_fit_entropy(points, target_entropy: float) -> MbShaping:
    """Find nu such that the MB distribution has the target entropy.

    Entropy is strictly decreasing in nu, from log2(P) at nu=0 down to
    log2(#minimum-energy points); targets outside that range raise.
    """
    points = np.asarray(points)
    h_max = math.log2(points.size)
    e = np.abs(points) ** 2
    h_min = math.log2(int(np.sum(np.isclose(e, e.min()))))
    if target_entropy > h_max + 1e-12 or target_entropy <= h_min:
        raise EntropyRangeError(
            f"target entropy {target_entropy} outside attainable ({h_min}, {h_max}]"
        )
    if abs(target_entropy - h_max) <= 1e-12:
        return MbShaping(0.0, h_max)

    hi = 1.0
    while mb_entropy(points, hi) > target_entropy:
        hi *= 2.0
        if hi > 1e6:
            raise EntropyRangeError(f"entropy target {target_entropy} unattainable")
    nu = _opt.brentq(
        lambda v: mb_entropy(points, v) - target_entropy, 0.0, hi, xtol=1e-15, rtol=1e-15
    )
    return MbShaping(float(nu), mb_entropy(points, nu))


@dataclass(frozen=True)
class Composition:
    """Fixed symbol-count composition of a CCDM block."""

    counts: tuple

    def __post_init__(self):
        if any(c < 0 for c in self.counts):
            raise ParameterError("counts must be nonnegative")
        if self.n < 1:
            raise ParameterError("block length must be >= 1")

    @property
    def n(self) -> int:
        return int(sum(self.counts))


def composition_from_priors(priors, n: int) -> Composition:
    """Largest-remainder quantization of priors to a length-n composition."""
    p = np.asarray(priors, dtype=float)
    if n < 1:
        raise ParameterError("block length must be >= 1")
    base = np.floor(p * n).astype(int)
    short = n - int(base.sum())
    order = np.argsort(-(p * n - base), kind="stable")
    base[order[:short]] += 1
    comp = Composition(tuple(int(c) for c in base))
    assert np.all(np.abs(base / n - p) <= 1.0 / n + 1e-12)
    return comp


def multinomial_size(comp: Composition) -> int:
    """Number of distinct sequences with the given composition (exact)."""
    m = 1
    rem = comp.n
    for c in comp.counts:
        m *= math.comb(rem, c)
        rem -= c
    return m


def ccdm_capacity_bits(comp: Composition) -> int:
    """Input block size k = floor(log2 multinomial)."""
    return multinomial_size(comp).bit_length() - 1


def ccdm_encode(bits, comp: Composition) -> np.ndarray:
    """Map a k-bit block to the index-th sequence of the composition.

    Exact-integer arithmetic-coding subdivision: at each position the
    remaining interval is split among symbols proportionally to their
    remaining counts; injective over all 2^k inputs and the output
    composition is exact.
    """
    bits = np.asarray(bits).astype(np.uint8).ravel()
    k = ccdm_capacity_bits(comp)
    if bits.size != k:
        raise ParameterError(f"expected {k} bits for this composition, got {bits.size}")
    x = 0
    for b in bits:
        x = (x << 1) | int(b)

    counts = list(comp.counts)
    n_rem = comp.n
    m = multinomial_size(comp)
    out = np.empty(comp.n, dtype=np.int64)
    for pos in range(comp.n):
        acc = 0
        for a, c in enumerate(counts):
            if c == 0:
                continue
            # sequences starting with symbol a: exact integer division
            m_a = m * c // n_rem
            if x < acc + m_a:
                x -= acc
                m = m_a
                counts[a] -= 1
                n_rem -= 1
                out[pos] = a
                break
            acc += m_a
    return out


def ccdm_decode(indices, comp: Composition) -> np.ndarray:
    """Exact inverse of ccdm_encode; raises DecodeError on composition mismatch."""
    idx = np.asarray(indices, dtype=np.int64).ravel()
    if idx.size != comp.n:
        raise DecodeError(f"sequence length {idx.size} != block length {comp.n}")
    if idx.size and (idx.min() < 0 or idx.max() >= len(comp.counts)):
        raise DecodeError("symbol index outside the composition alphabet")
    observed = np.bincount(idx, minlength=len(comp.counts))
    if tuple(int(c) for c in observed) != tuple(comp.counts):
        raise DecodeError("sequence composition does not match the matcher composition")

    counts = list(comp.counts)
    n_rem = comp.n
    m = multinomial_size(comp)
    k = ccdm_capacity_bits(comp)
    x = 0
    for a in idx:
        acc = 0
        for b in range(a):
            if counts[b]:
                acc += m * counts[b] // n_rem
        x += acc
        m = m * counts[a] // n_rem
        counts[a] -= 1
        n_rem -= 1

    bits = np.empty(k, dtype=np.uint8)
    for j in range(k - 1, -1, -1):
        bits[j] = x & 1
        x >>= 1
    return bits


def pam_amplitude_priors(nu: float, bits_per_dim: int) -> np.ndarray:
    """Amplitude priors {1,3,5,...} induced by a joint MB fit (signs uniform)."""
    amps = pam_levels(bits_per_dim)
    amps = amps[amps > 0]
    w = np.exp(-nu * (amps**2 - amps.min() ** 2))
    return w / w.sum()


class QamShaper:
    """Invertible bit <-> shaped square-QAM mapping.

    Each quadrature's amplitude stream is CCDM-matched in blocks of
    ``block_amps`` (plus one remainder block); sign bits are uniform
    payload. Symbol indices follow the (I index, Q index) ordering of
    :func:`square_qam`.
    """

    def __init__(self, bits_per_symbol: int, entropy_bits: float, block_amps: int = 1000):
        if bits_per_symbol % 2 != 0:
            raise ParameterError("QamShaper needs square QAM")
        self.bits_per_symbol = bits_per_symbol
        self.block_amps = int(block_amps)
        lattice = square_qam_lattice(bits_per_symbol)
        fit = mb_fit_entropy(lattice, entropy_bits)
        self.shaping = fit
        self.entropy = fit.entropy
        priors = mb_distribution(lattice, fit.nu)
        self.constellation = square_qam(bits_per_symbol, priors)
        self.bits_per_dim = bits_per_symbol // 2
        self.n_amp = 1 << (self.bits_per_dim - 1)
        self.amp_priors = pam_amplitude_priors(fit.nu, self.bits_per_dim)
        self._comp_cache = {}
        self._composition(self.block_amps)

    def _composition(self, n):
        if n not in self._comp_cache:
            comp = composition_from_priors(self.amp_priors, n)
            self._comp_cache[n] = (comp, ccdm_capacity_bits(comp))
        return self._comp_cache[n]

    def _blocks(self, n_symbols):
        full, rem = divmod(n_symbols, self.block_amps)
        sizes = [self.block_amps] * full + ([rem] if rem else [])
        return sizes

    def bits_per_payload(self, n_symbols: int) -> int:
        k_dim = sum(self._composition(sz)[1] for sz in self._blocks(n_symbols))
        return 2 * k_dim + 2 * n_symbols

    def matched_rate(self, n_symbols: int) -> float:
        """Information bits per symbol actually carried (k/n bookkeeping)."""
        return self.bits_per_payload(n_symbols) / n_symbols

    def _amps_one_dim(self, bit_iter, n_symbols):
        out = np.empty(n_symbols, dtype=np.int64)
        pos = 0
        for sz in self._blocks(n_symbols):
            comp, k = self._composition(sz)
            out[pos : pos + sz] = ccdm_encode(next_bits(bit_iter, k), comp)
            pos += sz
        return out

    def encode(self, bits, n_symbols: int) -> np.ndarray:
        """Bits -> symbol indices; layout [I amps][Q amps][I signs][Q signs]."""
        bits = np.asarray(bits).astype(np.uint8).ravel()
        need = self.bits_per_payload(n_symbols)
        if bits.size != need:
            raise ParameterError(f"expected {need} payload bits, got {bits.size}")
        it = _BitCursor(bits)
        amp_i = self._amps_one_dim(it, n_symbols)
        amp_q = self._amps_one_dim(it, n_symbols)
        sign_i = next_bits(it, n_symbols)
        sign_q = next_bits(it, n_symbols)
        half = self.n_amp  # levels per side
        idx_i = np.where(sign_i == 0, half + amp_i, half - 1 - amp_i)
        idx_q = np.where(sign_q == 0, half + amp_q, half - 1 - amp_q)
        return idx_i * (2 * half) + idx_q

    def decode(self, indices) -> np.ndarray:
        """Symbol indices -> bits; raises DecodeError if any block's composition broke."""
        idx = np.asarray(indices, dtype=np.int64).ravel()
        half = self.n_amp
        idx_i, idx_q = divmod(idx, 2 * half)
        sign_i = (idx_i < half).astype(np.uint8)
        sign_q = (idx_q < half).astype(np.uint8)
        amp_i = np.where(sign_i == 0, idx_i - half, half - 1 - idx_i)
        amp_q = np.where(sign_q == 0, idx_q - half, half - 1 - idx_q)

        chunks = []
        for amps in (amp_i, amp_q):
            pos = 0
            for sz in self._blocks(idx.size):
                comp, _ = self._composition(sz)
                chunks.append(ccdm_decode(amps[pos : pos + sz], comp))
                pos += sz
        chunks.append(sign_i)
        chunks.append(sign_q)
        return np.concatenate(chunks)


class _BitCursor:
    def __init__(self, bits):
        self.bits = bits
        self.pos = 0


def next_bits(cursor: _BitCursor, k: int) -> np.ndarray:
    out = cursor.bits[cursor.pos : cursor.pos + k]
    if out.size != k:
        raise ParameterError("bit stream exhausted")
    cursor.pos += k
    return out


def sample_shaped_symbols(rng: np.random.Generator, constellation: Constellation, n: int):
    """Ideal-shaping mode: i.i.d. symbol indices drawn from the priors."""
    return rng.choice(constellation.points.size, size=n, p=constellation.priors)
