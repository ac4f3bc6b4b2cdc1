"""
Uplink massive MIMO system model.

Channel generation, Gray-mapped square QAM and the noisy received vector
``y = F s + n`` with ``F = H diag(sqrt(lambda_k))``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import ConfigurationError, ContractViolation

__all__ = [
    "MimoConfig",
    "ChannelRealization",
    "Constellation",
    "ReceivedSignal",
    "SUPPORTED_ORDERS",
    "build_constellation",
    "generate_channel",
    "transmit",
    "modulate_bits",
    "demap_bits",
    "random_bits",
    "noise_var_from_snr_db",
]

SUPPORTED_ORDERS = (4, 16, 64)


@dataclass(frozen=True)
class MimoConfig:
    """System dimensions and powers.

    Parameters
    ----------
    num_users : int
        Number of single-antenna users ``K``.
    num_bs_antennas : int
        Number of base-station antennas ``R`` (must exceed ``K``).
    tx_powers : sequence of float, optional
        Linear transmit power of every user. Defaults to 1 for all users.
    noise_variance : float
        Complex noise variance per receive antenna.
    modulation_order : int
        Square QAM order, one of 4, 16, 64.
    """

    num_users: int
    num_bs_antennas: int
    tx_powers: Optional[Sequence[float]] = None
    noise_variance: float = 0.0
    modulation_order: int = 16

    def __post_init__(self):
        K, R = self.num_users, self.num_bs_antennas
        if K < 1 or R < 1:
            raise ConfigurationError("K and R must be positive integers")
        if R <= K:
            raise ConfigurationError(f"need R > K, got K={K}, R={R}")
        if self.modulation_order not in SUPPORTED_ORDERS:
            raise ConfigurationError(
                f"unsupported modulation order {self.modulation_order}")
        if self.noise_variance < 0:
            raise ConfigurationError("noise_variance must be nonnegative")
        powers = (np.ones(K) if self.tx_powers is None
                  else np.asarray(self.tx_powers, dtype=float))
        if powers.shape != (K,):
            raise ConfigurationError(f"expected {K} transmit powers")
        if np.any(powers <= 0):
            raise ConfigurationError("transmit powers must be positive")
        object.__setattr__(self, "tx_powers", tuple(float(p) for p in powers))

    @property
    def K(self) -> int:
        return self.num_users

    @property
    def R(self) -> int:
        return self.num_bs_antennas

    @property
    def bits_per_symbol(self) -> int:
        return int(np.log2(self.modulation_order))


@dataclass(frozen=True)
class ChannelRealization:
    """Channel ``H`` and effective channel ``F = H diag(sqrt(lambda))``."""

    H: np.ndarray
    F: np.ndarray

    def __post_init__(self):
        for a in (self.H, self.F):
            a.setflags(write=False)

    @classmethod
    def from_effective(cls, F) -> "ChannelRealization":
        """Wrap a known effective channel (unit powers, ``H = F``)."""
        F = np.array(F, dtype=complex)
        return cls(H=F.copy(), F=F)


@dataclass(frozen=True)
class Constellation:
    """Gray-mapped square QAM with unit average energy.

    ``levels`` holds the ``W`` per-axis amplitudes in symbol units and
    ``s_value`` the same levels in volts (``levels * v0``).
    """

    order: int
    points: np.ndarray
    levels: np.ndarray
    reference_voltage: float
    labels: np.ndarray = field(repr=False)

    @property
    def W(self) -> int:
        return len(self.levels)

    @property
    def bits_per_symbol(self) -> int:
        return int(np.log2(self.order))

    @property
    def s_value(self) -> np.ndarray:
        return self.levels * self.reference_voltage


def _gray(i):
    return i ^ (i >> 1)


def build_constellation(order: int, v0: float = 0.1) -> Constellation:
    """Build a Gray-mapped square QAM constellation.

    Point ``i`` of ``points`` carries the bit label ``labels[i]`` (an int,
    MSB first). The first half of the label bits select the in-phase
    level, the second half the quadrature level, each Gray coded along its
    axis.

    Examples
    --------
    >>> c = build_constellation(16, 0.1)
    >>> np.round(c.s_value * np.sqrt(10) / 0.1, 12)
    array([-3., -1.,  1.,  3.])
    """
    if order not in SUPPORTED_ORDERS:
        raise ConfigurationError(f"unsupported QAM order {order}")
    if not v0 > 0:
        raise ConfigurationError("reference voltage must be positive")
    W = int(round(np.sqrt(order)))
    half = W.bit_length() - 1
    scale = np.sqrt(2.0 * (order - 1) / 3.0)
    levels = (2.0 * np.arange(W) - (W - 1)) / scale

    points = np.empty(order, dtype=complex)
    labels = np.empty(order, dtype=np.int64)
    for i in range(W):
        for q in range(W):
            idx = i * W + q
            points[idx] = levels[i] + 1j * levels[q]
            labels[idx] = (_gray(i) << half) | _gray(q)
    for a in (points, levels, labels):
        a.setflags(write=False)
    return Constellation(order, points, levels, float(v0), labels)


def _bits_to_ints(bits, nbits):
    weights = 1 << np.arange(nbits - 1, -1, -1)
    return bits.reshape(-1, nbits) @ weights


def _ints_to_bits(values, nbits):
    shifts = np.arange(nbits - 1, -1, -1)
    return ((np.asarray(values)[:, None] >> shifts) & 1).astype(np.uint8).ravel()


def modulate_bits(bits, constellation: Constellation) -> np.ndarray:
    """Map a flat bit vector onto constellation points."""
    bits = np.asarray(bits, dtype=np.int64).ravel()
    nb = constellation.bits_per_symbol
    if bits.size % nb:
        raise ContractViolation(f"bit count {bits.size} not a multiple of {nb}")
    if np.any((bits != 0) & (bits != 1)):
        raise ContractViolation("bits must be 0 or 1")
    inverse = np.empty(constellation.order, dtype=np.int64)
    inverse[constellation.labels] = np.arange(constellation.order)
    return constellation.points[inverse[_bits_to_ints(bits, nb)]]


def demap_bits(symbols, constellation: Constellation, atol: float = 1e-9) -> np.ndarray:
    """Inverse of :func:`modulate_bits` for exact constellation points.

    Raises
    ------
    ContractViolation
        If any symbol is farther than ``atol`` from every point.
    """
    symbols = np.atleast_1d(np.asarray(symbols, dtype=complex))
    dist = np.abs(symbols[:, None] - constellation.points[None, :])
    idx = np.argmin(dist, axis=1)
    if np.any(dist[np.arange(len(idx)), idx] > atol):
        raise ContractViolation("input contains non-constellation symbols")
    return _ints_to_bits(constellation.labels[idx], constellation.bits_per_symbol)


def random_bits(n: int, rng) -> np.ndarray:
    return np.random.default_rng(rng).integers(0, 2, size=n, dtype=np.uint8)


def generate_channel(cfg: MimoConfig, seed) -> ChannelRealization:
    """Draw an i.i.d. Rayleigh channel, entries CN(0, 1).

    ``seed`` is anything accepted by :func:`numpy.random.default_rng`.
    """
    rng = np.random.default_rng(seed)
    shape = (cfg.R, cfg.K)
    H = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)
    F = H * np.sqrt(np.asarray(cfg.tx_powers))[None, :]
    return ChannelRealization(H=H, F=F)


@dataclass(frozen=True)
class ReceivedSignal:
    y: np.ndarray
    s: np.ndarray
    n: np.ndarray


def transmit(chan: ChannelRealization, s, noise_var: float, seed) -> ReceivedSignal:
    """Return ``y = F s + n`` with ``n ~ CN(0, noise_var I)``."""
    s = np.asarray(s, dtype=complex)
    R, K = chan.F.shape
    if s.shape != (K,):
        raise ContractViolation(f"expected {K} symbols, got shape {s.shape}")
    if noise_var < 0:
        raise ContractViolation("noise variance must be nonnegative")
    rng = np.random.default_rng(seed)
    n = np.sqrt(noise_var / 2.0) * (rng.standard_normal(R) + 1j * rng.standard_normal(R))
    return ReceivedSignal(y=chan.F @ s + n, s=s, n=n)


def noise_var_from_snr_db(snr_db: float, num_users: int) -> float:
    # SNR = K / sigma_n^2: total received signal power per antenna over noise
    return num_users / 10.0 ** (snr_db / 10.0)
