"""
Behavioral model of the hybrid analog-digital slicer.

A bank of ``W-1`` strict greater-than comparators turns the input voltage
into a thermometer word ``p``. In the directly-select structure ``p``
drives the select lines of a ``2**(W-1)``-channel multiplexer as is. In
the indirectly-select structure a combinational block compresses ``p``
into ``log2(W)`` bits ``q`` that address a ``W``-channel multiplexer. The
multiplexer inputs carry the level voltages and a voltage follower (ideal
here) buffers the selected one.

All functions accept scalars or arrays; bit vectors live on the last axis
with bit 1 first (``p[..., 0]`` is ``p_1``).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import List

import numpy as np

from .errors import ConfigurationError, InvalidSelectError

__all__ = [
    "Structure",
    "SlicerConfig",
    "make_thresholds",
    "comparator_bank",
    "direct_select_index",
    "logic_compress",
    "indirect_select_index",
    "mux_channels",
    "slicer_eval",
    "slicer_level_index",
    "truth_table",
    "TruthRow",
]


class Structure(enum.Enum):
    DIRECT = "direct"
    INDIRECT = "indirect"

    @classmethod
    def parse(cls, value) -> "Structure":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ConfigurationError(
                f"unknown slicer structure {value!r}, expected 'direct' or 'indirect'"
            ) from None


def make_thresholds(s_value) -> np.ndarray:
    """Midpoints between consecutive levels."""
    x = np.asarray(s_value, dtype=float)
    if x.ndim != 1 or x.size < 2 or np.any(np.diff(x) <= 0):
        raise ConfigurationError("levels must be a strictly increasing list of >= 2 values")
    return (x[:-1] + x[1:]) / 2.0


@dataclass(frozen=True, eq=False)
class SlicerConfig:
    s_value: np.ndarray
    structure: Structure = Structure.DIRECT
    v0: float = 0.1

    def __post_init__(self):
        x = np.array(self.s_value, dtype=float)
        W = x.size
        if W < 2 or W & (W - 1):
            raise ConfigurationError(f"number of levels must be a power of 2, got {W}")
        thresholds = make_thresholds(x)
        x.setflags(write=False)
        thresholds.setflags(write=False)
        object.__setattr__(self, "s_value", x)
        object.__setattr__(self, "structure", Structure.parse(self.structure))
        object.__setattr__(self, "_thresholds", thresholds)
        channels = _load_channels(x, self.structure)
        channels.setflags(write=False)
        object.__setattr__(self, "_channels", channels)

    @classmethod
    def from_constellation(cls, constellation, structure=Structure.DIRECT) -> "SlicerConfig":
        return cls(constellation.s_value, structure, constellation.reference_voltage)

    @property
    def W(self) -> int:
        return self.s_value.size

    @property
    def s_threshold(self) -> np.ndarray:
        return self._thresholds

    @property
    def n_select_bits(self) -> int:
        if self.structure is Structure.DIRECT:
            return self.W - 1
        return self.W.bit_length() - 1

    @property
    def mux_channel_count(self) -> int:
        return 2 ** self.n_select_bits


def comparator_bank(v_sin, s_threshold) -> np.ndarray:
    """``p_w = 1`` iff ``v_sin > z_w``; equality gives 0."""
    v = np.asarray(v_sin, dtype=float)
    z = np.asarray(s_threshold, dtype=float)
    return (v[..., None] > z).astype(np.uint8)


def _check_thermometer(p):
    p = np.asarray(p, dtype=np.uint8)
    if np.any(np.diff(p.astype(np.int8), axis=-1) > 0):
        raise InvalidSelectError("comparator word is not a thermometer code")
    return p


def _bits_to_index(bits):
    weights = 1 << np.arange(bits.shape[-1])
    return bits.astype(np.int64) @ weights


def direct_select_index(p) -> np.ndarray:
    """Multiplexer channel (0-based) addressed by ``p`` with ``p_1`` as LSB."""
    return _bits_to_index(_check_thermometer(p))


def logic_compress(p) -> np.ndarray:
    """Compress a thermometer word into ``log2(W)`` select bits.

    For ``W = 4`` this is ``q_1 = p_2``, ``q_2 = p_1 AND NOT p_3``. Other
    sizes use the binary encoding of the number of set comparator bits,
    ``q_1`` least significant.
    """
    p = _check_thermometer(p)
    n = p.shape[-1]
    W = n + 1
    if W & (W - 1):
        raise ConfigurationError(f"comparator word of length {n} does not match a power-of-2 level count")
    if W == 4:
        q1 = p[..., 1]
        q2 = p[..., 0] & (1 - p[..., 2])
        return np.stack([q1, q2], axis=-1).astype(np.uint8)
    nbits = W.bit_length() - 1
    count = p.sum(axis=-1, dtype=np.int64)
    return ((count[..., None] >> np.arange(nbits)) & 1).astype(np.uint8)


def indirect_select_index(q) -> np.ndarray:
    """Channel addressed by ``q`` (``q_1`` least significant)."""
    return _bits_to_index(np.asarray(q, dtype=np.uint8))


def _thermometer(count, n):
    return (np.arange(n) < count).astype(np.uint8)


def _select_index(p, structure):
    if structure is Structure.DIRECT:
        return direct_select_index(p)
    return indirect_select_index(logic_compress(p))


def _load_channels(s_value, structure):
    W = len(s_value)
    nsel = W - 1 if structure is Structure.DIRECT else W.bit_length() - 1
    channels = np.full(2 ** nsel, np.nan)
    for w in range(W):
        channels[int(_select_index(_thermometer(w, W - 1), structure))] = s_value[w]
    return channels


def mux_channels(cfg: SlicerConfig) -> np.ndarray:
    """Voltage wired to every multiplexer channel; unused channels are NaN."""
    return cfg._channels


def slicer_level_index(v_sin, cfg: SlicerConfig) -> np.ndarray:
    """Index into ``s_value`` of the level the slicer outputs."""
    p = comparator_bank(v_sin, cfg.s_threshold)
    return p.sum(axis=-1)


def slicer_eval(v_sin, cfg: SlicerConfig):
    """Output voltage of the slicer for input voltage(s) ``v_sin``."""
    p = comparator_bank(v_sin, cfg.s_threshold)
    channel = _select_index(p, cfg.structure)
    out = cfg._channels[channel]
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class TruthRow:
    interval: str
    p: tuple
    q: tuple  # empty for the directly-select structure
    channel: int
    level: str
    v_sout: float


def _interval_label(w, W):
    if w == 0:
        return "< z1"
    if w == W - 1:
        return f"> z{W - 1}"
    return f"z{w} ~ z{w + 1}"


def truth_table(cfg: SlicerConfig) -> List[TruthRow]:
    """One row per cell of the threshold partition, lowest cell first."""
    rows = []
    n = cfg.W - 1
    for w in range(cfg.W):
        p = _thermometer(w, n)
        if cfg.structure is Structure.INDIRECT:
            q = logic_compress(p)
            channel = int(indirect_select_index(q))
            q = tuple(int(b) for b in q)
        else:
            q = ()
            channel = int(direct_select_index(p))
        rows.append(TruthRow(
            interval=_interval_label(w, cfg.W),
            p=tuple(int(b) for b in p),
            q=q,
            channel=channel,
            level=f"x{w + 1}",
            v_sout=float(mux_channels(cfg)[channel]),
        ))
    return rows
