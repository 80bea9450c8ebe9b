"""Gray-labelled constellations and bit-to-symbol mapping."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .gf2codes import as_bits

__all__ = ["Constellation", "qpsk", "qam16", "get_constellation", "map_bits", "bit_subset"]


@dataclass(frozen=True, eq=False)
class Constellation:
    """``2**m`` complex points; ``points[i]`` carries the m-bit label of ``i``
    written MSB first (label bit 0 is the first bit of the symbol group)."""

    name: str
    bits_per_symbol: int
    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=complex)
        if pts.shape != (2**self.bits_per_symbol,):
            raise ValueError("need exactly 2**bits_per_symbol points")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def size(self) -> int:
        return self.points.size

    @cached_property
    def labels(self) -> np.ndarray:
        """``(2**m, m)`` array, row i = bits of label i."""
        m = self.bits_per_symbol
        idx = np.arange(self.size)
        lab = (idx[:, None] >> np.arange(m - 1, -1, -1)) & 1
        return lab.astype(np.uint8)

    @cached_property
    def bit_masks(self) -> np.ndarray:
        """``(m, 2**m)`` boolean array; ``[j, p]`` is True iff bit j of point p is 1."""
        return self.labels.T.astype(bool)

    def map_bits(self, bits) -> np.ndarray:
        return map_bits(bits, self)

    def bit_subset(self, j: int, b: int) -> np.ndarray:
        return bit_subset(self, j, b)

    def __repr__(self):
        return f"Constellation({self.name!r}, m={self.bits_per_symbol})"


def qpsk() -> Constellation:
    # bit 0 -> sign of real part, bit 1 -> sign of imag part, 0 -> +
    lv = np.array([1.0, -1.0])
    pts = [complex(lv[b0], lv[b1]) / np.sqrt(2) for b0 in (0, 1) for b1 in (0, 1)]
    return Constellation("qpsk", 2, np.array(pts))


def qam16() -> Constellation:
    # per-axis Gray code 00, 01, 11, 10 -> -3, -1, +1, +3; bits 0-1 real, 2-3 imag
    gray_level = {0b00: -3.0, 0b01: -1.0, 0b11: 1.0, 0b10: 3.0}
    pts = [
        complex(gray_level[i >> 2], gray_level[i & 3]) / np.sqrt(10) for i in range(16)
    ]
    return Constellation("qam16", 4, np.array(pts))


_FACTORIES = {"qpsk": qpsk, "qam16": qam16}


def get_constellation(name: str) -> Constellation:
    try:
        return _FACTORIES[name.lower()]()
    except KeyError:
        raise ValueError(f"unknown modulation {name!r}; choose from {sorted(_FACTORIES)}") from None


def map_bits(bits, c: Constellation) -> np.ndarray:
    """Map consecutive groups of m bits (last axis) onto constellation points."""
    bits = as_bits(bits)
    m = c.bits_per_symbol
    n = bits.shape[-1]
    if n % m:
        raise ValueError(f"bit length {n} is not a multiple of {m}")
    groups = bits.reshape(*bits.shape[:-1], n // m, m).astype(np.intp)
    idx = groups @ (1 << np.arange(m - 1, -1, -1))
    return c.points[idx]


def bit_subset(c: Constellation, j: int, b: int) -> np.ndarray:
    """Points whose label has bit ``j`` (0-based) equal to ``b``."""
    if not 0 <= j < c.bits_per_symbol:
        raise ValueError(f"bit index {j} out of range for m={c.bits_per_symbol}")
    if b not in (0, 1):
        raise ValueError("b must be 0 or 1")
    return c.points[c.bit_masks[j] == bool(b)]
