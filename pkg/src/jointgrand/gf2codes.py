"""Binary linear block codes used by the decoders: systematic CRC codes and
CRC-aided polar codes.

Bit vectors are 1-D ``uint8`` numpy arrays; index 0 is transmitted first and
carries the highest-degree polynomial coefficient.  Every code exposes

* ``encode(info)`` / ``is_member(word)`` -- the direct constructions,
* ``generator_matrix`` -- a ``(k, n)`` GF(2) matrix for batched encoding,
* ``syndrome_columns`` -- one integer per codeword position such that a word
  is a codeword iff the XOR of the columns at its set bits is zero.  ORBGRAND
  uses these to test membership with a handful of integer XORs.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

__all__ = [
    "CRC16_CCITT",
    "CRC11_NR",
    "NR_RELIABILITY_128",
    "CrcCode",
    "CaPolarCode",
    "as_bits",
    "crc_encode",
    "crc_is_member",
    "polar_transform",
    "capolar_encode",
    "capolar_is_member",
    "make_code",
    "parse_poly",
    "code_from_config",
]

#: x^16 + x^12 + x^5 + 1
CRC16_CCITT = 0x11021
#: 5G NR gCRC11: x^11 + x^10 + x^9 + x^5 + 1
CRC11_NR = 0xE21

#: 5G NR polar reliability sequence (TS 38.212 Table 5.3.1.2-1) restricted to
#: N = 128, least reliable first, 0-based positions.
NR_RELIABILITY_128 = (
    0, 1, 2, 4, 8, 16, 32, 3, 5, 64, 9, 6, 17, 10, 18, 12, 33, 65, 20, 34,
    24, 36, 7, 66, 11, 40, 68, 19, 13, 48, 14, 72, 21, 35, 26, 80, 37, 25,
    22, 38, 96, 67, 41, 28, 69, 42, 49, 74, 70, 44, 81, 50, 73, 15, 52, 23,
    76, 82, 56, 27, 97, 39, 84, 29, 43, 98, 88, 30, 71, 45, 100, 51, 46, 75,
    104, 53, 77, 54, 83, 57, 112, 78, 85, 58, 99, 86, 60, 89, 101, 31, 90,
    102, 105, 92, 47, 106, 55, 113, 79, 108, 59, 114, 87, 116, 61, 91, 120,
    62, 103, 93, 107, 94, 109, 115, 110, 117, 118, 121, 122, 63, 124, 95,
    111, 119, 123, 125, 126, 127,
)


def as_bits(bits, length: int | None = None, name: str = "bits") -> np.ndarray:
    """Validate and return ``bits`` as a uint8 array of 0/1 along the last axis."""
    arr = np.asarray(bits)
    if arr.ndim == 0:
        raise ValueError(f"{name} must be a sequence of bits")
    if arr.size and not np.isin(arr, (0, 1)).all():
        raise ValueError(f"{name} must contain only 0 and 1")
    if length is not None and arr.shape[-1] != length:
        raise ValueError(f"{name} has length {arr.shape[-1]}, expected {length}")
    return arr.astype(np.uint8, copy=False)


def _bits_to_int(bits: np.ndarray) -> int:
    return int("".join("1" if b else "0" for b in bits) or "0", 2)


def _int_to_bits(value: int, length: int) -> np.ndarray:
    return np.array([(value >> (length - 1 - i)) & 1 for i in range(length)], dtype=np.uint8)


def _poly_mod(value: int, poly: int) -> int:
    deg = poly.bit_length() - 1
    while value.bit_length() - 1 >= deg:
        value ^= poly << (value.bit_length() - 1 - deg)
    return value


def parse_poly(poly) -> int:
    """Accept an int, a hex string (MSB first, leading term included) or a bit sequence."""
    if isinstance(poly, (int, np.integer)):
        value = int(poly)
    elif isinstance(poly, str):
        value = int(poly, 16)
    else:
        value = _bits_to_int(as_bits(poly, name="poly"))
    if value <= 0:
        raise ValueError("polynomial must be non-zero")
    return value


# --------------------------------------------------------------------------
# CRC codes


@dataclass(frozen=True)
class CrcCode:
    """Systematic ``[n, k]`` CRC code: info bits followed by the remainder."""

    n: int
    k: int
    poly: int = CRC16_CCITT

    def __post_init__(self):
        object.__setattr__(self, "poly", parse_poly(self.poly))
        if not 0 < self.k < self.n:
            raise ValueError(f"need 0 < k < n, got n={self.n}, k={self.k}")
        if self.poly.bit_length() - 1 != self.n - self.k:
            raise ValueError(
                f"polynomial degree {self.poly.bit_length() - 1} != n - k = {self.n - self.k}"
            )
        if not self.poly & 1:
            raise ValueError("polynomial must have a non-zero constant term")

    @property
    def redundancy(self) -> int:
        return self.n - self.k

    def encode(self, info) -> np.ndarray:
        return crc_encode(info, self)

    def is_member(self, word) -> bool:
        return crc_is_member(word, self)

    def syndrome(self, word) -> int:
        word = as_bits(word, self.n, "word")
        return _poly_mod(_bits_to_int(word), self.poly)

    @cached_property
    def syndrome_columns(self) -> np.ndarray:
        # column i is x^(n-1-i) mod poly
        return np.array(
            [_poly_mod(1 << (self.n - 1 - i), self.poly) for i in range(self.n)], dtype=np.uint64
        )

    @cached_property
    def generator_matrix(self) -> np.ndarray:
        return _generator_from_encoder(self.encode, self.k)


def crc_encode(info, code: CrcCode) -> np.ndarray:
    info = as_bits(info, code.k, "info")
    r = code.n - code.k
    rem = _poly_mod(_bits_to_int(info) << r, code.poly)
    return np.concatenate([info, _int_to_bits(rem, r)])


def crc_is_member(word, code: CrcCode) -> bool:
    return code.syndrome(word) == 0


# --------------------------------------------------------------------------
# Polar / CA-polar


def polar_transform(u) -> np.ndarray:
    """Return ``u F^{(x)log2 n}`` over GF(2) with kernel ``[[1, 0], [1, 1]]``.

    Works on the last axis, so a batch of words can be transformed at once.
    The transform is its own inverse.
    """
    x = as_bits(u, name="u").copy()
    n = x.shape[-1]
    if n < 1 or n & (n - 1):
        raise ValueError(f"polar transform length must be a power of two, got {n}")
    lead = x.shape[:-1]
    s = 1
    while s < n:
        v = x.reshape(*lead, n // (2 * s), 2, s)
        v[..., 0, :] ^= v[..., 1, :]
        s *= 2
    return x


@dataclass(frozen=True)
class CaPolarCode:
    """CRC-aided polar code.

    ``reliability_order`` lists all ``n`` positions from least to most reliable
    (0-based).  The ``n - k_info - crc_len`` least reliable positions are
    frozen to zero; the payload (info followed by CRC) fills the remaining
    positions most-reliable-first.
    """

    n: int
    k_info: int
    crc_len: int
    crc_poly: int = CRC11_NR
    reliability_order: tuple = field(default=NR_RELIABILITY_128)

    def __post_init__(self):
        object.__setattr__(self, "crc_poly", parse_poly(self.crc_poly))
        object.__setattr__(self, "reliability_order", tuple(int(i) for i in self.reliability_order))
        n = self.n
        if n < 2 or n & (n - 1):
            raise ValueError(f"n must be a power of two, got {n}")
        if sorted(self.reliability_order) != list(range(n)):
            raise ValueError("reliability_order must be a permutation of range(n)")
        if self.crc_poly.bit_length() - 1 != self.crc_len:
            raise ValueError("CRC polynomial degree must equal crc_len")
        if not (0 < self.k_info and self.k_info + self.crc_len <= n):
            raise ValueError("need k_info > 0 and k_info + crc_len <= n")

    @property
    def k(self) -> int:
        return self.k_info

    @property
    def redundancy(self) -> int:
        return self.n - self.k_info

    @cached_property
    def frozen_set(self) -> tuple:
        n_frozen = self.n - self.k_info - self.crc_len
        return tuple(sorted(self.reliability_order[:n_frozen]))

    @cached_property
    def payload_positions(self) -> np.ndarray:
        """Non-frozen positions, most reliable first."""
        n_frozen = self.n - self.k_info - self.crc_len
        return np.array(self.reliability_order[n_frozen:][::-1], dtype=np.intp)

    @cached_property
    def _payload_crc(self) -> CrcCode:
        return CrcCode(self.k_info + self.crc_len, self.k_info, self.crc_poly)

    def encode(self, info) -> np.ndarray:
        return capolar_encode(info, self)

    def is_member(self, word) -> bool:
        return capolar_is_member(word, self)

    def syndrome(self, word) -> int:
        """Frozen-bit values (high bits) concatenated with the payload CRC remainder."""
        word = as_bits(word, self.n, "word")
        u = polar_transform(word)
        s = 0
        for pos in self.frozen_set:
            s = (s << 1) | int(u[pos])
        return (s << self.crc_len) | self._payload_crc.syndrome(u[self.payload_positions])

    @cached_property
    def syndrome_columns(self) -> np.ndarray:
        eye = np.eye(self.n, dtype=np.uint8)
        return np.array([self.syndrome(e) for e in eye], dtype=np.uint64)

    @cached_property
    def generator_matrix(self) -> np.ndarray:
        return _generator_from_encoder(self.encode, self.k_info)


def capolar_encode(info, code: CaPolarCode) -> np.ndarray:
    info = as_bits(info, code.k_info, "info")
    payload = crc_encode(info, code._payload_crc)
    u = np.zeros(code.n, dtype=np.uint8)
    u[code.payload_positions] = payload
    return polar_transform(u)


def capolar_is_member(word, code: CaPolarCode) -> bool:
    word = as_bits(word, code.n, "word")
    u = polar_transform(word)
    if u[list(code.frozen_set)].any():
        return False
    return crc_is_member(u[code.payload_positions], code._payload_crc)


def _generator_from_encoder(encode, k: int) -> np.ndarray:
    return np.stack([encode(row) for row in np.eye(k, dtype=np.uint8)])


# --------------------------------------------------------------------------
# named codes / config


def make_code(name: str):
    """Build one of the named codes used by the CLI."""
    if name == "crc128-112":
        return CrcCode(128, 112, CRC16_CCITT)
    if name == "capolar128-112":
        return CaPolarCode(128, 112, 11, CRC11_NR, NR_RELIABILITY_128)
    if name == "crc16-8":
        # x^8 + x^2 + x + 1 (CRC-8/ATM)
        return CrcCode(16, 8, 0x107)
    raise ValueError(f"unknown code {name!r}")


def code_from_config(cfg: dict):
    """Build a code from a flat mapping.

    Keys: ``kind`` (crc | capolar), ``n``, ``k``, ``polynomial`` (hex, MSB
    first, leading term included), and for capolar ``crc_len`` (defaults to
    the polynomial degree) and an optional ``reliability`` sequence given as
    comma-separated 0-based positions, least reliable first.
    """
    kind = str(cfg["kind"]).lower()
    n, k = int(cfg["n"]), int(cfg["k"])
    if kind == "crc":
        return CrcCode(n, k, parse_poly(str(cfg.get("polynomial", hex(CRC16_CCITT)))))
    if kind == "capolar":
        poly = parse_poly(str(cfg.get("polynomial", hex(CRC11_NR))))
        crc_len = int(cfg.get("crc_len", poly.bit_length() - 1))
        rel = cfg.get("reliability")
        if rel is None:
            if n != 128:
                raise ValueError("an explicit reliability sequence is required for n != 128")
            rel = NR_RELIABILITY_128
        elif isinstance(rel, str):
            rel = [int(tok) for tok in rel.split(",") if tok.strip()]
        return CaPolarCode(n, k, crc_len, poly, tuple(rel))
    raise ValueError(f"unknown code kind {kind!r}")
