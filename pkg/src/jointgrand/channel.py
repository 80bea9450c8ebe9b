"""Flat Rician fading, AWGN and channel-estimation-error sampling.

All complex Gaussians here are circularly symmetric: a variance ``v`` means
real and imaginary parts each have variance ``v / 2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "ChannelDraw",
    "complex_normal",
    "sample_rician",
    "sample_cee",
    "transmit",
    "make_draw",
    "snr_db_to_noise_var",
]


@dataclass(frozen=True)
class ChannelDraw:
    """One fading realization; ``h == h_hat + h_e`` holds exactly."""

    h: complex
    h_hat: complex
    h_e: complex
    sigma_w2: float
    sigma_e2: float
    k_factor: float


def complex_normal(rng: np.random.Generator, var: float, size=None):
    re, im = rng.standard_normal((2,) if size is None else (2, *np.atleast_1d(size)))
    out = math.sqrt(var / 2.0) * (re + 1j * im)
    return complex(out) if size is None else out


def sample_rician(k_factor: float, rng: np.random.Generator, size=None):
    """Unit-power Rician fading with a zero-phase line-of-sight component.

    ``k_factor`` is the linear LOS-to-diffuse power ratio; 0 gives Rayleigh and
    ``inf`` gives the constant channel ``h = 1``.
    """
    if k_factor < 0:
        raise ValueError("K-factor must be non-negative")
    if math.isinf(k_factor):
        return 1.0 + 0j if size is None else np.ones(size, dtype=complex)
    los = math.sqrt(k_factor / (k_factor + 1.0))
    return los + complex_normal(rng, 1.0 / (k_factor + 1.0), size)


def sample_cee(sigma_e2: float, rng: np.random.Generator, size=None):
    if sigma_e2 < 0:
        raise ValueError("CEE variance must be non-negative")
    if sigma_e2 == 0:
        return 0j if size is None else np.zeros(size, dtype=complex)
    return complex_normal(rng, sigma_e2, size)


def transmit(x, draw: ChannelDraw, rng: np.random.Generator) -> np.ndarray:
    """``y = h x + w`` with one fading coefficient for the whole block."""
    if not draw.sigma_w2 > 0:
        raise ValueError("noise variance must be positive")
    x = np.asarray(x, dtype=complex)
    return draw.h * x + complex_normal(rng, draw.sigma_w2, x.shape)


def make_draw(k_factor: float, sigma_e2: float, sigma_w2: float, rng: np.random.Generator) -> ChannelDraw:
    """Sample ``h`` and the estimation error independently, then set ``h_hat = h - h_e``."""
    if not sigma_w2 > 0:
        raise ValueError("noise variance must be positive")
    h = sample_rician(k_factor, rng)
    h_e = sample_cee(sigma_e2, rng)
    h_hat = h - h_e
    # recompute h so the identity is exact in floating point
    h = h_hat + h_e
    return ChannelDraw(h=h, h_hat=h_hat, h_e=h_e, sigma_w2=sigma_w2, sigma_e2=sigma_e2, k_factor=k_factor)


def snr_db_to_noise_var(snr_db: float) -> float:
    """Unit-energy symbols over unit-power fading: SNR = 1 / sigma_w^2."""
    return 10.0 ** (-snr_db / 10.0)
