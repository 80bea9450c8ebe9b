"""Soft demapping.

Every detector returns per-bit LLRs ``log P(bit=1) / P(bit=0)`` flattened
symbol-major, so bit ``j`` of symbol ``i`` lands at ``i * m + j``.  ``y`` may
carry leading batch axes; ``h_hat`` is then either a scalar or an array with
one estimate per block (shape ``y.shape[:-1]``).

``llr_ml_cee`` marginalizes the exact ML likelihood over a residual
channel-estimation error that is Gaussian truncated to an axis-aligned
rectangle; ``llr_ml_cee_quadrature`` evaluates the same integrals numerically
and serves as the reference for the closed form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.special import log_ndtr, logsumexp

from .modem import Constellation

__all__ = [
    "LLR_CLIP",
    "DetectorKind",
    "VoronoiRect",
    "llr_ml_exact",
    "llr_ml",
    "llr_zf",
    "llr_mmse",
    "llr_ml_cee",
    "llr_ml_cee_quadrature",
    "cee_log_terms",
    "cee_log_terms_quadrature",
    "compute_llrs",
]

LLR_CLIP = 300.0


class DetectorKind(str, Enum):
    ML_EXACT = "ml-exact"
    ML_APPROX = "ml"
    ZF = "zf"
    MMSE = "mmse"
    ML_CEE = "ml-cee"


@dataclass(frozen=True)
class VoronoiRect:
    """Rectangle ``[re_lo, re_hi] x [im_lo, im_hi]`` in the residual-error plane
    (offset from the candidate estimate); edges may be infinite."""

    re_lo: float
    re_hi: float
    im_lo: float
    im_hi: float

    def __post_init__(self):
        if not (self.re_lo < self.re_hi and self.im_lo < self.im_hi):
            raise ValueError(f"degenerate cell {self}")

    def contains(self, u) -> np.ndarray:
        u = np.asarray(u)
        return (
            (u.real >= self.re_lo) & (u.real < self.re_hi)
            & (u.imag >= self.im_lo) & (u.imag < self.im_hi)
        )

    def shifted(self, offset: complex) -> "VoronoiRect":
        return VoronoiRect(
            self.re_lo + offset.real, self.re_hi + offset.real,
            self.im_lo + offset.imag, self.im_hi + offset.imag,
        )


def _prep(y, h_hat, sigma_w2):
    if not sigma_w2 > 0:
        raise ValueError("noise variance must be positive")
    y = np.asarray(y, dtype=complex)
    h = np.asarray(h_hat, dtype=complex)
    if h.ndim:
        h = h[..., np.newaxis]
    # full-size copy: keeps per-element arithmetic independent of batch shape
    h = np.array(np.broadcast_to(h, y.shape))
    return y, h


def _flatten(llr_sym: np.ndarray) -> np.ndarray:
    """(..., S, m) -> (..., S*m), clipped."""
    out = llr_sym.reshape(*llr_sym.shape[:-2], -1)
    return np.clip(out, -LLR_CLIP, LLR_CLIP)


def _maxlog(dist: np.ndarray, c: Constellation, scale) -> np.ndarray:
    """``scale * (min_{X^{j,0}} d - min_{X^{j,1}} d)`` for each bit j; ``dist`` is (..., S, P)."""
    masks = c.bit_masks
    d1 = np.where(masks, dist[..., None, :], np.inf).min(axis=-1)
    d0 = np.where(~masks, dist[..., None, :], np.inf).min(axis=-1)
    scale = np.asarray(scale)
    if scale.ndim:
        scale = scale[..., None]
    return _flatten(scale * (d0 - d1))


def _logratio(logterms: np.ndarray, c: Constellation) -> np.ndarray:
    """``log sum_{X^{j,1}} e^t - log sum_{X^{j,0}} e^t``; ``logterms`` is (..., S, P)."""
    masks = c.bit_masks
    t = logterms[..., None, :]
    num = logsumexp(np.where(masks, t, -np.inf), axis=-1)
    den = logsumexp(np.where(~masks, t, -np.inf), axis=-1)
    with np.errstate(invalid="ignore"):
        llr = num - den
    return llr


def llr_ml_exact(y, h_hat, sigma_w2: float, c: Constellation) -> np.ndarray:
    y, h = _prep(y, h_hat, sigma_w2)
    dist = np.abs(y[..., None] - h[..., None] * c.points) ** 2
    return _flatten(_logratio(-dist / sigma_w2, c))


def llr_ml(y, h_hat, sigma_w2: float, c: Constellation) -> np.ndarray:
    """Max-log ML LLRs."""
    y, h = _prep(y, h_hat, sigma_w2)
    dist = np.abs(y[..., None] - h[..., None] * c.points) ** 2
    return _maxlog(dist, c, 1.0 / sigma_w2)


def llr_zf(y, h_hat, sigma_w2: float, c: Constellation) -> np.ndarray:
    y, h = _prep(y, h_hat, sigma_w2)
    if np.any(h == 0):
        raise ZeroDivisionError("zero-forcing needs a non-zero channel estimate")
    y_zf = y / h
    dist = np.abs(y_zf[..., None] - c.points) ** 2
    return _maxlog(dist, c, np.abs(h) ** 2 / sigma_w2)


def llr_mmse(y, h_hat, sigma_w2: float, c: Constellation) -> np.ndarray:
    y, h = _prep(y, h_hat, sigma_w2)
    g = np.abs(h) ** 2 + sigma_w2
    y_mmse = np.conj(h) * y / g
    dist = np.abs(y_mmse[..., None] - c.points) ** 2
    return _maxlog(dist, c, g / sigma_w2)


# --------------------------------------------------------------------------
# residual-CEE-aware ML


def _log_diff_ndtr(a, b):
    """``log(Phi(b) - Phi(a))`` for ``a <= b``, stable in both tails."""
    a, b = np.broadcast_arrays(np.asarray(a, float), np.asarray(b, float))
    right = a > 0
    hi = np.where(right, log_ndtr(-a), log_ndtr(b))
    lo = np.where(right, log_ndtr(-b), log_ndtr(a))
    with np.errstate(divide="ignore", invalid="ignore"):
        x = lo - hi  # <= 0
        out = hi + np.where(x > -math.log(2), np.log(-np.expm1(x)), np.log1p(-np.exp(x)))
    return np.where(a >= b, -np.inf, out)


def _check_cee_args(sigma_w2, sigma_e2, cell):
    if not sigma_w2 > 0 or not sigma_e2 > 0:
        raise ValueError("llr_ml_cee needs positive noise and CEE variances")
    if not isinstance(cell, VoronoiRect):
        cell = VoronoiRect(*cell)
    return cell


def cee_log_terms(y, h_hat_m, delta_c_m, cell, sigma_w2, sigma_e2, c: Constellation):
    """Log of ``int_cell exp(-|y-(h+u)v|^2/sw2) exp(-|u+delta|^2/se2) du`` for every point v.

    Returns an array of shape ``y.shape + (2**m,)``.
    """
    cell = _check_cee_args(sigma_w2, sigma_e2, cell)
    y, h = _prep(y, h_hat_m, sigma_w2)
    v = c.points
    a = np.abs(v) ** 2 / sigma_w2
    b = 1.0 / sigma_e2
    A = a + b
    # |y - (h + u) v|^2 = |v|^2 |u - cv|^2
    cv = y[..., None] / v - h[..., None]
    mu = (a * cv - b * delta_c_m) / A
    s = np.sqrt(2.0 * A)
    log_re = _log_diff_ndtr(s * (cell.re_lo - mu.real), s * (cell.re_hi - mu.real))
    log_im = _log_diff_ndtr(s * (cell.im_lo - mu.imag), s * (cell.im_hi - mu.imag))
    return -(a * b / A) * np.abs(cv + delta_c_m) ** 2 + np.log(np.pi / A) + log_re + log_im


def llr_ml_cee(
    y, h_hat_m, delta_c_m: complex, cell, sigma_w2: float, sigma_e2: float,
    c: Constellation, return_underflow: bool = False,
):
    """ML LLRs marginalized over residual CEE confined to ``cell``.

    The truncated Gaussian's normalizer is common to numerator and
    denominator and is dropped.  Bits whose numerator and denominator both
    underflow get LLR 0; pass ``return_underflow=True`` to also receive the
    boolean mask of those bits.
    """
    terms = cee_log_terms(y, h_hat_m, delta_c_m, cell, sigma_w2, sigma_e2, c)
    llr = _logratio(terms, c)
    underflow = ~np.isfinite(llr)
    llr = _flatten(np.where(underflow, 0.0, llr))
    if return_underflow:
        return llr, underflow.reshape(llr.shape)
    return llr


# Gauss-Legendre quadrature reference ---------------------------------------

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(16)


def _panel_nodes(lo, hi, panels):
    """Composite Gauss-Legendre nodes/weights on [lo, hi] per row; lo, hi are (K,)."""
    edges = lo[:, None] + (hi - lo)[:, None] * np.linspace(0.0, 1.0, panels + 1)
    half = 0.5 * np.diff(edges, axis=1)
    mid = 0.5 * (edges[:, 1:] + edges[:, :-1])
    x = (mid[:, :, None] + half[:, :, None] * _GL_NODES).reshape(len(lo), -1)
    w = (half[:, :, None] * _GL_WEIGHTS).reshape(len(lo), -1)
    return x, w


def _axis_window(lo, hi, peak, sd):
    """Integration window per axis: the cell clipped to +-8 sd around the peak,
    or a short strip along the nearest edge when the peak lies outside."""
    wlo = np.maximum(lo, peak - 8 * sd)
    whi = np.minimum(hi, peak + 8 * sd)
    with np.errstate(divide="ignore", invalid="ignore"):
        below = peak < lo
        above = peak > hi
        decay_lo = 1.0 / (2.0 * (lo - peak) / (2 * sd**2))
        decay_hi = 1.0 / (2.0 * (peak - hi) / (2 * sd**2))
    wlo = np.where(below, lo, wlo)
    whi = np.where(below, np.minimum(hi, lo + np.minimum(8 * sd, 40 * decay_lo)), whi)
    whi = np.where(above, hi, whi)
    wlo = np.where(above, np.maximum(lo, hi - np.minimum(8 * sd, 40 * decay_hi)), wlo)
    return wlo, whi


def cee_log_terms_quadrature(
    y, h_hat_m, delta_c_m, cell, sigma_w2, sigma_e2, c: Constellation,
    rtol: float = 1e-11, max_panels: int = 256,
):
    """Numerical counterpart of :func:`cee_log_terms` by adaptive tensor-product
    Gauss-Legendre over the 2-D cell.  Panels are doubled until the estimate
    changes by less than ``rtol`` (relative)."""
    cell = _check_cee_args(sigma_w2, sigma_e2, cell)
    y, h = _prep(y, h_hat_m, sigma_w2)
    shape = y.shape + (c.size,)
    yy = np.broadcast_to(y[..., None], shape).ravel()
    hh = np.broadcast_to(h[..., None], shape).ravel()
    vv = np.broadcast_to(c.points, shape).ravel()

    def exponent(rows, u):
        ext = (slice(None),) + (None,) * (u.ndim - 1)
        return (
            -np.abs(yy[rows][ext] - (hh[rows][ext] + u) * vv[rows][ext]) ** 2 / sigma_w2
            - np.abs(u + delta_c_m) ** 2 / sigma_e2
        )

    # the exponent is a concave quadratic in u; locate its maximizer and curvature
    a = np.abs(vv) ** 2 / sigma_w2
    b = 1.0 / sigma_e2
    peak = (a * (yy / vv - hh) - b * delta_c_m) / (a + b)
    sd = 1.0 / np.sqrt(2.0 * (a + b))
    lo_r, hi_r = _axis_window(cell.re_lo, cell.re_hi, peak.real, sd)
    lo_i, hi_i = _axis_window(cell.im_lo, cell.im_hi, peak.imag, sd)
    # scale by the exponent at the cell point nearest the peak
    anchor = (np.clip(peak.real, cell.re_lo, cell.re_hi)
              + 1j * np.clip(peak.imag, cell.im_lo, cell.im_hi))
    ref = exponent(np.arange(yy.size), anchor)

    result = np.full(yy.size, np.nan)
    todo = np.arange(yy.size)
    prev = None
    panels = 2
    while todo.size:
        xr, wr = _panel_nodes(lo_r[todo], hi_r[todo], panels)
        xi, wi = _panel_nodes(lo_i[todo], hi_i[todo], panels)
        est = np.empty(todo.size)
        step = max(1, int(4e6 // xr.shape[1] ** 2))
        for s0 in range(0, todo.size, step):
            blk = slice(s0, s0 + step)
            u = xr[blk, :, None] + 1j * xi[blk, None, :]
            vals = np.exp(exponent(todo[blk], u) - ref[todo[blk]][:, None, None])
            est[blk] = np.einsum("ki,kij,kj->k", wr[blk], vals, wi[blk])
        if prev is not None:
            done = np.abs(est - prev) <= rtol * np.abs(est)
            if panels >= max_panels:
                done[:] = True
            result[todo[done]] = est[done]
            todo, est = todo[~done], est[~done]
        prev = est
        panels *= 2
    with np.errstate(divide="ignore"):
        return (ref + np.log(result)).reshape(shape)


def llr_ml_cee_quadrature(
    y, h_hat_m, delta_c_m: complex, cell, sigma_w2: float, sigma_e2: float, c: Constellation,
) -> np.ndarray:
    """Same contract as :func:`llr_ml_cee` with the integrals done numerically."""
    terms = cee_log_terms_quadrature(y, h_hat_m, delta_c_m, cell, sigma_w2, sigma_e2, c)
    llr = _logratio(terms, c)
    return _flatten(np.where(np.isfinite(llr), llr, 0.0))


def compute_llrs(detector, y, h_hat, sigma_w2: float, c: Constellation) -> np.ndarray:
    """Dispatch on a :class:`DetectorKind` (or its string value)."""
    kind = DetectorKind(detector)
    if kind is DetectorKind.ML_CEE:
        raise ValueError("the CEE-aware detector needs a candidate offset and cell; use llr_ml_cee")
    return _DETECTORS[kind](y, h_hat, sigma_w2, c)


_DETECTORS = {
    DetectorKind.ML_EXACT: llr_ml_exact,
    DetectorKind.ML_APPROX: llr_ml,
    DetectorKind.ZF: llr_zf,
    DetectorKind.MMSE: llr_mmse,
}
