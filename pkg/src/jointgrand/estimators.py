"""scikit-learn style wrappers.

``X`` is always the received symbols, shape ``(B, S)`` complex, and the
per-block channel estimates travel alongside as ``h_hat`` (shape ``(B,)``).
Nothing is learned in ``fit``: it validates the hyper-parameters and builds
the code, constellation and candidate set, so the estimators compose with
``clone``, ``get_params`` and ``set_params`` like any other.
"""

from __future__ import annotations

import math

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .detect import DetectorKind, compute_llrs
from .gf2codes import make_code
from .jointdec import decode_candidates, get_candidates, select_posterior
from .modem import get_constellation
from .orbgrand import DEFAULT_BUDGET

__all__ = ["SoftDemapper", "JointGrandDecoder"]


def _check_symbols(X, h_hat):
    X = np.asarray(X, dtype=complex)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2 or X.shape[1] == 0:
        raise ValueError(f"expected received symbols of shape (blocks, symbols), got {X.shape}")
    h = np.broadcast_to(np.asarray(h_hat, dtype=complex), (X.shape[0],))
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(h))):
        raise ValueError("received symbols and channel estimates must be finite")
    return X, np.array(h)


class SoftDemapper(BaseEstimator, TransformerMixin):
    """Turns received symbols into per-bit LLRs with a fixed noise variance."""

    def __init__(self, modulation="qam16", detector="mmse", sigma_w2=0.1):
        self.modulation = modulation
        self.detector = detector
        self.sigma_w2 = sigma_w2

    def fit(self, X=None, y=None):
        kind = DetectorKind(self.detector)
        if kind is DetectorKind.ML_CEE:
            raise ValueError("the CEE-aware detector needs a candidate cell; use JointGrandDecoder")
        if not self.sigma_w2 > 0:
            raise ValueError("sigma_w2 must be positive")
        self.constellation_ = get_constellation(self.modulation)
        self.detector_ = kind
        return self

    def transform(self, X, h_hat=1.0):
        check_is_fitted(self)
        X, h = _check_symbols(X, h_hat)
        return compute_llrs(self.detector_, X, h, self.sigma_w2, self.constellation_)

    def fit_transform(self, X, y=None, h_hat=1.0):
        return self.fit(X, y).transform(X, h_hat)


class JointGrandDecoder(BaseEstimator):
    """Candidate-estimate ORBGRAND decoder.

    ``method`` is one of ``baseline`` (pilot estimate only), ``method1``,
    ``method1-weighted`` or ``method2``.
    """

    _METHODS = ("baseline", "method1", "method1-weighted", "method2")

    def __init__(self, code="crc128-112", modulation="qam16", detector="mmse", method="method1",
                 candidates="axis5", sigma_e2=0.01, max_queries=DEFAULT_BUDGET):
        self.code = code
        self.modulation = modulation
        self.detector = detector
        self.method = method
        self.candidates = candidates
        self.sigma_e2 = sigma_e2
        self.max_queries = max_queries

    def fit(self, X=None, y=None):
        if self.method not in self._METHODS:
            raise ValueError(f"method must be one of {self._METHODS}")
        if self.max_queries < 1:
            raise ValueError("max_queries must be >= 1")
        if self.sigma_e2 < 0:
            raise ValueError("sigma_e2 must be non-negative")
        self.code_ = make_code(self.code)
        self.constellation_ = get_constellation(self.modulation)
        if self.code_.n % self.constellation_.bits_per_symbol:
            raise ValueError("codeword length must be a multiple of the bits per symbol")
        if self.method == "method2":
            self.detector_ = DetectorKind.ML_CEE
            if self.candidates != "grid9":
                raise ValueError("method2 needs the grid9 candidate set")
        else:
            self.detector_ = DetectorKind(self.detector)
            if self.detector_ is DetectorKind.ML_CEE:
                raise ValueError("select method2 to use the CEE-aware detector")
        cands = "1" if self.method == "baseline" else self.candidates
        self.candidates_ = get_candidates(cands, math.sqrt(self.sigma_e2))
        self.n_symbols_ = self.code_.n // self.constellation_.bits_per_symbol
        return self

    def decode(self, X, h_hat, sigma_w2):
        """Codewords ``(B, n)`` and chosen candidate index per block (-1 on failure;
        the codeword row is then all zeros)."""
        check_is_fitted(self)
        X, h = _check_symbols(X, h_hat)
        if X.shape[1] != self.n_symbols_:
            raise ValueError(f"expected {self.n_symbols_} symbols per block, got {X.shape[1]}")
        if not sigma_w2 > 0:
            raise ValueError("sigma_w2 must be positive")
        cd = decode_candidates(X, h, sigma_w2, self.sigma_e2, self.candidates_, self.detector_,
                               self.constellation_, self.code_, self.max_queries)
        chosen, _ = select_posterior(cd, self.candidates_, self.sigma_e2,
                                     weighted=self.method == "method1-weighted")
        rows = np.arange(chosen.size)
        words = cd.codewords[rows, np.maximum(chosen, 0)].copy()
        words[chosen < 0] = 0
        return words, chosen

    def predict(self, X, h_hat, sigma_w2):
        return self.decode(X, h_hat, sigma_w2)[0]

    def score(self, X, y, h_hat, sigma_w2):
        """Fraction of blocks decoded to the reference codewords ``y``."""
        words, chosen = self.decode(X, h_hat, sigma_w2)
        y = np.asarray(y, dtype=np.uint8).reshape(words.shape)
        return float(np.mean((chosen >= 0) & (words == y).all(axis=1)))
