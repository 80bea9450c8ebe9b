"""Ordered Reliability Bits GRAND.

Noise patterns are sets of reliability ranks (1 = least reliable bit).  They
are queried in order of logistic weight, the sum of the flipped ranks, i.e.
by enumerating partitions of 0, 1, 2, ... into distinct parts no larger
than ``n``.  Within one weight, patterns with fewer parts come first, and
patterns with the same number of parts are ordered by their parts (largest
first) in decreasing lexicographic order.

Two decoders share this schedule: :func:`decode` takes an arbitrary
membership callable, and :func:`decode_batch` tests membership through a
code's syndrome columns inside a compiled loop.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Iterator

import numba
import numpy as np

from .detect import LLR_CLIP

__all__ = [
    "DEFAULT_BUDGET",
    "ReliabilityOrder",
    "DecodeResult",
    "BatchDecode",
    "rank_bits",
    "hard_decision",
    "distinct_partitions",
    "next_patterns",
    "pattern_table",
    "decode",
    "decode_batch",
    "posterior",
    "log_posterior",
]

DEFAULT_BUDGET = 100_000


@dataclass(frozen=True)
class ReliabilityOrder:
    perm: np.ndarray  # perm[r] = position of the (r+1)-th least reliable bit
    inverse_perm: np.ndarray


@dataclass
class DecodeResult:
    codeword: np.ndarray | None
    noise_z: np.ndarray | None
    found: bool
    queries_used: int
    posterior: float | None = None
    log_posterior: float | None = None


def hard_decision(llrs) -> np.ndarray:
    """Bit is 1 iff its LLR is strictly positive."""
    return (np.asarray(llrs) > 0).astype(np.uint8)


def rank_bits(llrs) -> ReliabilityOrder:
    rel = np.abs(np.asarray(llrs, dtype=float))
    perm = np.argsort(rel, kind="stable")
    inv = np.empty_like(perm)
    inv[perm] = np.arange(perm.size)
    return ReliabilityOrder(perm, inv)


# --------------------------------------------------------------------------
# pattern schedule


def distinct_partitions(weight: int, parts: int, max_part: int) -> Iterator[tuple]:
    """Partitions of ``weight`` into exactly ``parts`` distinct parts, each
    ``<= max_part``, as descending tuples in decreasing lexicographic order."""
    if parts == 0:
        if weight == 0:
            yield ()
        return
    # the remaining parts - 1 values are at least 1, 2, ..., parts - 1
    smallest_rest = (parts - 1) * parts // 2
    top = min(max_part, weight - smallest_rest)
    # the largest part must exceed the average
    bottom = -(-(weight + (parts - 1) * parts // 2) // parts)
    for first in range(top, bottom - 1, -1):
        for rest in distinct_partitions(weight - first, parts - 1, first - 1):
            yield (first, *rest)


def _patterns_of_weight(weight: int, n: int) -> Iterator[tuple]:
    parts = 0
    while parts * (parts + 1) // 2 <= weight:
        if parts <= n:
            yield from distinct_partitions(weight, parts, n)
        parts += 1


def next_patterns(n: int, budget: int) -> Iterator[tuple]:
    """Yield up to ``budget`` patterns (tuples of 1-based ranks, descending)."""
    if budget < 1:
        raise ValueError("budget must be at least 1")
    emitted = 0
    max_weight = n * (n + 1) // 2
    for w in range(max_weight + 1):
        for pat in _patterns_of_weight(w, n):
            yield pat
            emitted += 1
            if emitted == budget:
                return


@lru_cache(maxsize=8)
def pattern_table(n: int, budget: int) -> tuple[np.ndarray, np.ndarray]:
    """The first ``budget`` patterns flattened into ``(offsets, ranks)`` arrays."""
    offsets = [0]
    ranks: list[int] = []
    for pat in next_patterns(n, budget):
        ranks.extend(pat)
        offsets.append(len(ranks))
    off = np.array(offsets, dtype=np.int64)
    rk = np.array(ranks, dtype=np.int64)
    off.setflags(write=False)
    rk.setflags(write=False)
    return off, rk


# --------------------------------------------------------------------------
# decoding


def decode(llrs, is_member: Callable[[np.ndarray], bool], budget: int = DEFAULT_BUDGET) -> DecodeResult:
    """ORBGRAND with a generic membership oracle (one Python call per query)."""
    llrs = np.asarray(llrs, dtype=float)
    n = llrs.size
    hard = hard_decision(llrs)
    order = rank_bits(llrs)
    for q, pat in enumerate(next_patterns(n, budget), start=1):
        z = np.zeros(n, dtype=np.uint8)
        z[order.perm[np.asarray(pat, dtype=np.intp) - 1]] = 1
        word = hard ^ z
        if is_member(word):
            lp = log_posterior(z, llrs)
            return DecodeResult(word, z, True, q, float(np.exp(lp)), lp)
    return DecodeResult(None, None, False, budget)


@numba.njit(cache=True, nogil=True)
def _search(hard, perms, columns, offsets, ranks, budget):
    B, n = hard.shape
    found_at = np.full(B, -1, dtype=np.int64)
    col_by_rank = np.empty(n + 1, dtype=np.uint64)
    col_by_rank[0] = 0
    n_pat = min(budget, offsets.size - 1)
    for b in range(B):
        s0 = np.uint64(0)
        for i in range(n):
            if hard[b, i]:
                s0 ^= columns[i]
        for r in range(n):
            col_by_rank[r + 1] = columns[perms[b, r]]
        for q in range(n_pat):
            s = s0
            for t in range(offsets[q], offsets[q + 1]):
                s ^= col_by_rank[ranks[t]]
            if s == 0:
                found_at[b] = q
                break
    return found_at


@dataclass
class BatchDecode:
    """Decoding outcomes for a batch of ``B`` words of length ``n``."""

    found: np.ndarray  # (B,) bool
    queries: np.ndarray  # (B,) int
    noise: np.ndarray  # (B, n) uint8, zeros where not found
    codewords: np.ndarray  # (B, n) uint8, hard decision where not found
    log_posterior: np.ndarray  # (B,) float, -inf where not found

    def result(self, b: int) -> DecodeResult:
        if not self.found[b]:
            return DecodeResult(None, None, False, int(self.queries[b]))
        lp = float(self.log_posterior[b])
        return DecodeResult(self.codewords[b].copy(), self.noise[b].copy(), True,
                            int(self.queries[b]), float(np.exp(lp)), lp)


def decode_batch(llrs, syndrome_columns, budget: int = DEFAULT_BUDGET) -> BatchDecode:
    """ORBGRAND over a batch of LLR vectors (shape ``(B, n)`` or ``(n,)``)
    for a linear code given by its syndrome columns."""
    llrs = np.atleast_2d(np.asarray(llrs, dtype=float))
    B, n = llrs.shape
    columns = np.asarray(syndrome_columns, dtype=np.uint64)
    if columns.shape != (n,):
        raise ValueError(f"expected {n} syndrome columns, got {columns.shape}")
    if budget < 1:
        raise ValueError("budget must be at least 1")
    offsets, ranks = pattern_table(n, budget)
    hard = hard_decision(llrs)
    perms = np.argsort(np.abs(llrs), axis=1, kind="stable")
    found_at = _search(hard, perms, columns, offsets, ranks, budget)

    found = found_at >= 0
    queries = np.where(found, found_at + 1, budget)
    noise = np.zeros((B, n), dtype=np.uint8)
    for b in np.flatnonzero(found):
        q = found_at[b]
        noise[b, perms[b, ranks[offsets[q]:offsets[q + 1]] - 1]] = 1
    lp = np.where(found, log_posterior(noise, llrs), -np.inf)
    return BatchDecode(found, queries, noise, hard ^ noise, lp)


def log_posterior(z, llrs) -> np.ndarray:
    """Log of ``prod_{z=0}(1 - B_l) prod_{z=1} B_l`` with ``B_l = e^-|l| / (1 + e^-|l|)``.

    Broadcasts over leading axes; the product runs over the last one.
    """
    a = np.minimum(np.abs(np.asarray(llrs, dtype=float)), LLR_CLIP)
    z = np.asarray(z).astype(bool)
    # log B = -a - log(1 + e^-a), log(1 - B) = -log(1 + e^-a)
    log1pe = np.logaddexp(0.0, -a)
    return -(log1pe + np.where(z, a, 0.0)).sum(axis=-1)


def posterior(z, llrs) -> float:
    z = np.asarray(z)
    llrs = np.asarray(llrs)
    if z.shape != llrs.shape:
        raise ValueError("noise pattern and LLR vector lengths differ")
    return float(np.exp(log_posterior(z, llrs)))
