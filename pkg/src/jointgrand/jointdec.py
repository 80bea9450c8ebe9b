"""Joint decoding over a set of channel-estimate candidates.

Each candidate ``h_hat + delta`` produces its own LLR vector and ORBGRAND
decode.  The posterior-likelihood selector keeps the candidate whose decoded
noise pattern is most probable (optionally weighted by the Gaussian prior of
the offset); the genie selector keeps the decode closest to the transmitted
codeword and serves as a benchmark only.

Everything is batched: ``y`` has shape ``(B, S)`` and ``h_hat`` shape ``(B,)``.
The single-block helpers :func:`method1`, :func:`method2` and
:func:`genie_select` wrap the batched path.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .detect import DetectorKind, VoronoiRect, compute_llrs, llr_ml_cee, llr_ml_cee_quadrature
from .modem import Constellation
from .orbgrand import DEFAULT_BUDGET, DecodeResult, decode_batch

__all__ = [
    "CandidateSet",
    "CandidateDecodes",
    "JointResult",
    "single_candidate",
    "candidates_axis5",
    "candidates_grid9",
    "get_candidates",
    "candidate_llrs",
    "decode_candidates",
    "select_posterior",
    "select_genie",
    "method1",
    "method2",
    "genie_select",
]


@dataclass(frozen=True, eq=False)
class CandidateSet:
    """Offsets around the pilot-based estimate, plus optional Voronoi cells
    (in the residual-error plane of each candidate) and prior log-weights."""

    deltas: np.ndarray
    cells: tuple | None = None
    log_prior: np.ndarray | None = None
    name: str = "custom"

    def __post_init__(self):
        d = np.atleast_1d(np.asarray(self.deltas, dtype=complex))
        if d.ndim != 1 or d.size == 0:
            raise ValueError("a candidate set needs at least one offset")
        object.__setattr__(self, "deltas", d)
        if self.cells is not None:
            cells = tuple(c if isinstance(c, VoronoiRect) else VoronoiRect(*c) for c in self.cells)
            if len(cells) != d.size:
                raise ValueError("one cell per candidate is required")
            object.__setattr__(self, "cells", cells)
        if self.log_prior is not None:
            lp = np.asarray(self.log_prior, dtype=float)
            if lp.shape != d.shape:
                raise ValueError("one prior weight per candidate is required")
            object.__setattr__(self, "log_prior", lp)

    def __len__(self):
        return self.deltas.size

    def locate(self, h_e) -> np.ndarray:
        """Index of the cell containing each estimation error ``h_e`` (-1 if none)."""
        if self.cells is None:
            raise ValueError("candidate set has no cells")
        h_e = np.asarray(h_e, dtype=complex)
        out = np.full(h_e.shape, -1)
        hits = np.zeros(h_e.shape, dtype=int)
        for m, (d, cell) in enumerate(zip(self.deltas, self.cells)):
            inside = cell.contains(h_e - d)
            out[inside] = m
            hits += inside
        if np.any(hits > 1):
            raise ValueError("cells overlap")
        return out


def single_candidate() -> CandidateSet:
    return CandidateSet(np.zeros(1), cells=(VoronoiRect(-np.inf, np.inf, -np.inf, np.inf),), name="1")


def _check_sigma(sigma_e):
    if not sigma_e > 0:
        raise ValueError("sigma_e must be positive")


def candidates_axis5(sigma_e: float) -> CandidateSet:
    """The estimate itself and four neighbours at distance sigma_e / sqrt(2) on the axes."""
    _check_sigma(sigma_e)
    s = sigma_e / math.sqrt(2)
    return CandidateSet(np.array([0, s, -s, 1j * s, -1j * s]), name="axis5")


def candidates_grid9(sigma_e: float) -> CandidateSet:
    """3x3 grid with pitch sigma_e / sqrt(2), centre first, with its Voronoi cells."""
    _check_sigma(sigma_e)
    s = sigma_e / math.sqrt(2)
    coords = [(0, 0)] + [(a, b) for b in (-1, 0, 1) for a in (-1, 0, 1) if (a, b) != (0, 0)]
    # per-axis cell of grid index a, relative to the candidate itself
    span = {-1: (-np.inf, s / 2), 0: (-s / 2, s / 2), 1: (-s / 2, np.inf)}
    deltas = np.array([complex(a * s, b * s) for a, b in coords])
    cells = tuple(VoronoiRect(*span[a], *span[b]) for a, b in coords)
    return CandidateSet(deltas, cells=cells, name="grid9")


def get_candidates(name: str, sigma_e: float) -> CandidateSet:
    if name == "1":
        return single_candidate()
    if name == "axis5":
        return candidates_axis5(sigma_e)
    if name == "grid9":
        return candidates_grid9(sigma_e)
    raise ValueError(f"unknown candidate set {name!r}")


# --------------------------------------------------------------------------
# batched core


@dataclass
class CandidateDecodes:
    """Per-candidate ORBGRAND outcomes; leading axes are (block, candidate)."""

    found: np.ndarray  # (B, M) bool
    queries: np.ndarray  # (B, M) int
    codewords: np.ndarray  # (B, M, n) uint8
    noise: np.ndarray  # (B, M, n) uint8
    log_posterior: np.ndarray  # (B, M), -inf where not found
    estimates: np.ndarray  # (B, M) complex candidate estimates

    def result(self, b: int, m: int) -> DecodeResult:
        if not self.found[b, m]:
            return DecodeResult(None, None, False, int(self.queries[b, m]))
        lp = float(self.log_posterior[b, m])
        return DecodeResult(self.codewords[b, m].copy(), self.noise[b, m].copy(), True,
                            int(self.queries[b, m]), float(np.exp(lp)), lp)


def candidate_llrs(y, h_hat, m: int, cands: CandidateSet, detector, sigma_w2, sigma_e2,
                   constellation: Constellation, quadrature: bool = False) -> np.ndarray:
    """LLRs of candidate ``m`` for every block."""
    kind = DetectorKind(detector)
    h_m = h_hat + cands.deltas[m]
    if kind is DetectorKind.ML_CEE:
        if cands.cells is None:
            raise ValueError("the CEE-aware detector needs a candidate set with cells")
        fn = llr_ml_cee_quadrature if quadrature else llr_ml_cee
        return fn(y, h_m, cands.deltas[m], cands.cells[m], sigma_w2, sigma_e2, constellation)
    return compute_llrs(kind, y, h_m, sigma_w2, constellation)


def decode_candidates(y, h_hat, sigma_w2: float, sigma_e2: float, cands: CandidateSet,
                      detector, constellation: Constellation, code,
                      budget: int = DEFAULT_BUDGET, quadrature: bool = False) -> CandidateDecodes:
    """Run one ORBGRAND decode per (block, candidate)."""
    y = np.atleast_2d(np.asarray(y, dtype=complex))
    h_hat = np.atleast_1d(np.asarray(h_hat, dtype=complex))
    B, M, n = y.shape[0], len(cands), code.n
    found = np.zeros((B, M), dtype=bool)
    queries = np.zeros((B, M), dtype=np.int64)
    codewords = np.zeros((B, M, n), dtype=np.uint8)
    noise = np.zeros((B, M, n), dtype=np.uint8)
    logp = np.full((B, M), -np.inf)
    for m in range(M):
        llrs = candidate_llrs(y, h_hat, m, cands, detector, sigma_w2, sigma_e2, constellation, quadrature)
        if llrs.shape[-1] != n:
            raise ValueError(f"detector produced {llrs.shape[-1]} LLRs for a length-{n} code")
        res = decode_batch(llrs, code.syndrome_columns, budget)
        found[:, m], queries[:, m] = res.found, res.queries
        codewords[:, m], noise[:, m], logp[:, m] = res.codewords, res.noise, res.log_posterior
    estimates = h_hat[:, None] + cands.deltas[None, :]
    return CandidateDecodes(found, queries, codewords, noise, logp, estimates)


def _log_weights(cands: CandidateSet, sigma_e2: float) -> np.ndarray:
    if cands.log_prior is not None:
        return cands.log_prior
    d2 = np.abs(cands.deltas) ** 2
    if sigma_e2 > 0:
        # unnormalized CN(0, sigma_e2) density
        return -d2 / sigma_e2
    return np.where(d2 == 0, 0.0, -np.inf)


def select_posterior(cd: CandidateDecodes, cands: CandidateSet, sigma_e2: float,
                     weighted: bool = False):
    """Index of the best-scoring found candidate per block (-1 if none) and its log-score."""
    score = cd.log_posterior.copy()
    if weighted:
        score = score + _log_weights(cands, sigma_e2)[None, :]
    score[~cd.found] = -np.inf
    # argmax returns the first maximum, i.e. the lowest candidate index
    chosen = np.argmax(score, axis=1)
    best = score[np.arange(score.shape[0]), chosen]
    chosen = np.where(cd.found.any(axis=1), chosen, -1)
    return chosen, best


def select_genie(cd: CandidateDecodes, true_c):
    """Found candidate with the fewest bit errors against ``true_c`` (-1 if none)."""
    true_c = np.atleast_2d(np.asarray(true_c, dtype=np.uint8))
    if true_c.shape[-1] != cd.codewords.shape[-1]:
        raise ValueError("transmitted codeword length does not match the code")
    dist = (cd.codewords != true_c[:, None, :]).sum(axis=-1).astype(float)
    dist[~cd.found] = np.inf
    chosen = np.argmin(dist, axis=1)
    best = dist[np.arange(dist.shape[0]), chosen]
    return np.where(cd.found.any(axis=1), chosen, -1), best


# --------------------------------------------------------------------------
# single-block API


@dataclass
class JointResult:
    codeword: np.ndarray | None
    chosen_index: int | None
    chosen_estimate: complex | None
    score: float | None
    per_candidate: list = field(default_factory=list)

    @property
    def found(self) -> bool:
        return self.codeword is not None


def _joint_result(cd: CandidateDecodes, chosen: int, score: float) -> JointResult:
    per = [cd.result(0, m) for m in range(cd.found.shape[1])]
    if chosen < 0:
        return JointResult(None, None, None, None, per)
    return JointResult(cd.codewords[0, chosen].copy(), int(chosen),
                       complex(cd.estimates[0, chosen]), float(score), per)


def method1(y, h_hat: complex, sigma_w2: float, sigma_e2: float, cands: CandidateSet,
            detector, constellation: Constellation, code, budget: int = DEFAULT_BUDGET,
            weighted: bool = False) -> JointResult:
    """Decode one block with every candidate estimate and keep the most probable decode."""
    if DetectorKind(detector) is DetectorKind.ML_CEE:
        raise ValueError("use method2 for the CEE-aware detector")
    cd = decode_candidates(y, h_hat, sigma_w2, sigma_e2, cands, detector, constellation, code, budget)
    chosen, best = select_posterior(cd, cands, sigma_e2, weighted)
    return _joint_result(cd, chosen[0], best[0])


def method2(y, h_hat: complex, sigma_w2: float, sigma_e2: float, cands: CandidateSet,
            constellation: Constellation, code, budget: int = DEFAULT_BUDGET,
            weighted: bool = False, quadrature: bool = False) -> JointResult:
    """As :func:`method1`, with LLRs marginalized over the residual error in each cell."""
    if cands.cells is None:
        raise ValueError("method2 needs a candidate set with Voronoi cells")
    cd = decode_candidates(y, h_hat, sigma_w2, sigma_e2, cands, DetectorKind.ML_CEE,
                           constellation, code, budget, quadrature)
    chosen, best = select_posterior(cd, cands, sigma_e2, weighted)
    return _joint_result(cd, chosen[0], best[0])


def genie_select(per_candidate: list, true_c, estimates=None) -> JointResult:
    """Benchmark selector over already-decoded candidates; ties go to the lower index."""
    true_c = np.asarray(true_c, dtype=np.uint8)
    best_m, best_d = -1, None
    for m, res in enumerate(per_candidate):
        if not res.found:
            continue
        if res.codeword.shape != true_c.shape:
            raise ValueError("transmitted codeword length does not match the code")
        d = int(np.count_nonzero(res.codeword != true_c))
        if best_d is None or d < best_d:
            best_m, best_d = m, d
    if best_m < 0:
        return JointResult(None, None, None, None, list(per_candidate))
    est = None if estimates is None else complex(estimates[best_m])
    return JointResult(per_candidate[best_m].codeword.copy(), best_m, est, float(best_d),
                       list(per_candidate))
