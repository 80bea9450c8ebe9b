"""Monte Carlo BLER experiments.

Trial ``t`` at SNR ``s`` draws everything (info word, fading, estimation
error, noise) from its own generator seeded with ``(seed, key(s), t)``, so a
point is reproducible on its own and every method sees the same channel
realizations.  When several methods are requested together they share the
per-candidate decodes.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.stats import beta

from .channel import complex_normal, make_draw, snr_db_to_noise_var
from .detect import DetectorKind
from .gf2codes import make_code
from .jointdec import (
    CandidateDecodes,
    decode_candidates,
    get_candidates,
    select_genie,
    select_posterior,
)
from .modem import get_constellation, map_bits

__all__ = [
    "METHODS",
    "CODES",
    "CANDIDATE_SETS",
    "SimConfig",
    "SnrPointResult",
    "parse_snr_sweep",
    "generate_trials",
    "run_point",
    "run_point_multi",
    "run_sweep",
    "clopper_pearson",
    "snr_at_bler",
    "write_csv",
    "read_csv",
    "write_json",
]

logger = logging.getLogger(__name__)

METHODS = ("baseline", "method1", "method1-weighted", "method2", "genie")
CODES = ("crc128-112", "capolar128-112", "crc16-8")
CANDIDATE_SETS = ("1", "axis5", "grid9")
_BATCH = 2000


def parse_snr_sweep(sweep) -> tuple:
    """``"15"`` -> (15.0,); ``"14:1:22"`` -> (14.0, 15.0, ..., 22.0) (stop inclusive)."""
    if isinstance(sweep, (int, float)):
        return (float(sweep),)
    if not isinstance(sweep, str):
        return tuple(float(v) for v in sweep)
    parts = [p for p in sweep.split(":")]
    if len(parts) == 1:
        return (float(parts[0]),)
    if len(parts) != 3:
        raise ValueError(f"SNR sweep must be START:STEP:STOP, got {sweep!r}")
    start, step, stop = map(float, parts)
    if step <= 0 or stop < start:
        raise ValueError(f"empty SNR sweep {sweep!r}")
    count = int(math.floor((stop - start) / step + 1e-9)) + 1
    return tuple(round(start + i * step, 10) for i in range(count))


@dataclass
class SimConfig:
    code: str = "crc128-112"
    modulation: str = "qam16"
    detector: str = "mmse"
    method: str = "method1"
    sigma_e2: float = 0.01
    k_factor: float = 10.0
    snr_db: tuple = (18.0,)
    trials: int = 1000
    seed: int = 0
    max_queries: int = 100_000
    candidates: str = "axis5"
    out: str | None = None
    format: str = "csv"

    def __post_init__(self):
        self.snr_db = parse_snr_sweep(self.snr_db)

    def validate(self, methods=None):
        methods = [self.method] if methods is None else list(methods)
        for m in methods:
            if m not in METHODS:
                raise ValueError(f"unknown method {m!r}; choose from {METHODS}")
        if self.code not in CODES:
            raise ValueError(f"unknown code {self.code!r}; choose from {CODES}")
        get_constellation(self.modulation)
        if DetectorKind(self.detector) is DetectorKind.ML_CEE:
            raise ValueError("select method2 to use the CEE-aware detector")
        if self.candidates not in CANDIDATE_SETS:
            raise ValueError(f"unknown candidate set {self.candidates!r}")
        if "method2" in methods and self.candidates != "grid9":
            raise ValueError("method2 needs the grid9 candidate set (it carries Voronoi cells)")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.max_queries < 1:
            raise ValueError("max_queries must be >= 1")
        if self.sigma_e2 < 0 or self.k_factor < 0:
            raise ValueError("sigma_e2 and k_factor must be non-negative")
        if not self.snr_db:
            raise ValueError("empty SNR sweep")
        if self.format not in ("csv", "json"):
            raise ValueError("format must be csv or json")
        needs_sigma = {"method1", "method1-weighted", "method2", "genie"} & set(methods)
        if needs_sigma and self.candidates != "1" and self.sigma_e2 <= 0:
            raise ValueError("candidate grids are scaled by sigma_e and need sigma_e2 > 0")
        code = make_code(self.code)
        if code.n % get_constellation(self.modulation).bits_per_symbol:
            raise ValueError("codeword length must be a multiple of the bits per symbol")
        return self

    def effective_detector(self, method: str) -> str:
        return DetectorKind.ML_CEE.value if method == "method2" else DetectorKind(self.detector).value


@dataclass
class SnrPointResult:
    snr_db: float
    trials: int
    block_errors: int
    bler: float
    ci_lo: float
    ci_hi: float
    mean_queries: float
    abandon_count: int
    method: str = ""
    detector: str = ""
    code: str = ""
    modulation: str = ""
    sigma_e2: float = 0.0
    k_factor: float = 0.0
    seed: int = 0
    mean_chosen_offset_magnitude: float = float("nan")


CSV_FIELDS = [f.name for f in dataclasses.fields(SnrPointResult)]


def clopper_pearson(errors: int, trials: int, level: float = 0.95) -> tuple[float, float]:
    alpha = 1.0 - level
    lo = 0.0 if errors == 0 else float(beta.ppf(alpha / 2, errors, trials - errors + 1))
    hi = 1.0 if errors == trials else float(beta.ppf(1 - alpha / 2, errors + 1, trials - errors))
    return lo, hi


# --------------------------------------------------------------------------
# trials


def _snr_key(snr_db: float) -> int:
    return int(round(snr_db * 1000)) + (1 << 24)


@dataclass
class TrialBatch:
    info: np.ndarray  # (T, k)
    codewords: np.ndarray  # (T, n)
    y: np.ndarray  # (T, S)
    h: np.ndarray
    h_hat: np.ndarray
    h_e: np.ndarray
    sigma_w2: float


def generate_trials(cfg: SimConfig, snr_db: float, start: int, stop: int, code=None,
                    constellation=None) -> TrialBatch:
    """Draw trials ``start..stop-1`` of one SNR point."""
    code = make_code(cfg.code) if code is None else code
    const = get_constellation(cfg.modulation) if constellation is None else constellation
    sigma_w2 = snr_db_to_noise_var(snr_db)
    S = code.n // const.bits_per_symbol
    T = stop - start
    info = np.empty((T, code.k), dtype=np.uint8)
    w = np.empty((T, S), dtype=complex)
    h = np.empty(T, dtype=complex)
    h_hat = np.empty(T, dtype=complex)
    h_e = np.empty(T, dtype=complex)
    key = _snr_key(snr_db)
    for i, t in enumerate(range(start, stop)):
        rng = np.random.default_rng([cfg.seed, key, t])
        info[i] = rng.integers(0, 2, code.k, dtype=np.uint8)
        draw = make_draw(cfg.k_factor, cfg.sigma_e2, sigma_w2, rng)
        h[i], h_hat[i], h_e[i] = draw.h, draw.h_hat, draw.h_e
        w[i] = complex_normal(rng, sigma_w2, S)
    codewords = ((info.astype(np.int32) @ code.generator_matrix.astype(np.int32)) & 1).astype(np.uint8)
    y = h[:, None] * map_bits(codewords, const) + w
    return TrialBatch(info, codewords, y, h, h_hat, h_e, sigma_w2)


def _group_key(cfg: SimConfig, method: str):
    cands = "1" if method == "baseline" else cfg.candidates
    return cands, cfg.effective_detector(method)


@dataclass
class _Tally:
    errors: int = 0
    abandons: int = 0
    queries: float = 0.0
    offsets: list = field(default_factory=list)


def _score_batch(method, cfg, cd: CandidateDecodes, cands, batch: TrialBatch, tally: _Tally):
    if method == "baseline":
        chosen = np.where(cd.found[:, 0], 0, -1)
    elif method == "genie":
        chosen, _ = select_genie(cd, batch.codewords)
    else:
        chosen, _ = select_posterior(cd, cands, cfg.sigma_e2, weighted=(method == "method1-weighted"))
    ok = chosen >= 0
    rows = np.arange(chosen.size)
    picked = cd.codewords[rows, np.maximum(chosen, 0)]
    correct = ok & (picked == batch.codewords).all(axis=1)
    tally.errors += int((~correct).sum())
    tally.abandons += int((~ok).sum())
    tally.queries += float(cd.queries.sum())
    tally.offsets.extend(np.abs(cands.deltas[chosen[ok]]).tolist())


def run_point_multi(cfg: SimConfig, snr_db: float, methods=None) -> dict:
    """Evaluate several methods on the same trials; returns ``{method: SnrPointResult}``."""
    methods = list(dict.fromkeys(methods or [cfg.method]))
    cfg.validate(methods)
    code = make_code(cfg.code)
    const = get_constellation(cfg.modulation)
    sigma_e = math.sqrt(cfg.sigma_e2)
    groups = {}
    for m in methods:
        groups.setdefault(_group_key(cfg, m), []).append(m)
    cand_sets = {key: get_candidates(key[0], sigma_e) for key in groups}
    tallies = {m: _Tally() for m in methods}

    for start in range(0, cfg.trials, _BATCH):
        stop = min(cfg.trials, start + _BATCH)
        batch = generate_trials(cfg, snr_db, start, stop, code, const)
        decoded = {}
        # decode larger candidate sets first so the single-candidate group can reuse them
        for key in sorted(groups, key=lambda k: -len(cand_sets[k])):
            cands = cand_sets[key]
            donor = next(
                (k for k in decoded
                 if key[0] == "1" and k[1] == key[1] and cand_sets[k].deltas[0] == 0),
                None,
            )
            if donor is not None:
                decoded[key] = _take_first(decoded[donor])
            else:
                decoded[key] = decode_candidates(
                    batch.y, batch.h_hat, batch.sigma_w2, cfg.sigma_e2, cands, key[1],
                    const, code, cfg.max_queries,
                )
            for m in groups[key]:
                _score_batch(m, cfg, decoded[key], cands, batch, tallies[m])

    out = {}
    for m in methods:
        tl = tallies[m]
        lo, hi = clopper_pearson(tl.errors, cfg.trials)
        out[m] = SnrPointResult(
            snr_db=float(snr_db), trials=cfg.trials, block_errors=tl.errors,
            bler=tl.errors / cfg.trials, ci_lo=lo, ci_hi=hi,
            mean_queries=tl.queries / cfg.trials, abandon_count=tl.abandons,
            method=m, detector=cfg.effective_detector(m), code=cfg.code,
            modulation=cfg.modulation, sigma_e2=float(cfg.sigma_e2),
            k_factor=float(cfg.k_factor), seed=int(cfg.seed),
            mean_chosen_offset_magnitude=float(np.mean(tl.offsets)) if tl.offsets else float("nan"),
        )
        logger.info("%s snr=%.2f dB bler=%.3g (%d/%d)", m, snr_db, out[m].bler, tl.errors, cfg.trials)
    return out


def _take_first(cd: CandidateDecodes) -> CandidateDecodes:
    return CandidateDecodes(cd.found[:, :1], cd.queries[:, :1], cd.codewords[:, :1],
                            cd.noise[:, :1], cd.log_posterior[:, :1], cd.estimates[:, :1])


def run_point(cfg: SimConfig, snr_db: float) -> SnrPointResult:
    return run_point_multi(cfg, snr_db, [cfg.method])[cfg.method]


def run_sweep(cfg: SimConfig, methods=None) -> list:
    """Run every SNR of the sweep in ascending order.

    With ``cfg.out`` set, the file is rewritten after each point so a crash
    leaves the completed prefix on disk.
    """
    methods = list(methods or [cfg.method])
    cfg.validate(methods)
    results = []
    for snr in sorted(cfg.snr_db):
        point = run_point_multi(cfg, snr, methods)
        results.extend(point[m] for m in methods)
        if cfg.out:
            (write_json if cfg.format == "json" else write_csv)(results, cfg.out)
    return results


# --------------------------------------------------------------------------
# output


def write_csv(results, path):
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=CSV_FIELDS)
        writer.writeheader()
        for r in results:
            writer.writerow({k: repr(v) if isinstance(v, float) else v
                             for k, v in dataclasses.asdict(r).items()})
    tmp.replace(path)


def read_csv(path) -> list:
    types = {f.name: f.type for f in dataclasses.fields(SnrPointResult)}
    conv = {"float": float, "int": int, "str": str}
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            out.append(SnrPointResult(**{k: conv[types[k]](v) for k, v in row.items()}))
    return out


def write_json(results, path):
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(json.dumps([dataclasses.asdict(r) for r in results], indent=2))
    tmp.replace(path)


def snr_at_bler(snrs, blers, target: float = 1e-2, trials: int | None = None,
                extrapolate: bool = False) -> float:
    """SNR where the BLER curve first drops to ``target``, by linear
    interpolation of log10(BLER).  Zero-error points are floored at
    ``0.5 / trials``.  Returns ``-inf`` if the curve starts below the target.
    If it never gets there, returns ``inf``, or with ``extrapolate`` the
    continuation of the line through the last two points (still ``inf`` when
    that line does not descend)."""
    snrs = np.asarray(snrs, dtype=float)
    b = np.asarray(blers, dtype=float)
    floor = 0.5 / trials if trials else 1e-12
    lb = np.log10(np.maximum(b, floor))
    lt = math.log10(target)
    if lb[0] <= lt:
        return -math.inf
    for i in range(1, len(snrs)):
        if lb[i] <= lt:
            frac = (lb[i - 1] - lt) / (lb[i - 1] - lb[i])
            return float(snrs[i - 1] + frac * (snrs[i] - snrs[i - 1]))
    if extrapolate and len(snrs) >= 2 and lb[-1] < lb[-2]:
        slope = (lb[-1] - lb[-2]) / (snrs[-1] - snrs[-2])
        return float(snrs[-1] + (lt - lb[-1]) / slope)
    return math.inf
