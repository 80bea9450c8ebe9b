"""Command line entry point: ``jointgrand simulate ...``.

Every flag can also come from a flat YAML/JSON mapping given with
``--config``; keys are the flag names (dashes or underscores).  Flags given
on the command line win over the file.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import yaml

from . import __version__
from .simharness import CANDIDATE_SETS, CODES, METHODS, SimConfig, run_sweep, snr_at_bler

# flag dest -> SimConfig field
_FIELDS = {
    "code": "code",
    "mod": "modulation",
    "detector": "detector",
    "method": "method",
    "sigma_e2": "sigma_e2",
    "k_factor": "k_factor",
    "snr": "snr_db",
    "trials": "trials",
    "max_queries": "max_queries",
    "candidates": "candidates",
    "seed": "seed",
    "out": "out",
    "format": "format",
}

_CASTS = {"sigma_e2": float, "k_factor": float, "trials": int, "max_queries": int, "seed": int,
          "code": str, "mod": str, "detector": str, "candidates": str, "format": str, "out": str}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="jointgrand", description="ORBGRAND with channel-estimate candidates")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="Monte Carlo BLER sweep")
    # defaults are None so that file values are only overridden by explicit flags
    sim.add_argument("--config", type=Path, help="YAML/JSON file of flag values")
    sim.add_argument("--code", choices=CODES)
    sim.add_argument("--mod", choices=("qpsk", "qam16"))
    sim.add_argument("--detector", choices=("ml", "ml-exact", "zf", "mmse"))
    sim.add_argument("--method", help=f"one of {', '.join(METHODS)}; a comma list shares the decodes")
    sim.add_argument("--sigma-e2", type=float)
    sim.add_argument("--k-factor", type=float)
    sim.add_argument("--snr", help="START:STEP:STOP in dB, or a single value")
    sim.add_argument("--trials", type=int)
    sim.add_argument("--max-queries", type=int)
    sim.add_argument("--candidates", choices=CANDIDATE_SETS)
    sim.add_argument("--seed", type=int)
    sim.add_argument("--out", help="results file (CSV or JSON)")
    sim.add_argument("--format", choices=("csv", "json"))
    sim.add_argument("-v", "--verbose", action="store_true", help="log progress per SNR point")
    return parser


def load_config(path) -> dict:
    data = yaml.safe_load(Path(path).read_text())
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ValueError(f"{path}: expected a flat key-value mapping")
    out = {}
    for key, value in data.items():
        dest = str(key).replace("-", "_")
        if dest not in _FIELDS:
            raise ValueError(f"{path}: unknown key {key!r}")
        if isinstance(value, (dict, list)):
            raise ValueError(f"{path}: value of {key!r} must be a scalar")
        out[dest] = value
    return out


def config_from_args(args: argparse.Namespace) -> tuple[SimConfig, list]:
    values = load_config(args.config) if args.config else {}
    for dest in _FIELDS:
        v = getattr(args, dest)
        if v is not None:
            values[dest] = v
    methods = [m.strip() for m in str(values.get("method", "method1")).split(",") if m.strip()]
    values["method"] = methods[0] if methods else ""
    if "snr" in values:
        values["snr"] = str(values["snr"])
    for dest, cast in _CASTS.items():
        if values.get(dest) is not None:
            values[dest] = cast(values[dest])
    cfg = SimConfig(**{_FIELDS[k]: v for k, v in values.items()})
    cfg.validate(methods)
    return cfg, methods


def _summary(results, methods, trials) -> str:
    lines = []
    for m in methods:
        rows = [r for r in results if r.method == m]
        for r in rows:
            lines.append(f"{m:17s} {r.snr_db:6.2f} dB  bler={r.bler:.4g} "
                         f"[{r.ci_lo:.3g}, {r.ci_hi:.3g}]  queries={r.mean_queries:.1f}")
        at = snr_at_bler([r.snr_db for r in rows], [r.bler for r in rows], 1e-2, trials)
        lines.append(f"{m:17s} SNR at BLER 1e-2: {at:.2f} dB")
    return "\n".join(lines)


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(levelname)s %(message)s")
    try:
        cfg, methods = config_from_args(args)
    except (ValueError, TypeError, OSError, yaml.YAMLError) as exc:
        parser.error(str(exc))
    try:
        results = run_sweep(cfg, methods)
    except OSError as exc:
        print(f"jointgrand: {exc}", file=sys.stderr)
        return 1
    print(_summary(results, methods, cfg.trials))
    return 0


if __name__ == "__main__":
    sys.exit(main())
