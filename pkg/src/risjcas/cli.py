"""Configuration-driven experiment runner.

Subcommands: ``sweep`` (Pareto trade-off runs), ``quant-study``
(quantized-information sweep with/without self-interference), and
``validate`` (config dry run). Every run writes CSV results plus a
manifest echoing the raw and linear-scale config with a content hash.

Exit codes: 0 ok, 2 config problem, 3 numerical abort.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import traceback
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np

from . import __version__
from .config import ExperimentConfig, load_config
from .errors import ConfigError, NumericalAbort, RisJcasError, SingularReflection
from .optimizer import alternating_optimize
from .quantization import si_quantization_study

_FLOAT_FIELDS_AS_IS = {"seed", "bits", "si_flag", "seed_count", "iteration", "M"}


def _fmt(value) -> str:
    """Full-precision scientific notation so CSVs re-parse exactly."""
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, float):
        return format(value, ".16e")
    return str(value)


def _write_csv(path: Path, fieldnames: Sequence[str], rows: Sequence[dict]):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(fieldnames)
        for row in rows:
            writer.writerow([_fmt(row[name]) for name in fieldnames])


def _write_manifest(path: Path, config: ExperimentConfig, seeds: Sequence[int]):
    manifest = {
        "version": __version__,
        "config": config.to_dict(),
        "config_linear": config.linear_echo(),
        "seeds": list(seeds),
        "content_hash": config.content_hash(__version__),
    }
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _run_one_seed(config: ExperimentConfig, s, mats, seed: int):
    channels = config.channels(seed)
    result = alternating_optimize(
        config.mode, config.model, config.scene(), mats, channels, s,
        config.optimizer_config(), config.power_watts)
    return result


def run_sweep(config: ExperimentConfig, out_dir: Path, seeds: Sequence[int],
              threads: int = 1) -> int:
    """Optimize per seed and write pareto.csv, trace.csv and the manifest."""
    out_dir.mkdir(parents=True, exist_ok=True)
    mats = config.sensing_matrices()
    s = config.scattering(cache_path=out_dir / "coupling_cache.npz")

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(lambda sd: _run_one_seed(config, s, mats, sd), seeds))
    else:
        results = [_run_one_seed(config, s, mats, sd) for sd in seeds]

    pareto_rows: List[dict] = []
    trace_rows: List[dict] = []
    for seed, result in zip(seeds, results):
        for fi, mi, alpha in result.pareto_points:
            pareto_rows.append({
                "alpha": alpha, "fi_trace": fi, "mi": mi,
                "model": config.model, "mode": config.mode,
                "M": config.n_ris,
                "spacing": config.ris_spacing_wavelengths, "seed": seed,
            })
        for rec in result.trace_records:
            trace_rows.append({
                "seed": seed, "iteration": rec.iteration, "alpha": rec.alpha,
                "objective": rec.objective, "fi_trace": rec.fi_trace,
                "mi": rec.mi, "step_size": rec.step_size,
            })
    _write_csv(out_dir / "pareto.csv",
               ["alpha", "fi_trace", "mi", "model", "mode", "M", "spacing", "seed"],
               pareto_rows)
    _write_csv(out_dir / "trace.csv",
               ["seed", "iteration", "alpha", "objective", "fi_trace", "mi",
                "step_size"],
               trace_rows)
    _write_manifest(out_dir / "manifest.json", config, seeds)
    return 0


def run_quantization_study(config: ExperimentConfig, out_dir: Path,
                           seeds: Sequence[int]) -> int:
    """Optimize once, then sweep quantized information over the grid.

    The design is the unquantized optimum of the first seed's channels;
    the covariance of the grid point closest to quantization.design_alpha
    is used for the transmit batch.
    """
    if config.mode != "monostatic":
        raise ConfigError("quant-study: mode must be monostatic (self-interference study)")
    if not config.quantization.bits:
        raise ConfigError("quant-study: quantization.bits must not be empty")
    out_dir.mkdir(parents=True, exist_ok=True)
    mats = config.sensing_matrices()
    s = config.scattering(cache_path=out_dir / "coupling_cache.npz")
    channels = config.channels(seeds[0])
    result = alternating_optimize(
        config.mode, config.model, config.scene(), mats, channels, s,
        config.optimizer_config(), config.power_watts)
    grid = list(config.optimizer_config().alpha_grid)
    k = int(np.argmin([abs(a - config.quantization.design_alpha) for a in grid]))
    from .coupling import effective_reflection
    theta = effective_reflection(result.upsilon_final, s, config.model)

    rows = si_quantization_study(
        config.scene(), mats, channels, theta, result.rx_per_alpha[k].r,
        noise_grid=config.quantization.noise_grid,
        bits_list=config.quantization.bits,
        seeds=list(range(config.quantization.batch_seeds)),
        batch_size=config.quantization.batch_size,
    )
    _write_csv(out_dir / "quantization.csv",
               ["noise_var", "bits", "si_flag", "seed_count", "fi_trace_mean",
                "fi_trace_std"],
               rows)
    _write_manifest(out_dir / "manifest.json", config, seeds)
    return 0


def validate(config: ExperimentConfig) -> List[str]:
    return config.validate()


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="risjcas",
        description="RIS-assisted joint communication and sensing experiments")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("sweep", "quant-study", "validate"):
        p = sub.add_parser(name)
        p.add_argument("--config", type=Path, default=None,
                       help="YAML config file (defaults apply when omitted)")
        if name != "validate":
            p.add_argument("--out", type=Path, default=Path("runs"),
                           help="output directory")
            p.add_argument("--seeds", type=int, default=None,
                           help="number of seeds (0..n-1); overrides config")
            p.add_argument("--threads", type=int, default=1)
            p.add_argument("--model", choices=["pc", "conv"], default=None,
                           help="override the reflection model")
            p.add_argument("--mode", choices=["mono", "bi"], default=None,
                           help="override the radar configuration")
    return parser


def _load(args) -> ExperimentConfig:
    config = load_config(args.config) if args.config else ExperimentConfig()
    if getattr(args, "model", None):
        config.model = {"pc": "physically_consistent", "conv": "conventional"}[args.model]
    if getattr(args, "mode", None):
        config.mode = {"mono": "monostatic", "bi": "bistatic"}[args.mode]
    problems = config.validate()
    if problems:
        raise ConfigError("; ".join(problems))
    return config


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        config = _load(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    if args.command == "validate":
        print("ok")
        return 0

    n_seeds = args.seeds if args.seeds is not None else config.seeds
    if n_seeds < 1:
        print("config error: seeds must be >= 1", file=sys.stderr)
        return 2
    seeds = list(range(n_seeds))
    try:
        if args.command == "sweep":
            return run_sweep(config, args.out, seeds, threads=args.threads)
        return run_quantization_study(config, args.out, seeds)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (NumericalAbort, SingularReflection) as exc:
        args.out.mkdir(parents=True, exist_ok=True)
        diag_path = args.out / "abort_diagnostics.json"
        with open(diag_path, "w") as fh:
            json.dump({
                "error": str(exc),
                "diagnostics": getattr(exc, "diagnostics", {}),
                "traceback": traceback.format_exc(),
            }, fh, indent=2)
        print(f"numerical abort: {exc} (details in {diag_path})", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
