"""Command-line experiment runner.

Usage::

    cauchywave synthesize  --config exp.json --out DIR [--seed N]
    cauchywave reconstruct --config exp.json --out DIR [--dataset PATH]
    cauchywave sweep       --config exp.json --out DIR [--seed N]
    cauchywave selftest    [--sigma-min S]

Exit codes: 0 success, 1 validation error, 2 numerical failure, 3 I/O error.
"""

import argparse
import json
import logging
import os
import platform
import sys
import time

import numpy as np
import scipy

from . import __version__
from .config import ExperimentConfig, load_config, parse_config
from .errors import (
    ConfigurationError,
    DataError,
    DomainError,
    GeometryError,
    KernelRangeError,
    NumericalError,
    ValidationError,
)
from .forward import add_noise, read_dataset_csv, sample_cauchy_data, write_dataset_csv
from .reconstruct import h_sweep, write_sweep_csv
from .selftest import run_selftest

logger = logging.getLogger("cauchywave")

__all__ = ["main", "run_synthesize", "run_reconstruct", "run_sweep", "run_selftest_cli"]

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL, EXIT_IO = 0, 1, 2, 3

DATASET_FILE = "dataset.csv"
META_FILE = "dataset.meta.json"
SWEEP_FILE = "sweep.csv"
SUMMARY_FILE = "summary.json"
MANIFEST_FILE = "manifest.json"

# config sections that fix the chart; a dataset must agree on all of them
GEOMETRY_KEYS = ("dimension", "profile", "target", "aperture")


def _dump_json(obj, path):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_manifest(out_dir, command, cfg: ExperimentConfig, timings, outputs):
    manifest = {
        "command": command,
        "config": cfg.raw,
        "versions": {
            "cauchywave": __version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
            "scipy": scipy.__version__,
        },
        "timings_s": timings,
        "outputs": outputs,
    }
    _dump_json(manifest, os.path.join(out_dir, MANIFEST_FILE))


def run_synthesize(cfg: ExperimentConfig, out_dir=None):
    """Sample the configured field on the aperture and write the dataset.

    Returns the path of the dataset CSV.  The metadata sidecar is the full
    configuration plus the ground truth value.
    """
    out_dir = out_dir or cfg.output_dir
    os.makedirs(out_dir, exist_ok=True)
    t0 = time.perf_counter()
    chart = cfg.build_chart()
    data = sample_cauchy_data(cfg.model, chart)
    data = add_noise(data, cfg.noise_level, cfg.seed)
    t1 = time.perf_counter()
    path = os.path.join(out_dir, DATASET_FILE)
    write_dataset_csv(data, path)
    meta = dict(cfg.raw)
    meta["ground_truth"] = data.ground_truth
    _dump_json(meta, os.path.join(out_dir, META_FILE))
    logger.info("wrote %d samples to %s", data.n_samples, path)
    _write_manifest(out_dir, "synthesize", cfg, {"synthesize": t1 - t0, "write": time.perf_counter() - t1},
                    [DATASET_FILE, META_FILE])
    return path


def _load_dataset(cfg: ExperimentConfig, path):
    meta_path = os.path.join(os.path.dirname(path) or ".", META_FILE)
    meta = {}
    if os.path.exists(meta_path):
        with open(meta_path) as fh:
            meta = json.load(fh)
        mismatched = [k for k in GEOMETRY_KEYS if meta.get(k) != cfg.raw.get(k)]
        if mismatched:
            raise DataError(f"dataset metadata disagrees with the configuration in: {', '.join(mismatched)}")
    else:
        logger.warning("no metadata next to %s; geometry taken from the configuration", path)
    return read_dataset_csv(path, cfg.build_chart(), meta)


def run_reconstruct(cfg: ExperimentConfig, dataset_path=None, out_dir=None, data=None):
    """Run the h-sweep on a dataset and write ``sweep.csv`` and ``summary.json``.

    Returns the :class:`~cauchywave.reconstruct.SweepResult`.
    """
    out_dir = out_dir or cfg.output_dir
    os.makedirs(out_dir, exist_ok=True)
    t0 = time.perf_counter()
    if data is None:
        data = _load_dataset(cfg, dataset_path or os.path.join(out_dir, DATASET_FILE))
    t1 = time.perf_counter()
    result = h_sweep(data, cfg.h_max, cfg.ratio, cfg.count, cfg.kernel_settings, workers=cfg.workers)
    t2 = time.perf_counter()
    write_sweep_csv(result, os.path.join(out_dir, SWEEP_FILE))
    summary = {
        "estimate": result.estimate,
        "h_star": result.h_star,
        "ground_truth": result.ground_truth,
        "scale": result.scale,
        "selected_abs_err": result.selected_abs_err,
        "selected_rel_err": result.selected_rel_err,
        "boundary_term": result.B,
        "schedule": result.schedule,
        "diagnostics": result.diagnostics,
    }
    _dump_json(summary, os.path.join(out_dir, SUMMARY_FILE))
    _write_manifest(out_dir, "reconstruct", cfg, {"load": t1 - t0, "sweep": t2 - t1}, [SWEEP_FILE, SUMMARY_FILE])
    if result.estimate is None:
        raise NumericalError(f"sweep produced too few widths to select a limit: {result.diagnostics}")
    if result.diagnostics.get("no_plateau"):
        logger.warning("%s", result.diagnostics["warning"])
    rel = result.selected_rel_err
    logger.info("estimate %.10g at h*=%.4g%s", result.estimate, result.h_star,
                "" if rel is None else f" (relative error {rel:.3e})")
    return result


def run_sweep(cfg: ExperimentConfig, out_dir=None):
    """Synthesize and reconstruct in one step."""
    out_dir = out_dir or cfg.output_dir
    t0 = time.perf_counter()
    path = run_synthesize(cfg, out_dir)
    result = run_reconstruct(cfg, path, out_dir)
    _write_manifest(out_dir, "sweep", cfg, {"total": time.perf_counter() - t0},
                    [DATASET_FILE, META_FILE, SWEEP_FILE, SUMMARY_FILE])
    return result


def run_selftest_cli(sigma_min=None):
    overrides = None if sigma_min is None else {"sigma_min": sigma_min}
    report = run_selftest(overrides)
    for line in report.lines():
        print(line)
    n_fail = len(report.failures)
    print(f"{len(report.results) - n_fail}/{len(report.results)} checks passed")
    return EXIT_OK if report.passed else EXIT_NUMERICAL


def build_parser():
    parser = argparse.ArgumentParser(prog="cauchywave", description="Wave-field reconstruction from boundary Cauchy data.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, seed=True):
        p.add_argument("--config", required=True, help="experiment configuration (JSON)")
        p.add_argument("--out", help="output directory (overrides output_dir)")
        if seed:
            p.add_argument("--seed", type=int, help="noise seed (overrides noise.seed)")
        p.add_argument("--workers", type=int, help="threads for the integral term (overrides workers)")
        p.add_argument("--quiet", action="store_true", help="only report warnings and errors")

    common(sub.add_parser("synthesize", help="sample Cauchy data of the configured field"))
    p = sub.add_parser("reconstruct", help="run the h-sweep on an existing dataset")
    common(p)
    p.add_argument("--dataset", help=f"dataset CSV (default OUT/{DATASET_FILE})")
    common(sub.add_parser("sweep", help="synthesize then reconstruct"))
    p = sub.add_parser("selftest", help="run reduced invariant suites")
    p.add_argument("--sigma-min", type=float, help="override the kernel's sigma_min (fault injection)")
    p.add_argument("--quiet", action="store_true")
    return parser


def _config_from_args(args):
    cfg = load_config(args.config)
    raw = cfg.raw
    changed = False
    if getattr(args, "seed", None) is not None:
        raw["noise"]["seed"] = args.seed
        changed = True
    if args.workers is not None:
        raw["workers"] = args.workers
        changed = True
    if args.out:
        raw["output_dir"] = args.out
        changed = True
    return parse_config(raw) if changed else cfg


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING if args.quiet else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        if args.command == "selftest":
            return run_selftest_cli(args.sigma_min)
        cfg = _config_from_args(args)
        if args.command == "synthesize":
            run_synthesize(cfg)
        elif args.command == "reconstruct":
            run_reconstruct(cfg, args.dataset)
        else:
            run_sweep(cfg)
    except (ValidationError, ConfigurationError, GeometryError, DataError, DomainError) as exc:
        logger.error("validation error: %s", exc)
        return EXIT_VALIDATION
    except (KernelRangeError, NumericalError, FloatingPointError) as exc:
        logger.error("numerical failure: %s", exc)
        return EXIT_NUMERICAL
    except OSError as exc:
        logger.error("I/O error: %s", exc)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
