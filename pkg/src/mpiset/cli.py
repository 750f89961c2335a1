"""Command-line pipeline: solve the hierarchy from a config file and write
certificates, validation reports, a summary and level-set grids.

Exit status is 0 only if every requested solve returned optimal and
validation recorded no invariance failures; config errors exit 2.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .config import MODE_BOTH, ConfigError, RunConfig
from .hierarchy import (
    MODE_FORCED,
    MODE_SLACK,
    U_NEAR_ZERO,
    Certificate,
    HierarchyRun,
    run_hierarchy,
)
from .sets import Membership, SemialgebraicSet
from .validation import ValidationConfig, estimate_avg_exit_time, validate_certificate

log = logging.getLogger(__name__)

# auto time-bound selection: T = AUTO_T_FACTOR * estimated average exit time
AUTO_T_FACTOR = 2.0
AUTO_T_SAMPLES = 2_000
AUTO_T_HORIZON = 50.0
AUTO_T_MAX_CENSORED = 0.01


def export_levelset_grid(
    cert: Certificate,
    X: SemialgebraicSet,
    resolution: int,
    anchor: list[float] | None = None,
) -> list[tuple[float, float, float, bool]]:
    """Rows (x1, x2, v, interior) over the bounding box of the ball, row-major.

    For n > 2 the grid varies the first two coordinates with the rest
    pinned to the anchor point (default origin).
    """
    if resolution < 2:
        raise ValueError(f"resolution must be >= 2, got {resolution}")
    if cert.v is None:
        raise ValueError("certificate has no v polynomial")
    R = X.require_ball()
    n = X.n
    anchor = list(anchor) if anchor is not None else [0.0] * n
    axis = np.linspace(-R, R, resolution)
    rows: list[tuple[float, float, float, bool]] = []
    for a in axis:
        for b in axis:
            x = list(anchor)
            x[0] = float(a)
            x[1 % n] = float(b)
            rows.append(
                (
                    float(a),
                    float(b),
                    float(cert.v.eval(x)),
                    X.contains(x) is Membership.INTERIOR,
                )
            )
    return rows


def write_levelset_csv(path: Path, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x1", "x2", "v", "interior"])
        for x1, x2, v, interior in rows:
            writer.writerow([repr(x1), repr(x2), repr(v), "1" if interior else "0"])


def _write_json(path: Path, payload: dict) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _resolve_time_bound(config: RunConfig, system, X) -> tuple[float, dict | None]:
    if config.time_bound != "auto":
        return float(config.time_bound), None
    if config.mode == MODE_FORCED:
        return 0.0, None
    est = estimate_avg_exit_time(
        system, X, AUTO_T_SAMPLES,
        horizon=AUTO_T_HORIZON, seed=config.seed, step=config.validation.step,
    )
    if est["censored_fraction"] > AUTO_T_MAX_CENSORED:
        raise ConfigError(
            f"cannot auto-select a time bound: {est['censored_fraction']:.1%} of "
            f"trajectories had not left X by t = {AUTO_T_HORIZON}; the average "
            "exit time estimate is unreliable. Supply time_bound explicitly."
        )
    if est["tau_bar"] <= 0.0:
        raise ConfigError(
            "cannot auto-select a time bound: no sampled trajectory leaves X, "
            "so any bound works but none is implied. Supply time_bound "
            "explicitly or run in forced mode."
        )
    return AUTO_T_FACTOR * est["tau_bar"], est


def _mode_suffix(mode: str, primary: str) -> str:
    return "" if mode == primary else f"_{mode}"


def run(config: RunConfig) -> int:
    """Execute the configured pipeline; returns the process exit status."""
    system = config.build_system()
    X = config.build_set()
    T, tau_est = _resolve_time_bound(config, system, X)

    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    modes = {
        MODE_SLACK: [MODE_SLACK],
        MODE_FORCED: [MODE_FORCED],
        MODE_BOTH: [MODE_SLACK, MODE_FORCED],
    }[config.mode]
    primary = modes[0]
    ks = list(range(config.k_min, config.k_max + 1))

    runs: dict[str, HierarchyRun] = {}
    notes: list[str] = []
    all_optimal = True
    invariance_failures = 0
    validations: dict[tuple[str, int], dict] = {}

    for mode in modes:
        mode_ks = ks
        if mode == MODE_FORCED and config.mode == MODE_BOTH:
            slack_run = runs[MODE_SLACK]
            mode_ks = [
                c.k for c in slack_run.certificates
                if c.ok and c.u <= U_NEAR_ZERO
            ]
            if not mode_ks:
                notes.append(
                    "no slack-mode order reached the near-zero-u threshold "
                    f"{U_NEAR_ZERO:g}; forced-mode cross-check skipped"
                )
                continue
        hrun = run_hierarchy(
            system, X, mode_ks, T, mode,
            options=config.solver,
            mc_samples=config.mc_samples,
            moment_seed=config.seed,
        )
        runs[mode] = hrun
        for cert in hrun.certificates:
            suffix = _mode_suffix(mode, primary)
            cert.save(out_dir / f"certificate_k{cert.k}{suffix}.json")
            if not cert.ok:
                all_optimal = False
                continue
            if cert.degenerate:
                notes.append(
                    f"order {cert.k} ({mode}) certificate is degenerate; "
                    "validation and level-set export skipped"
                )
                continue
            rows = export_levelset_grid(cert, X, config.grid, config.slice_anchor)
            write_levelset_csv(out_dir / f"levelset_k{cert.k}{suffix}.csv", rows)
            if config.validation_enabled:
                report = validate_certificate(cert, system, X, config.validation)
                validations[(mode, cert.k)] = report.to_dict()
                invariance_failures += report.invariance_failures
                _write_json(
                    out_dir / f"validation_k{cert.k}{suffix}.json", report.to_dict()
                )

    summary = {
        "config": config.to_dict(),
        "time_bound": T,
        "tau_estimate": tau_est,
        "runs": {mode: hrun.to_dict() for mode, hrun in runs.items()},
        "validation": {
            f"{mode}_k{k}": {
                "passed": rep["passed"],
                "invariance_failures": rep["invariance"]["failures"],
                "volume": rep["volume"]["value"],
            }
            for (mode, k), rep in validations.items()
        },
        "notes": notes,
        "all_solves_optimal": all_optimal,
        "invariance_failures": invariance_failures,
    }
    exit_status = 0 if all_optimal and invariance_failures == 0 else 1
    summary["exit_status"] = exit_status
    _write_json(out_dir / "summary.json", summary)

    for mode, hrun in runs.items():
        for cert in hrun.certificates:
            gap = cert.solver_stats.get("duality_gap")
            gap_text = f"{gap:.2e}" if gap is not None else "n/a"
            log.info(
                "mode=%s k=%d status=%s objective=%.9g u=%.3e gap=%s%s",
                mode, cert.k, cert.status.value, cert.objective, cert.u,
                gap_text, " [degenerate]" if cert.degenerate else "",
            )
    return exit_status


def build_arg_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mpiset",
        description=(
            "Compute certified inner approximations of the maximal positively "
            "invariant set of a polynomial ODE inside a semialgebraic set."
        ),
    )
    parser.add_argument("--config", required=True, help="YAML run configuration")
    parser.add_argument(
        "--degree", type=int, metavar="K",
        help="solve only relaxation order K (overrides k_min/k_max)",
    )
    parser.add_argument(
        "--time-bound", type=float, metavar="T", help="override the time bound"
    )
    parser.add_argument(
        "--mode", choices=["slack", "forced", "both"], help="override the mode"
    )
    parser.add_argument(
        "--validate",
        action=argparse.BooleanOptionalAction,
        default=None,
        help="run (or skip) certificate validation",
    )
    parser.add_argument("--seed", type=int, metavar="N", help="override the seed")
    parser.add_argument("--out", metavar="DIR", help="override the output directory")
    parser.add_argument(
        "--grid", type=int, metavar="N", help="override the level-set grid resolution"
    )
    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(message)s")
    args = build_arg_parser().parse_args(argv)
    try:
        config = RunConfig.from_yaml(args.config)
        if args.degree is not None:
            config.k_min = config.k_max = args.degree
        if args.time_bound is not None:
            config.time_bound = args.time_bound
        if args.mode is not None:
            config.mode = args.mode
        if args.validate is not None:
            config.validation_enabled = args.validate
        if args.seed is not None:
            config.seed = args.seed
            config.validation.seed = args.seed
        if args.out is not None:
            config.out_dir = args.out
        if args.grid is not None:
            config.grid = args.grid
        return run(config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
