"""
File: cli.py
Description: command-line entry point. Loads a problem document, runs the pipeline and
             writes trajectory, profile, report and plot-data artifacts. Diagnostics go to
             standard error, a one-line JSON summary to standard output.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np
import pandas as pd

from .oracle.dp import DpSettings, dp_solve
from .oracle.probes import DEFAULT_PROBE_BOX, convexity_probe, equivalence_probe
from .output.serialize import (format_from_path, frame_to_csv, parse_trajectory, read_text,
                               serialize, write_text)
from .output.trajout import reconstruct_time, sample_trajectory, verify
from .path.pathspec import discretize
from .path.problem import ProblemInstance, load_problem
from .solver.profilesolver import backward_forward, build_speed_bounds, constraint_cache, solve
from .utils.consts import DEFAULT_DT, DEFAULT_MARGIN_DEG, PACKAGE_LOGGER
from .utils.custom_logging.logging_setup import setup_logger
from .utils.errors import (DegenerateThrust, Infeasible, InfeasibleBounds, IrregularPath,
                           LandmarkTooClose, ParseError, SamplingExhausted, SingularProfile,
                           SmoothingDegenerate, ValidationError)

logger = logging.getLogger(PACKAGE_LOGGER)

SUBCOMMANDS = ("solve", "verify", "oracle-dp", "oracle-probes")
FORMAT_CHOICES = ("json", "csv", "both")

EXIT_OK = 0
EXIT_PROBE_FAILED = 1
EXIT_INFEASIBLE = 2
EXIT_INVALID = 3
EXIT_IO = 4

_INVALID_ERRORS = (ParseError, ValidationError, IrregularPath, LandmarkTooClose,
                   SmoothingDegenerate, DegenerateThrust, SingularProfile)


@dataclass
class RunConfig:
    subcommand: str
    input: Optional[str]
    out_dir: str
    format: str = "json"
    dt: float = DEFAULT_DT
    margin_deg: float = DEFAULT_MARGIN_DEG
    grid_n: Optional[int] = None
    sigma: Optional[float] = None
    eta: Optional[float] = None
    eps_h: Optional[float] = None
    trajectory: Optional[str] = None
    h_levels: int = 400
    h_cap: Optional[float] = None
    trials: int = 10_000
    seed: int = 0

    def __post_init__(self):
        if self.subcommand not in SUBCOMMANDS:
            raise ValidationError("subcommand", f"must be one of {SUBCOMMANDS}, got {self.subcommand!r}")
        if self.format not in FORMAT_CHOICES:
            raise ValidationError("format", f"must be one of {FORMAT_CHOICES}, got {self.format!r}")
        if not self.dt > 0.0:
            raise ValidationError("dt", f"must be > 0, got {self.dt}")
        if not self.margin_deg >= 0.0:
            raise ValidationError("margin_deg", f"must be >= 0, got {self.margin_deg}")
        if self.input is None and self.subcommand != "oracle-probes":
            raise ValidationError("input", f"{self.subcommand} needs --input")
        if self.subcommand == "verify" and self.trajectory is None:
            raise ValidationError("trajectory", "verify needs --trajectory")

    @property
    def overrides(self) -> dict:
        return {"grid_n": self.grid_n, "sigma": self.sigma, "eta": self.eta, "eps_h": self.eps_h}

    @property
    def formats(self) -> List[str]:
        return ["json", "csv"] if self.format == "both" else [self.format]


def _summary(status: str, **fields) -> dict:
    summary = {"status": status, "total_time": None, "stage1_time": None, "max_fov_slack_deg": None}
    summary.update(fields)
    return summary


def _load_instance(config: RunConfig) -> ProblemInstance:
    instance = load_problem(read_text(config.input))
    return instance.with_overrides(**config.overrides)


def _run_solve(config: RunConfig) -> dict:
    instance = _load_instance(config)
    solution = solve(instance)
    grid = solution.profile.grid
    _, stage1_time = reconstruct_time(grid, solution.stage1_profile)
    trajectory = sample_trajectory(instance, grid, solution.profile, solution.schedule, config.dt)
    report = verify(trajectory, instance, config.margin_deg)

    for fmt in config.formats:
        write_text(os.path.join(config.out_dir, f"trajectory.{fmt}"), serialize(trajectory, report, fmt))
    write_text(os.path.join(config.out_dir, "profile_stage1.csv"), frame_to_csv(solution.stage1_profile.to_frame()))
    write_text(os.path.join(config.out_dir, "profile_stage2.csv"), frame_to_csv(solution.profile.to_frame()))
    write_text(os.path.join(config.out_dir, "report.json"), json.dumps(report.to_dict(), indent=1))
    plot_data = pd.DataFrame({"s": grid.s, "h_stage1": solution.stage1_profile.h, "h_stage2": solution.profile.h})
    write_text(os.path.join(config.out_dir, "speed_profile_plotdata.csv"), frame_to_csv(plot_data))

    logger.info(f"solved: T={trajectory.total_time:.6g}s (stage 1 {stage1_time:.6g}s), "
                f"{report.total_violations} violations")
    return _summary("ok", total_time=trajectory.total_time, stage1_time=stage1_time,
                    max_fov_slack_deg=report.max_fov_excess_deg, violations=report.violations,
                    settings=instance.solver_settings(), overrides=config.overrides)


def _run_verify(config: RunConfig) -> dict:
    instance = _load_instance(config)
    trajectory, _ = parse_trajectory(read_text(config.trajectory), format_from_path(config.trajectory))
    report = verify(trajectory, instance, config.margin_deg)
    write_text(os.path.join(config.out_dir, "report.json"), json.dumps(report.to_dict(), indent=1))
    return _summary("ok", total_time=trajectory.total_time, max_fov_slack_deg=report.max_fov_excess_deg,
                    violations=report.violations, overrides=config.overrides)


def _run_oracle_dp(config: RunConfig) -> dict:
    instance = _load_instance(config)
    grid = discretize(instance)
    swept = backward_forward(instance, grid, stage=1)
    lattice = dp_solve(instance, grid, DpSettings(h_levels=config.h_levels, h_cap=config.h_cap))
    _, swept_time = reconstruct_time(grid, swept)
    _, lattice_time = reconstruct_time(grid, lattice)
    write_text(os.path.join(config.out_dir, "profile_dp.csv"), frame_to_csv(lattice.to_frame()))
    write_text(os.path.join(config.out_dir, "profile_stage1.csv"), frame_to_csv(swept.to_frame()))
    return _summary("ok", total_time=lattice_time, stage1_time=swept_time,
                    relative_gap=abs(lattice_time - swept_time) / swept_time,
                    max_h_gap=float(np.max(np.abs(lattice.h - swept.h))), overrides=config.overrides)


def _run_oracle_probes(config: RunConfig) -> dict:
    instance = _load_instance(config) if config.input is not None else None
    stats = equivalence_probe(config.trials, seed=config.seed, yaw=instance.rig.yaw if instance else 0.0)
    results = {"equivalence": stats.to_dict(), "convexity": []}
    convex = True
    if instance is not None:
        grid = discretize(instance)
        cache = constraint_cache(instance, grid, stage=1, bounds=build_speed_bounds(instance, grid))
        rng = np.random.default_rng(config.seed)
        for i in sorted(set(np.linspace(0, grid.n - 1, min(5, grid.n)).astype(int).tolist())):
            h_box = (cache[i].box[0], min(cache[i].box[1], DEFAULT_PROBE_BOX[0][1]))
            try:
                result = convexity_probe(cache[i], trials=1000, box=(h_box, DEFAULT_PROBE_BOX[1]), rng=rng)
            except SamplingExhausted:
                results["convexity"].append({"node": i, "convex": None})
                continue
            convex &= result.convex
            results["convexity"].append({"node": i, "convex": result.convex, "trials": result.trials})
    write_text(os.path.join(config.out_dir, "probes.json"), json.dumps(results, indent=1))
    status = "ok" if convex and stats.disagreements == 0 else "probe_failed"
    return _summary(status, disagreements=stats.disagreements, probes=results)


_HANDLERS = {"solve": _run_solve, "verify": _run_verify,
             "oracle-dp": _run_oracle_dp, "oracle-probes": _run_oracle_probes}


def _failure(error: Exception) -> tuple:
    if isinstance(error, (Infeasible, InfeasibleBounds)):
        return EXIT_INFEASIBLE, "infeasible"
    if isinstance(error, _INVALID_ERRORS):
        return EXIT_INVALID, "invalid"
    return EXIT_IO, "io_error"


def run(config: RunConfig) -> int:
    """Execute one subcommand; returns the process exit status."""
    try:
        setup_logger(config.out_dir, config.subcommand.replace("-", "_"))
        summary = _HANDLERS[config.subcommand](config)
        status = EXIT_OK if summary["status"] == "ok" else EXIT_PROBE_FAILED
    except (Infeasible, InfeasibleBounds, OSError, *_INVALID_ERRORS) as e:
        status, label = _failure(e)
        details = {"error": str(e)}
        if isinstance(e, Infeasible):
            details.update(stage=e.stage, phase=e.phase, index=e.index)
        if getattr(e, "field", None) is not None:
            details["field"] = e.field
        print(f"fovtopp {config.subcommand}: {e}", file=sys.stderr)
        logger.error(f"{config.subcommand} failed: {e}")
        summary = _summary(label, overrides=config.overrides, **details)
    print(json.dumps(summary))
    return status


def parse_args(argv: Optional[Sequence[str]] = None) -> argparse.Namespace:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--input", type=str, default=None, help="Problem document (JSON).")
    common.add_argument("--out-dir", type=str, default=".", help="Directory for artifacts and logs (default: .).")
    common.add_argument("--format", type=str, choices=FORMAT_CHOICES, default="json",
                        help="Trajectory format (default: json).")
    common.add_argument("--dt", type=float, default=DEFAULT_DT, help=f"Sample step in seconds (default: {DEFAULT_DT}).")
    common.add_argument("--margin-deg", type=float, default=DEFAULT_MARGIN_DEG,
                        help=f"Allowed FoV excess on the sampled attitude (default: {DEFAULT_MARGIN_DEG}).")
    common.add_argument("--grid-n", type=int, default=None, help="Override solver.grid_n.")
    common.add_argument("--sigma", type=float, default=None, help="Override solver.sigma.")
    common.add_argument("--eta", type=float, default=None, help="Override solver.eta.")
    common.add_argument("--eps-h", type=float, default=None, help="Override solver.eps_h.")

    parser = argparse.ArgumentParser(prog="fovtopp",
                                     description="Perception-aware time-optimal speed profiles for quadrotors.")
    sub = parser.add_subparsers(dest="subcommand", required=True)
    sub.add_parser("solve", parents=[common], help="Solve and write trajectory, profiles and report.")
    verify_parser = sub.add_parser("verify", parents=[common], help="Re-check a trajectory against a problem.")
    verify_parser.add_argument("--trajectory", type=str, required=True, help="Trajectory file (.json or .csv).")
    dp_parser = sub.add_parser("oracle-dp", parents=[common], help="Compare the sweeps with the lattice DP.")
    dp_parser.add_argument("--h-levels", type=int, default=400, help="Lattice levels per node (default: 400).")
    dp_parser.add_argument("--h-cap", type=float, default=None, help="Top lattice level (default: max B_u).")
    probe_parser = sub.add_parser("oracle-probes", parents=[common], help="Run the convexity and equivalence probes.")
    probe_parser.add_argument("--trials", type=int, default=10_000, help="Equivalence trials (default: 10000).")
    probe_parser.add_argument("--seed", type=int, default=0, help="Random seed (default: 0).")

    if argv is None:
        argv = sys.argv[1:] if sys.argv[1:] else ["--help"]
    return parser.parse_args(args=argv)


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = parse_args(argv)
    try:
        config = RunConfig(subcommand=args.subcommand, input=args.input, out_dir=args.out_dir,
                           format=args.format, dt=args.dt, margin_deg=args.margin_deg,
                           grid_n=args.grid_n, sigma=args.sigma, eta=args.eta, eps_h=args.eps_h,
                           trajectory=getattr(args, "trajectory", None),
                           h_levels=getattr(args, "h_levels", 400), h_cap=getattr(args, "h_cap", None),
                           trials=getattr(args, "trials", 10_000), seed=getattr(args, "seed", 0))
    except ValidationError as e:
        print(f"fovtopp: {e}", file=sys.stderr)
        print(json.dumps(_summary("invalid", error=str(e), field=e.field)))
        return EXIT_INVALID
    return run(config)


if __name__ == "__main__":
    sys.exit(main())
