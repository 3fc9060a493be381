"""Command line interface.

Subcommands mirror the analysis pipeline: ``simulate`` renders one shot to a
profile CSV, ``fit`` extracts the fringe parameters from a profile CSV,
``allan`` turns a phase CSV into an Allan-deviation CSV, ``overlap-scan``
maps contrast against the post-beamsplitter wait, ``campaign`` executes a
full seeded Monte Carlo campaign, and ``figure`` aggregates campaign
directories into plot-ready CSVs.

Exit codes: 0 on success, 2 for configuration problems, 3 for numerical
failures (non-convergent fits, degenerate scans).
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .allan import ALLAN_CSV_HEADER, allan_deviation
from .campaign import (
    ConfigError,
    figure_data,
    load_campaign_config,
    run_campaign,
)
from .fitting import (
    FIT_CSV_HEADER,
    FringeResolvabilityError,
    PhaseSeries,
    fit_spatial_fringe,
    optimize_overlap_time,
)
from .synthesis import DensityProfile, synthesize_ports

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="atomfringe",
        description="Spatial-fringe interferometer simulator and phase-noise analysis",
    )
    parser.add_argument("--seed", type=int, default=None, help="override the master seed")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="render one shot to a profile CSV")
    p.add_argument("--config", required=True, help="campaign config JSON (shot settings are taken from it)")
    p.add_argument("--phase", type=float, default=0.0, help="interferometer phase [rad]")
    p.add_argument("--run", type=int, default=0, help="run index for the noise stream")
    p.add_argument("--out", required=True, help="output CSV (position_m,density)")

    p = sub.add_parser("fit", help="fit a fringe profile CSV")
    p.add_argument("--in", dest="infile", required=True, help="profile CSV")
    p.add_argument("--fixed-k", type=float, default=None, help="hold the spatial frequency [rad/m]")
    p.add_argument("--out", default=None, help="write the result row here instead of stdout")

    p = sub.add_parser("allan", help="Allan deviation of a phase CSV (run,phase_rad)")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--duty", type=float, default=11.4, help="seconds per run")
    p.add_argument("--taus", default=None, help="comma-separated averaging times in runs")
    p.add_argument("--out", required=True)

    p = sub.add_parser("overlap-scan", help="contrast against post-beamsplitter wait")
    p.add_argument("--config", required=True)
    p.add_argument("--t-max", type=float, default=None, help="scan end [s]")
    p.add_argument("--points", type=int, default=61)
    p.add_argument("--out", required=True)

    p = sub.add_parser("campaign", help="run a full seeded campaign")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True, help="campaign output directory")
    p.add_argument("--workers", type=int, default=1)

    p = sub.add_parser("figure", help="aggregate campaigns into a plot-ready CSV")
    p.add_argument("--figure", required=True, choices=["f2", "f3", "f4", "f5"])
    p.add_argument("--campaign", action="append", required=True, help="campaign directory (repeatable)")
    p.add_argument("--out", required=True)
    return parser


def _cmd_simulate(args) -> int:
    config = load_campaign_config(args.config)
    if args.seed is not None:
        config = replace(config, master_seed=args.seed)
    from .campaign import derive_seed

    noise = replace(config.noise, rng_seed=derive_seed(config.master_seed, 0, args.run))
    profile = synthesize_ports(
        config.interferometer,
        args.phase,
        noise,
        cloud=config.cloud,
        contrast=config.contrast,
        delta_phi_ports=config.delta_phi_ports,
        n_samples=config.n_samples,
        imaging_tilt=config.imaging_tilt,
        expansion_scale=config.expansion_scale,
        shot_id=args.run,
    )
    profile.to_csv(args.out)
    print(f"wrote {len(profile.axis)} samples to {args.out}")
    return EXIT_OK


def _cmd_fit(args) -> int:
    try:
        profile = DensityProfile.from_csv(args.infile)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    result = fit_spatial_fringe(profile, fixed_k=args.fixed_k)
    lines = [FIT_CSV_HEADER, result.csv_row(shot=0)]
    if args.out:
        Path(args.out).write_text("\n".join(lines) + "\n")
    else:
        print("\n".join(lines))
    if not result.converged:
        print(f"fit degenerate: {result.message}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


def _cmd_allan(args) -> int:
    data = np.genfromtxt(args.infile, delimiter=",", skip_header=1)
    if data.ndim != 2 or data.shape[1] < 2:
        raise ConfigError(f"{args.infile} is not a run,phase_rad table")
    try:
        series = PhaseSeries(
            run_index=data[:, 0].astype(int), phase=data[:, 1], duty_cycle=args.duty
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    taus = None
    if args.taus:
        taus = [int(t) for t in args.taus.split(",")]
    curve = allan_deviation(series, taus)
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(ALLAN_CSV_HEADER.split("point,", 1)[-1] + "\n")
        for row in curve.csv_rows():
            fh.write(row + "\n")
    print(f"wrote {curve.taus.size} averaging times to {args.out}")
    return EXIT_OK


def _cmd_overlap_scan(args) -> int:
    config = load_campaign_config(args.config)
    cfg = config.interferometer
    scan = None
    if args.t_max is not None:
        scan = np.linspace(0.0, args.t_max, args.points)
    result = optimize_overlap_time(
        cfg,
        scan,
        cloud=config.cloud,
        contrast=config.contrast,
        delta_phi_ports=config.delta_phi_ports,
        n_samples=config.n_samples,
    )
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write("t_sep_s,contrast\n")
        for t, c in zip(result.times, result.contrasts):
            fh.write(f"{float(t)!r},{float(c)!r}\n")
    print(f"optimal wait: {result.t_opt:.6g} s")
    return EXIT_OK


def _cmd_campaign(args) -> int:
    config = load_campaign_config(args.config)
    if args.seed is not None:
        config = replace(config, master_seed=args.seed)
    result = run_campaign(config, out_dir=args.out, workers=args.workers)
    n = sum(len(p.records) for p in result.points)
    print(f"campaign complete: {len(result.points)} points, {n} runs -> {result.out_dir}")
    return EXIT_OK


def _cmd_figure(args) -> int:
    out = figure_data(args.campaign, args.figure, args.out)
    print(f"wrote {out}")
    return EXIT_OK


_COMMANDS = {
    "simulate": _cmd_simulate,
    "fit": _cmd_fit,
    "allan": _cmd_allan,
    "overlap-scan": _cmd_overlap_scan,
    "campaign": _cmd_campaign,
    "figure": _cmd_figure,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (ConfigError, FileNotFoundError, OSError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (FringeResolvabilityError, RuntimeError, np.linalg.LinAlgError, ValueError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
