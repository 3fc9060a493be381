"""Seeded Monte Carlo campaigns over the three readout schemes.

A campaign executes ``runs_per_point`` shots at every point of a scan grid,
extracts the phase with the scheme's readout procedure, and writes four CSV
tables plus a config snapshot and manifest into its output directory:

* ``runs.csv``    one row per shot: timing, seed, readout and fit results
* ``phases.csv``  the processed phase series per point (ramp removed, unwrapped)
* ``allan.csv``   Allan deviation points per point
* ``points.csv``  per-point aggregates: wavelength statistics, noise summary

Schemes:

* ``symmetric``               population readout; the laser phase advances by
  a fixed step each run and consecutive ``group_size``-run blocks are fitted
  with a sinusoid, one extracted phase per block;
* ``asymmetric-separated``    a window around the kicked port is fitted with
  the envelope-times-fringe model, two-stage with the batch-median frequency,
  one phase per run, then the commanded laser ramp is subtracted;
* ``asymmetric-overlapped``   the same, fitted on the full profile while the
  two ports still overlap; the wait after the final beamsplitter defaults to
  the empirically optimized constructive-overlap time.

Every shot's noise stream is seeded by (master seed, point, run), so outputs
are byte-identical across repeats and worker counts, and two campaigns with
the same master seed see identical injected noise run by run.
"""

from __future__ import annotations

import json
import math
import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from . import __version__
from .allan import allan_deviation, fit_noise_slope
from .fitting import (
    FIT_CSV_HEADER,
    PhaseSeries,
    alignment_wait_time,
    fit_batch_median_k,
    fit_population_fringe,
    fit_spatial_fringe,
    optimize_overlap_time,
    population_readout,
    subtract_laser_ramp,
    wrap_phase,
    _try_fit,
)
from .physics import (
    InterferometerConfig,
    RB87,
    SequenceTiming,
    fringe_wavelength,
    fringe_wavenumber,
    gravity_cancelling_chirp,
    mz_phase,
    recoil_velocity,
)
from .synthesis import CloudState, NoiseModel, default_cloud, synthesize_ports

__all__ = [
    "ConfigError",
    "CampaignConfig",
    "RunRecord",
    "PointResult",
    "CampaignResult",
    "run_campaign",
    "figure_data",
    "load_campaign_config",
    "derive_seed",
]

SCHEMES = ("symmetric", "asymmetric-separated", "asymmetric-overlapped")
SCAN_VARIABLES = ("none", "delta_t", "t1", "t_sep", "phase_ramp")

RUNS_CSV_HEADER = (
    "point,run,scheme,scan_value,t0_s,t1_s,delta_t_s,t_sep_s,seed,"
    "population_fraction,group_index,converged,A,x0_m,sigma_m,B,k_per_m,phi_rad,C,rss,iters,"
    "k_free_per_m"
)
PHASES_CSV_HEADER = "point,series_index,run_index,time_s,phase_rad,contrast"
ALLAN_CSV_HEADER = "point,tau_runs,tau_seconds,adev_rad,ci_low,ci_high,pairs"
POINTS_CSV_HEADER = (
    "point,scan_variable,scan_value,n_runs,n_phases,t_sep_s,phase_mean_rad,phase_std_rad,"
    "contrast_mean,k_median_per_m,lambda_mean_m,lambda_std_m,lambda_theory_m,"
    "slope,sigma_at_1_run_rad,noise_density,density_ci_low,density_ci_high"
)


class ConfigError(ValueError):
    """Invalid campaign configuration."""


@dataclass(frozen=True)
class CampaignConfig:
    """Everything needed to reproduce a campaign byte for byte."""

    scheme: str
    interferometer: InterferometerConfig
    runs_per_point: int = 100
    scan_variable: str = "none"
    scan_values: tuple = ()
    tof_target: float | None = None
    noise: NoiseModel = field(default_factory=NoiseModel)
    master_seed: int = 0
    signal_phase: float = 0.0
    laser_ramp: float | None = None
    group_size: int = 20
    cloud: CloudState = field(default_factory=default_cloud)
    contrast: float = 0.8
    delta_phi_ports: float = math.pi
    duty_cycle: float = 11.4
    imaging_tilt: float = 0.0
    expansion_scale: float = 1.0
    n_samples: int = 1024

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ConfigError(f"unknown scheme {self.scheme!r}; pick one of {SCHEMES}")
        if self.scan_variable not in SCAN_VARIABLES:
            raise ConfigError(
                f"unknown scan variable {self.scan_variable!r}; pick one of {SCAN_VARIABLES}"
            )
        if self.scan_variable != "none" and not self.scan_values:
            raise ConfigError("scan grid is empty")
        if self.runs_per_point < 1:
            raise ConfigError("runs_per_point must be >= 1")
        if self.scheme == "symmetric":
            if self.interferometer.timing.delta_t != 0.0 or self.scan_variable == "delta_t":
                raise ConfigError("the symmetric scheme requires delta_t = 0")
            if self.group_size < 6:
                raise ConfigError("group_size must be at least 6 for the population fit")
        elif self.interferometer.timing.delta_t == 0.0 and self.scan_variable != "delta_t":
            raise ConfigError("asymmetric schemes require delta_t != 0")
        if not self.duty_cycle > 0:
            raise ConfigError("duty_cycle must be positive")

    @property
    def ramp(self) -> float:
        """Laser phase advance per run: a full fringe per group when symmetric."""
        if self.laser_ramp is not None:
            return self.laser_ramp
        if self.scheme == "symmetric":
            return 2.0 * math.pi / self.group_size
        return math.radians(16.0)


@dataclass
class RunRecord:
    point: int
    run: int
    scheme: str
    scan_value: float
    timing: SequenceTiming
    seed: int
    population_fraction: float = float("nan")
    group_index: int = -1
    converged: bool = False
    fit_params: dict = field(default_factory=dict)
    rss: float = float("nan")
    iterations: int = 0
    k_free: float = float("nan")

    def csv_row(self) -> str:
        t = self.timing
        p = self.fit_params
        cols = [
            str(self.point),
            str(self.run),
            self.scheme,
            repr(float(self.scan_value)),
            repr(t.t0),
            repr(t.t1),
            repr(t.delta_t),
            repr(t.t_sep),
            str(self.seed),
            repr(float(self.population_fraction)),
            str(self.group_index),
            "1" if self.converged else "0",
        ]
        for name in ("A", "x0", "sigma", "B", "k", "phi", "C"):
            cols.append(repr(float(p.get(name, float("nan")))))
        cols.append(repr(float(self.rss)))
        cols.append(str(self.iterations))
        cols.append(repr(float(self.k_free)))
        return ",".join(cols)


@dataclass
class PointResult:
    point: int
    scan_value: float
    config: InterferometerConfig
    records: list
    series: PhaseSeries | None
    k_median: float = float("nan")
    lambda_theory: float = float("nan")


@dataclass
class CampaignResult:
    config: CampaignConfig
    points: list
    out_dir: Path | None = None

    @property
    def records(self):
        return [r for p in self.points for r in p.records]


def derive_seed(master_seed: int, point: int, run: int) -> int:
    """Stable per-shot seed; no shared generator state between shots."""
    ss = np.random.SeedSequence([int(master_seed), int(point), int(run)])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


# ----------------------------------------------------------------------------
# point planning


def _positive_offset(delta_phi: float) -> float:
    offset = wrap_phase(delta_phi)
    return offset + 2.0 * math.pi if offset <= 0 else offset


def _plan_point(config: CampaignConfig, point: int, scan_value: float):
    """Interferometer config and laser ramp for one scan point."""
    base = config.interferometer
    timing = base.timing
    ramp = config.ramp
    if config.scan_variable == "delta_t":
        timing = replace(timing, delta_t=float(scan_value))
    elif config.scan_variable == "t1":
        timing = replace(timing, t1=float(scan_value))
    elif config.scan_variable == "t_sep":
        timing = replace(timing, t_sep=float(scan_value))
    elif config.scan_variable == "phase_ramp":
        ramp = float(scan_value)

    if config.scheme == "asymmetric-overlapped":
        timing = _resolve_overlap_wait(config, timing)
    elif config.tof_target is not None:
        t_sep = config.tof_target - (timing.t0 + timing.t1 + timing.t2)
        if t_sep < 0:
            raise ConfigError(
                f"point {point}: interferometer of {timing.t0 + timing.t1 + timing.t2:.3f} s "
                f"does not fit in the {config.tof_target:.3f} s time-of-flight budget"
            )
        timing = replace(timing, t_sep=t_sep)

    cfg = replace(base, timing=timing)
    if config.scheme == "asymmetric-separated":
        _check_separation(config, cfg)
    return cfg, ramp


def _resolve_overlap_wait(config: CampaignConfig, timing: SequenceTiming) -> SequenceTiming:
    """Choose the overlap wait: explicit, budget-pinned closed form, or optimizer."""
    base = replace(config.interferometer, timing=timing)
    if timing.t_sep > 0.0:
        t_sep = timing.t_sep  # explicit override, logged per record
    elif config.tof_target is not None:
        offset = _positive_offset(config.delta_phi_ports)
        n = base.bragg_order
        k = base.species.wavenumber
        v_r = recoil_velocity(base.species, n)
        t_sep = offset * config.tof_target / (2.0 * n * k * abs(timing.delta_t) * v_r)
        t1 = (config.tof_target - timing.t0 - timing.delta_t - t_sep) / 2.0
        if t1 < 0:
            raise ConfigError(
                f"time-of-flight budget {config.tof_target} s too short for the overlap wait"
            )
        return replace(timing, t1=t1, t_sep=t_sep)
    else:
        scan = optimize_overlap_time(
            base,
            cloud=config.cloud,
            contrast=config.contrast,
            delta_phi_ports=config.delta_phi_ports,
            n_samples=config.n_samples,
        )
        t_sep = scan.t_opt
    out = replace(timing, t_sep=float(t_sep))
    slip = fringe_wavenumber(replace(base, timing=out)) * recoil_velocity(
        base.species, base.bragg_order
    ) * out.t_sep
    factor = abs(math.cos(0.5 * (_positive_offset(config.delta_phi_ports) - slip)))
    if factor < 0.5:
        warnings.warn(
            f"overlap wait {out.t_sep:.4g} s leaves the port fringes poorly aligned "
            f"(contrast factor {factor:.2f})",
            stacklevel=2,
        )
    return out


def _check_separation(config: CampaignConfig, cfg: InterferometerConfig):
    from .synthesis import make_port_pair

    ports = make_port_pair(
        cfg, 0.0, cloud=config.cloud, contrast=config.contrast,
        delta_phi_ports=config.delta_phi_ports, expansion_scale=config.expansion_scale,
    )
    d = abs(ports.port_a.center - ports.port_b.center)
    if d < 3.0 * ports.port_a.sigma:
        raise ConfigError(
            f"ports separate by only {d / ports.port_a.sigma:.1f} envelope widths at imaging; "
            "increase t_sep or use the overlapped scheme"
        )


# ----------------------------------------------------------------------------
# shot execution


def _run_shot(config: CampaignConfig, cfg: InterferometerConfig, ramp: float, point: int, run: int):
    seed = derive_seed(config.master_seed, point, run)
    noise = replace(config.noise, rng_seed=seed)
    true_phase = config.signal_phase + mz_phase(cfg).total + ramp * run
    mode = "absorption" if cfg.timing.t1 <= 90e-3 else "fmi"
    profile = synthesize_ports(
        cfg,
        true_phase,
        noise,
        cloud=config.cloud,
        contrast=config.contrast,
        delta_phi_ports=config.delta_phi_ports,
        n_samples=config.n_samples,
        imaging_tilt=config.imaging_tilt,
        expansion_scale=config.expansion_scale,
        imaging_mode=mode,
        shot_id=run,
    )
    return seed, profile


def _execute_point(args):
    config, point, scan_value = args
    cfg, ramp = _plan_point(config, point, scan_value)
    if config.scheme == "symmetric":
        result = _execute_point_symmetric(config, cfg, ramp, point, scan_value)
    else:
        result = _execute_point_asymmetric(config, cfg, ramp, point, scan_value)
    return result


def _execute_point_symmetric(config, cfg, ramp, point, scan_value) -> PointResult:
    records = []
    fractions = np.empty(config.runs_per_point)
    for run in range(config.runs_per_point):
        seed, profile = _run_shot(config, cfg, ramp, point, run)
        ports = profile.metadata["ports"]
        mid = 0.5 * (ports.port_a.center + ports.port_b.center)
        frac = population_readout(
            profile, (mid, float(profile.axis[-1])), (float(profile.axis[0]), mid)
        )
        fractions[run] = frac
        records.append(
            RunRecord(
                point=point,
                run=run,
                scheme=config.scheme,
                scan_value=scan_value,
                timing=cfg.timing,
                seed=seed,
                population_fraction=frac,
                group_index=run // config.group_size,
            )
        )

    n_groups = config.runs_per_point // config.group_size
    if n_groups * config.group_size != config.runs_per_point:
        warnings.warn(
            f"{config.runs_per_point % config.group_size} trailing runs do not fill a "
            "group and are excluded from the phase series",
            stacklevel=2,
        )
    phases, visibilities, run_indices = [], [], []
    for g in range(n_groups):
        sel = slice(g * config.group_size, (g + 1) * config.group_size)
        run_idx = np.arange(g * config.group_size, (g + 1) * config.group_size)
        psi_center = ramp * float(np.mean(run_idx))
        x = ramp * run_idx - psi_center
        fit = fit_population_fringe(x, fractions[sel], k_seed=1.0)
        for rec in records[sel]:
            rec.converged = fit.converged
            rec.rss = fit.rss
            rec.iterations = fit.iterations
        if not fit.converged:
            continue
        phases.append(wrap_phase(fit.params["phi"] + math.pi / 2.0 - psi_center))
        visibilities.append(fit.params["V"])
        run_indices.append(g * config.group_size)

    series = None
    if len(phases) >= 2:
        series = PhaseSeries.from_wrapped(
            phases,
            run_index=np.asarray(run_indices),
            contrast=np.asarray(visibilities),
            duty_cycle=config.duty_cycle,
        )
    return PointResult(point, scan_value, cfg, records, series)


def _crop_port_window(profile):
    ports = profile.metadata["ports"]
    sigma = ports.port_a.sigma
    d = abs(ports.port_a.center - ports.port_b.center)
    w = min(0.5 * d, 4.0 * sigma)
    return profile.cropped(ports.port_a.center - w, ports.port_a.center + w)


def _execute_point_asymmetric(config, cfg, ramp, point, scan_value) -> PointResult:
    overlapped = config.scheme == "asymmetric-overlapped"
    seeds, profiles = [], []
    for run in range(config.runs_per_point):
        seed, profile = _run_shot(config, cfg, ramp, point, run)
        seeds.append(seed)
        profiles.append(profile if overlapped else _crop_port_window(profile))

    stage1 = [_try_fit(p) for p in profiles]
    ks = [r.params["k"] for r in stage1 if r.converged]
    if len(ks) <= 0.5 * len(profiles):
        raise RuntimeError(
            f"point {point}: only {len(ks)} of {len(profiles)} free fits converged"
        )
    k_median = float(np.median(ks))
    stage2 = [_try_fit(p, fixed_k=k_median) for p in profiles]

    records = []
    phases, contrasts, run_indices = [], [], []
    for run, (fit1, fit2) in enumerate(zip(stage1, stage2)):
        records.append(
            RunRecord(
                point=point,
                run=run,
                scheme=config.scheme,
                scan_value=scan_value,
                timing=cfg.timing,
                seed=seeds[run],
                converged=fit2.converged,
                fit_params=fit2.params,
                rss=fit2.rss,
                iterations=fit2.iterations,
                k_free=fit1.params["k"] if fit1.converged else float("nan"),
            )
        )
        if fit2.converged:
            phases.append(fit2.params["phi"])
            contrasts.append(fit2.params["B"])
            run_indices.append(run)

    series = None
    if len(phases) >= 2:
        raw = PhaseSeries.from_wrapped(
            phases,
            run_index=np.asarray(run_indices),
            contrast=np.asarray(contrasts),
            duty_cycle=config.duty_cycle,
        )
        series = subtract_laser_ramp(raw, ramp)
    return PointResult(
        point, scan_value, cfg, records, series,
        k_median=k_median, lambda_theory=fringe_wavelength(cfg),
    )


# ----------------------------------------------------------------------------
# campaign driver and outputs


def run_campaign(config: CampaignConfig, out_dir=None, workers: int = 1) -> CampaignResult:
    """Execute every (point, run) of the campaign and optionally write the CSVs.

    Points execute independently (in a process pool when ``workers > 1``) and
    are aggregated in point order, so the output does not depend on the worker
    count.
    """
    scan_values = list(config.scan_values) if config.scan_variable != "none" else [0.0]
    tasks = [(config, point, float(v)) for point, v in enumerate(scan_values)]

    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            points = list(pool.map(_execute_point, tasks))
    else:
        points = [_execute_point(t) for t in tasks]
    points.sort(key=lambda p: p.point)

    result = CampaignResult(config=config, points=points)
    if out_dir is not None:
        result.out_dir = write_campaign(result, Path(out_dir))
    return result


def _point_summary_row(config: CampaignConfig, p: PointResult) -> str:
    recs = p.records
    phases = p.series.phase if p.series is not None else np.array([])
    contrasts = (
        p.series.contrast
        if p.series is not None and p.series.contrast is not None
        else np.array([])
    )
    k_free = np.array([r.k_free for r in recs if np.isfinite(r.k_free)])
    lambdas = 2.0 * math.pi / k_free if k_free.size else np.array([])

    slope = sigma1 = density = ci_lo = ci_hi = float("nan")
    if p.series is not None and len(p.series) >= 4:
        try:
            curve = allan_deviation(p.series)
            summary = fit_noise_slope(curve)
            slope, sigma1, density = summary.slope, summary.sigma_at_1_step, summary.noise_density
            ci_lo, ci_hi = summary.density_interval(0.95)
        except (ValueError, np.linalg.LinAlgError):
            pass

    cols = [
        str(p.point),
        config.scan_variable,
        repr(float(p.scan_value)),
        str(len(recs)),
        str(len(phases)),
        repr(p.config.timing.t_sep),
        repr(float(np.mean(phases)) if phases.size else float("nan")),
        repr(float(np.std(phases)) if phases.size else float("nan")),
        repr(float(np.mean(contrasts)) if contrasts.size else float("nan")),
        repr(float(p.k_median)),
        repr(float(np.mean(lambdas)) if lambdas.size else float("nan")),
        repr(float(np.std(lambdas)) if lambdas.size else float("nan")),
        repr(float(p.lambda_theory)),
        repr(float(slope)),
        repr(float(sigma1)),
        repr(float(density)),
        repr(float(ci_lo)),
        repr(float(ci_hi)),
    ]
    return ",".join(cols)


def write_campaign(result: CampaignResult, out_dir: Path) -> Path:
    """Write the four CSV tables, the config snapshot and the manifest."""
    config = result.config
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        probe = out_dir / ".write_probe"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        raise ConfigError(f"output directory {out_dir} is not writable: {exc}") from exc

    with open(out_dir / "runs.csv", "w", encoding="utf-8") as fh:
        fh.write(RUNS_CSV_HEADER + "\n")
        for p in result.points:
            for rec in p.records:
                fh.write(rec.csv_row() + "\n")

    with open(out_dir / "phases.csv", "w", encoding="utf-8") as fh:
        fh.write(PHASES_CSV_HEADER + "\n")
        for p in result.points:
            if p.series is None:
                continue
            contrasts = (
                p.series.contrast
                if p.series.contrast is not None
                else np.full(len(p.series), float("nan"))
            )
            for i in range(len(p.series)):
                fh.write(
                    f"{p.point},{i},{int(p.series.run_index[i])},"
                    f"{float(p.series.times[i])!r},{float(p.series.phase[i])!r},"
                    f"{float(contrasts[i])!r}\n"
                )

    with open(out_dir / "allan.csv", "w", encoding="utf-8") as fh:
        fh.write(ALLAN_CSV_HEADER + "\n")
        for p in result.points:
            if p.series is None or len(p.series) < 4:
                continue
            try:
                curve = allan_deviation(p.series)
            except ValueError:
                continue
            for row in curve.csv_rows():
                fh.write(f"{p.point},{row}\n")

    with open(out_dir / "points.csv", "w", encoding="utf-8") as fh:
        fh.write(POINTS_CSV_HEADER + "\n")
        for p in result.points:
            fh.write(_point_summary_row(config, p) + "\n")

    (out_dir / "config.json").write_text(config_to_json(config), encoding="utf-8")
    manifest = {
        "package_version": __version__,
        "master_seed": config.master_seed,
        "campaign_id": f"{config.scheme}-{config.master_seed:08x}",
        "scheme": config.scheme,
        "scan_variable": config.scan_variable,
        "n_points": len(result.points),
        "runs_per_point": config.runs_per_point,
    }
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return out_dir


# ----------------------------------------------------------------------------
# configuration serialization

_NOISE_KEYS = {
    "laser_phase_sigma_rad": ("laser_phase_sigma", 1.0),
    "camera_jitter_sigma_um": ("camera_jitter_sigma", 1e-6),
    "detection_sigma": ("additive_detection_sigma", 1.0),
    "atom_number_fractional_sigma": ("atom_number_fractional_sigma", 1.0),
}

_SCAN_UNITS = {
    "delta_t_us": ("delta_t", 1e-6),
    "t1_ms": ("t1", 1e-3),
    "t_sep_ms": ("t_sep", 1e-3),
    "phase_ramp_deg": ("phase_ramp", math.pi / 180.0),
}


def config_to_json(config: CampaignConfig) -> str:
    """Snapshot with explicit unit suffixes, inverse of `load_campaign_config`."""
    cfg = config.interferometer
    scan_key = None
    for key, (name, _) in _SCAN_UNITS.items():
        if name == config.scan_variable:
            scan_key = key
    payload = {
        "scheme": config.scheme,
        "runs_per_point": config.runs_per_point,
        "master_seed": config.master_seed,
        "bragg_order": cfg.bragg_order,
        "gravity_m_s2": cfg.gravity,
        "chirp_hz_per_s": cfg.chirp_rate,
        "laser_phases_rad": list(cfg.laser_phases),
        "timing": {
            "t0_ms": cfg.timing.t0 / 1e-3,
            "t1_ms": cfg.timing.t1 / 1e-3,
            "delta_t_us": cfg.timing.delta_t / 1e-6,
            "t_sep_ms": cfg.timing.t_sep / 1e-3,
        },
        "tof_target_ms": None if config.tof_target is None else config.tof_target / 1e-3,
        "scan": None
        if config.scan_variable == "none"
        else {
            "variable": scan_key,
            "values": [v / _SCAN_UNITS[scan_key][1] for v in config.scan_values],
        },
        "noise": {
            key: getattr(config.noise, attr) / unit for key, (attr, unit) in _NOISE_KEYS.items()
        },
        "cloud": {
            "sigma_um": config.cloud.sigma / 1e-6,
            "velocity_sigma_mm_s": config.cloud.velocity_sigma / 1e-3,
            "atom_number": config.cloud.atom_number,
        },
        "signal_phase_rad": config.signal_phase,
        "laser_ramp_deg_per_run": None
        if config.laser_ramp is None
        else math.degrees(config.laser_ramp),
        "group_size": config.group_size,
        "contrast": config.contrast,
        "delta_phi_ports_rad": config.delta_phi_ports,
        "duty_cycle_s": config.duty_cycle,
        "imaging_tilt_deg": math.degrees(config.imaging_tilt),
        "expansion_scale": config.expansion_scale,
        "n_samples": config.n_samples,
    }
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def load_campaign_config(source) -> CampaignConfig:
    """Build a campaign from a JSON file path, JSON text, or a parsed dict.

    Keys carry explicit unit suffixes (``delta_t_us``, ``t_sep_ms``) to keep
    configs free of magnitude mistakes; unknown keys are rejected.
    """
    if isinstance(source, dict):
        raw = dict(source)
    else:
        text = Path(source).read_text() if os.path.exists(str(source)) else str(source)
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc

    known = {
        "scheme", "runs_per_point", "master_seed", "bragg_order", "gravity_m_s2",
        "chirp_hz_per_s", "laser_phases_rad", "timing", "tof_target_ms", "scan", "noise",
        "cloud", "signal_phase_rad", "laser_ramp_deg_per_run", "group_size", "contrast",
        "delta_phi_ports_rad", "duty_cycle_s", "imaging_tilt_deg", "expansion_scale",
        "n_samples",
    }
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")

    def get(key, default):
        return raw.get(key, default) if raw.get(key) is not None else default

    timing_raw = dict(get("timing", {}))
    unknown_t = set(timing_raw) - {"t0_ms", "t1_ms", "delta_t_us", "t_sep_ms"}
    if unknown_t:
        raise ConfigError(f"unknown timing keys: {sorted(unknown_t)}")
    timing = SequenceTiming(
        t0=float(timing_raw.get("t0_ms", 2.2)) * 1e-3,
        t1=float(timing_raw.get("t1_ms", 50.0)) * 1e-3,
        delta_t=float(timing_raw.get("delta_t_us", 0.0)) * 1e-6,
        t_sep=float(timing_raw.get("t_sep_ms", 0.0)) * 1e-3,
    )

    gravity = float(get("gravity_m_s2", 9.81))
    chirp = get("chirp_hz_per_s", "cancel")
    if chirp == "cancel":
        chirp = gravity_cancelling_chirp(RB87, gravity)
    interferometer = InterferometerConfig(
        species=RB87,
        timing=timing,
        bragg_order=int(get("bragg_order", 1)),
        gravity=gravity,
        chirp_rate=float(chirp),
        laser_phases=tuple(get("laser_phases_rad", (0.0, 0.0, 0.0))),
    )

    scan = raw.get("scan")
    scan_variable, scan_values = "none", ()
    if scan:
        key = scan.get("variable")
        if key not in _SCAN_UNITS:
            raise ConfigError(f"unknown scan variable {key!r}; pick one of {sorted(_SCAN_UNITS)}")
        name, unit = _SCAN_UNITS[key]
        scan_variable = name
        scan_values = tuple(float(v) * unit for v in scan.get("values", ()))

    noise_raw = dict(get("noise", {}))
    unknown_n = set(noise_raw) - set(_NOISE_KEYS)
    if unknown_n:
        raise ConfigError(f"unknown noise keys: {sorted(unknown_n)}")
    noise_kwargs = {attr: float(noise_raw.get(key, 0.0)) * unit for key, (attr, unit) in _NOISE_KEYS.items()}

    cloud_raw = dict(get("cloud", {}))
    unknown_c = set(cloud_raw) - {"sigma_um", "temperature_nk", "velocity_sigma_mm_s", "atom_number"}
    if unknown_c:
        raise ConfigError(f"unknown cloud keys: {sorted(unknown_c)}")
    if "velocity_sigma_mm_s" in cloud_raw:
        velocity_sigma = float(cloud_raw["velocity_sigma_mm_s"]) * 1e-3
    else:
        from .synthesis import thermal_velocity_sigma

        velocity_sigma = thermal_velocity_sigma(RB87, float(cloud_raw.get("temperature_nk", 50.0)) * 1e-9)
    cloud = CloudState(
        sigma=float(cloud_raw.get("sigma_um", 25.0)) * 1e-6,
        velocity_sigma=velocity_sigma,
        atom_number=float(cloud_raw.get("atom_number", 2e6)),
    )

    ramp_deg = raw.get("laser_ramp_deg_per_run")
    tof_ms = raw.get("tof_target_ms")
    try:
        return CampaignConfig(
            scheme=get("scheme", "asymmetric-separated"),
            interferometer=interferometer,
            runs_per_point=int(get("runs_per_point", 100)),
            scan_variable=scan_variable,
            scan_values=scan_values,
            tof_target=None if tof_ms is None else float(tof_ms) * 1e-3,
            noise=NoiseModel(**noise_kwargs),
            master_seed=int(get("master_seed", 0)),
            signal_phase=float(get("signal_phase_rad", 0.0)),
            laser_ramp=None if ramp_deg is None else math.radians(float(ramp_deg)),
            group_size=int(get("group_size", 20)),
            cloud=cloud,
            contrast=float(get("contrast", 0.8)),
            delta_phi_ports=float(get("delta_phi_ports_rad", math.pi)),
            duty_cycle=float(get("duty_cycle_s", 11.4)),
            imaging_tilt=math.radians(float(get("imaging_tilt_deg", 0.0))),
            expansion_scale=float(get("expansion_scale", 1.0)),
            n_samples=int(get("n_samples", 1024)),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


# ----------------------------------------------------------------------------
# figure aggregation

FIGURES = ("f2", "f3", "f4", "f5")


def _read_csv(path: Path) -> list[dict]:
    import csv as _csv

    with open(path, newline="", encoding="utf-8") as fh:
        return list(_csv.DictReader(fh))


def _load_campaign_dir(path: Path) -> dict:
    path = Path(path)
    for required in ("config.json", "points.csv", "allan.csv", "runs.csv"):
        if not (path / required).exists():
            raise ConfigError(f"{path} is not a campaign directory (missing {required})")
    config = json.loads((path / "config.json").read_text())
    return {
        "path": path,
        "config": config,
        "points": _read_csv(path / "points.csv"),
        "allan": _read_csv(path / "allan.csv"),
    }


def _atomic_write(path: Path, header: str, rows: list[str]):
    if not rows:
        raise ConfigError("nothing to aggregate; refusing to write an empty figure file")
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(header + "\n")
        for row in rows:
            fh.write(row + "\n")
    os.replace(tmp, path)


def figure_data(campaign_dirs, figure: str, out_path) -> Path:
    """Aggregate campaign outputs into one plot-ready CSV per figure.

    * ``f2``  fringe wavelength against asymmetry and time of flight
    * ``f3``  short-term phase noise and contrast against asymmetry
    * ``f4``  Allan curves, symmetric against asymmetric-separated
    * ``f5``  Allan curves, overlapped against separated asymmetric
    """
    if figure not in FIGURES:
        raise ConfigError(f"unknown figure {figure!r}; pick one of {FIGURES}")
    campaigns = [_load_campaign_dir(d) for d in campaign_dirs]
    out_path = Path(out_path)

    if figure == "f2":
        wanted = [
            c for c in campaigns
            if c["config"]["scheme"].startswith("asymmetric")
            and (c["config"].get("scan") or {}).get("variable") == "delta_t_us"
        ]
        if not wanted:
            raise ConfigError("figure f2 needs an asymmetric campaign scanning delta_t_us")
        header = "tof_s,delta_t_s,lambda_mean_m,lambda_std_m,lambda_theory_m,n_runs"
        rows = []
        for c in wanted:
            for pt in c["points"]:
                tof = (
                    float(c["config"]["timing"]["t0_ms"]) * 1e-3
                    if c["config"].get("tof_target_ms") is None
                    else float(c["config"]["tof_target_ms"]) * 1e-3
                )
                rows.append(
                    f"{tof!r},{float(pt['scan_value'])!r},{pt['lambda_mean_m']},"
                    f"{pt['lambda_std_m']},{pt['lambda_theory_m']},{pt['n_runs']}"
                )
        _atomic_write(out_path, header, rows)
        return out_path

    if figure == "f3":
        wanted = [
            c for c in campaigns
            if c["config"]["scheme"].startswith("asymmetric")
            and (c["config"].get("scan") or {}).get("variable") == "delta_t_us"
        ]
        if not wanted:
            raise ConfigError("figure f3 needs an asymmetric campaign scanning delta_t_us")
        header = "delta_t_s,k_median_per_m,adev_min_tau_rad,ci_low,ci_high,contrast_mean"
        rows = []
        for c in wanted:
            first_tau = {}
            for arow in c["allan"]:
                key = arow["point"]
                if key not in first_tau:
                    first_tau[key] = arow
            for pt in c["points"]:
                arow = first_tau.get(pt["point"])
                if arow is None:
                    continue
                rows.append(
                    f"{float(pt['scan_value'])!r},{pt['k_median_per_m']},{arow['adev_rad']},"
                    f"{arow['ci_low']},{arow['ci_high']},{pt['contrast_mean']}"
                )
        _atomic_write(out_path, header, rows)
        return out_path

    # f4 and f5: Allan curves of two schemes side by side
    if figure == "f4":
        group_a = [c for c in campaigns if c["config"]["scheme"] == "symmetric"]
        group_b = [c for c in campaigns if c["config"]["scheme"] == "asymmetric-separated"]
        missing = "symmetric" if not group_a else ("asymmetric-separated" if not group_b else None)
    else:
        group_a = [c for c in campaigns if c["config"]["scheme"] == "asymmetric-overlapped"]
        group_b = [c for c in campaigns if c["config"]["scheme"] == "asymmetric-separated"]
        missing = (
            "asymmetric-overlapped" if not group_a else ("asymmetric-separated" if not group_b else None)
        )
    if missing:
        raise ConfigError(f"figure {figure} needs a campaign with scheme {missing!r}")

    header = "scheme,t1_s,tau_runs,tau_seconds,adev_rad,ci_low,ci_high,pairs,noise_density"
    rows = []
    for c in group_a + group_b:
        scheme = c["config"]["scheme"]
        density_by_point = {pt["point"]: pt["noise_density"] for pt in c["points"]}
        t1_by_point = {}
        for pt in c["points"]:
            if (c["config"].get("scan") or {}).get("variable") == "t1_ms":
                t1_by_point[pt["point"]] = float(pt["scan_value"])
            else:
                t1_by_point[pt["point"]] = float(c["config"]["timing"]["t1_ms"]) * 1e-3
        for arow in c["allan"]:
            rows.append(
                f"{scheme},{t1_by_point[arow['point']]!r},{arow['tau_runs']},{arow['tau_seconds']},"
                f"{arow['adev_rad']},{arow['ci_low']},{arow['ci_high']},{arow['pairs']},"
                f"{density_by_point.get(arow['point'], 'nan')}"
            )
    _atomic_write(out_path, header, rows)
    return out_path
