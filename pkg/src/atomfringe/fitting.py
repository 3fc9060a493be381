"""Phase readout from density profiles and population fractions.

Two readout procedures are implemented:

* population readout for the symmetric sequence: box-integrate the two output
  ports, scan the laser phase over consecutive runs, and fit a sinusoid
  ``V*sin(k*x + phi) + C`` to the resulting fractions;

* spatial-fringe readout for the asymmetric sequence: fit each single-shot
  profile with a Gaussian envelope times a sinusoidal modulation,
  ``A*exp(-(x-x0)^2/(2*sigma^2))*(1 - B*sin(k*x - phi)) + C``, in two stages.
  Free fits of a batch determine the median spatial frequency, and every shot
  is then refit with the frequency held at that median, which removes the
  frequency-phase covariance from the per-shot phase estimates.

The reported spatial-fringe phase is the fitted ``phi``, i.e. the fringe
position relative to the axis origin.  That makes the readout sensitive to
camera translation (by ``k`` times the shift), which is a property of the
measurement and is modeled, not hidden.

Fits run on internally rescaled coordinates (positions in units of the
envelope width, densities in units of the peak) so the normal equations stay
well conditioned, and use analytic Jacobians throughout.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .levmar import levenberg_marquardt
from .physics import InterferometerConfig, recoil_velocity
from .smoothing import savitzky_golay
from .synthesis import CloudState, DensityProfile, synthesize_ports

__all__ = [
    "FitResult",
    "PhaseSeries",
    "OverlapScanResult",
    "FringeResolvabilityError",
    "wrap_phase",
    "fit_spatial_fringe",
    "fit_population_fringe",
    "fit_batch_median_k",
    "population_readout",
    "subtract_laser_ramp",
    "optimize_overlap_time",
]

SPATIAL_PARAMS = ("A", "x0", "sigma", "B", "k", "phi", "C")
POPULATION_PARAMS = ("V", "k", "phi", "C")
FIT_CSV_HEADER = "shot,converged,A,x0_m,sigma_m,B,k_per_m,phi_rad,C,rss,iters"

DEGENERATE_CONTRAST = 1e-3
MAX_CONTRAST = 1.05


class FringeResolvabilityError(ValueError):
    """The fringe wavelength is too coarse for the cloud to carry a full fringe."""


def wrap_phase(phi):
    """Wrap angles to the interval (-pi, pi]."""
    phi = np.asarray(phi, dtype=float)
    wrapped = phi - 2.0 * math.pi * np.floor((phi + math.pi) / (2.0 * math.pi))
    wrapped = np.where(wrapped <= -math.pi, wrapped + 2.0 * math.pi, wrapped)
    return float(wrapped) if wrapped.ndim == 0 else wrapped


@dataclass
class FitResult:
    """Converged parameters of one least-squares fit.

    ``params`` and one-sigma ``errors`` are keyed by parameter name; ``phi``
    is wrapped to (-pi, pi] and the contrast is non-negative.  When
    ``converged`` is False the parameters are not usable as a measurement.
    """

    model: str
    params: dict
    errors: dict
    rss: float
    iterations: int
    converged: bool
    message: str = ""

    @property
    def phase(self) -> float:
        return self.params["phi"]

    @property
    def contrast(self) -> float:
        return self.params["B"] if "B" in self.params else self.params["V"]

    @property
    def wavenumber(self) -> float:
        return self.params["k"]

    def csv_row(self, shot: int = 0) -> str:
        cols = [str(shot), "1" if self.converged else "0"]
        for name in ("A", "x0", "sigma", "B", "k", "phi", "C"):
            v = self.params.get(name, float("nan"))
            cols.append(repr(float(v)))
        cols.append(repr(float(self.rss)))
        cols.append(str(self.iterations))
        return ",".join(cols)


# ----------------------------------------------------------------------------
# spatial-fringe model


def _spatial_model(u, p):
    a, u0, s, b, k, phi, c = p
    g = a * np.exp(-0.5 * ((u - u0) / s) ** 2)
    return g * (1.0 - b * np.sin(k * u - phi)) + c


def _spatial_jacobian(u, p):
    a, u0, s, b, k, phi, c = p
    z = (u - u0) / s
    g = a * np.exp(-0.5 * z * z)
    arg = k * u - phi
    sin, cos = np.sin(arg), np.cos(arg)
    bracket = 1.0 - b * sin
    return np.column_stack(
        [
            g / a * bracket,
            g * (z / s) * bracket,
            g * (z * z / s) * bracket,
            -g * sin,
            -g * b * cos * u,
            g * b * cos,
            np.ones_like(u),
        ]
    )


def _estimate_envelope(axis, values):
    """Baseline, amplitude, centre and width from a heavily smoothed profile."""
    n = axis.size
    tails = max(4, n // 10)
    baseline = float(np.median(np.concatenate([values[:tails], values[-tails:]])))
    win = min(max(5, (n // 16) | 1), (n - 1) | 1)
    smooth = savitzky_golay(values, win, 2)
    env = np.clip(smooth - baseline, 0.0, None)
    total = float(env.sum())
    scale = float(np.max(np.abs(values)))
    if total <= 0.0 or not np.isfinite(total) or float(env.max()) <= 1e-9 * max(scale, 1e-300):
        raise ValueError("profile has no density above the baseline")
    x0 = float((axis * env).sum() / total)
    var = float((((axis - x0) ** 2) * env).sum() / total)
    dx = axis[1] - axis[0]
    sigma = max(math.sqrt(max(var, 0.0)), 2.0 * dx)
    amplitude = max(float(env.max()), total * dx / (sigma * math.sqrt(2.0 * math.pi)))
    return baseline, amplitude, x0, sigma, smooth


def _estimate_wavenumber(axis, values, smooth, sigma):
    """Dominant spatial frequency of the residual modulation, or None if featureless."""
    resid = values - smooth
    n = axis.size
    dx = axis[1] - axis[0]
    window = np.hanning(n)
    spectrum = np.abs(np.fft.rfft(resid * window, 4 * n))
    k_axis = 2.0 * math.pi * np.fft.rfftfreq(4 * n, dx)
    k_min = 4.0 / sigma
    sel = k_axis >= k_min
    if not np.any(sel):
        return None
    idx = np.flatnonzero(sel)
    peak_local = int(np.argmax(spectrum[idx]))
    j = idx[peak_local]
    peak = spectrum[j]
    floor = float(np.median(spectrum[idx]))
    if peak < max(5.0 * floor, 1e-9 * spectrum.max()):
        return None
    # parabolic refinement on the log spectrum
    if 0 < j < spectrum.size - 1 and spectrum[j - 1] > 0 and spectrum[j + 1] > 0:
        la, lb, lc = np.log(spectrum[j - 1 : j + 2])
        denom = la - 2.0 * lb + lc
        if denom < 0:
            j = j + 0.5 * (la - lc) / denom
    return float(j) * (k_axis[1] - k_axis[0])


def _coarse_modulation_scan(axis, values, baseline, amplitude, x0, sigma):
    """Strongest modulation on scales between the envelope width and several widths.

    Fringes coarser than the envelope hide inside its spectral lobe, so they
    are searched for as structure in the residual against the moment-estimated
    Gaussian.  Returns (wavenumber, relative amplitude).
    """
    g = np.exp(-0.5 * ((axis - x0) / sigma) ** 2)
    resid = values - baseline - amplitude * g
    weight = amplitude * float(g.sum())
    ks = np.linspace(0.5 / sigma, 4.0 / sigma, 64)
    z = np.exp(-1j * np.outer(ks, axis)) @ resid
    amps = 2.0 * np.abs(z) / weight
    i = int(np.argmax(amps))
    return float(ks[i]), float(amps[i])


def _demodulate(axis, values, baseline, amplitude, x0, sigma, k):
    """Phase and raw contrast of the modulation from quadrature demodulation at k."""
    g = np.exp(-0.5 * ((axis - x0) / sigma) ** 2)
    resid = values - baseline - amplitude * g
    z = np.sum(resid * np.exp(-1j * k * axis))
    weight = amplitude * float(g.sum())
    phi = math.pi / 2.0 - float(np.angle(z))
    contrast = 2.0 * float(np.abs(z)) / weight if weight > 0 else 0.0
    return phi, contrast


def _solve_spatial(axis, values, p0_phys, fix_k: bool):
    """Run the damped least-squares fit in rescaled coordinates.

    Positions are measured in units of the initial envelope width about the
    initial centre and densities in units of the peak, which keeps the normal
    equations well conditioned for metre-scale axes and 1e9-scale densities.
    """
    scale_v = max(float(np.max(np.abs(values))), 1e-300)
    x_ref = p0_phys[1]
    scale_x = p0_phys[2]
    u = (axis - x_ref) / scale_x
    v = values / scale_v

    p0 = np.array(
        [
            p0_phys[0] / scale_v,
            0.0,
            1.0,
            p0_phys[3],
            p0_phys[4] * scale_x,
            p0_phys[5] - p0_phys[4] * x_ref,
            p0_phys[6] / scale_v,
        ]
    )

    floor = u.size * (64.0 * np.finfo(float).eps) ** 2  # rounding level of unit-scaled data
    if not fix_k:
        res = levenberg_marquardt(
            lambda p: _spatial_model(u, p) - v,
            lambda p: _spatial_jacobian(u, p),
            p0,
            rss_floor=floor,
        )
        p_scaled = res.params
        cov_scaled = res.covariance
    else:
        k_scaled = p0[4]
        free_idx = [0, 1, 2, 3, 5, 6]

        def embed(p6):
            p = np.empty(7)
            p[free_idx] = p6
            p[4] = k_scaled
            return p

        res = levenberg_marquardt(
            lambda p6: _spatial_model(u, embed(p6)) - v,
            lambda p6: _spatial_jacobian(u, embed(p6))[:, free_idx],
            p0[free_idx],
        )
        p_scaled = embed(res.params)
        cov_scaled = None
        if res.covariance is not None:
            cov_scaled = np.zeros((7, 7))
            cov_scaled[np.ix_(free_idx, free_idx)] = res.covariance

    # back-transform to physical units; phi picks up the k * x_ref term
    transform = np.zeros((7, 7))
    transform[0, 0] = scale_v
    transform[1, 1] = scale_x
    transform[2, 2] = scale_x
    transform[3, 3] = 1.0
    transform[4, 4] = 1.0 / scale_x
    transform[5, 5] = 1.0
    transform[5, 4] = x_ref / scale_x
    transform[6, 6] = scale_v

    p_phys = transform @ p_scaled
    p_phys[1] += x_ref
    cov = transform @ cov_scaled @ transform.T if cov_scaled is not None else None
    return p_phys, cov, res.rss * scale_v * scale_v, res.iterations, res.converged, res.message


def fit_spatial_fringe(profile: DensityProfile, fixed_k: float | None = None) -> FitResult:
    """Gaussian-envelope times sinusoid fit of a single shot.

    All seven parameters are free unless ``fixed_k`` pins the spatial
    frequency (the second stage of the batch procedure).  The spatial
    frequency is seeded from the residual spectrum; modulations coarser than
    the envelope hide inside its spectral lobe and are identified instead by
    refitting from a small grid of coarse starting frequencies.  Raises
    `FringeResolvabilityError` when the fitted fringe wavelength exceeds four
    envelope widths, in which case the profile carries no extractable phase.
    A fit whose contrast collapses below ``DEGENERATE_CONTRAST`` (or exceeds
    ``MAX_CONTRAST``) is returned with ``converged=False``.
    """
    axis = profile.axis
    values = profile.values
    baseline, amplitude, x0, sigma, smooth = _estimate_envelope(axis, values)

    def p0_for(k):
        phi0, b0 = _demodulate(axis, values, baseline, amplitude, x0, sigma, k)
        b0 = min(max(b0, 1e-3), 1.2)
        return np.array([amplitude, x0, sigma, b0, k, phi0, baseline])

    if fixed_k is not None:
        if fixed_k <= 0:
            raise ValueError("fixed_k must be positive")
        solution = _solve_spatial(axis, values, p0_for(float(fixed_k)), fix_k=True)
    else:
        k0 = _estimate_wavenumber(axis, values, smooth, sigma)
        if k0 is not None:
            # a spectral peak only counts if real modulation lives there
            _, amp = _demodulate(axis, values, baseline, amplitude, x0, sigma, k0)
            if amp < 0.02:
                k0 = None
        if k0 is not None:
            solution = _solve_spatial(axis, values, p0_for(k0), fix_k=False)
        else:
            _, amp_coarse = _coarse_modulation_scan(axis, values, baseline, amplitude, x0, sigma)
            if amp_coarse > 8e-3:
                solution = None
                for k_try in (0.5 / sigma, 0.8 / sigma, 1.3 / sigma, 2.1 / sigma, 3.4 / sigma):
                    cand = _solve_spatial(axis, values, p0_for(k_try), fix_k=False)
                    if solution is None or cand[2] < solution[2]:
                        solution = cand
            else:
                # featureless profile; the fit will flag the contrast degenerate
                placeholder = 2.0 * math.pi / (2.0 * sigma)
                solution = _solve_spatial(axis, values, p0_for(placeholder), fix_k=False)

    p_phys = solution[0]
    k_fit, b_fit = abs(p_phys[4]), abs(p_phys[3])
    sigma_fit = abs(p_phys[2])
    if b_fit >= DEGENERATE_CONTRAST and k_fit > 0 and 2.0 * math.pi / k_fit > 4.0 * sigma_fit:
        raise FringeResolvabilityError(
            f"fringe wavelength {2 * math.pi / k_fit:.3e} m exceeds four envelope widths "
            f"({sigma_fit:.3e} m); phase extraction is not possible"
        )

    span = float(axis[-1] - axis[0])
    p, cov, rss, iterations, converged, message = solution
    return _package_spatial(p, cov, rss, iterations, converged, message, fixed_k, span)


def _package_spatial(p, cov, rss, iterations, converged, message, fixed_k, span):
    a, x0, sigma, b, k, phi, c = p
    sigma = abs(sigma)
    if b < 0:
        b, phi = -b, phi + math.pi
    if k < 0:
        k, phi = -k, -phi - math.pi
    phi = wrap_phase(phi)

    err = {name: float("nan") for name in SPATIAL_PARAMS}
    if cov is not None:
        diag = np.clip(np.diag(cov), 0.0, None)
        for i, name in enumerate(SPATIAL_PARAMS):
            err[name] = math.sqrt(diag[i])
    if fixed_k is not None:
        err["k"] = 0.0

    usable = (
        converged
        and a > 0
        and sigma <= 2.0 * span
        and DEGENERATE_CONTRAST <= b <= MAX_CONTRAST
    )
    if converged and not usable:
        message = "degenerate contrast or envelope"
        err["phi"] = float("inf")
    params = {"A": a, "x0": x0, "sigma": sigma, "B": b, "k": k, "phi": phi, "C": c}
    return FitResult(
        model="spatial",
        params=params,
        errors=err,
        rss=rss,
        iterations=iterations,
        converged=usable,
        message=message,
    )


def _failed_fit(message: str) -> FitResult:
    params = {name: float("nan") for name in SPATIAL_PARAMS}
    errors = {name: float("inf") for name in SPATIAL_PARAMS}
    return FitResult(
        model="spatial",
        params={"A": params["A"], "x0": params["x0"], "sigma": params["sigma"],
                "B": params["B"], "k": params["k"], "phi": params["phi"], "C": params["C"]},
        errors=errors,
        rss=float("nan"),
        iterations=0,
        converged=False,
        message=message,
    )


def _try_fit(profile, fixed_k=None) -> FitResult:
    try:
        return fit_spatial_fringe(profile, fixed_k=fixed_k)
    except (ValueError, FringeResolvabilityError) as exc:
        return _failed_fit(str(exc))


def fit_batch_median_k(profiles, fixed_k: float | None = None):
    """Two-stage batch fit of nominally identical shots.

    Stage one fits every profile with the spatial frequency free; stage two
    refits all of them with the frequency held at the stage-one median (or at
    ``fixed_k`` when given).  Returns the stage-two results in input order;
    shots that cannot be fitted come back flagged unconverged.  More than half
    the stage-one fits failing is a batch error.
    """
    profiles = list(profiles)
    if len(profiles) < 3:
        raise ValueError(f"need at least 3 profiles for a batch fit, got {len(profiles)}")
    if fixed_k is None:
        stage1 = [_try_fit(p) for p in profiles]
        ks = [r.params["k"] for r in stage1 if r.converged]
        if len(ks) <= 0.5 * len(profiles):
            raise RuntimeError(
                f"batch fit failed: only {len(ks)} of {len(profiles)} free fits converged"
            )
        fixed_k = float(np.median(ks))
    return [_try_fit(p, fixed_k=fixed_k) for p in profiles]


# ----------------------------------------------------------------------------
# population readout and sinusoid fit


def population_readout(profile: DensityProfile, box_a, box_b) -> float:
    """Fraction of the signal in ``box_a`` out of both boxes, by trapezoidal integration."""
    (a_lo, a_hi), (b_lo, b_hi) = box_a, box_b
    if not (a_lo < a_hi and b_lo < b_hi):
        raise ValueError("boxes must be (low, high) intervals")
    if max(a_lo, b_lo) < min(a_hi, b_hi) and not (a_hi <= b_lo or b_hi <= a_lo):
        raise ValueError("boxes must not overlap")
    lo, hi = profile.axis[0], profile.axis[-1]
    for edge in (a_lo, a_hi, b_lo, b_hi):
        if not (lo <= edge <= hi):
            raise ValueError(f"box edge {edge} outside the profile axis [{lo}, {hi}]")

    def integrate(lo_, hi_):
        mask = (profile.axis >= lo_) & (profile.axis <= hi_)
        return float(np.trapezoid(profile.values[mask], profile.axis[mask]))

    n_a = integrate(a_lo, a_hi)
    n_b = integrate(b_lo, b_hi)
    total = n_a + n_b
    if total <= 0:
        raise ValueError("no signal in either box")
    return n_a / total


def _population_model(x, p):
    v, k, phi, c = p
    return v * np.sin(k * x + phi) + c


def _population_jacobian(x, p):
    v, k, phi, c = p
    arg = k * x + phi
    s, co = np.sin(arg), np.cos(arg)
    return np.column_stack([s, v * x * co, v * co, np.ones_like(x)])


def fit_population_fringe(x, fractions=None, k_seed: float | None = None) -> FitResult:
    """Sinusoid fit of population fraction against the scanned variable.

    ``x`` may be an (n, 2) array of (scan value, fraction) pairs or the scan
    values with ``fractions`` given separately.  ``k_seed`` seeds the scan
    frequency (for example the commanded phase step per run); the frequency
    stays free in the fit.  Fewer points than parameters is an error; fewer
    than six points, or a scan covering less than a full fringe, only warns.
    """
    pts = np.asarray(x, dtype=float)
    if fractions is None:
        if pts.ndim != 2 or pts.shape[1] != 2:
            raise ValueError("expected an (n, 2) array of (scan value, fraction) points")
        xv, yv = pts[:, 0], pts[:, 1]
    else:
        xv = pts
        yv = np.asarray(fractions, dtype=float)
    if xv.size != yv.size:
        raise ValueError("scan values and fractions differ in length")
    n = xv.size
    if n < 4:
        raise ValueError(f"need at least 4 points to fit 4 parameters, got {n}")

    c0 = float(np.mean(yv))
    k0 = float(k_seed) if k_seed else _population_k_estimate(xv, yv - c0)
    if n < 6:
        warnings.warn(f"only {n} points; the sinusoid fit is poorly constrained", stacklevel=2)
    span = (xv.max() - xv.min()) * n / max(n - 1, 1)
    if k0 > 0 and span < 0.95 * 2.0 * math.pi / k0:
        warnings.warn(
            f"scan span {span:.3g} covers less than one fringe period {2 * math.pi / k0:.3g}",
            stacklevel=2,
        )

    z = np.sum((yv - c0) * np.exp(-1j * k0 * xv))
    phi0 = float(np.angle(z)) + math.pi / 2.0
    v0 = min(max(2.0 * float(np.abs(z)) / n, 1e-3), 1.2)
    p0 = np.array([v0, k0, phi0, c0])

    def residuals(p):
        return _population_model(xv, p) - yv

    def jacobian(p):
        return _population_jacobian(xv, p)

    res = levenberg_marquardt(residuals, jacobian, p0)
    v, k, phi, c = res.params
    if k < 0:
        k, phi = -k, math.pi - phi
    if v < 0:
        v, phi = -v, phi + math.pi
    phi = wrap_phase(phi)

    err = {name: float("nan") for name in POPULATION_PARAMS}
    if res.covariance is not None:
        diag = np.clip(np.diag(res.covariance), 0.0, None)
        for i, name in enumerate(POPULATION_PARAMS):
            err[name] = math.sqrt(diag[i])

    usable = res.converged and DEGENERATE_CONTRAST <= v <= MAX_CONTRAST
    message = res.message if usable else "degenerate fringe visibility"
    if not usable:
        err["phi"] = float("inf")
    return FitResult(
        model="population",
        params={"V": v, "k": k, "phi": phi, "C": c},
        errors=err,
        rss=res.rss,
        iterations=res.iterations,
        converged=usable,
        message=message,
    )


def _population_k_estimate(xv, resid) -> float:
    """Coarse scan-frequency estimate by demodulation over a dense grid."""
    span = xv.max() - xv.min()
    if span <= 0:
        return 1.0
    spacing = float(np.median(np.diff(np.sort(xv))))
    grid = np.linspace(0.5 * 2.0 * math.pi / span, math.pi / spacing, 512)
    power = np.abs(np.exp(-1j * np.outer(grid, xv)) @ resid)
    return float(grid[int(np.argmax(power))])


# ----------------------------------------------------------------------------
# phase series


@dataclass
class PhaseSeries:
    """Per-run phase record with an unwrapped phase track.

    ``run_index`` counts experiment executions; ``duty_cycle`` converts it to
    wall-clock seconds.  Phases are stored unwrapped; `from_wrapped` applies
    nearest-multiple-of-2pi unwrapping with the first run defining the branch.
    """

    run_index: np.ndarray
    phase: np.ndarray
    contrast: np.ndarray | None = None
    duty_cycle: float = 11.4

    def __post_init__(self):
        self.run_index = np.asarray(self.run_index, dtype=int)
        self.phase = np.asarray(self.phase, dtype=float)
        if self.run_index.shape != self.phase.shape or self.run_index.ndim != 1:
            raise ValueError("run_index and phase must be matching 1-D arrays")
        if self.run_index.size and np.any(np.diff(self.run_index) <= 0):
            raise ValueError("run_index must be strictly increasing")
        if self.contrast is not None:
            self.contrast = np.asarray(self.contrast, dtype=float)
            if self.contrast.shape != self.phase.shape:
                raise ValueError("contrast must match phase in shape")
        if not self.duty_cycle > 0:
            raise ValueError("duty_cycle must be positive")

    def __len__(self):
        return self.phase.size

    @property
    def times(self) -> np.ndarray:
        return self.run_index * self.duty_cycle

    @classmethod
    def from_wrapped(cls, phases, run_index=None, contrast=None, duty_cycle: float = 11.4):
        phases = np.asarray(phases, dtype=float)
        if run_index is None:
            run_index = np.arange(phases.size)
        unwrapped = np.unwrap(wrap_phase(phases))
        return cls(run_index=run_index, phase=unwrapped, contrast=contrast, duty_cycle=duty_cycle)


def subtract_laser_ramp(series: PhaseSeries, ramp: float) -> PhaseSeries:
    """Remove a commanded linear phase advance of ``ramp`` radians per run.

    The ramp times the run index is subtracted, the result rewrapped and then
    unwrapped again, so a ramp of 2*pi per run is an identity and the output
    branch is anchored at the first run.
    """
    adjusted = series.phase - ramp * series.run_index
    unwrapped = np.unwrap(wrap_phase(adjusted))
    return replace(series, phase=unwrapped)


# ----------------------------------------------------------------------------
# empirical overlap optimization


@dataclass(frozen=True)
class OverlapScanResult:
    t_opt: float
    times: np.ndarray
    contrasts: np.ndarray


def default_overlap_scan(config: InterferometerConfig, delta_phi_ports: float = math.pi, n: int = 61):
    """Scan grid bracketing the first constructive alignment of the port fringes."""
    t_est = alignment_wait_time(config, delta_phi_ports)
    return np.linspace(0.0, 2.2 * t_est, n)


def alignment_wait_time(
    config: InterferometerConfig, delta_phi_ports: float = math.pi, turns: int = 0
) -> float:
    """Wait time at which the kicked port's fringe has caught up with the offset.

    Solves k_f(t) * v_r * t = delta_phi_ports + 2*pi*turns with the fringe
    wavenumber evaluated at the full time of flight including the wait itself,
    so later alignments (``turns > 0``) are spaced by a full fringe wavelength
    of port displacement.
    """
    timing = config.timing
    if timing.delta_t == 0.0:
        raise ValueError("delta_t is zero: there is no fringe to overlap")
    offset = wrap_phase(delta_phi_ports)
    if offset <= 0:
        offset += 2.0 * math.pi
    offset += 2.0 * math.pi * turns
    t_i = timing.t0 + timing.t1 + timing.t2
    v_r = recoil_velocity(config.species, config.bragg_order)
    k = config.species.wavenumber
    rate = 2.0 * config.bragg_order * k * abs(timing.delta_t) * v_r
    if rate <= offset:
        raise ValueError("ports separate too slowly for the fringes to align within the fall")
    return offset * t_i / (rate - offset)


def optimize_overlap_time(
    config: InterferometerConfig,
    scan_times=None,
    *,
    true_phase: float = 0.4,
    cloud: CloudState | None = None,
    contrast: float = 0.8,
    delta_phi_ports: float = math.pi,
    n_samples: int = 1024,
) -> OverlapScanResult:
    """Find the wait time that maximizes the combined-fringe contrast.

    Synthesizes a noiseless shot for every wait time in the scan, fits the
    contrast of the single combined fringe, and returns the argmax with a
    parabolic refinement.  Plateaus resolve to the smallest wait time, which
    minimizes the readout delay.  All fits failing is an error.
    """
    if scan_times is None:
        scan_times = default_overlap_scan(config, delta_phi_ports)
    times = np.asarray(scan_times, dtype=float)
    if times.ndim != 1 or times.size < 3:
        raise ValueError("scan_times must contain at least three wait times")
    if np.any(times < 0):
        raise ValueError("wait times must be non-negative")

    contrasts = np.full(times.size, np.nan)
    any_usable = False
    for i, t in enumerate(times):
        cfg = replace(config, timing=replace(config.timing, t_sep=float(t)))
        profile = synthesize_ports(
            cfg,
            true_phase,
            cloud=cloud,
            contrast=contrast,
            delta_phi_ports=delta_phi_ports,
            n_samples=n_samples,
        )
        result = _try_fit(profile)
        if np.isfinite(result.params["B"]):
            contrasts[i] = result.params["B"]
        any_usable = any_usable or result.converged

    if not any_usable:
        raise RuntimeError("overlap scan failed: every contrast fit was degenerate")
    t_opt = _plateau_argmax(times, contrasts)
    return OverlapScanResult(t_opt=t_opt, times=times, contrasts=contrasts)


def _plateau_argmax(times, contrasts, rel_tol: float = 1e-9) -> float:
    finite = np.isfinite(contrasts)
    c_max = np.max(contrasts[finite])
    candidates = np.flatnonzero(finite & (contrasts >= c_max * (1.0 - rel_tol)))
    if candidates.size > 1:
        return float(times[candidates[0]])
    i = int(candidates[0])
    if 0 < i < times.size - 1 and np.isfinite(contrasts[i - 1]) and np.isfinite(contrasts[i + 1]):
        ca, cb, cc = contrasts[i - 1 : i + 2]
        denom = ca - 2.0 * cb + cc
        if denom < 0:
            shift = 0.5 * (ca - cc) / denom
            if abs(shift) <= 1.0:
                step = times[i + 1] - times[i]
                return float(times[i] + shift * step)
    return float(times[i])
