"""Allan-deviation analysis of per-run phase records.

The two-sample (Allan) variance of a phase series at averaging time tau runs
is built from consecutive non-overlapping block means y_i of tau runs each:

    sigma^2(tau) = 1 / (2 (M - 1)) * sum_{i=1}^{M-1} (y_{i+1} - y_i)^2

At tau = 1 this acts directly on the raw phases.  White phase noise averages
down as 1/sqrt(tau); a linear drift grows as tau.  Confidence intervals use
the chi-square distribution with equivalent degrees of freedom tied to the
number of difference pairs; for white noise adjacent differences are
anticorrelated at -1/2, which makes the equivalent dof two thirds of the
pair count, and that value is used since white noise is the regime the
short-term comparisons target.  An overlapping estimator is available behind
a flag; its confidence intervals conservatively reuse the non-overlapping
dof.

Averaging times are counted in series steps; the ``duty_cycle`` attribute of
the series converts steps to seconds, which is also how the per-root-hertz
noise density extrapolation is formed.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.stats import chi2

from .fitting import PhaseSeries

__all__ = [
    "AllanCurve",
    "NoiseSummary",
    "EquivalenceReport",
    "allan_deviation",
    "fit_noise_slope",
    "compare_schemes",
]

DEFAULT_CONFIDENCE = 0.6827
ALLAN_CSV_HEADER = "tau_runs,tau_seconds,adev_rad,ci_low,ci_high,pairs"


@dataclass
class AllanCurve:
    """Allan deviation against averaging time.

    ``taus`` are in series steps, ``pairs`` counts the squared differences
    entering each point, and the confidence band is two-sided at the level
    the curve was built with.
    """

    taus: np.ndarray
    deviations: np.ndarray
    pairs: np.ndarray
    ci_low: np.ndarray
    ci_high: np.ndarray
    duty_cycle: float = 11.4
    confidence: float = DEFAULT_CONFIDENCE
    edf: np.ndarray | None = None

    def __post_init__(self):
        self.taus = np.asarray(self.taus, dtype=int)
        self.deviations = np.asarray(self.deviations, dtype=float)
        self.pairs = np.asarray(self.pairs, dtype=int)
        self.ci_low = np.asarray(self.ci_low, dtype=float)
        self.ci_high = np.asarray(self.ci_high, dtype=float)
        if self.edf is None:
            self.edf = np.maximum(2.0 * self.pairs / 3.0, 1.0)
        else:
            self.edf = np.asarray(self.edf, dtype=float)
        if np.any(np.diff(self.taus) <= 0):
            raise ValueError("taus must be strictly increasing")
        if np.any(self.deviations < 0):
            raise ValueError("deviations must be >= 0")
        if np.any(self.pairs < 1):
            raise ValueError("each point needs at least one difference pair")
        if not self.duty_cycle > 0:
            raise ValueError("duty_cycle must be positive")

    @property
    def tau_seconds(self) -> np.ndarray:
        return self.taus * self.duty_cycle

    def csv_rows(self):
        for i in range(self.taus.size):
            yield (
                f"{int(self.taus[i])},{float(self.tau_seconds[i])!r},"
                f"{float(self.deviations[i])!r},{float(self.ci_low[i])!r},"
                f"{float(self.ci_high[i])!r},{int(self.pairs[i])}"
            )


@dataclass
class NoiseSummary:
    """Log-log slope fit of an Allan curve and the per-root-hertz extrapolation.

    ``sigma_at_1_step`` is the fitted deviation at one series step;
    ``noise_density = sigma_at_1_step * sqrt(duty_cycle)`` converts it to a
    white-noise spectral density.  The one-sigma log-space errors come from
    the weighted fit with the chi-square point variances taken as known.
    """

    slope: float
    slope_error: float
    sigma_at_1_step: float
    log_intercept_error: float
    noise_density: float
    duty_cycle: float

    def __post_init__(self):
        if not self.duty_cycle > 0:
            raise ValueError("duty_cycle must be positive")

    def density_interval(self, confidence: float = 0.95) -> tuple[float, float]:
        z = _normal_quantile(0.5 + confidence / 2.0)
        half = z * self.log_intercept_error
        return self.noise_density * math.exp(-half), self.noise_density * math.exp(half)


@dataclass
class EquivalenceReport:
    """Per-tau ratio of two Allan curves with conservative interval bounds."""

    taus: np.ndarray
    ratios: np.ndarray
    ratio_low: np.ndarray
    ratio_high: np.ndarray
    equivalent: bool
    confidence: float


def default_taus(n: int) -> list[int]:
    """Octave-spaced averaging times that leave at least two blocks."""
    taus = []
    tau = 1
    while 2 * tau <= n:
        taus.append(tau)
        tau *= 2
    return taus


def _as_phase_array(series):
    """Phases, duty cycle and run stride of a series (arrays have stride one)."""
    if isinstance(series, PhaseSeries):
        stride = 1
        if series.run_index.size > 1:
            steps = np.diff(series.run_index)
            if np.any(steps != steps[0]):
                raise ValueError("Allan analysis needs uniformly spaced run indices")
            stride = int(steps[0])
        return series.phase, series.duty_cycle, stride
    return np.asarray(series, dtype=float), None, 1


def allan_deviation(
    series,
    taus=None,
    overlapping: bool = False,
    duty_cycle: float | None = None,
    confidence: float = DEFAULT_CONFIDENCE,
) -> AllanCurve:
    """Allan deviation of a phase series at the requested averaging times.

    ``series`` is a `PhaseSeries` or a plain array of phases; averaging times
    are in runs and must be multiples of the series' run spacing (one sample
    per 20 runs gives points at 20, 40, ... runs).  Averaging times too long
    for the series are dropped with a warning rather than failing.
    """
    phases, series_duty, stride = _as_phase_array(series)
    duty = duty_cycle if duty_cycle is not None else (series_duty or 11.4)
    n = phases.size
    if n < 2:
        raise ValueError("need at least two phases")
    if taus is None:
        taus = [t * stride for t in default_taus(n)]
    taus = [int(t) for t in taus]
    if any(t < 1 for t in taus):
        raise ValueError("averaging times must be >= 1 run")

    out_taus, devs, pairs = [], [], []
    for tau_runs in sorted(set(taus)):
        if tau_runs % stride != 0:
            warnings.warn(
                f"tau={tau_runs} runs is not a multiple of the series spacing {stride}; omitted",
                stacklevel=2,
            )
            continue
        tau = tau_runs // stride
        if 2 * tau > n:
            warnings.warn(
                f"series of {n} samples is too short for tau={tau_runs} runs; point omitted",
                stacklevel=2,
            )
            continue
        if overlapping:
            means = np.convolve(phases, np.full(tau, 1.0 / tau), mode="valid")
            diffs = means[tau:] - means[:-tau]
            n_pairs = n // tau - 1  # conservative dof: the non-overlapping count
        else:
            m = n // tau
            means = phases[: m * tau].reshape(m, tau).mean(axis=1)
            diffs = np.diff(means)
            n_pairs = m - 1
        var = float(np.mean(diffs**2)) / 2.0
        out_taus.append(tau_runs)
        devs.append(math.sqrt(var))
        pairs.append(max(n_pairs, 1))

    if not out_taus:
        raise ValueError("no averaging time fits the series length")

    devs = np.asarray(devs)
    pairs_arr = np.asarray(pairs, dtype=int)
    edf = np.maximum(2.0 * pairs_arr / 3.0, 1.0)
    lo_q = chi2.ppf(0.5 + confidence / 2.0, edf)
    hi_q = chi2.ppf(0.5 - confidence / 2.0, edf)
    ci_low = devs * np.sqrt(edf / lo_q)
    ci_high = devs * np.sqrt(edf / hi_q)
    return AllanCurve(
        taus=np.asarray(out_taus),
        deviations=devs,
        pairs=pairs_arr,
        ci_low=ci_low,
        ci_high=ci_high,
        duty_cycle=duty,
        confidence=confidence,
        edf=edf,
    )


def fit_noise_slope(
    curve: AllanCurve,
    tau_range: tuple[float, float] | None = None,
    duty_cycle: float | None = None,
    min_pairs: int = 8,
) -> NoiseSummary:
    """Weighted log-log line through an Allan curve.

    Points are weighted by twice their equivalent degrees of freedom (the
    inverse variance of the log deviation) and the intercept at one run gives
    the extrapolated white-noise density ``sigma(1 run) * sqrt(duty_cycle)``.
    Zero deviations are excluded from the logs, as are points with fewer than
    ``min_pairs`` difference pairs: at a handful of pairs the log of a
    chi-square estimate is biased low by about 1/(2*edf) and wildly skewed,
    which would corrupt the fitted slope.
    """
    duty = duty_cycle if duty_cycle is not None else curve.duty_cycle
    sel = np.ones(curve.taus.size, dtype=bool)
    if tau_range is not None:
        sel &= (curve.taus >= tau_range[0]) & (curve.taus <= tau_range[1])
    sel &= curve.deviations > 0.0
    if np.any(sel & (curve.pairs >= min_pairs)):
        sel &= curve.pairs >= min_pairs
    if int(sel.sum()) < 2:
        raise ValueError("need at least two nonzero points in range to fit a slope")
    if int(sel.sum()) < 3:
        warnings.warn("slope fit on only two points", stacklevel=2)

    x = np.log(curve.taus[sel].astype(float))
    y = np.log(curve.deviations[sel])
    w = 2.0 * curve.edf[sel]

    design = np.column_stack([np.ones_like(x), x])
    gram = design.T @ (w[:, None] * design)
    rhs = design.T @ (w * y)
    sol = np.linalg.solve(gram, rhs)
    cov = np.linalg.inv(gram)

    intercept, slope = float(sol[0]), float(sol[1])
    sigma1 = math.exp(intercept)
    return NoiseSummary(
        slope=slope,
        slope_error=math.sqrt(cov[1, 1]),
        sigma_at_1_step=sigma1,
        log_intercept_error=math.sqrt(cov[0, 0]),
        noise_density=sigma1 * math.sqrt(duty),
        duty_cycle=duty,
    )


def compare_schemes(
    series_a,
    series_b,
    max_tau: int = 10,
    confidence: float = 0.95,
) -> EquivalenceReport:
    """Ratio of two phase-noise curves with interval bounds at each short tau.

    The two series are judged equivalent when every ratio interval up to
    ``max_tau`` contains one.  The per-tau bounds divide the chi-square
    confidence limits of the two deviations against each other, which is
    conservative.
    """
    phases_a, _, stride_a = _as_phase_array(series_a)
    phases_b, _, stride_b = _as_phase_array(series_b)
    if stride_a != 1 or stride_b != 1:
        raise ValueError("scheme comparison expects per-run series")
    if phases_a.size < 100 or phases_b.size < 100:
        raise ValueError("scheme comparison needs at least 100 runs per series")

    n = min(phases_a.size, phases_b.size)
    taus = [t for t in range(1, max_tau + 1) if 2 * t <= n]
    curve_a = allan_deviation(series_a, taus, confidence=confidence)
    curve_b = allan_deviation(series_b, taus, confidence=confidence)

    ratios = curve_a.deviations / curve_b.deviations
    low = curve_a.ci_low / curve_b.ci_high
    high = curve_a.ci_high / curve_b.ci_low
    equivalent = bool(np.all((low <= 1.0) & (1.0 <= high)))
    return EquivalenceReport(
        taus=curve_a.taus,
        ratios=ratios,
        ratio_low=low,
        ratio_high=high,
        equivalent=equivalent,
        confidence=confidence,
    )


def _normal_quantile(p: float) -> float:
    # standard normal quantile via the chi-square relation, avoiding another import
    return math.sqrt(chi2.ppf(2.0 * p - 1.0, 1))
