import math

import numpy as np
import pytest

from atomfringe.allan import (
    AllanCurve,
    allan_deviation,
    compare_schemes,
    default_taus,
    fit_noise_slope,
)
from atomfringe.fitting import PhaseSeries


def brute_force_adev(phases, tau):
    """Literal block-mean two-sample deviation, kept independent of the library."""
    m = len(phases) // tau
    means = [sum(phases[i * tau : (i + 1) * tau]) / tau for i in range(m)]
    acc = 0.0
    for i in range(m - 1):
        acc += (means[i + 1] - means[i]) ** 2
    return math.sqrt(acc / (2.0 * (m - 1)))


class TestAllanDeviation:
    def test_constant_series_is_zero(self):
        curve = allan_deviation(np.full(256, 1.234), [1, 2, 4, 8])
        assert np.all(curve.deviations == 0.0)

    def test_alternating_series_closed_form(self):
        a = 0.37
        phases = a * (-1.0) ** np.arange(1000)
        curve = allan_deviation(phases, [1])
        assert math.isclose(curve.deviations[0], a * math.sqrt(2.0), rel_tol=1e-12)

    def test_matches_brute_force(self):
        rng = np.random.default_rng(8)
        phases = rng.normal(0.0, 0.3, 500) + 0.05 * np.arange(500)
        curve = allan_deviation(phases, [1, 3, 7, 25])
        for tau, dev in zip(curve.taus, curve.deviations):
            ref = brute_force_adev(list(phases), int(tau))
            assert math.isclose(dev, ref, rel_tol=1e-12)

    def test_white_noise_slope(self):
        rng = np.random.default_rng(17)
        phases = rng.normal(0.0, 0.1, 10_000)
        curve = allan_deviation(phases)
        summary = fit_noise_slope(curve, tau_range=(1, 128))
        assert abs(summary.slope + 0.5) < 0.05

    def test_offset_invariance(self):
        rng = np.random.default_rng(9)
        phases = rng.normal(0.0, 0.2, 800)
        a = allan_deviation(phases, [1, 2, 4])
        b = allan_deviation(phases + 17.3, [1, 2, 4])
        assert np.allclose(a.deviations, b.deviations, rtol=1e-12)

    def test_linear_scaling(self):
        rng = np.random.default_rng(10)
        phases = rng.normal(0.0, 0.2, 800)
        a = allan_deviation(phases, [1, 2, 4])
        b = allan_deviation(3.0 * phases, [1, 2, 4])
        assert np.allclose(b.deviations, 3.0 * a.deviations, rtol=1e-12)
        assert np.allclose(b.ci_low, 3.0 * a.ci_low, rtol=1e-12)

    def test_drift_slope_plus_one(self):
        phases = 0.01 * np.arange(4000).astype(float)
        curve = allan_deviation(phases)
        summary = fit_noise_slope(curve, tau_range=(1, 256))
        assert abs(summary.slope - 1.0) < 0.1

    def test_too_long_tau_warns_and_is_omitted(self):
        with pytest.warns(UserWarning, match="too short"):
            curve = allan_deviation(np.arange(20, dtype=float), [1, 2, 50])
        assert list(curve.taus) == [1, 2]

    def test_overlapping_close_to_plain_for_white_noise(self):
        rng = np.random.default_rng(11)
        phases = rng.normal(0.0, 0.1, 5000)
        plain = allan_deviation(phases, [4, 16])
        over = allan_deviation(phases, [4, 16], overlapping=True)
        assert np.allclose(over.deviations, plain.deviations, rtol=0.2)

    def test_phase_series_input_carries_duty_cycle(self):
        series = PhaseSeries.from_wrapped(np.zeros(64), duty_cycle=11.4)
        curve = allan_deviation(series, [1, 2])
        assert np.allclose(curve.tau_seconds, [11.4, 22.8])

    def test_default_taus(self):
        assert default_taus(100) == [1, 2, 4, 8, 16, 32]


class TestNoiseSlopeFit:
    @staticmethod
    def synthetic_curve(taus, devs, pairs=None):
        taus = np.asarray(taus)
        devs = np.asarray(devs, dtype=float)
        if pairs is None:
            pairs = np.full(taus.size, 100)
        return AllanCurve(
            taus=taus, deviations=devs, pairs=pairs, ci_low=devs, ci_high=devs, duty_cycle=11.4
        )

    def test_exact_inverse_sqrt_model(self):
        taus = np.array([1, 2, 4, 8, 16, 32])
        c = 0.273
        curve = self.synthetic_curve(taus, c / np.sqrt(taus))
        summary = fit_noise_slope(curve)
        assert abs(summary.slope + 0.5) < 1e-10
        assert abs(summary.sigma_at_1_step - c) < 1e-10 * c

    def test_white_noise_density(self):
        rng = np.random.default_rng(12)
        series = PhaseSeries.from_wrapped(rng.normal(0.0, 0.1, 20_000), duty_cycle=11.4)
        summary = fit_noise_slope(allan_deviation(series, tau_range := None) , tau_range)
        expected = 0.1 * math.sqrt(11.4)
        assert abs(summary.noise_density - expected) / expected < 0.10
        assert math.isclose(expected, 0.338, rel_tol=2e-3)

    def test_zero_points_excluded(self):
        taus = np.array([1, 2, 4, 8])
        devs = np.array([0.4, 0.0, 0.2, 0.1414])
        curve = self.synthetic_curve(taus, devs)
        summary = fit_noise_slope(curve)
        assert math.isfinite(summary.slope)

    def test_too_few_points(self):
        curve = self.synthetic_curve(np.array([1, 2]), np.array([0.1, 0.0]))
        with pytest.raises(ValueError):
            fit_noise_slope(curve)

    def test_density_interval_coverage(self):
        # the 95% interval from the weighted log fit should cover the true
        # density at roughly its nominal rate
        rng = np.random.default_rng(13)
        truth = 0.1 * math.sqrt(11.4)
        hits = 0
        reps = 200
        for _ in range(reps):
            series = rng.normal(0.0, 0.1, 2000)
            summary = fit_noise_slope(allan_deviation(series, duty_cycle=11.4))
            lo, hi = summary.density_interval(0.95)
            hits += lo <= truth <= hi
        assert 0.85 * reps <= hits <= reps


class TestCompareSchemes:
    def test_series_against_itself(self):
        rng = np.random.default_rng(14)
        phases = rng.normal(0.0, 0.2, 1000)
        report = compare_schemes(phases, phases)
        assert np.all(report.ratios == 1.0)
        assert report.equivalent

    def test_equal_noise_passes_most_repetitions(self):
        rng = np.random.default_rng(15)
        verdicts = []
        for _ in range(200):
            a = rng.normal(0.0, 0.15, 1000)
            b = rng.normal(0.0, 0.15, 1000)
            verdicts.append(compare_schemes(a, b).equivalent)
        assert np.mean(verdicts) >= 0.90

    def test_doubled_noise_fails(self):
        rng = np.random.default_rng(16)
        a = rng.normal(0.0, 0.1, 1000)
        b = rng.normal(0.0, 0.2, 1000)
        report = compare_schemes(a, b)
        assert not report.equivalent
        assert report.ratios[0] < 0.7

    def test_short_series_rejected(self):
        with pytest.raises(ValueError):
            compare_schemes(np.zeros(50), np.zeros(50))


class TestValidation:
    def test_allan_curve_checks(self):
        with pytest.raises(ValueError):
            AllanCurve(
                taus=np.array([2, 1]),
                deviations=np.array([0.1, 0.2]),
                pairs=np.array([10, 10]),
                ci_low=np.array([0.1, 0.2]),
                ci_high=np.array([0.1, 0.2]),
            )

    def test_bad_tau_rejected(self):
        with pytest.raises(ValueError):
            allan_deviation(np.zeros(100), [0])
