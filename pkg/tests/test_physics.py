"""Closed-form formula checks against independent algebraic routes."""

import math

import numpy as np
import pytest

from atomfringe.constants import HBAR, RB87_MASS, RB87_WAVELENGTH
from atomfringe.physics import (
    RB87,
    AtomSpecies,
    InterferometerConfig,
    PhaseBreakdown,
    SequenceTiming,
    beamsplitter_separation,
    fringe_wavelength,
    fringe_wavenumber,
    gravity_cancelling_chirp,
    mz_phase,
    overlap_wait_time,
    recoil_velocity,
    separation_phase,
)


def make_config(t0=2.2e-3, t1=50e-3, delta_t=350e-6, t_sep=0.0, **kw):
    return InterferometerConfig(species=RB87, timing=SequenceTiming(t0, t1, delta_t, t_sep), **kw)


def config_with_tof(tof, delta_t, t0=2.2e-3, **kw):
    """Timing with the requested total time of flight, ports imaged at the final pulse."""
    t1 = (tof - t0 - delta_t) / 2.0
    cfg = InterferometerConfig(species=RB87, timing=SequenceTiming(t0, t1, delta_t, 0.0), **kw)
    assert math.isclose(cfg.timing.total_time_of_flight, tof, rel_tol=1e-12)
    return cfg


class TestSpecies:
    def test_effective_wavevector_is_exactly_twice_k(self):
        assert RB87.effective_wavevector == 2.0 * RB87.wavenumber

    def test_validation(self):
        with pytest.raises(ValueError):
            AtomSpecies(mass=-1.0, optical_wavelength=780e-9)
        with pytest.raises(ValueError):
            AtomSpecies(mass=RB87_MASS, optical_wavelength=0.0)


class TestTiming:
    def test_total_time_of_flight(self):
        t = SequenceTiming(t0=2e-3, t1=50e-3, delta_t=350e-6, t_sep=19e-3)
        assert t.t2 == 50e-3 + 350e-6
        assert math.isclose(t.total_time_of_flight, 2e-3 + 50e-3 + 50.35e-3 + 19e-3, rel_tol=1e-15)

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            SequenceTiming(t0=-1e-3, t1=1e-3)
        with pytest.raises(ValueError):
            SequenceTiming(t0=1e-3, t1=1e-3, delta_t=-2e-3)


class TestRecoilVelocity:
    def test_rb87_first_order(self):
        # independent route: 2*hbar*k/m = 4*pi*hbar/(lambda*m)
        expected = 4.0 * math.pi * HBAR / (RB87_WAVELENGTH * RB87_MASS)
        v = recoil_velocity(RB87, 1)
        assert math.isclose(v, expected, rel_tol=1e-12)
        assert math.isclose(v, 1.177e-2, rel_tol=1e-3)

    def test_zero_order(self):
        assert recoil_velocity(RB87, 0) == 0.0

    def test_linear_in_order(self):
        assert math.isclose(recoil_velocity(RB87, 2), 2.0 * recoil_velocity(RB87, 1), rel_tol=1e-15)
        assert math.isclose(recoil_velocity(RB87, 2), 2.355e-2, rel_tol=1e-3)

    def test_negative_order_rejected(self):
        with pytest.raises(ValueError):
            recoil_velocity(RB87, -1)


class TestFringeWavelength:
    def test_baseline_218ms(self):
        cfg = config_with_tof(0.218, 350e-6)
        # independent route: lambda_f = T_tof * lambda_opt / (2 * n * delta_t)
        expected = 0.218 * RB87_WAVELENGTH / (2.0 * 350e-6)
        assert math.isclose(fringe_wavelength(cfg), expected, rel_tol=1e-12)
        assert math.isclose(fringe_wavelength(cfg), 242.9e-6, rel_tol=1e-3)

    def test_halves_when_asymmetry_doubles(self):
        a = fringe_wavelength(config_with_tof(0.218, 350e-6))
        b = fringe_wavelength(config_with_tof(0.218, 700e-6))
        assert math.isclose(b, a / 2.0, rel_tol=1e-12)
        assert math.isclose(b, 121.5e-6, rel_tol=1e-3)

    def test_long_expansion_722ms(self):
        lam = fringe_wavelength(config_with_tof(0.722, 350e-6))
        assert math.isclose(lam, 0.722 * RB87_WAVELENGTH / (2.0 * 350e-6), rel_tol=1e-12)
        assert math.isclose(lam, 804.5e-6, rel_tol=1e-3)

    def test_symmetric_raises(self):
        with pytest.raises(ValueError, match="symmetric"):
            fringe_wavelength(make_config(delta_t=0.0))

    def test_scaling_identity(self):
        # lambda_f * n * k * |delta_t| == pi * T_tof for any valid input
        rng = np.random.default_rng(7)
        for _ in range(200):
            delta_t = rng.uniform(20e-6, 2e-3) * rng.choice([-1.0, 1.0])
            t1 = rng.uniform(1e-3, 0.3)
            n = int(rng.integers(1, 4))
            cfg = InterferometerConfig(
                species=RB87,
                timing=SequenceTiming(2.2e-3, t1, delta_t, rng.uniform(0, 0.2)),
                bragg_order=n,
            )
            lhs = fringe_wavelength(cfg) * n * RB87.wavenumber * abs(delta_t)
            rhs = math.pi * cfg.timing.total_time_of_flight
            assert math.isclose(lhs, rhs, rel_tol=1e-12)

    def test_wavenumber(self):
        cfg = config_with_tof(0.218, 350e-6)
        assert math.isclose(
            fringe_wavenumber(cfg), 2.0 * math.pi / fringe_wavelength(cfg), rel_tol=1e-15
        )


class TestBeamsplitterSeparation:
    def test_one_millisecond(self):
        cfg = make_config(delta_t=1e-3)
        expected = recoil_velocity(RB87, 1) * 1e-3
        assert math.isclose(beamsplitter_separation(cfg), expected, rel_tol=1e-15)
        assert math.isclose(beamsplitter_separation(cfg), 11.77e-6, rel_tol=1e-3)

    def test_zero(self):
        assert beamsplitter_separation(make_config(delta_t=0.0)) == 0.0

    def test_350us(self):
        assert math.isclose(beamsplitter_separation(make_config(delta_t=350e-6)), 4.12e-6, rel_tol=1e-3)

    def test_sign_insensitive(self):
        assert beamsplitter_separation(make_config(delta_t=-350e-6)) == beamsplitter_separation(
            make_config(delta_t=350e-6)
        )


class TestOverlapWaitTime:
    def test_quarter_wavelength_identity(self):
        rng = np.random.default_rng(11)
        for _ in range(100):
            cfg = config_with_tof(rng.uniform(0.1, 0.7), rng.uniform(5e-5, 1e-3))
            t = overlap_wait_time(cfg)
            expected = fringe_wavelength(cfg) / (4.0 * recoil_velocity(RB87, cfg.bragg_order))
            assert math.isclose(t, expected, rel_tol=1e-12)

    def test_baselines(self):
        assert math.isclose(overlap_wait_time(config_with_tof(0.218, 350e-6)), 5.16e-3, rel_tol=2e-3)
        assert math.isclose(overlap_wait_time(config_with_tof(0.722, 350e-6)), 17.1e-3, rel_tol=2e-3)

    def test_linear_in_tof(self):
        a = overlap_wait_time(config_with_tof(0.2, 350e-6))
        b = overlap_wait_time(config_with_tof(0.4, 350e-6))
        assert math.isclose(b, 2.0 * a, rel_tol=1e-12)

    def test_symmetric_raises(self):
        with pytest.raises(ValueError):
            overlap_wait_time(make_config(delta_t=0.0))


class TestMzPhase:
    def test_chirp_cancels_gravity(self):
        alpha = gravity_cancelling_chirp(RB87, 9.81)
        assert math.isclose(alpha, 25.15e6, rel_tol=1e-3)
        cfg = make_config(gravity=9.81, chirp_rate=alpha, laser_phases=(0.4, 0.1, 0.3))
        pb = mz_phase(cfg)
        assert abs(pb.propagation) < 1e-5
        assert math.isclose(pb.total, cfg.laser_phase, abs_tol=1e-5)

    def test_uncompensated_value(self):
        cfg = make_config(t1=50e-3, delta_t=0.0, gravity=9.81, chirp_rate=0.0)
        # direct evaluation of k_eff * g * T^2
        expected = (4.0 * math.pi / RB87_WAVELENGTH) * 9.81 * 50e-3**2
        pb = mz_phase(cfg)
        assert math.isclose(pb.propagation, expected, rel_tol=1e-12)
        assert math.isclose(pb.propagation, 395115.7, rel_tol=1e-6)

    def test_laser_phase_combination(self):
        cfg = make_config(laser_phases=(0.1, 0.2, 0.3))
        assert math.isclose(cfg.laser_phase, 0.0, abs_tol=1e-15)
        assert mz_phase(cfg).laser == cfg.laser_phase

    def test_gauge_invariance(self):
        rng = np.random.default_rng(3)
        base = make_config(gravity=9.81, chirp_rate=1e6)
        ref = mz_phase(base).total
        k_eff = RB87.effective_wavevector
        for _ in range(50):
            d = rng.uniform(-5.0, 5.0)
            shifted = make_config(gravity=9.81 + d, chirp_rate=1e6 + k_eff * d / (2.0 * math.pi))
            assert math.isclose(mz_phase(shifted).total, ref, rel_tol=1e-9, abs_tol=1e-4)

    def test_pure_function_bitwise(self):
        cfg = make_config(gravity=9.81, chirp_rate=3e5, laser_phases=(0.3, -0.4, 1.1))
        a, b = mz_phase(cfg), mz_phase(cfg)
        assert a.propagation == b.propagation and a.laser == b.laser and a.total == b.total


class TestPhaseBreakdown:
    def test_total_is_sum(self):
        pb = PhaseBreakdown(propagation=1.25, laser=-0.5, separation_offset=0.125)
        assert pb.total == 1.25 - 0.5 + 0.125


class TestSeparationPhase:
    def test_zero_mismatch(self):
        assert separation_phase(RB87, 0.0, 1e-27, 0.218, 5e-4) == 0.0

    def test_position_term_wavenumber_matches_fringe(self):
        rng = np.random.default_rng(5)
        for _ in range(100):
            cfg = config_with_tof(rng.uniform(0.1, 0.7), rng.uniform(5e-5, 1e-3))
            dx = beamsplitter_separation(cfg)
            t = cfg.timing.total_time_of_flight
            # slope of the x-dependent term is m*dx/(t*hbar)
            k_from_phase = separation_phase(RB87, dx, 0.0, t, 1.0)
            assert math.isclose(k_from_phase, fringe_wavenumber(cfg), rel_tol=1e-12)

    def test_offset_term(self):
        cfg = config_with_tof(0.218, 350e-6)
        dx = beamsplitter_separation(cfg)
        v_r = recoil_velocity(RB87, 1)
        offset = separation_phase(RB87, dx, RB87.mass * v_r / 2.0, 0.218, 0.0)
        # dx * m * v_r / (2 hbar) reduces to dx * k for this dx
        assert math.isclose(offset, dx * RB87.wavenumber, rel_tol=1e-12)
        assert math.isclose(offset, 33.19, rel_tol=1e-3)

    def test_array_positions(self):
        x = np.linspace(-1e-3, 1e-3, 11)
        phases = separation_phase(RB87, 4.12e-6, 0.0, 0.218, x)
        assert phases.shape == x.shape
        assert phases[5] == 0.0

    def test_nonpositive_time_rejected(self):
        with pytest.raises(ValueError):
            separation_phase(RB87, 1e-6, 0.0, 0.0, 0.0)


class TestConfigValidation:
    def test_bad_bragg_order(self):
        with pytest.raises(ValueError):
            make_config(bragg_order=0)

    def test_nonfinite_gravity(self):
        with pytest.raises(ValueError):
            make_config(gravity=float("nan"))
