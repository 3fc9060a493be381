"""Closed-form phase and scaling formulas for a Bragg Mach-Zehnder interferometer.

Everything here is a pure function of an :class:`InterferometerConfig`.  The
vertical pi/2 - pi - pi/2 pulse sequence splits, redirects and recombines two
momentum states; a temporal mismatch ``delta_t`` between the two halves of the
sequence leaves the output ports spatially mismatched at the final
beamsplitter, which writes a sinusoidal density fringe on each port.  The
formulas below give the fringe wavelength, the port separation, the wait time
for the two ports' fringes to overlap constructively, and the accumulated
interferometer phase.

Units are SI throughout.  ``delta_t`` is signed (second half longer for
positive values); magnitude-only expressions take ``abs(delta_t)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .constants import G_EARTH, HBAR, RB87_MASS, RB87_WAVELENGTH

__all__ = [
    "AtomSpecies",
    "SequenceTiming",
    "InterferometerConfig",
    "PhaseBreakdown",
    "RB87",
    "recoil_velocity",
    "fringe_wavelength",
    "fringe_wavenumber",
    "beamsplitter_separation",
    "overlap_wait_time",
    "mz_phase",
    "separation_phase",
    "gravity_cancelling_chirp",
]


@dataclass(frozen=True)
class AtomSpecies:
    """Atomic species and the lattice light that addresses it.

    Attributes
    ----------
    mass : float
        Atomic mass [kg].
    optical_wavelength : float
        Wavelength of the lattice beams [m].
    """

    mass: float
    optical_wavelength: float

    def __post_init__(self):
        if not (self.mass > 0 and math.isfinite(self.mass)):
            raise ValueError(f"mass must be positive and finite, got {self.mass}")
        if not (self.optical_wavelength > 0 and math.isfinite(self.optical_wavelength)):
            raise ValueError(
                f"optical_wavelength must be positive and finite, got {self.optical_wavelength}"
            )

    @property
    def wavenumber(self) -> float:
        """Single-photon wavenumber k = 2*pi/lambda [rad/m]."""
        return 2.0 * math.pi / self.optical_wavelength

    @property
    def effective_wavevector(self) -> float:
        """Two-photon effective wavevector of the beamsplitters, exactly 2k [rad/m]."""
        return 2.0 * self.wavenumber


RB87 = AtomSpecies(mass=RB87_MASS, optical_wavelength=RB87_WAVELENGTH)


@dataclass(frozen=True)
class SequenceTiming:
    """Timing of the pulse sequence, all in seconds.

    ``t0`` runs from trap release to the first beamsplitter, ``t1`` from the
    first beamsplitter to the mirror, ``t2 = t1 + delta_t`` from the mirror to
    the final beamsplitter, and ``t_sep`` from the final beamsplitter to
    imaging.  The total time of flight is the sum of all four.
    """

    t0: float
    t1: float
    delta_t: float = 0.0
    t_sep: float = 0.0

    def __post_init__(self):
        for name in ("t0", "t1", "t_sep"):
            v = getattr(self, name)
            if not (v >= 0 and math.isfinite(v)):
                raise ValueError(f"{name} must be >= 0 and finite, got {v}")
        if not math.isfinite(self.delta_t):
            raise ValueError("delta_t must be finite")
        if self.t2 < 0:
            raise ValueError(f"t1 + delta_t must be >= 0, got {self.t2}")

    @property
    def t2(self) -> float:
        return self.t1 + self.delta_t

    @property
    def total_time_of_flight(self) -> float:
        return self.t0 + self.t1 + self.t2 + self.t_sep


@dataclass(frozen=True)
class InterferometerConfig:
    """Full static description of one interferometer setting.

    ``gravity`` is the signed projection of the local acceleration on the
    lattice axis, ``chirp_rate`` the frequency sweep [Hz/s] applied to track
    the Doppler shift of the falling atoms, and ``laser_phases`` the three
    pulse phases whose combination phi1 - 2*phi2 + phi3 enters the output
    phase.
    """

    species: AtomSpecies
    timing: SequenceTiming
    bragg_order: int = 1
    gravity: float = G_EARTH
    chirp_rate: float = 0.0
    laser_phases: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self):
        if int(self.bragg_order) != self.bragg_order or self.bragg_order < 1:
            raise ValueError(f"bragg_order must be a positive integer, got {self.bragg_order}")
        for name in ("gravity", "chirp_rate"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        if len(self.laser_phases) != 3 or not all(math.isfinite(p) for p in self.laser_phases):
            raise ValueError("laser_phases must be three finite values")

    @property
    def laser_phase(self) -> float:
        """Composite pulse phase phi1 - 2*phi2 + phi3 [rad]."""
        p1, p2, p3 = self.laser_phases
        return p1 - 2.0 * p2 + p3


@dataclass(frozen=True)
class PhaseBreakdown:
    """Interferometer output phase split into its three contributions [rad].

    ``total`` is always the exact sum of the parts.
    """

    propagation: float
    laser: float
    separation_offset: float = 0.0

    @property
    def total(self) -> float:
        return self.propagation + self.laser + self.separation_offset


def recoil_velocity(species: AtomSpecies, n: int = 1) -> float:
    """Velocity kick 2*n*hbar*k/m of an order-n two-photon transition [m/s].

    Linear in the diffraction order; n = 0 transfers no momentum.
    """
    if int(n) != n or n < 0:
        raise ValueError(f"diffraction order must be a non-negative integer, got {n}")
    return 2.0 * n * HBAR * species.wavenumber / species.mass


def fringe_wavelength(config: InterferometerConfig) -> float:
    """Wavelength of the output density fringe [m].

    The momentum mismatch written by the temporal asymmetry maps through
    ballistic expansion onto position, giving

        lambda_fringe = pi * T_tof / (n * k * |delta_t|)

    with ``T_tof`` the total time of flight from release to imaging.  A
    symmetric sequence (``delta_t == 0``) produces no spatial fringe.
    """
    timing = config.timing
    if timing.delta_t == 0.0:
        raise ValueError(
            "delta_t is zero: a symmetric sequence produces an infinite fringe wavelength"
        )
    t_tof = timing.total_time_of_flight
    if t_tof <= 0.0:
        raise ValueError(f"total time of flight must be positive, got {t_tof}")
    n = config.bragg_order
    k = config.species.wavenumber
    return math.pi * t_tof / (n * k * abs(timing.delta_t))


def fringe_wavenumber(config: InterferometerConfig) -> float:
    """Spatial angular frequency 2*pi/lambda_fringe of the output fringe [rad/m]."""
    return 2.0 * math.pi / fringe_wavelength(config)


def beamsplitter_separation(config: InterferometerConfig) -> float:
    """Spatial mismatch of the two arms at the final beamsplitter, v_r*|delta_t| [m]."""
    v_r = recoil_velocity(config.species, config.bragg_order)
    return v_r * abs(config.timing.delta_t)


def overlap_wait_time(config: InterferometerConfig) -> float:
    """Wait time after the final beamsplitter for a quarter-wavelength port displacement [s].

    Written out in terms of the timing this is

        t = (lambda_fringe / 4) / v_r = (1/8) * m * pi * T_tof / (n * k^2 * hbar * |delta_t|)

    The ports drift apart at the recoil velocity, so this is the time at which
    their fringe patterns have slipped by a quarter wavelength.  Whether the
    combined contrast peaks there depends on the relative fringe phase of the
    two ports; see `fitting.optimize_overlap_time` for the empirical optimum.
    """
    timing = config.timing
    if timing.delta_t == 0.0:
        raise ValueError("delta_t is zero: there is no fringe to overlap")
    m = config.species.mass
    k = config.species.wavenumber
    n = config.bragg_order
    return (m * math.pi * timing.total_time_of_flight) / (
        8.0 * n * k * k * HBAR * abs(timing.delta_t)
    )


def mz_phase(config: InterferometerConfig) -> PhaseBreakdown:
    """Accumulated phase of the Mach-Zehnder sequence.

    The propagation term is n*(k_eff*g - 2*pi*alpha)*T^2 with T the first
    pulse spacing; it vanishes when the chirp exactly tracks gravity.  The
    laser term is phi1 - 2*phi2 + phi3.  The position-dependent separation
    phase of an asymmetric sequence is handled by `separation_phase` and by
    the synthesis layer, so the offset entry here is zero.
    """
    t = config.timing.t1
    k_eff = config.species.effective_wavevector
    propagation = config.bragg_order * (
        k_eff * config.gravity - 2.0 * math.pi * config.chirp_rate
    ) * t * t
    return PhaseBreakdown(propagation=propagation, laser=config.laser_phase)


def separation_phase(species: AtomSpecies, delta_x: float, p_bar: float, expansion_time: float, x):
    """Phase written on an output port by a spatial mismatch ``delta_x`` [rad].

    Two contributions: a constant offset ``delta_x * p_bar / hbar`` set by the
    port's mean momentum ``p_bar``, and a position-dependent term whose
    momentum mismatch has been mapped through ballistic expansion,
    ``(m * delta_x / t) * x / hbar``.  The spatial wavenumber of the second
    term is what sets the fringe wavelength.

    ``x`` may be a scalar or an array of positions.
    """
    if expansion_time <= 0:
        raise ValueError(f"expansion_time must be positive, got {expansion_time}")
    offset = delta_x * p_bar / HBAR
    return offset + (species.mass * delta_x / expansion_time) * x / HBAR


def gravity_cancelling_chirp(species: AtomSpecies, gravity: float = G_EARTH) -> float:
    """Chirp rate k_eff*g/(2*pi) that nulls the propagation phase [Hz/s]."""
    return species.effective_wavevector * gravity / (2.0 * math.pi)
