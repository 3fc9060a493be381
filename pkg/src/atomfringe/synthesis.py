"""Synthetic single-shot density profiles of the interferometer output.

After the final beamsplitter the two output ports drift apart at the recoil
velocity while the cloud keeps expanding ballistically.  Each port is modeled
as a Gaussian envelope carrying a sinusoidal density modulation that is
referenced to, and co-moves with, its own envelope centre:

    rho_p(x) = A_p * G(x; c_p, sigma) * [1 - B * sin(k_f * (x - c_p) - phi_p)]

The two ports share the fringe wavenumber ``k_f`` but their fringe phases
differ by a fixed offset ``delta_phi_ports`` (pi by default, which makes the
port modulations complementary).  The simulation frame tracks the kicked port,
so the unkicked port recedes toward negative positions; waiting therefore
slides the two fringe patterns through each other, from cancellation at zero
separation to constructive overlap once the relative displacement matches the
phase offset.

For a symmetric sequence there is no spatial fringe and the interferometer
phase instead sets the population split between the ports: the kicked port
receives the fraction (1 - cos(phi))/2.

Common-mode free fall is not resolved on the fringe axis (the imaging frame
tracks the cloud); gravity enters only through the phase model.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .constants import KB
from .physics import (
    AtomSpecies,
    InterferometerConfig,
    RB87,
    fringe_wavenumber,
    recoil_velocity,
)

__all__ = [
    "CloudState",
    "DensityProfile",
    "NoiseModel",
    "PortPair",
    "thermal_velocity_sigma",
    "default_cloud",
    "propagate_cloud",
    "make_port_pair",
    "synthesize_ports",
    "tilt_contrast_factor",
    "image_absorption",
    "apply_noise",
]

WINDOW_SIGMAS = 7.0  # half-window in units of the expanded envelope width
MIN_SAMPLES_PER_PERIOD = 20
DEFAULT_SAMPLES = 2048


@dataclass(frozen=True)
class CloudState:
    """Gaussian atom cloud: centre, width, velocity spread and atom number.

    ``velocity`` is the drift of the cloud centre in the simulation frame and
    is zero for the port the frame tracks.
    """

    center: float = 0.0
    sigma: float = 25e-6
    velocity_sigma: float = 0.0
    atom_number: float = 2e6
    velocity: float = 0.0

    def __post_init__(self):
        if not (self.sigma > 0 and math.isfinite(self.sigma)):
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        if self.velocity_sigma < 0:
            raise ValueError(f"velocity_sigma must be >= 0, got {self.velocity_sigma}")
        if not (self.atom_number > 0):
            raise ValueError(f"atom_number must be positive, got {self.atom_number}")


def thermal_velocity_sigma(species: AtomSpecies, temperature: float) -> float:
    """One-dimensional rms velocity sqrt(kB*T/m) of a thermal cloud [m/s]."""
    if temperature < 0:
        raise ValueError("temperature must be >= 0")
    return math.sqrt(KB * temperature / species.mass)


def default_cloud(species: AtomSpecies = RB87) -> CloudState:
    """Condensate released from the trap: 25 um width, 50 nK effective temperature."""
    return CloudState(
        center=0.0,
        sigma=25e-6,
        velocity_sigma=thermal_velocity_sigma(species, 50e-9),
        atom_number=2e6,
    )


def propagate_cloud(cloud: CloudState, t: float) -> CloudState:
    """Ballistic expansion over time ``t``: widths add in quadrature, centre drifts."""
    if t < 0:
        raise ValueError(f"propagation time must be >= 0, got {t}")
    if t == 0.0:
        return cloud
    sigma = math.hypot(cloud.sigma, cloud.velocity_sigma * t)
    return replace(cloud, sigma=sigma, center=cloud.center + cloud.velocity * t)


@dataclass(frozen=True)
class PortPair:
    """The two output ports at imaging time.

    Both ports share the fringe wavenumber; their fringe phases are referenced
    to their own envelope centres and differ by a fixed offset.  Atom numbers
    carry the population split.
    """

    port_a: CloudState  # kicked port, carries the interferometer phase
    port_b: CloudState
    contrast: float
    k_fringe: float
    phase_a: float
    phase_b: float
    relative_velocity: float

    def __post_init__(self):
        if not (0.0 <= self.contrast <= 1.0):
            raise ValueError(f"contrast must lie in [0, 1], got {self.contrast}")
        if self.k_fringe < 0:
            raise ValueError("k_fringe must be >= 0")


@dataclass(frozen=True)
class NoiseModel:
    """Per-shot noise channels, all optional and seeded.

    Applied in a fixed order: the laser phase jitter perturbs the
    interferometer phase before synthesis; atom-number scaling, camera-jitter
    translation and additive detection noise act on the rendered profile.
    """

    laser_phase_sigma: float = 0.0  # rad per shot
    camera_jitter_sigma: float = 0.0  # m per shot
    additive_detection_sigma: float = 0.0  # profile units
    atom_number_fractional_sigma: float = 0.0
    rng_seed: int = 0

    def __post_init__(self):
        for name in (
            "laser_phase_sigma",
            "camera_jitter_sigma",
            "additive_detection_sigma",
            "atom_number_fractional_sigma",
        ):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")

    def rng(self) -> np.random.Generator:
        return np.random.default_rng(self.rng_seed)


@dataclass
class DensityProfile:
    """Sampled 1-D density with its spatial axis and synthesis metadata.

    ``axis`` must be uniformly spaced and strictly increasing.  Values of a
    noiseless synthesis are non-negative; additive detection noise may push
    individual samples slightly below zero and is deliberately not clipped.
    """

    axis: np.ndarray
    values: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.axis = np.asarray(self.axis, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.axis.ndim != 1 or self.axis.size < 2:
            raise ValueError("axis must be a 1-D array with at least two samples")
        if self.values.shape != self.axis.shape:
            raise ValueError("axis and values must have the same shape")
        steps = np.diff(self.axis)
        if not np.all(steps > 0):
            raise ValueError("axis must be strictly increasing")
        if not np.allclose(steps, steps[0], rtol=1e-9, atol=0.0):
            raise ValueError("axis must be uniformly spaced")
        if not (np.all(np.isfinite(self.axis)) and np.all(np.isfinite(self.values))):
            raise ValueError("axis and values must be finite")

    @property
    def dx(self) -> float:
        return float(self.axis[1] - self.axis[0])

    def total_atoms(self) -> float:
        return float(np.trapezoid(self.values, self.axis))

    def cropped(self, lo: float, hi: float) -> "DensityProfile":
        """Samples with lo <= x <= hi, metadata carried over."""
        mask = (self.axis >= lo) & (self.axis <= hi)
        if int(mask.sum()) < 8:
            raise ValueError("crop window contains too few samples")
        return DensityProfile(self.axis[mask].copy(), self.values[mask].copy(), dict(self.metadata))

    def to_csv(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("position_m,density\n")
            for x, v in zip(self.axis, self.values):
                fh.write(f"{float(x)!r},{float(v)!r}\n")

    @classmethod
    def from_csv(cls, path) -> "DensityProfile":
        data = np.genfromtxt(path, delimiter=",", skip_header=1)
        if data.ndim != 2 or data.shape[1] < 2:
            raise ValueError(f"{path} is not a position_m,density table")
        return cls(axis=data[:, 0], values=data[:, 1])


def make_port_pair(
    config: InterferometerConfig,
    true_phase: float,
    cloud: CloudState | None = None,
    contrast: float = 0.8,
    delta_phi_ports: float = math.pi,
    expansion_scale: float = 1.0,
) -> PortPair:
    """Port geometry, weights and fringe parameters at imaging time.

    ``expansion_scale`` rescales the ballistic expansion rate (default 1); it
    is exposed to model expansion anomalies without being calibrated here.
    """
    if cloud is None:
        cloud = default_cloud(config.species)
    timing = config.timing
    t_tof = timing.total_time_of_flight
    expanded = propagate_cloud(
        replace(cloud, velocity_sigma=cloud.velocity_sigma * expansion_scale), t_tof
    )
    v_r = recoil_velocity(config.species, config.bragg_order)
    separation = v_r * timing.t_sep

    if timing.delta_t == 0.0:
        k_f = 0.0
        eff_contrast = 0.0
        weight_a = 0.5 * (1.0 - math.cos(true_phase))
    else:
        k_f = fringe_wavenumber(config)
        eff_contrast = contrast
        weight_a = 0.5
    weight_b = 1.0 - weight_a

    n_total = cloud.atom_number
    port_a = replace(expanded, center=expanded.center, atom_number=max(n_total * weight_a, 1e-300))
    port_b = replace(
        expanded,
        center=expanded.center - separation,
        atom_number=max(n_total * weight_b, 1e-300),
        velocity=-v_r,
    )
    return PortPair(
        port_a=port_a,
        port_b=port_b,
        contrast=eff_contrast,
        k_fringe=k_f,
        phase_a=true_phase,
        phase_b=true_phase + delta_phi_ports,
        relative_velocity=v_r,
    )


def _gaussian_pdf(x, center, sigma):
    z = (x - center) / sigma
    return np.exp(-0.5 * z * z) / (sigma * math.sqrt(2.0 * math.pi))


def _render(ports: PortPair, axis: np.ndarray) -> np.ndarray:
    values = np.zeros_like(axis)
    for port, phi in ((ports.port_a, ports.phase_a), (ports.port_b, ports.phase_b)):
        envelope = _gaussian_pdf(axis, port.center, port.sigma)
        bracket = 1.0 - ports.contrast * np.sin(ports.k_fringe * (axis - port.center) - phi)
        # exact analytic integral of the modulated Gaussian, for atom-number
        # conservation also when the fringe is coarse compared to the envelope
        damp = math.exp(-0.5 * (ports.k_fringe * port.sigma) ** 2)
        norm = 1.0 + ports.contrast * damp * math.sin(phi)
        values += (port.atom_number / norm) * envelope * bracket
    return values


def _gaussian_mass(lo, hi, center, sigma):
    a = (lo - center) / (sigma * math.sqrt(2.0))
    b = (hi - center) / (sigma * math.sqrt(2.0))
    return 0.5 * (math.erf(b) - math.erf(a))


def synthesize_ports(
    config: InterferometerConfig,
    true_phase: float,
    noise: NoiseModel | None = None,
    *,
    cloud: CloudState | None = None,
    contrast: float = 0.8,
    delta_phi_ports: float = math.pi,
    n_samples: int = DEFAULT_SAMPLES,
    window: tuple[float, float] | None = None,
    imaging_tilt: float = 0.0,
    transverse_sigma: float | None = None,
    expansion_scale: float = 1.0,
    imaging_mode: str = "absorption",
    shot_id: int = 0,
    rng: np.random.Generator | None = None,
) -> DensityProfile:
    """Render one shot: two-port synthesis, imaging tilt, then noise injection.

    The default window spans both envelopes plus ``WINDOW_SIGMAS`` widths on
    each side; the sample count is raised if needed so every fringe period
    contains at least ``MIN_SAMPLES_PER_PERIOD`` samples.  An explicit window
    that holds less than 99% of the density is rejected.
    """
    if noise is not None and rng is None:
        rng = noise.rng()
    phase = true_phase
    if noise is not None and noise.laser_phase_sigma > 0:
        phase = true_phase + rng.normal(0.0, noise.laser_phase_sigma)

    ports = make_port_pair(
        config,
        phase,
        cloud=cloud,
        contrast=contrast,
        delta_phi_ports=delta_phi_ports,
        expansion_scale=expansion_scale,
    )
    if imaging_tilt != 0.0:
        sig_perp = transverse_sigma if transverse_sigma is not None else ports.port_a.sigma
        factor = tilt_contrast_factor(ports.k_fringe, sig_perp, imaging_tilt)
        ports = replace(ports, contrast=ports.contrast * factor)

    sigma = ports.port_a.sigma
    lo_center = min(ports.port_a.center, ports.port_b.center)
    hi_center = max(ports.port_a.center, ports.port_b.center)
    if window is None:
        window = (lo_center - WINDOW_SIGMAS * sigma, hi_center + WINDOW_SIGMAS * sigma)
    else:
        mass = 0.0
        for port in (ports.port_a, ports.port_b):
            mass += (
                port.atom_number
                * _gaussian_mass(window[0], window[1], port.center, port.sigma)
            )
        total = ports.port_a.atom_number + ports.port_b.atom_number
        if mass < 0.99 * total:
            raise ValueError(
                f"window {window} holds {mass / total:.1%} of the density, need >= 99%"
            )

    span = window[1] - window[0]
    n = int(n_samples)
    if ports.k_fringe > 0:
        period = 2.0 * math.pi / ports.k_fringe
        n = max(n, int(math.ceil(MIN_SAMPLES_PER_PERIOD * span / period)) + 1)
    axis = np.linspace(window[0], window[1], n)
    values = _render(ports, axis)

    profile = DensityProfile(
        axis=axis,
        values=values,
        metadata={
            "shot_id": shot_id,
            "imaging_mode": imaging_mode,
            "timing": (config.timing.t0, config.timing.t1, config.timing.delta_t, config.timing.t_sep),
            "k_fringe": ports.k_fringe,
            "ports": ports,
            "true_phase": phase,
        },
    )
    if noise is not None:
        profile = apply_noise(profile, noise, rng=rng)
    return profile


def tilt_contrast_factor(k_fringe: float, sigma_perp: float, theta: float) -> float:
    """Contrast retained when imaging integrates at angle ``theta`` to the fringe planes.

    A line-of-sight at angle theta samples the fringe across the transverse
    Gaussian envelope of width ``sigma_perp``, washing the modulation out by

        exp(-(k_fringe * sigma_perp * tan(theta))^2 / 2)

    The envelope itself is broad compared to the smearing and is left
    unchanged.  Exactly 1 at theta = 0.
    """
    if not (-math.pi / 2 < theta < math.pi / 2):
        raise ValueError(f"tilt angle must lie in (-pi/2, pi/2), got {theta}")
    if theta == 0.0:
        return 1.0
    arg = k_fringe * sigma_perp * math.tan(theta)
    return math.exp(-0.5 * arg * arg)


def image_absorption(
    profile: DensityProfile, theta: float, transverse_sigma: float | None = None
) -> DensityProfile:
    """Re-image a synthesized shot with the light tilted by ``theta``.

    Multiplies the fringe contrast by `tilt_contrast_factor` and re-renders on
    the same axis; requires the synthesis port description in the metadata.
    """
    ports = profile.metadata.get("ports")
    if ports is None:
        raise ValueError("profile carries no port description; synthesize it first")
    sig_perp = transverse_sigma if transverse_sigma is not None else ports.port_a.sigma
    factor = tilt_contrast_factor(ports.k_fringe, sig_perp, theta)
    tilted = replace(ports, contrast=ports.contrast * factor)
    meta = dict(profile.metadata)
    meta["ports"] = tilted
    meta["imaging_tilt"] = theta
    return DensityProfile(profile.axis.copy(), _render(tilted, profile.axis), meta)


def apply_noise(
    profile: DensityProfile, noise: NoiseModel, rng: np.random.Generator | None = None
) -> DensityProfile:
    """Detection-chain noise: number scaling, camera jitter, additive noise.

    The channels are applied in that fixed order and all draws come from one
    generator seeded by ``noise.rng_seed``, so the output is a pure function
    of (profile, noise) regardless of where or when it runs.
    """
    if rng is None:
        rng = noise.rng()
    values = profile.values.copy()

    scale = 1.0 + rng.normal(0.0, noise.atom_number_fractional_sigma)
    values *= max(scale, 0.0)

    shift = rng.normal(0.0, noise.camera_jitter_sigma)
    if shift != 0.0:
        values = np.interp(profile.axis - shift, profile.axis, values, left=0.0, right=0.0)

    values = values + rng.normal(0.0, noise.additive_detection_sigma, size=values.shape)

    meta = dict(profile.metadata)
    meta["noise_applied"] = True
    return DensityProfile(profile.axis.copy(), values, meta)
