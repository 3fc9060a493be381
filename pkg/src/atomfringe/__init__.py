"""Simulation and phase-noise analysis of asymmetric Mach-Zehnder atom interferometry.

The package synthesizes single-shot spatial-fringe density profiles from a
closed-form phase model, extracts the phase by nonlinear least squares with
either of the two readout procedures (population fringes for the symmetric
sequence, envelope-times-sinusoid fits for the asymmetric one), and
characterizes short-term phase noise through Allan deviations of seeded Monte
Carlo campaigns.
"""

__version__ = "0.1.0"

from .physics import (  # noqa: F401
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
from .synthesis import (  # noqa: F401
    CloudState,
    DensityProfile,
    NoiseModel,
    PortPair,
    apply_noise,
    default_cloud,
    image_absorption,
    make_port_pair,
    propagate_cloud,
    synthesize_ports,
    thermal_velocity_sigma,
    tilt_contrast_factor,
)
from .smoothing import savitzky_golay  # noqa: F401
from .fitting import (  # noqa: F401
    FitResult,
    FringeResolvabilityError,
    OverlapScanResult,
    PhaseSeries,
    alignment_wait_time,
    fit_batch_median_k,
    fit_population_fringe,
    fit_spatial_fringe,
    optimize_overlap_time,
    population_readout,
    subtract_laser_ramp,
    wrap_phase,
)
from .allan import (  # noqa: F401
    AllanCurve,
    EquivalenceReport,
    NoiseSummary,
    allan_deviation,
    compare_schemes,
    fit_noise_slope,
)
from .campaign import (  # noqa: F401
    CampaignConfig,
    CampaignResult,
    ConfigError,
    RunRecord,
    derive_seed,
    figure_data,
    load_campaign_config,
    run_campaign,
)
