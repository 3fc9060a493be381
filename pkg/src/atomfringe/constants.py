"""Physical constants (SI units, CODATA values)."""

HBAR = 1.054571817e-34  # reduced Planck constant [J s]
KB = 1.380649e-23  # Boltzmann constant [J/K], exact
G_EARTH = 9.81  # nominal gravitational acceleration [m/s^2]

RB87_MASS = 1.44316e-25  # Rb-87 atomic mass [kg]
RB87_WAVELENGTH = 780e-9  # lattice light wavelength [m] (frequency-doubled 1560 nm)
