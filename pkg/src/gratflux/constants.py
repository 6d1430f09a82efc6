"""Physical constants (CODATA 2018), SI units throughout."""

CONSTANTS_VERSION = "CODATA-2018"

HBAR = 1.054571817e-34        # reduced Planck constant [J s]
K_BOLTZMANN = 1.380649e-23    # Boltzmann constant [J/K]
C_LIGHT = 2.99792458e8        # speed of light in vacuum [m/s]
SIGMA_SB = 5.670374419e-8     # Stefan-Boltzmann constant [W m^-2 K^-4]


def blackbody_coefficient(t_hot: float, t_cold: float) -> float:
    """Black-body heat transfer coefficient sigma*(T1^4 - T2^4)/(T1 - T2)."""
    return SIGMA_SB * (t_hot**4 - t_cold**4) / (t_hot - t_cold)
