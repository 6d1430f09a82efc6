"""Near-field radiative heat transfer between laterally displaceable
dielectric lamellar gratings, via the exact scattering-matrix (Fourier
modal) formalism, with a plane-plane oracle and the proximity approximation
as built-in baselines."""

__version__ = "0.1.0"

from .constants import blackbody_coefficient
from .materials import (
    DielectricModel,
    Oscillator,
    ThermalState,
    load_nk_table,
    load_nk_table_file,
    permittivity,
    sio2_nk_table,
    sio2_oscillator_model,
    thermal_energy,
)
from .planar import PlanarNumerics, PlanarResult, planar_heat_transfer
from .proximity import (
    ProximityResult,
    ProximityWeights,
    proximity_heat_transfer,
    proximity_weights,
    reduce_shift,
)
from .quadrature import QuadratureConfig, QuadratureResult, integrate_adaptive
from .rcwa import (
    GratingGeometry,
    ModeBasis,
    ReflectionOperator,
    apply_lateral_shift,
    facing_operator,
    grating_reflection,
    planar_reflection,
)
from .transfer import (
    NumericsConfig,
    SigmaOperators,
    TransferSpectrum,
    build_system_operators,
    heat_transfer_coefficient,
    modulation_factor,
    spectral_flux,
    transmission_trace,
)

__all__ = [
    "DielectricModel",
    "GratingGeometry",
    "ModeBasis",
    "NumericsConfig",
    "Oscillator",
    "PlanarNumerics",
    "PlanarResult",
    "ProximityResult",
    "ProximityWeights",
    "QuadratureConfig",
    "QuadratureResult",
    "ReflectionOperator",
    "SigmaOperators",
    "ThermalState",
    "TransferSpectrum",
    "apply_lateral_shift",
    "blackbody_coefficient",
    "build_system_operators",
    "facing_operator",
    "grating_reflection",
    "heat_transfer_coefficient",
    "integrate_adaptive",
    "load_nk_table",
    "load_nk_table_file",
    "modulation_factor",
    "permittivity",
    "planar_heat_transfer",
    "planar_reflection",
    "proximity_heat_transfer",
    "proximity_weights",
    "reduce_shift",
    "sio2_nk_table",
    "sio2_oscillator_model",
    "spectral_flux",
    "thermal_energy",
    "transmission_trace",
]
