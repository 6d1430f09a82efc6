import math

import numpy as np
import pytest

from gratflux.constants import C_LIGHT
from gratflux.materials import (
    DielectricModel,
    ThermalState,
    permittivity,
    sio2_nk_table,
)
from gratflux.planar import (
    PlanarNumerics,
    cavity_transmission,
    planar_heat_transfer,
    spectral_flux_planar,
)

THERMAL = ThermalState(310.0, 290.0)
FAST = PlanarNumerics(omega_rel_tol=1e-3, kt_rel_tol=1e-4)


@pytest.fixture(scope="module")
def silica():
    return sio2_nk_table()


def test_transmission_bounds(silica):
    omega = 2.153e14
    eps = complex(permittivity(silica, omega))
    k0 = omega / C_LIGHT
    kt = np.linspace(1e-3 * k0, 5.0 * k0, 400)
    tau_s, tau_p = cavity_transmission(eps, omega, kt, 100e-9)
    for tau in (tau_s, tau_p):
        assert np.all(tau >= 0.0)
        # propagating channels are Landauer-bounded by one
        assert np.all(tau[kt < k0] <= 1.0 + 1e-12)


def test_components_sum_to_total(silica):
    res = planar_heat_transfer(silica, 100e-9, THERMAL, FAST)
    assert res.value == pytest.approx(
        res.prop_s + res.prop_p + res.evan_s + res.evan_p, rel=1e-12)
    assert res.value > 0.0


def test_near_field_inverse_square_scaling(silica):
    # in the evanescent-dominated regime h0 scales like 1/L^2
    h_25 = planar_heat_transfer(silica, 25e-9, THERMAL, FAST).value
    h_50 = planar_heat_transfer(silica, 50e-9, THERMAL, FAST).value
    assert 3.5 < h_25 / h_50 < 4.5


def test_evanescent_p_dominates_in_near_field(silica):
    # surface phonon polaritons make the evanescent p channel dominant
    res = planar_heat_transfer(silica, 25e-9, THERMAL, FAST)
    assert res.evan_p > 0.5 * res.value


def test_temperature_swap_invariance(silica):
    a = planar_heat_transfer(silica, 100e-9, ThermalState(310.0, 290.0), FAST)
    b = planar_heat_transfer(silica, 100e-9, ThermalState(290.0, 310.0), FAST)
    assert a.value > 0.0
    assert b.value == pytest.approx(a.value, rel=1e-12)


def test_perfect_mirror_suppresses_transfer(silica):
    # a nearly lossless, highly reflecting medium exchanges almost nothing:
    # the evanescent channel needs Im(r) and the propagating one 1 - |r|^2
    lam = np.linspace(2.0, 150.0, 50)
    mirror = DielectricModel(
        name="mirror",
        table_omega=2.0 * math.pi * C_LIGHT / (lam[::-1] * 1e-6),
        table_n=np.full(50, 1e-4),
        table_k=np.full(50, 300.0),
    )
    omega = 2.153e14
    gap = 100e-9
    flux_mirror = spectral_flux_planar(
        complex(permittivity(mirror, omega)), omega, gap, FAST)
    flux_silica = spectral_flux_planar(
        complex(permittivity(silica, omega)), omega, gap, FAST)
    assert flux_mirror < 1e-4 * flux_silica


def test_gap_validation(silica):
    with pytest.raises(ValueError):
        planar_heat_transfer(silica, 0.0, THERMAL, FAST)
