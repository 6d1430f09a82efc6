import io
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gratflux.constants import C_LIGHT, HBAR, K_BOLTZMANN
from gratflux.materials import (
    DielectricModel,
    Oscillator,
    ThermalState,
    load_nk_table,
    permittivity,
    sio2_nk_table,
    sio2_oscillator_model,
    thermal_energy,
)

# mean occupation energy over hbar*omega at hbar*omega/kT = 50, frozen from
# an exact high-precision evaluation of 1/(exp(50) - 1)
BOSE_AT_50 = 1.9287498479639178e-22


def test_oscillator_model_matches_analytic_formula():
    model = DielectricModel(name="toy", eps_inf=2.0, oscillators=(
        Oscillator(plasma=1.0e14, resonance=2.0e14, damping=1.0e13),))
    w = 1.7e14
    expected = 2.0 + 1.0e28 / (4.0e28 - w**2 - 1j * 1.0e13 * w)
    assert permittivity(model, w) == pytest.approx(expected)


def test_silica_static_permittivity():
    model = sio2_oscillator_model()
    # at omega far below every resonance, eps -> eps_inf + sum wp^2/w0^2
    expected = model.eps_inf + sum(o.plasma**2 / o.resonance**2
                                   for o in model.oscillators)
    got = permittivity(model, 1.0e11)
    assert got.real == pytest.approx(expected, rel=1e-3)
    assert 3.3 < got.real < 4.0
    assert got.imag < 1e-2 * got.real


def test_silica_reststrahlen_band():
    # between the strong phonon resonance and the longitudinal edge the real
    # permittivity of silica is negative; sample near 8.75 um wavelength
    for model in (sio2_nk_table(), sio2_oscillator_model()):
        omega = 2.0 * math.pi * C_LIGHT / 8.75e-6
        eps = permittivity(model, omega)
        assert eps.real < 0.0
        assert eps.imag > 0.0


def test_silica_table_and_oscillator_agree():
    table = sio2_nk_table()
    model = sio2_oscillator_model()
    w = np.geomspace(table.table_omega[0], table.table_omega[-1], 400)
    nk_t = np.sqrt(permittivity(table, w))
    nk_o = np.sqrt(permittivity(model, w))
    # residuals of the shipped fit, recorded when the data files were built
    assert np.abs(nk_t.real - nk_o.real).max() < 0.06
    assert np.abs(nk_t.imag - nk_o.imag).max() < 0.10


def test_permittivity_outside_table_rejected():
    table = sio2_nk_table()
    with pytest.raises(ValueError):
        permittivity(table, table.table_omega[0] * 0.5)
    with pytest.raises(ValueError):
        permittivity(table, table.table_omega[-1] * 2.0)


def test_permittivity_passivity_over_table():
    table = sio2_nk_table()
    w = np.geomspace(table.table_omega[0], table.table_omega[-1], 1000)
    eps = permittivity(table, w)
    assert np.all(eps.imag >= 0.0)


def test_thermal_energy_frozen_point():
    t = 300.0
    w = 50.0 * K_BOLTZMANN * t / HBAR
    assert thermal_energy(t, w) / (HBAR * w) == pytest.approx(
        BOSE_AT_50, rel=1e-12)


def test_thermal_energy_limits():
    t = 300.0
    kt = K_BOLTZMANN * t
    # deep Wien tail underflows to exactly zero instead of overflowing
    assert thermal_energy(t, 701.0 * kt / HBAR) == 0.0
    # Rayleigh-Jeans end approaches kT
    assert thermal_energy(t, 1e-8 * kt / HBAR) == pytest.approx(kt, rel=1e-7)
    with pytest.raises(ValueError):
        thermal_energy(-1.0, 1e14)
    with pytest.raises(ValueError):
        thermal_energy(t, -1e14)


@given(st.floats(min_value=1e12, max_value=1e16))
@settings(max_examples=50, deadline=None)
def test_thermal_weight_positive_for_hotter_body(omega):
    state = ThermalState(310.0, 290.0)
    assert state.weight(omega) > 0.0


def test_thermal_state_validation():
    with pytest.raises(ValueError):
        ThermalState(300.0, 300.0)
    with pytest.raises(ValueError):
        ThermalState(-5.0, 300.0)


def test_thermal_energy_monotone_in_temperature():
    w = 2.0e14
    values = [thermal_energy(t, w) for t in (250.0, 290.0, 310.0, 400.0)]
    assert values == sorted(values)


def test_load_nk_table_roundtrip():
    text = "# wavelength_um n k\n1.0 1.5 0.0\n2.0 1.4 0.1\n10.0 2.0 1.0\n"
    model = load_nk_table(io.StringIO(text), name="demo")
    assert model.is_tabulated
    # stored ascending in omega, so descending in wavelength
    assert np.all(np.diff(model.table_omega) > 0)
    w = 2.0 * math.pi * C_LIGHT / 2.0e-6
    assert permittivity(model, w) == pytest.approx((1.4 + 0.1j) ** 2)


def test_load_nk_table_validation():
    with pytest.raises(ValueError):
        load_nk_table(io.StringIO("1.0 1.5\n2.0 1.4\n"))
    with pytest.raises(ValueError):
        load_nk_table(io.StringIO("2.0 1.5 0.0\n1.0 1.4 0.0\n"))
    with pytest.raises(ValueError):
        load_nk_table(io.StringIO("1.0 1.5 0.0\n"))


def test_oscillator_validation():
    with pytest.raises(ValueError):
        Oscillator(plasma=-1.0, resonance=1e14, damping=1e13)
    with pytest.raises(ValueError):
        Oscillator(plasma=1e14, resonance=1e14, damping=0.0)
