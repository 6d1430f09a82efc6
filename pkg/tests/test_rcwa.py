import math

import numpy as np
import pytest

from gratflux.constants import C_LIGHT
from gratflux.materials import permittivity, sio2_nk_table
from gratflux.rcwa import (
    GratingGeometry,
    ModeBasis,
    ReflectionOperator,
    _scattering_stack,
    _scattering_stack_reference,
    apply_lateral_shift,
    facing_operator,
    grating_reflection,
    longitudinal_wavenumber,
    mode_power_flux,
    planar_reflection,
)

OMEGA = 2.0 * math.pi * C_LIGHT / 8.75e-6     # inside the silica reststrahlen band
PERIOD = 1500e-9
DEPTH = 500e-9
FILL = 0.2


@pytest.fixture(scope="module")
def silica_eps():
    return complex(permittivity(sio2_nk_table(), OMEGA))


def _basis(kx=0.23 * math.pi / PERIOD, ky=None, n_orders=6, omega=OMEGA):
    if ky is None:
        ky = 1.7 * omega / C_LIGHT
    return ModeBasis(omega=omega, kx=kx, ky=ky, n_orders=n_orders,
                     period=PERIOD)


# ---------------------------------------------------------------------------
# geometry and basis plumbing


def test_geometry_validation():
    with pytest.raises(ValueError):
        GratingGeometry(period=-1.0, depth=1e-7, fill=0.2)
    with pytest.raises(ValueError):
        GratingGeometry(period=1e-6, depth=-1e-9, fill=0.2)
    with pytest.raises(ValueError):
        GratingGeometry(period=1e-6, depth=1e-7, fill=1.0)


def test_geometry_shift_reduced_modulo_period():
    g = GratingGeometry(period=1e-6, depth=1e-7, fill=0.3, delta=2.3e-6)
    assert g.delta == pytest.approx(0.3e-6)
    assert g.ridge_width == pytest.approx(0.3e-6)


def test_basis_rejects_kx_outside_brillouin_zone():
    with pytest.raises(ValueError):
        ModeBasis(omega=OMEGA, kx=2.0 * math.pi / PERIOD, ky=0.0,
                  n_orders=3, period=PERIOD)


def test_basis_propagating_mask():
    b = ModeBasis(omega=OMEGA, kx=0.0, ky=0.0, n_orders=3, period=PERIOD)
    k0 = OMEGA / C_LIGHT
    expected = np.abs(b.kx_orders) < k0
    assert np.array_equal(b.propagating, expected)
    assert b.dim == 2 * (2 * 3 + 1)


def test_operator_dimension_checked():
    b = _basis(n_orders=2)
    with pytest.raises(ValueError):
        ReflectionOperator(np.zeros((4, 4)), b)


def test_longitudinal_wavenumber_branch():
    k0 = 1.0
    # propagating: real positive
    assert longitudinal_wavenumber(1.0, k0, 0.5, 0.0).real > 0
    # evanescent in vacuum: positive imaginary, zero real part
    kz = longitudinal_wavenumber(1.0, k0, 2.0, 0.0)
    assert kz.real == pytest.approx(0.0)
    assert kz.imag > 0
    # lossy medium: -pi/2 < arg kz <= pi/2
    kz = longitudinal_wavenumber(-2.0 + 0.5j, k0, 0.3, 0.1)
    assert -math.pi / 2 < np.angle(kz) <= math.pi / 2


# ---------------------------------------------------------------------------
# flat-surface limits


def test_fresnel_normal_incidence():
    # eps = 2 at normal incidence: |r| = (sqrt(2)-1)/(sqrt(2)+1) for both
    # polarizations, r_s negative and r_p positive in this sign convention
    b = ModeBasis(omega=OMEGA, kx=0.0, ky=0.0, n_orders=0, period=PERIOD)
    r = planar_reflection(2.0 + 0j, b).matrix
    mag = (math.sqrt(2.0) - 1.0) / (math.sqrt(2.0) + 1.0)
    assert r[0, 0] == pytest.approx(-mag, rel=1e-12)
    assert r[1, 1] == pytest.approx(+mag, rel=1e-12)
    assert np.count_nonzero(r - np.diag(np.diag(r))) == 0


def test_fresnel_near_perfect_conductor():
    b = ModeBasis(omega=OMEGA, kx=0.0, ky=0.0, n_orders=0, period=PERIOD)
    r = planar_reflection(-1e8 + 1e6j, b).matrix
    assert abs(r[0, 0] + 1.0) < 1e-3      # r_s -> -1
    assert abs(r[1, 1] - 1.0) < 1e-3      # r_p -> +1


def test_vacuum_grating_reflects_nothing():
    geo = GratingGeometry(period=PERIOD, depth=DEPTH, fill=FILL)
    b = _basis(n_orders=4)
    r = grating_reflection(geo, 1.0 + 0j, b).matrix
    assert np.abs(r).max() < 1e-10


def test_zero_depth_equals_planar(silica_eps):
    geo = GratingGeometry(period=PERIOD, depth=0.0, fill=FILL)
    b = _basis(n_orders=5)
    rg = grating_reflection(geo, silica_eps, b).matrix
    rp = planar_reflection(silica_eps, b).matrix
    assert np.abs(rg - rp).max() < 1e-10


def test_full_fill_equals_elevated_flat_surface(silica_eps):
    # fill -> 1 turns the corrugation into a uniform layer of the substrate
    # material, so the surface sits exactly at the reference plane z = a and
    # the operator reduces to the specular Fresnel matrix
    geo = GratingGeometry(period=PERIOD, depth=DEPTH, fill=1.0 - 1e-9)
    b = _basis(n_orders=8)
    rg = grating_reflection(geo, silica_eps, b).matrix
    rp = planar_reflection(silica_eps, b).matrix
    assert np.abs(rg - rp).max() < 1e-8


# ---------------------------------------------------------------------------
# stack assembly cross-checks


def test_fast_stack_matches_reference_path(silica_eps):
    geo = GratingGeometry(period=PERIOD, depth=DEPTH, fill=FILL)
    rng = np.random.default_rng(7)
    kx = rng.uniform(-math.pi / PERIOD, math.pi / PERIOD, 4)
    ky = rng.uniform(0.0, 3.0 * OMEGA / C_LIGHT, 4)
    r_fast, t_fast, _ = _scattering_stack(geo, silica_eps, OMEGA, kx, ky, 6)
    r_ref, t_ref, _ = _scattering_stack_reference(geo, silica_eps, OMEGA,
                                                  kx, ky, 6)
    assert np.abs(r_fast - r_ref).max() < 1e-10
    assert np.abs(t_fast - t_ref).max() < 1e-10


def test_operator_self_convergence(silica_eps):
    # central sub-block (|n| <= 5) of the reflection operator under N -> N+5
    # at the point where convergence is slowest (surface-mode band, deep
    # grating); the drift bound is measured at the converged truncation
    geo = GratingGeometry(period=PERIOD, depth=DEPTH, fill=FILL)
    kx = 0.3 * math.pi / PERIOD
    ky = 2.0 * OMEGA / C_LIGHT

    def central(n_orders):
        r = _scattering_stack(geo, silica_eps, OMEGA, np.array([kx]),
                              np.array([ky]), n_orders,
                              want_transmission=False)[0][0]
        m = 2 * n_orders + 1
        idx = np.arange(n_orders - 5, n_orders + 6)
        idx = np.concatenate([idx, m + idx])
        return r[np.ix_(idx, idx)]

    drift = np.abs(central(90) - central(85)).max()
    assert drift < 1e-3


def test_reciprocity_of_flux_normalized_operator(silica_eps):
    # reversing both in-plane momenta transposes the flux-normalized
    # operator in the order-reversed basis, with a relative sign between
    # the s and p blocks
    geo = GratingGeometry(period=PERIOD, depth=DEPTH, fill=FILL)
    n_orders = 6
    m = 2 * n_orders + 1
    kx = 0.23 * math.pi / PERIOD
    ky = 1.7 * OMEGA / C_LIGHT
    k0 = OMEGA / C_LIGHT
    n = np.arange(-n_orders, n_orders + 1)

    def normalized(sign):
        r = _scattering_stack(geo, silica_eps, OMEGA,
                              np.array([sign * kx]), np.array([sign * ky]),
                              n_orders, want_transmission=False)[0][0]
        kz = longitudinal_wavenumber(
            1.0, k0, sign * kx + 2.0 * math.pi * n / PERIOD, sign * ky)
        w = np.sqrt(np.concatenate([kz, kz]))
        return w[:, None] * r / w[None, :]

    rev = np.eye(m)[::-1]
    j = np.block([[rev, np.zeros((m, m))], [np.zeros((m, m)), -rev]])
    lhs = normalized(-1)
    rhs = j @ normalized(+1).T @ j
    assert np.abs(lhs - rhs).max() < 1e-8


# ---------------------------------------------------------------------------
# symmetry operations


def test_lateral_shift_identities(silica_eps):
    geo = GratingGeometry(period=PERIOD, depth=DEPTH, fill=FILL)
    b = _basis(n_orders=5)
    op = grating_reflection(geo, silica_eps, b)
    # full-period shift is the identity
    shifted = apply_lateral_shift(op, PERIOD)
    assert np.abs(shifted.matrix - op.matrix).max() < 1e-12
    # shifts compose additively
    once = apply_lateral_shift(apply_lateral_shift(op, 0.1 * PERIOD),
                               0.25 * PERIOD)
    both = apply_lateral_shift(op, 0.35 * PERIOD)
    assert np.abs(once.matrix - both.matrix).max() < 1e-12
    # geometry-carried shift equals operator-level shift
    geo_s = GratingGeometry(period=PERIOD, depth=DEPTH, fill=FILL,
                            delta=0.35 * PERIOD)
    direct = grating_reflection(geo_s, silica_eps, b)
    assert np.abs(direct.matrix - both.matrix).max() < 1e-12


def test_facing_operator_involution_and_diagonal(silica_eps):
    geo = GratingGeometry(period=PERIOD, depth=DEPTH, fill=FILL)
    b = _basis(n_orders=5)
    op = grating_reflection(geo, silica_eps, b)
    double = facing_operator(facing_operator(op))
    assert np.abs(double.matrix - op.matrix).max() == 0.0
    # specular (diagonal) entries are invariant under the mirror
    faced = facing_operator(op)
    assert np.abs(np.diag(faced.matrix) - np.diag(op.matrix)).max() == 0.0


# ---------------------------------------------------------------------------
# energy conservation (lossless dielectric)


def _power_balance(geo, eps, omega, kx, ky, n_orders):
    """Max propagative power defect over incident propagating modes."""
    r, t, _ = _scattering_stack(geo, eps, omega, np.array([kx]),
                                np.array([ky]), n_orders)
    r, t = r[0], t[0]
    basis = ModeBasis(omega=omega, kx=kx, ky=ky, n_orders=n_orders,
                      period=geo.period)
    f_vac = mode_power_flux(1.0 + 0j, basis)
    f_sub = mode_power_flux(eps, basis)
    incident = np.nonzero(f_vac > 0)[0]
    defect = 0.0
    for n in incident:
        p_r = float(f_vac @ np.abs(r[:, n]) ** 2)
        p_t = float(f_sub @ np.abs(t[:, n]) ** 2)
        defect = max(defect, abs(p_r + p_t - f_vac[n]) / f_vac[n])
    return defect


def test_energy_conservation_lossless():
    geo = GratingGeometry(period=PERIOD, depth=DEPTH, fill=FILL)
    rng = np.random.default_rng(42)
    k0 = OMEGA / C_LIGHT
    worst = 0.0
    for _ in range(10):
        kx = rng.uniform(-0.7, 0.7) * min(k0, math.pi / PERIOD)
        ky = rng.uniform(0.0, 0.7) * k0
        worst = max(worst, _power_balance(geo, 4.0 + 0j, OMEGA, kx, ky, 8))
    assert worst < 1e-8
