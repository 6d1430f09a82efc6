"""Radiative heat transfer between two facing, laterally shifted gratings.

The two bodies are identical lamellar gratings facing each other across a
vacuum gap L measured between the corrugation tops.  The lower grating sits
with a ridge centered at x = 0; the upper one is its mirror image displaced
laterally by delta.  Everything is phrased through the exact reflection
operators of the two bodies in the shared diffraction-order basis:

    S1 = R1                      (lower grating, illuminated from above)
    S2 = E Q Phi R1 Phi* Q E     (upper grating: shift, mirror, gap phases)

with E = diag(exp(i kz_n L)) the one-way vacuum propagator across the gap.
The spectral exchange kernel at fixed (omega, kx, ky) is

    tr(D W1 D^H W2),   D = (1 - S1 S2)^(-1),

where W1 and W2 are the Hermitian source operators built from the half-rate
diagonals Sigma_(-1) = kz^(-1)/2 and Sigma_(+1) = kz/2 dressed with the
propagating/evanescent sector projectors (entries 0 or 2).  The kernel
reduces analytically to the two-polarization Landauer transmission of the
plane-plane cavity when the corrugation depth vanishes, which the tests pin
against an independent Fresnel oracle.

The heat transfer coefficient is

    h = 1/|T1 - T2| * Integral dw/(2 pi) [e(T1,w) - e(T2,w)] H12(w),
    H12 = Integral over the Brillouin zone dkx Integral dky / (4 pi^2) tr(...),

evaluated with nested adaptive quadrature.  The kernel is even in ky
(y-invariance) and even in kx (reciprocity of the lossy cavity, valid for
every lateral shift), so one quadrant of the (kx, ky) plane is integrated
and quadrupled.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from .constants import C_LIGHT
from .materials import DielectricModel, ThermalState, permittivity
from .quadrature import QuadratureConfig, integrate_adaptive
from .rcwa import (
    GratingGeometry,
    ModeBasis,
    ReflectionOperator,
    longitudinal_wavenumber,
    _scattering_stack,
)

log = logging.getLogger(__name__)

# angular frequencies [rad/s] of the two silica surface phonon resonances
# plus their shoulders; used only as default quadrature seed points so the
# adaptive rule starts with panel edges bracketing the sharp spectral
# features instead of rediscovering them by bisection
SIO2_RESONANCE_SEEDS = (6e13, 8e13, 8.97e13, 1.0e14, 1.4e14, 1.9e14,
                        2.153e14, 2.35e14, 3e14, 4.5e14)


@dataclass(frozen=True)
class NumericsConfig:
    """Discretization knobs for the flux pipeline.

    n_orders: Fourier truncation N (modal dimension is 2(2N+1)).
    omega_window: integration window [rad/s]; outside it the thermal weight
        at a few hundred kelvin is negligible.
    ky_cut: dimensionless cutoff Lambda; ky is truncated at
        max(5 omega/c, Lambda / L) where the evanescent kernel has decayed
        below any tolerance used here.
    cond_limit: modal matching condition estimate above which a point is
        recomputed with two fewer orders before being declared bad.
    significance_cut: frequencies whose pilot-predicted weighted kernel is
        below this fraction of the spectral peak run their k-space
        quadrature at a relaxed relative tolerance (a cost hint; the
        absolute error floors are unaffected).
    omega_rule: nested quadrature pair for the frequency axis; "gk7" halves
        the per-panel sample count for heavily seeded, expensive spectra.
    """

    n_orders: int = 15
    omega_rel_tol: float = 1e-3
    k_rel_tol: float = 1e-3
    omega_window: tuple[float, float] = (1.0e13, 1.0e15)
    omega_seeds: tuple[float, ...] = SIO2_RESONANCE_SEEDS
    ky_cut: float = 40.0
    max_omega_evals: int = 3_000
    max_k_evals: int = 40_000
    cond_limit: float = 1.0e12
    significance_cut: float = 1e-3
    omega_rule: str = "gk15"
    workers: int = 1

    def __post_init__(self):
        if self.n_orders < 1:
            raise ValueError("need at least one diffraction order")
        lo, hi = self.omega_window
        if not 0 < lo < hi:
            raise ValueError("omega window must satisfy 0 < lo < hi")
        if self.ky_cut <= 0 or self.cond_limit <= 1:
            raise ValueError("invalid cutoff or condition limit")
        if not 0.0 <= self.significance_cut < 1.0:
            raise ValueError("significance_cut must lie in [0, 1)")
        if self.omega_rule not in ("gk15", "gk7"):
            raise ValueError("omega_rule must be 'gk15' or 'gk7'")


@dataclass(frozen=True)
class SigmaOperators:
    """Half-rate diagonals over a ModeBasis, split by sector.

    pi_prop/pi_evan are the complementary sector projectors with entries
    0 or 2 (their sum is 2*Id); sigma arrays are (1/2) kz^n times them, for
    n = -1 (source normalization) and n = +1 (flux weighting).
    """

    basis: ModeBasis
    pi_prop: np.ndarray = field(init=False, repr=False)
    pi_evan: np.ndarray = field(init=False, repr=False)
    sigma_m1_prop: np.ndarray = field(init=False, repr=False)
    sigma_m1_evan: np.ndarray = field(init=False, repr=False)
    sigma_p1_prop: np.ndarray = field(init=False, repr=False)
    sigma_p1_evan: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        kz = np.concatenate([self.basis.kz, self.basis.kz])
        prop = kz.real > 0
        object.__setattr__(self, "pi_prop", np.where(prop, 2.0, 0.0))
        object.__setattr__(self, "pi_evan", np.where(prop, 0.0, 2.0))
        inv_kz = 1.0 / kz
        object.__setattr__(self, "sigma_m1_prop",
                           0.5 * inv_kz * self.pi_prop)
        object.__setattr__(self, "sigma_m1_evan",
                           0.5 * inv_kz * self.pi_evan)
        object.__setattr__(self, "sigma_p1_prop", 0.5 * kz * self.pi_prop)
        object.__setattr__(self, "sigma_p1_evan", 0.5 * kz * self.pi_evan)


def build_system_operators(r1: ReflectionOperator, r2: ReflectionOperator,
                           gap: float):
    """Cavity operators (S1, S2) from the two facing reflection operators.

    r1 is the lower body seen from above; r2 the upper body seen from below,
    in the same basis.  S2 dresses r2 with the one-way vacuum propagator
    E = diag(exp(i kz L)) on both sides; evanescent entries of E have
    modulus < 1 under the kz branch rule, so S2 decays with the gap.
    """
    if gap <= 0:
        raise ValueError("gap must be positive")
    if r1.basis is not r2.basis and (
            r1.basis.dim != r2.basis.dim
            or r1.basis.omega != r2.basis.omega):
        raise ValueError("operators must share a mode basis")
    kz = np.concatenate([r1.basis.kz, r1.basis.kz])
    e = np.exp(1j * kz * gap)
    s2 = e[:, None] * r2.matrix * e[None, :]
    return r1.matrix.copy(), s2


def transmission_trace(s1: np.ndarray, s2: np.ndarray,
                       sigma: SigmaOperators) -> float:
    """Single-point exchange kernel tr(D W1 D^H W2) via LU solves.

    D is never formed: with A = 1 - S1 S2, the trace is
    tr(A^-1 W1 A^-H W2) = sum_ij (A^-1 W1)_ij (A^-H W2)_ji, each factor a
    linear solve reusing one factorization.  Asserts the imaginary residual
    of the trace is below 1e-8 relative (1e-30 absolute floor).
    """
    w1, w2 = source_operators(s1, s2, sigma)
    a = np.eye(s1.shape[0]) - s1 @ s2
    lu = lu_factor(a)
    x = lu_solve(lu, w1)                      # A^-1 W1
    y = lu_solve(lu, w2, trans=2)             # A^-H W2
    tr = np.einsum("ij,ji->", x, y)
    if abs(tr.imag) > max(1e-8 * abs(tr.real), 1e-30):
        raise FloatingPointError(
            f"exchange trace has imaginary residual {tr.imag:.3e} "
            f"against real part {tr.real:.3e}")
    return float(tr.real)


def source_operators(s1: np.ndarray, s2: np.ndarray, sigma: SigmaOperators):
    """The two Hermitian source operators (W1, W2) of the exchange trace."""
    sm_p, sm_e = sigma.sigma_m1_prop, sigma.sigma_m1_evan
    sp_p, sp_e = sigma.sigma_p1_prop, sigma.sigma_p1_evan
    s1h = s1.conj().T
    s2h = s2.conj().T
    w1 = (np.diag(sm_p) - (s1 * sm_p[None, :]) @ s1h
          + s1 * sm_e[None, :] - sm_e[:, None] * s1h)
    w2 = (np.diag(sp_p) - (s2h * sp_p[None, :]) @ s2
          + s2h * sp_e[None, :] - sp_e[:, None] * s2)
    return w1, w2


@dataclass
class TransferSpectrum:
    """Heat transfer coefficient with the retained spectral samples."""

    value: float                         # h [W m^-2 K^-1]
    error: float                         # outer-quadrature error estimate
    samples: list[tuple[float, float]]   # (omega [rad/s], H12 [m^-2])
    n_orders: int
    omega_evaluations: int
    point_evaluations: int               # (kx, ky) samples over all omega
    flagged: bool                        # budget hit or dropped samples


def _shift_phases(n_orders: int, delta: float, period: float) -> np.ndarray:
    n = np.arange(-n_orders, n_orders + 1)
    phi = np.exp(1j * 2.0 * math.pi * n * delta / period)
    return np.concatenate([phi, phi])


def _pair_operators(r1: np.ndarray, kz: np.ndarray, gap: float, delta: float,
                    period: float, n_orders: int):
    """Batched (S1, S2) for the identical-grating pair from one reflection.

    The upper grating is the z-mirror of the lower one shifted by delta; the
    mirror flips the sign of p modes (Q) and the shift conjugates by order
    phases (Phi), then the gap propagator dresses both sides.
    """
    m = kz.shape[-1]
    q = np.concatenate([np.ones(m), -np.ones(m)])
    dress = q * _shift_phases(n_orders, delta, period)
    r2 = dress[:, None] * r1 * dress.conj()[None, :]
    e = np.exp(1j * np.concatenate([kz, kz], axis=-1) * gap)
    s2 = e[..., :, None] * r2 * e[..., None, :]
    return r1, s2


def _exchange_trace_batched(s1: np.ndarray, s2: np.ndarray, kz: np.ndarray):
    """tr(D W1 D^H W2) per batched point; returns (values, imag_residual)."""
    kz2 = np.concatenate([kz, kz], axis=-1)
    prop = kz2.real > 0
    inv_kz = 1.0 / kz2
    sig_m1_p = np.where(prop, inv_kz.real, 0.0) + 0j
    sig_m1_e = 1j * np.where(prop, 0.0, inv_kz.imag)
    sig_p1_p = np.where(prop, kz2.real, 0.0) + 0j
    sig_p1_e = 1j * np.where(prop, 0.0, kz2.imag)

    s1h = np.conjugate(np.swapaxes(s1, -1, -2))
    s2h = np.conjugate(np.swapaxes(s2, -1, -2))

    def _diag(vals):
        out = np.zeros(vals.shape + (vals.shape[-1],), dtype=complex)
        idx = np.arange(vals.shape[-1])
        out[..., idx, idx] = vals
        return out

    w1 = (_diag(sig_m1_p)
          - (s1 * sig_m1_p[..., None, :]) @ s1h
          + s1 * sig_m1_e[..., None, :]
          - sig_m1_e[..., :, None] * s1h)
    w2 = (_diag(sig_p1_p)
          - (s2h * sig_p1_p[..., None, :]) @ s2
          + s2h * sig_p1_e[..., None, :]
          - sig_p1_e[..., :, None] * s2)

    a = np.eye(s1.shape[-1]) - s1 @ s2
    x = np.linalg.solve(a, w1)
    y = np.linalg.solve(np.conjugate(np.swapaxes(a, -1, -2)), w2)
    tr = np.einsum("...ij,...ji->...", x, y)
    return tr.real, np.abs(tr.imag)


def transmission_integrand(geometry: GratingGeometry, eps: complex,
                           gap: float, omega: float, kx: np.ndarray,
                           ky: np.ndarray,
                           numerics: NumericsConfig) -> np.ndarray:
    """Exchange kernel tr(D W1 D^H W2) at batched (kx, ky) points.

    Points whose modal matching exceeds the condition limit are recomputed
    with two fewer orders; points that still fail, or whose trace keeps a
    non-negligible imaginary residual, come back NaN so the adaptive
    quadrature refines around them and eventually drops and flags them.
    """
    kx = np.asarray(kx, dtype=float)
    ky = np.asarray(ky, dtype=float)
    k0 = omega / C_LIGHT

    def _evaluate(points_kx, points_ky, n_orders):
        n = np.arange(-n_orders, n_orders + 1)
        kxo = points_kx[:, None] + 2.0 * math.pi * n / geometry.period
        kz = longitudinal_wavenumber(1.0, k0, kxo, points_ky[:, None])
        base = replace(geometry, delta=0.0)
        if geometry.depth == 0.0:
            kz_sub = longitudinal_wavenumber(eps, k0, kxo, points_ky[:, None])
            r_s = (kz - kz_sub) / (kz + kz_sub)
            r_p = (eps * kz - kz_sub) / (eps * kz + kz_sub)
            diag = np.concatenate([r_s, r_p], axis=-1)
            r = np.zeros(diag.shape + (diag.shape[-1],), dtype=complex)
            idx = np.arange(diag.shape[-1])
            r[..., idx, idx] = diag
            cond = np.ones(points_kx.shape)
        else:
            r, _, cond = _scattering_stack(base, eps, omega, points_kx,
                                           points_ky, n_orders,
                                           want_transmission=False)
        s1, s2 = _pair_operators(r, kz, gap, geometry.delta,
                                 geometry.period, n_orders)
        vals, imag = _exchange_trace_batched(s1, s2, kz)
        bad = (cond > numerics.cond_limit) | ~np.isfinite(vals)
        bad |= imag > np.maximum(1e-8 * np.abs(vals), 1e-30)
        return vals, bad

    vals, bad = _evaluate(kx, ky, numerics.n_orders)
    if np.any(bad) and geometry.depth > 0.0 and numerics.n_orders > 2:
        idx = np.nonzero(bad)[0]
        log.info("retrying %d ill-conditioned points with N=%d at omega=%.4e",
                 idx.size, numerics.n_orders - 2, omega)
        vals_r, bad_r = _evaluate(kx[idx], ky[idx], numerics.n_orders - 2)
        vals[idx] = np.where(bad_r, np.nan, vals_r)
    else:
        vals = np.where(bad, np.nan, vals)
    return vals


def spectral_flux(geometry: GratingGeometry, eps: complex, gap: float,
                  omega: float, numerics: NumericsConfig,
                  abs_floor: float = 0.0, lean: bool = False):
    """H12(omega): the (kx, ky) integral of the exchange kernel / (4 pi^2).

    ``abs_floor`` is an absolute error target for H12 below which the
    k-space refinement may stop early; the caller derives it from the scale
    of the whole spectrum so that insignificant frequencies are not refined
    to full relative accuracy.  ``lean`` requests a minimal seed set for
    such frequencies (a cost hint only: the error control is unchanged).

    Returns (value, point_evaluations, flagged).
    """
    if gap <= 0:
        raise ValueError("gap must be positive")
    d = geometry.period
    k0 = omega / C_LIGHT
    ky_max = max(5.0 * k0, numerics.ky_cut / gap)
    # panel edges at the vacuum and medium light lines and at the evanescent
    # decay scales; the adaptive rule would otherwise spend most of its
    # budget rediscovering them by bisection at every frequency
    nk0 = np.sqrt(complex(eps)).real * k0
    scales = (k0, 3.0 * k0, nk0, 2.0 * nk0, 1.0 / gap, 4.0 / gap)
    # a lean caller has already bounded this frequency's contribution, so a
    # quarter of relative accuracy suffices on top of the floor; the seed set
    # is kept intact because a missing panel edge costs more refinement than
    # the seeds cost in initial samples
    k_rel_tol = max(numerics.k_rel_tol, 0.25) if lean else numerics.k_rel_tol
    ky_seeds = tuple(s for s in scales if s < ky_max)
    # translate the H12 floor into floors for the two quadrature axes:
    # H12 = 2 I_kx / (4 pi^2) and each kx sample is 2 I_ky, integrated over
    # a Brillouin zone of width pi/d
    kx_floor = abs_floor * 2.0 * math.pi**2
    ky_floor = kx_floor * d / (8.0 * math.pi)
    # the inner integral runs a quarter of the requested tolerance: its
    # residual error is noise to the outer rule, which would otherwise keep
    # refining panels whose true error is already below tolerance
    # both k axes run the compact 3/7 nested rule: the integrand is expensive
    # per point (a full modal solve) and the axis tolerances are moderate, so
    # the smaller panel floor wins over the higher-order rule
    ky_cfg = QuadratureConfig(rel_tol=0.25 * k_rel_tol,
                              abs_floor=ky_floor,
                              max_evals=numerics.max_k_evals,
                              seed_points=ky_seeds,
                              workers=numerics.workers,
                              rule="gk7")
    # the outer budget counts kx columns, each a full ky integral; cap it
    # well below the per-column point budget so a pathological column
    # pattern cannot multiply the two budgets together
    kx_cfg = QuadratureConfig(rel_tol=k_rel_tol,
                              abs_floor=kx_floor,
                              max_evals=min(numerics.max_k_evals, 3000),
                              seed_points=tuple(s for s in scales
                                                if s < math.pi / d),
                              rule="gk7")

    evals = 0
    flagged = False

    def f_kx(kxs: np.ndarray) -> np.ndarray:
        nonlocal evals, flagged
        out = np.empty_like(kxs)
        for i, kx in enumerate(kxs):
            def f_ky(kys: np.ndarray) -> np.ndarray:
                return transmission_integrand(
                    geometry, eps, gap, omega,
                    np.full(kys.shape, kx), kys, numerics)
            res = integrate_adaptive(f_ky, 0.0, ky_max, ky_cfg)
            evals += res.evaluations
            flagged |= res.flagged
            out[i] = 2.0 * res.value      # the kernel is even in ky
        return out

    # the kernel is even in kx for every shift, not only the mirror-symmetric
    # ones: reversing kx is reversing both in-plane momenta (ky-evenness) and
    # that is a reciprocity relation of the lossy cavity; a dedicated test
    # pins this property at generic delta
    res = integrate_adaptive(f_kx, 0.0, math.pi / d, kx_cfg)
    flagged |= res.flagged
    return 2.0 * res.value / (4.0 * math.pi**2), evals, flagged


def heat_transfer_coefficient(geometry: GratingGeometry,
                              material: DielectricModel, gap: float,
                              thermal: ThermalState,
                              numerics: NumericsConfig | None = None
                              ) -> TransferSpectrum:
    """Linearized radiative heat transfer coefficient h [W m^-2 K^-1]."""
    numerics = numerics or NumericsConfig()
    lo, hi = numerics.omega_window
    seeds = tuple(s for s in numerics.omega_seeds if lo < s < hi)
    omega_cfg = QuadratureConfig(rel_tol=numerics.omega_rel_tol,
                                 max_evals=numerics.max_omega_evals,
                                 seed_points=seeds,
                                 rule=numerics.omega_rule)
    points = 0
    flagged = False
    samples: dict[float, float] = {}

    # coarse pilot pass over the seed frequencies: it establishes the scale
    # of the weighted spectrum, so the k-space integrals of insignificant
    # frequencies can stop at an absolute error floor instead of being
    # refined to full relative accuracy.  The pilot is a fixed, deterministic
    # prefix of the run; every later per-frequency decision depends only on
    # it and on the frequency itself, so worker counts cannot change results.
    # one diffraction order suffices for the pilot: it only has to place the
    # spectrum on a magnitude scale, and the truncation changes that scale
    # by far less than the decade-wide significance cut below
    pilot_numerics = replace(numerics, n_orders=1,
                             k_rel_tol=max(numerics.k_rel_tol, 5e-2))
    pilot_omega = np.array(sorted(seeds))
    pilot_h12 = np.empty_like(pilot_omega)
    for i, w in enumerate(pilot_omega):
        eps = complex(permittivity(material, w))
        h12, ev, _ = spectral_flux(geometry, eps, gap, w, pilot_numerics)
        pilot_h12[i] = h12
        points += ev
    if pilot_omega.size:
        peak = float(np.max(np.abs(pilot_h12
                                   * np.array([thermal.weight(w)
                                               for w in pilot_omega]))))
    else:
        peak = 0.0
    log_h = (np.log(np.maximum(np.abs(pilot_h12), 1e-300))
             if pilot_omega.size else None)

    def _flux_controls(w: float):
        """(abs_floor, lean) for one frequency, derived from the pilot."""
        if peak <= 0.0:
            return 0.0, False
        weight = abs(thermal.weight(w))
        if weight <= 0.0:
            return math.inf, True
        floor = 0.05 * numerics.k_rel_tol * peak / weight
        h_pred = math.exp(float(np.interp(w, pilot_omega, log_h)))
        lean = weight * h_pred < numerics.significance_cut * peak
        return floor, lean

    def f_omega(omegas: np.ndarray) -> np.ndarray:
        nonlocal points, flagged
        out = np.empty_like(omegas)
        for i, w in enumerate(omegas):
            eps = complex(permittivity(material, w))
            floor, lean = _flux_controls(w)
            h12, ev, fl = spectral_flux(geometry, eps, gap, w, numerics,
                                        abs_floor=floor, lean=lean)
            points += ev
            flagged |= fl
            samples[w] = h12
            out[i] = thermal.weight(w) * h12
        return out

    res = integrate_adaptive(f_omega, lo, hi, omega_cfg)
    # signed difference: the weight e(T1) - e(T2) carries the same sign, so
    # h is positive and invariant under swapping the two temperatures
    scale = 1.0 / (2.0 * math.pi * (thermal.t1 - thermal.t2))
    return TransferSpectrum(value=scale * res.value,
                            error=abs(scale) * res.error,
                            samples=sorted(samples.items()),
                            n_orders=numerics.n_orders,
                            omega_evaluations=res.evaluations,
                            point_evaluations=points,
                            flagged=flagged or res.flagged)


def modulation_factor(geometry: GratingGeometry, material: DielectricModel,
                      gap: float, thermal: ThermalState,
                      numerics: NumericsConfig | None = None):
    """Contrast h(delta=0) / h(delta=d/2) of the lateral-shift modulation.

    Returns (factor, spectrum_aligned, spectrum_shifted).
    """
    aligned = heat_transfer_coefficient(replace(geometry, delta=0.0),
                                        material, gap, thermal, numerics)
    shifted = heat_transfer_coefficient(
        replace(geometry, delta=0.5 * geometry.period),
        material, gap, thermal, numerics)
    if shifted.value <= 0.0:
        raise ArithmeticError("shifted coefficient is not positive; "
                              "upstream integration failed")
    return aligned.value / shifted.value, aligned, shifted
