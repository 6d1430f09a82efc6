"""Plane-plane near-field heat transfer from the closed-form two-body theory.

This module is an independent oracle for the grating pipeline: it never
touches the modal machinery.  For two parallel half-spaces separated by a
vacuum gap L the spectral transmission per transverse wavevector kt and
polarization is the familiar cavity form

    propagating (kt < w/c):  (1 - |r|^2)^2 / |1 - r^2 exp(2 i kz L)|^2
    evanescent  (kt > w/c):  4 (Im r)^2 exp(-2|kz|L) / |1 - r^2 exp(-2|kz|L)|^2

(identical media on both sides), and the coefficient is

    h0 = 1/|T1-T2| * Int dw/(2 pi) [e(T1) - e(T2)]
             * Int kt dkt/(2 pi) sum_pol tau(w, kt, L).

Everything here is scalar Fresnel algebra plus the generic quadrature
engine; the only code shared with the exact solver is the material model
and physical constants.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .constants import C_LIGHT
from .materials import DielectricModel, ThermalState, permittivity
from .quadrature import QuadratureConfig, integrate_adaptive


@dataclass(frozen=True)
class PlanarNumerics:
    """Tolerances for the plane-plane double quadrature."""

    omega_rel_tol: float = 1e-4
    kt_rel_tol: float = 1e-5
    omega_window: tuple[float, float] = (1.0e13, 1.0e15)
    # silica surface resonances and their shoulders: initial panel edges
    omega_seeds: tuple[float, ...] = (6e13, 8e13, 8.97e13, 1.0e14, 1.4e14,
                                      1.9e14, 2.153e14, 2.35e14, 3e14,
                                      4.5e14)
    kt_cut: float = 60.0
    max_omega_evals: int = 20_000
    max_kt_evals: int = 100_000


@dataclass
class PlanarResult:
    """h0 and its split into propagating/evanescent and s/p channels.

    The four components sum to ``value`` by construction.
    """

    value: float
    prop_s: float
    prop_p: float
    evan_s: float
    evan_p: float
    error: float
    flagged: bool


def _fresnel(eps, k0, kt):
    """Amplitude reflection coefficients (r_s, r_p) of a vacuum half-space
    interface; kz branches carry positive imaginary part in the medium."""
    kz1 = np.sqrt((k0**2 - kt**2).astype(complex))
    kz1 = np.where(kz1.imag < 0, -kz1, kz1)
    kz2 = np.sqrt(eps * k0**2 - kt.astype(complex) ** 2)
    kz2 = np.where(kz2.imag < 0, -kz2, kz2)
    r_s = (kz1 - kz2) / (kz1 + kz2)
    r_p = (eps * kz1 - kz2) / (eps * kz1 + kz2)
    return r_s, r_p, kz1


def cavity_transmission(eps: complex, omega: float, kt, gap: float):
    """Per-polarization transmission tau(omega, kt) of the vacuum cavity
    between two identical half-spaces; returns (tau_s, tau_p) arrays."""
    kt = np.asarray(kt, dtype=float)
    k0 = omega / C_LIGHT
    r_s, r_p, kz1 = _fresnel(eps, k0, kt)
    prop = kt < k0
    out = []
    for r in (r_s, r_p):
        phase = np.exp(2j * kz1 * gap)
        den = np.abs(1.0 - r**2 * phase) ** 2
        num_p = (1.0 - np.abs(r) ** 2) ** 2
        num_e = 4.0 * (r.imag) ** 2 * np.exp(-2.0 * np.abs(kz1.imag) * gap)
        out.append(np.where(prop, num_p, num_e) / den)
    return out[0], out[1]


def _kt_integrals(eps, omega, gap, numerics):
    """kt dkt/(2 pi) integrals of tau per (sector, polarization)."""
    k0 = omega / C_LIGHT
    kt_max = max(5.0 * k0, numerics.kt_cut / gap)
    cfg = QuadratureConfig(rel_tol=numerics.kt_rel_tol,
                           max_evals=numerics.max_kt_evals,
                           seed_points=(min(2.0 * k0, 0.99 * kt_max),
                                        min(1.0 / gap, 0.99 * kt_max),
                                        min(5.0 / gap, 0.99 * kt_max)))
    parts = {}
    flagged = False
    for pol in ("s", "p"):
        idx = 0 if pol == "s" else 1

        def f(kt, _i=idx):
            return cavity_transmission(eps, omega, kt, gap)[_i] * kt / (2.0 * math.pi)

        res_p = integrate_adaptive(f, 1e-6 * k0, k0, QuadratureConfig(
            rel_tol=numerics.kt_rel_tol, max_evals=numerics.max_kt_evals))
        res_e = integrate_adaptive(f, k0, kt_max, cfg)
        parts[("prop", pol)] = res_p.value
        parts[("evan", pol)] = res_e.value
        flagged |= res_p.flagged or res_e.flagged
    return parts, flagged


def spectral_flux_planar(eps: complex, omega: float, gap: float,
                         numerics: PlanarNumerics | None = None) -> float:
    """Plane-plane H12(omega): both polarizations, both sectors."""
    numerics = numerics or PlanarNumerics()
    parts, _ = _kt_integrals(eps, omega, gap, numerics)
    return sum(parts.values())


def planar_heat_transfer(material: DielectricModel, gap: float,
                         thermal: ThermalState,
                         numerics: PlanarNumerics | None = None
                         ) -> PlanarResult:
    """Heat transfer coefficient h0 between two flat half-spaces [W/m^2/K],
    with its decomposition into (propagating, evanescent) x (s, p)."""
    if gap <= 0:
        raise ValueError("gap must be positive")
    numerics = numerics or PlanarNumerics()
    lo, hi = numerics.omega_window
    seeds = tuple(s for s in numerics.omega_seeds if lo < s < hi)
    cfg = QuadratureConfig(rel_tol=numerics.omega_rel_tol,
                           max_evals=numerics.max_omega_evals,
                           seed_points=seeds)
    flagged = False

    channels = [("prop", "s"), ("prop", "p"), ("evan", "s"), ("evan", "p")]
    totals = {}
    # signed difference: the thermal weight carries the same sign, so the
    # result is positive and symmetric under swapping the temperatures
    scale = 1.0 / (2.0 * math.pi * (thermal.t1 - thermal.t2))
    err_total = 0.0

    # one omega sweep per channel keeps each integral independently adaptive;
    # a small cache avoids recomputing the kt integrals across channels
    cache: dict[float, dict] = {}

    def channel_f(channel):
        def f(omegas):
            nonlocal flagged
            out = np.empty_like(omegas)
            for i, w in enumerate(omegas):
                if w not in cache:
                    eps = complex(permittivity(material, w))
                    parts, fl = _kt_integrals(eps, w, gap, numerics)
                    flagged_local = fl
                    cache[w] = (parts, flagged_local)
                parts, fl = cache[w]
                flagged |= fl
                out[i] = thermal.weight(w) * parts[channel]
            return out
        return f

    for ch in channels:
        res = integrate_adaptive(channel_f(ch), lo, hi, cfg)
        totals[ch] = scale * res.value
        err_total += abs(scale) * res.error
        flagged |= res.flagged

    value = math.fsum(totals.values())
    return PlanarResult(value=value,
                        prop_s=totals[("prop", "s")],
                        prop_p=totals[("prop", "p")],
                        evan_s=totals[("evan", "s")],
                        evan_p=totals[("evan", "p")],
                        error=err_total, flagged=flagged)
