"""Dielectric response models and thermal statistics weights.

Ships silica glass (SiO2) in two interchangeable forms: a two-oscillator
Lorentz model (fast default, parameters stored in ``data/sio2_oscillators.json``)
and an n,k table (``data/sio2_nk.txt``, authoritative in tests).  The table
header records the residual of the oscillator fit against the table.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from .constants import C_LIGHT, HBAR, K_BOLTZMANN


@dataclass(frozen=True)
class Oscillator:
    """Lorentz oscillator: plasma strength, resonance and damping in rad/s."""

    plasma: float
    resonance: float
    damping: float

    def __post_init__(self):
        if self.plasma < 0 or self.resonance <= 0 or self.damping <= 0:
            raise ValueError("oscillator parameters must be positive")


@dataclass(frozen=True)
class DielectricModel:
    """Complex permittivity eps(omega) of a passive, non-magnetic material.

    Exactly one variant is populated: a set of Lorentz oscillators plus
    eps_inf, or a tabulated (omega, n, k) grid sorted ascending in omega.
    """

    name: str = "unnamed"
    eps_inf: float = 1.0
    oscillators: tuple[Oscillator, ...] = ()
    table_omega: np.ndarray | None = field(default=None, repr=False)
    table_n: np.ndarray | None = field(default=None, repr=False)
    table_k: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.is_tabulated:
            w = np.asarray(self.table_omega, dtype=float)
            n = np.asarray(self.table_n, dtype=float)
            k = np.asarray(self.table_k, dtype=float)
            if w.ndim != 1 or w.shape != n.shape or w.shape != k.shape:
                raise ValueError("table columns must be 1-D and equally sized")
            if np.any(np.diff(w) <= 0):
                raise ValueError("tabulated omega samples must be strictly increasing")
            if np.any(w <= 0) or np.any(n < 0) or np.any(k < 0):
                raise ValueError("tabulated samples require omega > 0, n >= 0, k >= 0")
            object.__setattr__(self, "table_omega", w)
            object.__setattr__(self, "table_n", n)
            object.__setattr__(self, "table_k", k)
        elif not self.oscillators and self.eps_inf < 1.0:
            raise ValueError("eps_inf must be >= 1 for a bare background model")

    @property
    def is_tabulated(self) -> bool:
        return self.table_omega is not None


def permittivity(model: DielectricModel, omega):
    """Complex permittivity at angular frequency omega [rad/s].

    Oscillator variant: eps = eps_inf + sum wp^2 / (w0^2 - w^2 - i*gamma*w).
    Tabulated variant: eps = (n + ik)^2 with n, k interpolated linearly
    in log(omega); omega outside the table range is a hard error.
    """
    w = np.asarray(omega, dtype=float)
    if np.any(w <= 0):
        raise ValueError("omega must be positive")
    if model.is_tabulated:
        lo, hi = model.table_omega[0], model.table_omega[-1]
        if np.any(w < lo) or np.any(w > hi):
            raise ValueError(
                f"omega outside tabulated range [{lo:.6e}, {hi:.6e}] rad/s "
                f"for material '{model.name}'"
            )
        logw = np.log(w)
        logw_t = np.log(model.table_omega)
        n = np.interp(logw, logw_t, model.table_n)
        k = np.interp(logw, logw_t, model.table_k)
        eps = (n + 1j * k) ** 2
    else:
        eps = np.asarray(complex(model.eps_inf) + 0.0 * w, dtype=complex)
        for osc in model.oscillators:
            eps = eps + osc.plasma**2 / (
                osc.resonance**2 - w**2 - 1j * osc.damping * w
            )
    if np.ndim(omega) == 0:
        return complex(eps)
    return eps


def thermal_energy(temperature: float, omega) -> float | np.ndarray:
    """Mean thermal energy per field mode, hbar*w / (exp(hbar*w/kT) - 1) [J].

    Stable at both ends: returns 0 without overflow for hbar*w/kT > 700 and
    switches to the kT*(1 - x/2) expansion for x < 1e-6.
    """
    if temperature <= 0:
        raise ValueError("temperature must be positive")
    w = np.asarray(omega, dtype=float)
    if np.any(w <= 0):
        raise ValueError("omega must be positive")
    kt = K_BOLTZMANN * temperature
    x = HBAR * w / kt
    out = np.zeros_like(x)
    small = x < 1e-6
    big = x > 700.0
    mid = ~(small | big)
    out[small] = kt * (1.0 - 0.5 * x[small])
    out[mid] = HBAR * w[mid] / np.expm1(x[mid])
    if np.ndim(omega) == 0:
        return float(out)
    return out


@dataclass(frozen=True)
class ThermalState:
    """Temperatures of the two bodies [K]; equal temperatures are rejected."""

    t1: float
    t2: float

    def __post_init__(self):
        if self.t1 <= 0 or self.t2 <= 0:
            raise ValueError("temperatures must be positive")
        if self.t1 == self.t2:
            raise ValueError("equal temperatures give no net transfer")

    def weight(self, omega):
        """e_T1(omega) - e_T2(omega); positive for all omega when T1 > T2."""
        return thermal_energy(self.t1, omega) - thermal_energy(self.t2, omega)


def load_nk_table(lines, name: str = "tabulated") -> DielectricModel:
    """Parse an n,k table: comment lines start '#', then columns
    ``wavelength_um n k`` strictly increasing in wavelength.  Wavelengths are
    converted to angular frequency and re-sorted ascending in omega."""
    lam, ns, ks = [], [], []
    for raw in lines:
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 3:
            raise ValueError(f"expected 3 columns 'wavelength_um n k', got: {line!r}")
        lam.append(float(parts[0]))
        ns.append(float(parts[1]))
        ks.append(float(parts[2]))
    lam = np.asarray(lam)
    if lam.size < 2:
        raise ValueError("n,k table needs at least two samples")
    if np.any(np.diff(lam) <= 0):
        raise ValueError("wavelengths must be strictly increasing")
    omega = 2.0 * math.pi * C_LIGHT / (lam * 1e-6)
    order = np.argsort(omega)
    return DielectricModel(
        name=name,
        table_omega=omega[order],
        table_n=np.asarray(ns)[order],
        table_k=np.asarray(ks)[order],
    )


def load_nk_table_file(path, name: str | None = None) -> DielectricModel:
    with open(path, "r", encoding="utf-8") as fh:
        return load_nk_table(fh, name=name or str(path))


def sio2_oscillator_model() -> DielectricModel:
    """Built-in SiO2 two-oscillator model (the fast default)."""
    payload = json.loads(
        resources.files("gratflux.data").joinpath("sio2_oscillators.json").read_text()
    )
    oscs = tuple(
        Oscillator(o["plasma_rad_s"], o["resonance_rad_s"], o["damping_rad_s"])
        for o in payload["oscillators"]
    )
    return DielectricModel(
        name=f"SiO2-oscillator-v{payload['version']}",
        eps_inf=payload["eps_inf"],
        oscillators=oscs,
    )


def sio2_nk_table() -> DielectricModel:
    """Built-in SiO2 n,k table (authoritative in tests)."""
    text = resources.files("gratflux.data").joinpath("sio2_nk.txt").read_text()
    return load_nk_table(text.splitlines(), name="SiO2-nk-table")
