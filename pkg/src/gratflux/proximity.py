"""Proximity (additive) approximation for the grating pair.

The approximation slices the facing gratings into laterally uniform strips
and adds plane-plane coefficients weighted by the strip widths.  With ridge
width p' = p*d, groove depth a, closest-approach gap L and lateral shift
delta (reduced to [0, d/2] by the mirror and translation symmetries of the
pair), three local gaps occur::

      shift delta <= p'                    saturated, delta >= p'
      ________          ________           ________
     |  ridge |        |        |         |  ridge |
     |________|        |________|         |________|
        | overlap         |                     .      no overlap
      __v_____          __v_____                 . ______
     |        |        |        |               | |      |
     |________|        |________|               | |______|

    ridge over ridge   width p' - delta   gap L
    ridge over groove  width 2 delta      gap L + a     (both offsets)
    groove over groove width d - p' - delta  gap L + 2a

so for delta <= p' (and p < 1/2, where ridges never span a full period)

    h_PA = (p' - delta)/d h0(L) + 2 delta/d h0(L+a) + (1 - (p'+delta)/d) h0(L+2a)

and for delta >= p' the ridge-ridge overlap is gone and the split saturates:

    h_PA = 2 p'/d h0(L+a) + (1 - 2 p'/d) h0(L+2a).

The weights form a partition of unity in both branches and the two branches
agree at delta = p'.
"""

from __future__ import annotations

from dataclasses import dataclass

from .materials import DielectricModel, ThermalState
from .planar import PlanarNumerics, planar_heat_transfer
from .rcwa import GratingGeometry


@dataclass(frozen=True)
class ProximityWeights:
    """Area fractions of the three local gaps (L, L+a, L+2a)."""

    close: float
    middle: float
    far: float

    def __post_init__(self):
        total = self.close + self.middle + self.far
        if abs(total - 1.0) > 1e-12:
            raise ValueError("weights must sum to one")


def reduce_shift(delta: float, period: float) -> float:
    """Reduce a lateral shift to the fundamental interval [0, d/2]."""
    d = delta % period
    return min(d, period - d)


def proximity_weights(geometry: GratingGeometry) -> ProximityWeights:
    """Strip-area weights for the geometry's (reduced) lateral shift.

    Only fill factors below 1/2 are supported: beyond that the ridges of the
    two gratings can overlap for every shift and the three-gap split above
    no longer describes the pair.
    """
    if geometry.fill >= 0.5:
        raise ValueError("proximity split requires fill factor < 1/2")
    d = geometry.period
    ridge = geometry.ridge_width
    delta = reduce_shift(geometry.delta, d)
    if delta <= ridge:
        close = (ridge - delta) / d
        middle = 2.0 * delta / d
    else:
        close = 0.0
        middle = 2.0 * ridge / d
    far = 1.0 - close - middle
    return ProximityWeights(close=close, middle=middle, far=far)


@dataclass
class ProximityResult:
    """Weighted plane-plane coefficient with propagated error estimate."""

    value: float
    error: float
    flagged: bool


def proximity_heat_transfer(geometry: GratingGeometry,
                            material: DielectricModel, gap: float,
                            thermal: ThermalState,
                            numerics: PlanarNumerics | None = None
                            ) -> ProximityResult:
    """Proximity-approximation heat transfer coefficient [W/m^2/K]."""
    if gap <= 0:
        raise ValueError("gap must be positive")
    w = proximity_weights(geometry)
    a = geometry.depth
    total = 0.0
    err = 0.0
    flagged = False
    for weight, local_gap in ((w.close, gap), (w.middle, gap + a),
                              (w.far, gap + 2.0 * a)):
        if weight > 0.0:
            res = planar_heat_transfer(material, local_gap, thermal, numerics)
            total += weight * res.value
            err += weight * res.error
            flagged |= res.flagged
    return ProximityResult(value=total, error=err, flagged=flagged)
