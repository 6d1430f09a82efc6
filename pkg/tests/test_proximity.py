import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import gratflux.proximity as proximity
from gratflux.materials import ThermalState, sio2_oscillator_model
from gratflux.proximity import (
    ProximityWeights,
    proximity_heat_transfer,
    proximity_weights,
    reduce_shift,
)
from gratflux.rcwa import GratingGeometry

THERMAL = ThermalState(310.0, 290.0)


def _geometry(delta, period=1500e-9, depth=500e-9, fill=0.2):
    return GratingGeometry(period=period, depth=depth, fill=fill, delta=delta)


class _FakePlanar:
    """Synthetic h0(L) = C / L^2, the near-field scaling, so the weighted
    sums can be checked in closed form without running any quadrature."""

    def __init__(self):
        self.calls = []

    def __call__(self, material, gap, thermal, numerics=None):
        self.calls.append(gap)
        from gratflux.planar import PlanarResult
        v = 1e-12 / gap**2
        return PlanarResult(value=v, prop_s=0, prop_p=0, evan_s=0, evan_p=v,
                            error=1e-6 * v, flagged=False)


@pytest.fixture
def fake_planar(monkeypatch):
    fake = _FakePlanar()
    monkeypatch.setattr(proximity, "planar_heat_transfer", fake)
    return fake


def _h0(gap):
    return 1e-12 / gap**2


def test_aligned_weights_formula():
    g = _geometry(delta=0.0)
    w = proximity_weights(g)
    p = g.fill
    assert w.close == pytest.approx(p)
    assert w.middle == 0.0
    assert w.far == pytest.approx(1.0 - p)


def test_overlap_weights_formula():
    g = _geometry(delta=100e-9)
    w = proximity_weights(g)
    d, ridge, delta = g.period, g.ridge_width, 100e-9
    assert w.close == pytest.approx((ridge - delta) / d)
    assert w.middle == pytest.approx(2.0 * delta / d)
    assert w.far == pytest.approx(1.0 - (ridge + delta) / d)


def test_saturated_weights_formula():
    g = _geometry(delta=700e-9)   # beyond the 300 nm ridge width
    w = proximity_weights(g)
    d, ridge = g.period, g.ridge_width
    assert w.close == 0.0
    assert w.middle == pytest.approx(2.0 * ridge / d)
    assert w.far == pytest.approx(1.0 - 2.0 * ridge / d)


def test_weights_continuous_at_ridge_edge():
    d = 1500e-9
    ridge = 0.2 * d
    eps = 1e-6 * d
    lo = proximity_weights(_geometry(delta=ridge - eps))
    hi = proximity_weights(_geometry(delta=ridge + eps))
    for name in ("close", "middle", "far"):
        assert getattr(lo, name) == pytest.approx(getattr(hi, name), abs=1e-5)


@given(st.floats(min_value=0.0, max_value=5e-6),
       st.floats(min_value=0.05, max_value=0.49))
@settings(max_examples=100, deadline=None)
def test_weights_simplex(delta, fill):
    g = GratingGeometry(period=1500e-9, depth=500e-9, fill=fill, delta=delta)
    w = proximity_weights(g)
    assert w.close >= 0.0 and w.middle >= 0.0 and w.far >= 0.0
    assert w.close + w.middle + w.far == pytest.approx(1.0)


def test_fill_above_half_rejected():
    g = GratingGeometry(period=1500e-9, depth=500e-9, fill=0.6)
    with pytest.raises(ValueError):
        proximity_weights(g)
    with pytest.raises(ValueError):
        proximity_heat_transfer(g, sio2_oscillator_model(), 25e-9, THERMAL)


def test_weights_object_rejects_broken_simplex():
    with pytest.raises(ValueError):
        ProximityWeights(close=0.5, middle=0.2, far=0.2)


def test_reduce_shift_properties():
    d = 1500e-9
    assert reduce_shift(0.0, d) == 0.0
    assert reduce_shift(0.3 * d, d) == pytest.approx(0.3 * d)
    # mirror symmetry of the pair
    assert reduce_shift(0.7 * d, d) == pytest.approx(0.3 * d)
    # periodicity
    assert reduce_shift(2.3 * d, d) == pytest.approx(0.3 * d)
    # always lands in the fundamental interval
    for x in (0.1, 0.49, 0.51, 0.9, 1.4, 3.99):
        assert 0.0 <= reduce_shift(x * d, d) <= 0.5 * d + 1e-20


def test_aligned_value_closed_form(fake_planar):
    g = _geometry(delta=0.0)
    res = proximity_heat_transfer(g, sio2_oscillator_model(), 25e-9, THERMAL)
    L, a, p = 25e-9, g.depth, g.fill
    expected = p * _h0(L) + (1.0 - p) * _h0(L + 2.0 * a)
    assert res.value == pytest.approx(expected, rel=1e-12)
    # only the two contributing gaps were evaluated
    assert sorted(fake_planar.calls) == pytest.approx([L, L + 2.0 * a])


def test_shifted_value_closed_form(fake_planar):
    g = _geometry(delta=100e-9)
    res = proximity_heat_transfer(g, sio2_oscillator_model(), 25e-9, THERMAL)
    L, a, d = 25e-9, g.depth, g.period
    ridge, delta = g.ridge_width, 100e-9
    expected = ((ridge - delta) / d * _h0(L)
                + 2.0 * delta / d * _h0(L + a)
                + (1.0 - (ridge + delta) / d) * _h0(L + 2.0 * a))
    assert res.value == pytest.approx(expected, rel=1e-12)


def test_vanishing_depth_collapses_to_planar(fake_planar):
    g = GratingGeometry(period=1500e-9, depth=0.0, fill=0.2, delta=400e-9)
    res = proximity_heat_transfer(g, sio2_oscillator_model(), 25e-9, THERMAL)
    assert res.value == pytest.approx(_h0(25e-9), rel=1e-12)


def test_monotone_in_shift(fake_planar):
    # h0 decreases with the gap, so growing the shift moves weight from the
    # closest strip to the farther ones and the estimate decreases
    g = _geometry(delta=0.0)
    d = g.period
    values = []
    for frac in (0.0, 0.05, 0.1, 0.15, 0.2, 0.3, 0.5):
        gg = _geometry(delta=frac * d)
        values.append(proximity_heat_transfer(
            gg, sio2_oscillator_model(), 25e-9, THERMAL).value)
    assert all(a >= b - 1e-30 for a, b in zip(values, values[1:]))
    # saturated beyond delta = ridge width
    assert values[-1] == pytest.approx(values[-2], rel=1e-12)


def test_gap_validation(fake_planar):
    with pytest.raises(ValueError):
        proximity_heat_transfer(_geometry(0.0), sio2_oscillator_model(),
                                0.0, THERMAL)


def test_error_propagates_linearly(fake_planar):
    g = _geometry(delta=0.0)
    res = proximity_heat_transfer(g, sio2_oscillator_model(), 25e-9, THERMAL)
    assert res.error == pytest.approx(1e-6 * res.value, rel=1e-9)
    assert not res.flagged
