import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, strategies as st

from wkglab.foliation import (FrameField, MissingChannelError, OutsideConeError, SliceChart,
                              apply_frame, commutator_check, cone_radius, lift, project)
from wkglab.state import EvolutionState

T, X1, X2, X3 = sp.symbols("t x1 x2 x3")


@given(st.floats(0.1, 50), st.floats(0, 100))
def test_lift_then_project_round_trips(s, r):
    # conditioning of t² - r² grows like (t/s)²
    assert project(lift(s, r), r) == pytest.approx(s, rel=1e-14 * (4 + (r / s) ** 2))


@given(st.floats(0, 50), st.floats(1e-3, 50))
def test_project_then_lift_round_trips(r, gap):
    t = r + gap
    assert lift(project(t, r), r) == pytest.approx(t, rel=1e-12, abs=1e-12)


def test_lift_vectorizes():
    r = np.linspace(0, 3, 7)
    np.testing.assert_allclose(lift(2.0, r), np.sqrt(4 + r**2))


@pytest.mark.parametrize("t,r", [(1.0, 1.0), (1.0, 2.0), (0.0, 0.0)])
def test_project_rejects_points_outside_the_cone(t, r):
    with pytest.raises(OutsideConeError):
        project(t, r)


@pytest.mark.parametrize("s,r", [(0.0, 1.0), (-1.0, 0.0), (1.0, -0.5), (math.nan, 1.0)])
def test_lift_rejects_bad_input(s, r):
    with pytest.raises(ValueError):
        lift(s, r)


def test_cone_radius_meets_the_shifted_cone():
    for s in (1.5, 3.0, 10.0):
        r = cone_radius(s)
        assert lift(s, r) - r == pytest.approx(1.0)


def test_chart_validation():
    r = np.linspace(0, 1, 11)
    with pytest.raises(ValueError):
        SliceChart(0.0, r)
    with pytest.raises(ValueError):
        SliceChart(1.0, r[:3])
    with pytest.raises(ValueError):
        SliceChart(1.0, np.r_[r, 1.5])
    with pytest.raises(ValueError):
        SliceChart(1.0, r, kind="spherical")
    with pytest.raises(OutsideConeError):
        SliceChart.uniform(2.0, 0.1, 5.0, confined=True)
    assert SliceChart.uniform(4.0, 0.1, 5.0, confined=True).r_max == pytest.approx(5.0)


def test_chart_geometry():
    hyp = SliceChart.uniform(3.0, 0.5, 4.0)
    np.testing.assert_allclose(hyp.t, np.sqrt(9 + hyp.r**2))
    np.testing.assert_allclose(hyp.s, 3.0)
    np.testing.assert_allclose(hyp.slope, hyp.r / hyp.t)
    flat = SliceChart.uniform(5.0, 0.5, 4.0, kind="cartesian")
    np.testing.assert_allclose(flat.t, 5.0)
    np.testing.assert_allclose(flat.s, np.sqrt(25 - flat.r**2))
    assert not flat.slope.any()


def _closed_form_on_slice(chart, f):
    """Values of f(t, r) and of its exact ∂_t, ∂_r at the chart nodes."""
    t, r = sp.symbols("t r")
    fn = sp.lambdify((t, r), f, "numpy")
    ft = sp.lambdify((t, r), sp.diff(f, t), "numpy")
    fr = sp.lambdify((t, r), sp.diff(f, r), "numpy")
    tt = chart.t
    return fn(tt, chart.r), ft(tt, chart.r), fr(tt, chart.r)


@pytest.mark.parametrize("kind", ["hyperboloidal", "cartesian"])
def test_frame_fields_match_closed_forms(kind):
    t, r = sp.symbols("t r")
    f = sp.exp(-r**2 / (1 + t)) * sp.cos(t)  # even in r, as radial fields are
    chart = SliceChart.uniform(2.5, 1e-3, 3.0, kind=kind)
    u, ut, ur = _closed_form_on_slice(chart, f)
    pair = (u, ut)
    tol = 2e-5
    np.testing.assert_allclose(apply_frame(FrameField("dt"), pair, chart), ut)
    np.testing.assert_allclose(apply_frame(FrameField("dr"), pair, chart), ur, atol=tol)
    np.testing.assert_allclose(apply_frame(FrameField("boost"), pair, chart),
                               chart.r * ut + chart.t * ur, atol=tol * 10)
    np.testing.assert_allclose(apply_frame(FrameField("tangential"), pair, chart),
                               ur + chart.r / chart.t * ut, atol=tol)


def test_frame_field_needs_time_channel():
    chart = SliceChart.uniform(2.0, 0.1, 1.0)
    state = EvolutionState(chart, {"u": np.zeros_like(chart.r)}, {})
    with pytest.raises(MissingChannelError):
        apply_frame(FrameField("boost"), state)
    with pytest.raises(ValueError):
        FrameField("spin")


@pytest.mark.parametrize("a,b", [(1, 1), (1, 2), (3, 2)])
def test_commutators_vanish_on_polynomials(a, b):
    sample = T**3 * X1 + X2**2 * X3 * T - X1 * X2 * X3**2 + T**2
    assert commutator_check(a, b, sample) == 0.0


def test_commutators_vanish_on_gaussian():
    sample = sp.exp(-(X1**2 + X2**2 + X3**2 - T**2 / 4))
    assert commutator_check(1, 2, sample) <= 1e-12


def test_finite_difference_commutator_is_second_order():
    sample = sp.sin(T) * sp.cos(X1 + 2 * X2) * sp.exp(X3 / 3)
    coarse = commutator_check(1, 2, sample, mode="fd", h=2e-2)
    fine = commutator_check(1, 2, sample, mode="fd", h=1e-2)
    assert coarse > 0
    assert 3.5 < coarse / fine < 4.5


def test_commutator_axis_validation():
    with pytest.raises(ValueError):
        commutator_check(0, 1, T)
