import math

import numpy as np
import pytest

from wkglab.evolution import SchemeConfig
from wkglab.foliation import MissingChannelError, SliceChart
from wkglab.kappa_limit import ConvergenceReport, SweepConfig, algebraic_rho, log_slope, sweep
from wkglab.models import InitialData
from wkglab.state import EvolutionState


def _phi_state(value, rate, chart=None):
    chart = chart or SliceChart.uniform(2.0, 0.1, 2.0, "cartesian")
    ones = np.ones_like(chart.r)
    return EvolutionState(chart, {"phi": value * ones}, {"phi": rate * ones})


def test_algebraic_limit_of_constant_field():
    np.testing.assert_allclose(algebraic_rho(_phi_state(1.0, 0.0)), 4 * math.pi)
    np.testing.assert_allclose(algebraic_rho(_phi_state(1.0, 0.0), c=2.0), 16 * math.pi)
    np.testing.assert_allclose(algebraic_rho(_phi_state(0.0, 0.0)), 0.0)


def test_algebraic_limit_of_a_moving_field():
    # φ = sin(t)·exp(-r²): ρ = 8π(-φ_t² + φ_r² + φ²/2)
    chart = SliceChart.uniform(1.3, 1e-3, 2.0, "cartesian")
    r, t = chart.r, 1.3
    phi = np.sin(t) * np.exp(-r**2)
    state = EvolutionState(chart, {"phi": phi}, {"phi": np.cos(t) * np.exp(-r**2)})
    want = 8 * math.pi * (-(np.cos(t) * np.exp(-r**2)) ** 2 + (2 * r * phi) ** 2 + phi**2 / 2)
    got = algebraic_rho(state)
    assert np.max(np.abs(got - want)[:-1]) < 1e-4 * np.max(np.abs(want))  # O(dr²) from ∂_r


def test_algebraic_limit_needs_phi_channels():
    chart = SliceChart.uniform(2.0, 0.1, 2.0)
    with pytest.raises(MissingChannelError):
        algebraic_rho(EvolutionState(chart, {"phi": np.zeros_like(chart.r)}, {}))


@pytest.mark.parametrize("kappas", [(), (0.1, 0.1), (0.05, 0.1), (0.1, -0.05), (0.1, 0.0)])
def test_sweep_config_rejects_bad_kappa_lists(kappas):
    with pytest.raises(ValueError):
        SweepConfig(kappas)


def test_sweep_config_rejects_unbounded_interval_and_higher_norms():
    with pytest.raises(ValueError):
        SweepConfig((0.1,), span=(2.0, math.inf))
    with pytest.raises(ValueError):
        SweepConfig((0.1,), span=(3.0, 2.0))
    with pytest.raises(ValueError):
        SweepConfig((0.1,), norm_order=1)


def test_zero_data_gives_zero_errors():
    cfg = SweepConfig((0.1, 0.05, 0.025), data=InitialData.bumps(0.0), span=(2.0, 3.0), dr=0.1, r_max=4.0)
    rep = sweep(cfg)
    assert rep.err_rho == rep.err_u == rep.err_phi == [0.0, 0.0, 0.0]
    assert math.isnan(rep.slope_rho)
    assert "slope_rho=nan" in rep.summary()


def test_sweep_measures_decreasing_matter_errors():
    cfg = SweepConfig((0.1, 0.05, 0.025, 0.0125), span=(2.0, 4.0), dr=0.1, r_max=6.0)
    rep = sweep(cfg)
    assert rep.kappas == list(cfg.kappas) and not rep.failed
    assert rep.strictly_decreasing("u") and rep.strictly_decreasing("phi")
    assert rep.slope_u > 0.5 and rep.slope_phi > 0.5
    assert all(e > 0 for e in rep.err_rho)


def test_failing_member_is_excluded_with_a_warning(monkeypatch):
    import wkglab.kappa_limit as kl

    real = kl.SweepConfig._run

    def flaky(self, model):
        if getattr(model, "kappa", None) == 0.05:
            raise FloatingPointError("diverged")
        return real(self, model)

    monkeypatch.setattr(kl.SweepConfig, "_run", flaky)
    cfg = SweepConfig((0.1, 0.05, 0.025), span=(2.0, 3.0), dr=0.1, r_max=4.0)
    with pytest.warns(RuntimeWarning, match="kappa=0.05"):
        rep = sweep(cfg)
    assert rep.kappas == [0.1, 0.025] and 0.05 in rep.failed


def test_log_slope_and_report_helpers():
    k = np.array([0.1, 0.05, 0.025])
    assert log_slope(k, 3 * k) == pytest.approx(1.0)
    assert math.isnan(log_slope(k, [1.0, 0.0, 1.0]))
    rep = ConvergenceReport([0.1, 0.05], [1.0, 0.5], [1.0, 0.5], [1.0, 0.5], 1.0)
    assert math.isnan(rep.slope_rho)
    assert rep.strictly_decreasing("rho")
