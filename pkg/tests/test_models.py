import numpy as np
import pytest
import sympy as sp
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from wkglab.foliation import MissingChannelError, SliceChart
from wkglab.models import (CATALOG, FRModel, InitialData, WKGModel, algebraic_rho, bump,
                           catalog_nullform, einstein_limit_sources, source_terms)
from wkglab.state import EvolutionState, Jet, NonFiniteError

t, r = sp.symbols("t r")
FIELDS = {
    "u": sp.exp(-r**2) * sp.cos(t) / 3,
    "phi": sp.sin(t + r) * sp.exp(-(r - 1) ** 2) / 2,
    "rho": (1 + r**2) ** -1 * sp.cos(2 * t),
}
POINTS = (np.linspace(0.3, 2.0, 9), np.linspace(1.0, 3.0, 9))


def exact_jets(names=("u", "phi", "rho")):
    tv, rv = POINTS
    out = {}
    for n in names:
        f = FIELDS[n]
        val, ft, fr = (sp.lambdify((t, r), e, "numpy")(tv, rv) for e in (f, sp.diff(f, t), sp.diff(f, r)))
        out[n] = Jet(val, ft, fr)
    return out


def symbolic_sources(c, kappa, q, G, nu, qn):
    u, phi, rho = FIELDS["u"], FIELDS["phi"], FIELDS["rho"]

    def contr(f, g):
        return -sp.diff(f, t) * sp.diff(g, t) + sp.diff(f, r) * sp.diff(g, r)

    F = nu * contr(u, u) + qn * sp.diff(u, t) ** 2
    e = sp.exp(-kappa * rho)
    S_u = F - G * (2 * e * contr(phi, phi) + c**2 * phi**2 * e**2 * u) - 3 * kappa**2 * contr(rho, rho) \
        + kappa * q * rho**2 * u
    S_phi = c**2 * (e - 1) * phi + kappa * contr(phi, rho)
    S_rho = kappa * q * rho**2 - G * (contr(phi, phi) + c**2 / 2 * e * phi**2)
    tv, rv = POINTS
    return {k: sp.lambdify((t, r), v, "numpy")(tv, rv) * np.ones_like(tv)
            for k, v in (("u", S_u), ("phi", S_phi), ("rho", S_rho))}


@pytest.mark.parametrize("coupling", [True, False])
def test_fr_sources_match_symbolic_oracle(coupling):
    m = FRModel(0.3, c=1.7, q=0.8, coupling=coupling, null_coeff=0.6, quasi_null_coeff=0.25)
    got = m.source_terms(exact_jets())
    G = 8 * sp.pi if coupling else 1
    want = symbolic_sources(sp.Rational(17, 10), sp.Rational(3, 10), sp.Rational(4, 5), G,
                            sp.Rational(3, 5), sp.Rational(1, 4))
    for k in m.unknowns:
        np.testing.assert_allclose(got[k], want[k], rtol=1e-12, atol=1e-12)


def test_wkg_sources_match_symbolic_oracle_at_zero_kappa():
    m = WKGModel(c=2.0)
    got = m.source_terms(exact_jets(("u", "phi")))
    # ρ ≡ 0 and κ = 0 in the oracle reduce it to the Einstein-type system
    saved = FIELDS["rho"]
    FIELDS["rho"] = sp.Integer(0)
    try:
        want = symbolic_sources(2, 0, 1, 8 * sp.pi, 1, sp.Rational(1, 10))
    finally:
        FIELDS["rho"] = saved
    np.testing.assert_allclose(got["u"], want["u"], rtol=1e-12, atol=1e-14)
    assert not got["phi"].any()


def _jet_arrays(n=6):
    return arrays(np.float64, n, elements=st.floats(-2, 2))


@given(_jet_arrays(), _jet_arrays(), _jet_arrays(), _jet_arrays(), _jet_arrays(), _jet_arrays())
def test_fr_with_vanishing_rho_equals_wkg(u0, ut, ur, p0, pt, pr):
    z = np.zeros_like(u0)
    jets = {"u": Jet(u0, ut, ur), "phi": Jet(p0, pt, pr), "rho": Jet(z, z, z)}
    fr = FRModel(0.2).source_terms(jets)
    wkg = WKGModel().source_terms(jets)
    np.testing.assert_allclose(fr["u"], wkg["u"], rtol=1e-15, atol=0)
    assert not fr["phi"].any()


@given(_jet_arrays(), _jet_arrays(), _jet_arrays(), _jet_arrays(), _jet_arrays(), _jet_arrays(),
       st.floats(0.5, 3))
def test_einstein_limit_reproduces_wkg(u0, ut, ur, p0, pt, pr, c):
    jets = {"u": Jet(u0, ut, ur), "phi": Jet(p0, pt, pr)}
    lim = einstein_limit_sources(jets, c)
    ref = WKGModel(c).source_terms(jets)
    scale = 1 + np.abs(ref["u"])
    assert np.max(np.abs(lim["u"] - ref["u"]) / scale) <= 1e-14
    assert np.max(np.abs(lim["phi"])) <= 1e-14


@given(_jet_arrays(), _jet_arrays(), _jet_arrays(), _jet_arrays(), _jet_arrays(), _jet_arrays(),
       _jet_arrays(), _jet_arrays(), _jet_arrays())
def test_zero_fields_give_zero_and_matter_is_quadratic_in_phi(u0, ut, ur, p0, pt, pr, q0, qt, qr):
    z = np.zeros_like(u0)
    zero = Jet(z, z, z)
    m = FRModel(0.1)
    assert all(not v.any() for v in m.source_terms({"u": zero, "phi": zero, "rho": zero}).values())
    w = WKGModel(nonlinearities={"matter"})
    one = w.source_terms({"u": Jet(u0, ut, ur), "phi": Jet(p0, pt, pr)})["u"]
    two = w.source_terms({"u": Jet(u0, ut, ur), "phi": Jet(2 * p0, 2 * pt, 2 * pr)})["u"]
    np.testing.assert_allclose(two, 4 * one, rtol=1e-13, atol=1e-12)


def test_null_form_vanishes_on_outgoing_waves_exactly():
    f = np.linspace(-1, 1, 11)
    fp = np.cos(f)
    outgoing = Jet(f, -fp, fp)  # w(t - r)
    m = WKGModel(nonlinearities={"null"})
    assert not m.self_interaction(outgoing).any()


def test_null_form_of_crossing_waves_on_the_grid():
    chart = SliceChart.uniform(3.0, 1e-3, 2.0, kind="cartesian")
    rr, tt = chart.r, chart.t
    f = lambda x: np.exp(-x**2)
    fp = lambda x: -2 * x * np.exp(-x**2)
    u = (f(tt - rr), fp(tt - rr))
    v = (f(tt + rr), fp(tt + rr))
    q0 = catalog_nullform(u, v, chart)
    expected = -2 * fp(tt - rr) * fp(tt + rr)
    assert np.max(np.abs(q0[1:-1] - expected[1:-1])) < 1e-5
    q_self = catalog_nullform(u, u, chart)
    assert np.max(np.abs(q_self[1:-1])) < 1e-5
    with pytest.raises(MissingChannelError):
        catalog_nullform(u, (v[0], None), chart)


def test_algebraic_rho_limit_value():
    one = np.ones(3)
    z = np.zeros(3)
    np.testing.assert_allclose(algebraic_rho(Jet(one, z, z), 1.0), 4 * np.pi)
    np.testing.assert_allclose(algebraic_rho(Jet(one, z, z), 1.0, coupling=False), 0.5)


def test_model_validation():
    with pytest.raises(ValueError):
        WKGModel(c=0)
    with pytest.raises(ValueError):
        WKGModel(nonlinearities={"cubic"})
    with pytest.raises(ValueError):
        FRModel(0.0)
    with pytest.raises(ValueError):
        FRModel(-1.0)
    assert set(WKGModel().nonlinearities) == CATALOG
    assert WKGModel(coupling=False).matter_factor == 1.0


def test_nonfinite_inputs_are_reported():
    bad = Jet(np.array([0.0, np.nan]), np.zeros(2), np.zeros(2))
    ok = Jet(np.zeros(2), np.zeros(2), np.zeros(2))
    with pytest.raises(NonFiniteError) as info:
        WKGModel().source_terms({"u": bad, "phi": ok})
    assert info.value.unknown == "u" and info.value.node == 1


def test_source_terms_needs_every_channel():
    chart = SliceChart.uniform(2.0, 0.1, 1.0)
    state = EvolutionState.zeros(chart, ("u",))
    with pytest.raises(MissingChannelError):
        source_terms(WKGModel(), state)


def test_bump_support_and_data_checks():
    r = np.linspace(0, 2, 201)
    b = bump(r)
    assert b[0] == 1.0 and not b[r >= 1].any()
    data = InitialData.bumps(1e-2, u=0.5)
    u0, u1 = data.profile("u", r)
    np.testing.assert_allclose(u0, 5e-3 * b)
    assert not u1.any()
    with pytest.raises(ValueError):
        InitialData(support=1.5)
    leaky = InitialData(1.0, u0=lambda x: np.exp(-x**2))
    with pytest.raises(ValueError):
        leaky.profile("u", r)
    with pytest.raises(ValueError):
        InitialData(rho="guess")
