import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from exitlab.core import (
    GASKET_ALPHA,
    GASKET_BETA,
    ContractError,
    DomainError,
    DomainSpec,
    EnvelopeParams,
    ParameterFunction,
    SpaceSpec,
    check_layercake,
    eval_F,
    eval_Phi,
    eval_Rinv,
    exponent_dprime,
    koranyi_distance,
    koranyi_gauge,
    koranyi_unit_volume,
    ue_envelope,
    volume,
)

GASKET_F = ParameterFunction.power(GASKET_BETA)
PIECEWISE = ParameterFunction.piecewise(2.0, GASKET_BETA, 1.0)


def test_F_values():
    assert eval_F(ParameterFunction.power(2), 3.0) == 9.0
    assert eval_F(GASKET_F, 2.0) == pytest.approx(5.0, rel=1e-14)
    # both branches meet at r = 1, so r**2 below and r**beta above
    assert eval_F(PIECEWISE, 4.0) == pytest.approx(25.0, rel=1e-13)
    assert eval_F(PIECEWISE, 0.5) == 0.25


def test_Rinv_values():
    assert eval_Rinv(ParameterFunction.power(2), 9.0) == pytest.approx(3.0)
    assert eval_Rinv(ParameterFunction.power(2), 1.0) == 1.0
    assert eval_Rinv(PIECEWISE, 25.0) == pytest.approx(4.0, rel=1e-13)


@pytest.mark.parametrize("bad", [0.0, -1.0])
def test_nonpositive_arguments(bad):
    with pytest.raises(DomainError):
        eval_F(GASKET_F, bad)
    with pytest.raises(DomainError):
        eval_Rinv(GASKET_F, bad)
    if bad < 0:
        with pytest.raises(DomainError):
            eval_Phi(GASKET_F, bad)


@settings(max_examples=60, deadline=None)
@given(st.floats(1e-6, 1e6), st.sampled_from([ParameterFunction.power(2), GASKET_F, PIECEWISE]))
def test_Rinv_inverts_F(t, pf):
    assert eval_F(pf, eval_Rinv(pf, t)) == pytest.approx(t, rel=1e-12)


def test_certified_regularity():
    assert GASKET_F.certify() == pytest.approx(1.0)
    # piecewise F with exponents 2 and beta: sandwich holds with C_F = 1 too
    assert PIECEWISE.certify() == pytest.approx(1.0, abs=1e-9)
    assert (PIECEWISE.beta, PIECEWISE.beta_prime) == (2.0, GASKET_BETA)


def test_invalid_parameter_function():
    with pytest.raises(ValueError):
        ParameterFunction.power(0.5)
    with pytest.raises(ValueError):
        ParameterFunction(kind="power", beta=2.0, C_F=0.5)


def test_phi_gaussian_closed_form():
    pf = ParameterFunction.power(2)
    assert eval_Phi(pf, 0.0) == 0.0
    assert eval_Phi(pf, 1.0) == pytest.approx(0.25)
    assert eval_Phi(pf, 2.0) == pytest.approx(1.0)


def _phi_bruteforce(pf, s):
    r = np.geomspace(1e-4, 1e4, 400_001)
    return float(np.max(s / r - 1.0 / eval_F(pf, r)))


@pytest.mark.parametrize("s", [0.05, 0.7, 3.0, 40.0])
def test_phi_piecewise_against_grid_search(s):
    assert eval_Phi(PIECEWISE, s) == pytest.approx(_phi_bruteforce(PIECEWISE, s), rel=1e-6)
    assert eval_Phi(GASKET_F, s) == pytest.approx(_phi_bruteforce(GASKET_F, s), rel=1e-6)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.01, 50.0), st.floats(0.01, 50.0), st.floats(0.05, 0.95))
def test_phi_convex_and_monotone(a, b, w):
    s1, s3 = sorted((a, b))
    s2 = w * s1 + (1 - w) * s3
    p1, p2, p3 = (eval_Phi(PIECEWISE, s) for s in (s1, s2, s3))
    assert p1 <= p2 * (1 + 1e-9) + 1e-12
    assert p2 <= w * p1 + (1 - w) * p3 + 1e-9 * max(1.0, p3)


def test_phi_lower_bound_constant_is_stable():
    # t Phi(R/t) >= c1 min((F(R)/t)^(1/(b'-1)), (F(R)/t)^(1/(b-1))) with one c1 over the grid
    pf = PIECEWISE
    ratios = []
    for R in np.geomspace(1e-2, 1e2, 9):
        for t in np.geomspace(1e-3, 1e3, 9):
            q = eval_F(pf, R) / t
            rhs = min(q ** (1 / (pf.beta_prime - 1)), q ** (1 / (pf.beta - 1)))
            ratios.append(t * eval_Phi(pf, R / t) / rhs)
    ratios = np.array(ratios)
    assert ratios.min() > 0.05
    assert ratios.max() / ratios.min() < 50


def test_envelope_gaussian_shape():
    pf = ParameterFunction.power(2)
    env = EnvelopeParams()
    assert ue_envelope(pf, env, 1.0, 0.0, 1.0) == 1.0
    assert ue_envelope(pf, env, 1.0, 2.0, 1.0) == pytest.approx(math.exp(-0.5))
    env = EnvelopeParams(C_UE=3.0, c_UE=0.7)
    d = np.array([0.0, 0.3, 1.1, 2.5])
    t = 0.8
    vals = ue_envelope(pf, env, 2.0, d, t)
    assert vals[0] == pytest.approx(1.5)
    np.testing.assert_allclose(vals / vals[0], np.exp(-0.49 * d ** 2 / (8 * t)), rtol=1e-12)


def test_dprime_values():
    assert exponent_dprime(1, 2, 2) == 0.5
    assert exponent_dprime(2, 2, 2) == 1.0
    assert exponent_dprime(4, 2, 2) == 2.0
    d = exponent_dprime(GASKET_ALPHA, GASKET_BETA, GASKET_BETA)
    assert d == pytest.approx(math.log(3) / math.log(2) * (math.log(5 / 2) / math.log(5)))
    assert d == pytest.approx(0.9024, abs=1e-4)


@settings(max_examples=60, deadline=None)
@given(st.floats(0.5, 8), st.floats(1, 4), st.floats(0, 2), st.floats(0.01, 1))
def test_dprime_monotone(alpha, beta, extra, bump):
    bp = beta + extra
    d0 = exponent_dprime(alpha, beta, bp)
    assert exponent_dprime(alpha + bump, beta, bp) >= d0
    assert exponent_dprime(alpha, beta, bp + bump) >= d0
    if beta + bump <= bp:
        assert exponent_dprime(alpha, beta + bump, bp) <= d0


def test_volume():
    assert volume(SpaceSpec.euclidean(2), 1.0) == pytest.approx(math.pi)
    assert volume(SpaceSpec.euclidean(3), 2.0) == pytest.approx(32 * math.pi / 3)
    h = SpaceSpec.heisenberg(1)
    assert volume(h, 0.6) / volume(h, 0.3) == pytest.approx(16.0)
    g = SpaceSpec.gasket(0)
    for k in range(1, 6):
        assert volume(g, 2.0 ** -k) / volume(g, 2.0 ** -(k + 1)) == pytest.approx(3.0)


def test_koranyi_unit_volume_closed_form():
    # in H^1: pi * int_0^1 rho sqrt(1 - rho^4) d rho = pi^2 / 8
    kappa, se = koranyi_unit_volume(1)
    assert abs(kappa - math.pi ** 2 / 8) < 4 * se + 1e-3


def test_koranyi_gauge_homogeneous():
    p = np.array([0.3, -0.2, 0.05])
    c = 1.7
    dil = np.array([c * p[0], c * p[1], c * c * p[2]])
    assert koranyi_gauge(dil, 1) == pytest.approx(c * koranyi_gauge(p, 1))
    assert koranyi_distance(p, p, 1) == pytest.approx(0.0, abs=1e-15)


def test_domain_geometry():
    iv = DomainSpec.interval(-1, 1)
    assert list(iv.contains(np.array([[0.0], [1.0], [-0.99]]))) == [True, False, True]
    np.testing.assert_allclose(iv.boundary_distance(np.array([[0.25]])), [0.75])
    disk = DomainSpec.ball([0, 0], 1)
    assert disk.measure() == pytest.approx(math.pi)
    np.testing.assert_allclose(disk.boundary_distance(np.array([[0.6, 0.0]])), [0.4])
    sq = DomainSpec.polygon([[0, 0], [1, 0], [1, 1], [0, 1]])
    assert sq.measure() == pytest.approx(1.0)
    assert bool(sq.contains(np.array([[0.5, 0.5]]))[0])
    np.testing.assert_allclose(sq.boundary_distance(np.array([[0.2, 0.5]])), [0.2])
    assert DomainSpec.slab(0.5, 2).dim == 3


def test_domain_rejects_degenerate():
    with pytest.raises(ValueError):
        DomainSpec.interval(1, 1)
    with pytest.raises(ValueError):
        DomainSpec.ball([0, 0], 0)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=2, max_size=2), st.floats(0.01, 3))
def test_spec_roundtrip(center, radius):
    dom = DomainSpec.ball(center, radius)
    assert DomainSpec.from_dict(dom.to_dict()) == dom
    for sp in (SpaceSpec.euclidean(2, radius), SpaceSpec.heisenberg(1), SpaceSpec.gasket(4)):
        assert SpaceSpec.from_dict(sp.to_dict()) == sp
    pf = ParameterFunction.piecewise(2.0, 2.0 + radius, 1.0 + radius)
    assert ParameterFunction.from_dict(pf.to_dict()) == pf


def test_layercake_examples():
    e1 = SpaceSpec.euclidean(1)
    assert check_layercake(e1, [0.0], 0.0, lambda r: np.exp(-r * r)) <= 1e-6
    e2 = SpaceSpec.euclidean(2)
    assert check_layercake(e2, [0.0, 0.0], 1.0, lambda r: np.exp(-r), lambda r: -np.exp(-r)) <= 1e-6


def test_layercake_rejects_constant_phi():
    with pytest.raises(ContractError):
        check_layercake(SpaceSpec.euclidean(1), [0.0], 0.5, lambda r: 1.0 + 0 * r)
