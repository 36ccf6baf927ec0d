import json
import math

import numpy as np
import pytest

from exitlab.core import GASKET_BETA, ContractError, DomainSpec, ParameterFunction, SpaceSpec
from exitlab.discrete import build_gasket_graph, build_grid_graph, dirichlet_lambda
from exitlab.estimators import MomentEstimate, SurvivalCurve, TailFit, exp_moment
from exitlab.suites import gasket_survival
from exitlab.verify import (
    ConditionFit,
    InstabilityError,
    VerificationReport,
    check_asymptotic,
    check_condition_Ebar,
    check_condition_Ebar_prime,
    check_envelope,
    check_exp_moment_bound,
    check_hotspots,
    check_lemma51,
    check_lower_bound,
    check_moment_sandwich,
    consistency_prop43,
    envelope_shape_fit,
    fit_condition_E_F,
    fit_condition_FK,
    fit_condition_lambda_F,
    hotspots,
    make_check,
)

LAM = math.pi ** 2 / 8
E1 = SpaceSpec.euclidean(1)
F2 = ParameterFunction.power(2)
RADII = np.geomspace(0.03, 1.0, 5)


def _series_curve(t):
    # exact survival from 0 in (-1, 1)
    k = np.arange(1, 400, 2)
    S = np.sum(4 / (k * np.pi) * (-1.0) ** ((k - 1) // 2)
               * np.exp(-np.outer(t, k ** 2) * np.pi ** 2 / 8), axis=1)
    return SurvivalCurve(t, S, np.zeros_like(S), np.zeros(len(t), np.int64), float(t[-1]), 0)


def test_make_check_slack_and_tolerance():
    c = make_check("x", 1.0, 0.9, tolerance=0.2, scale=1.0)
    assert c.slack == pytest.approx(-0.1) and c.passed
    assert not make_check("x", 1.0, 0.9, tolerance=0.05).passed
    assert not make_check("x", math.nan, 1.0).passed


def test_lower_bound_on_exact_curve():
    curve = _series_curve(np.linspace(0.1, 3.0, 60))
    assert check_lower_bound(curve, LAM).passed
    bad = check_lower_bound(curve, 0.8 * LAM)
    assert not bad.passed and bad.details["violations"] > 0
    # lambda * 1.2 only lowers exp(-lambda t), so it cannot break the inequality
    assert check_lower_bound(curve, 1.2 * LAM).passed


def test_lower_bound_takes_max_over_starts():
    t = np.linspace(0.1, 3.0, 30)
    low = SurvivalCurve(t, 0.5 * np.exp(-LAM * t), np.zeros(30), np.zeros(30, np.int64), 3.0, 0)
    assert not check_lower_bound(low, LAM).passed
    assert check_lower_bound([low, _series_curve(t)], LAM).passed


def test_envelope_exact_curves():
    curve = _series_curve(np.linspace(0.01, 6.0, 300))
    assert check_envelope(curve, LAM, 0.5).passed
    gcurve, g, _ = gasket_survival(4)
    lam = dirichlet_lambda(g).eigenvalue
    assert check_envelope(gcurve, lam, 0.9024).passed
    # a rate above the true one makes K(t) grow without bound
    assert not check_envelope(curve, 1.3 * LAM, 0.5).passed
    assert check_envelope(curve, 0.7 * LAM, 0.5).passed


def test_moment_sandwich():
    m1 = MomentEstimate(1, 1.0, 0.01, 0.0, 1.0)
    m2 = MomentEstimate(2, 5 / 3, 0.02, 0.0, 1.0)
    c1, c2 = check_moment_sandwich(LAM, [m1, m2], 1.0)
    assert c1.passed and c1.rhs == pytest.approx(LAM)
    assert c2.passed and c2.rhs == pytest.approx(LAM ** 2 * 5 / 3)
    assert c2.lhs == 2.0
    small = MomentEstimate(1, 0.5, 0.01, 0.0, 1.0)
    assert not check_moment_sandwich(LAM, small, 1.0)[0].passed
    with pytest.raises(ContractError):
        check_moment_sandwich(LAM, [MomentEstimate(1, 1.0, 0.01, 0.0, 2.0)], 1.0)


def test_exp_moment_bound(interval_batch):
    est = exp_moment(interval_batch, LAM / 2)
    c = check_exp_moment_bound(LAM, est)
    assert c.passed and c.lhs < LAM
    with pytest.raises(InstabilityError):
        check_exp_moment_bound(LAM, exp_moment(interval_batch, 1.05 * LAM))


def test_asymptotic():
    assert check_asymptotic(TailFit(1.25, 0.01, (1, 2), 0.999), LAM).passed
    assert not check_asymptotic(TailFit(1.4, 0.01, (1, 2), 0.999), LAM).passed


def test_lambda_F_euclidean_scaling_identity():
    fit = fit_condition_lambda_F(E1, F2, [[0.0]], RADII)
    # lambda(B_r) r^2 = pi^2/8 for every r, up to the shared grid error
    assert fit.passed and fit.ratio == pytest.approx(1.0, abs=1e-9)
    assert fit.c_lower == pytest.approx(LAM, rel=1e-3)
    wrong = fit_condition_lambda_F(E1, ParameterFunction.power(3), [[0.0]], RADII)
    assert not wrong.passed and wrong.ratio == pytest.approx(1 / 0.03, rel=1e-6)


def test_E_F_closed_forms():
    fit = fit_condition_E_F(E1, F2, [[0.0]], RADII)
    np.testing.assert_allclose(fit.values, 1.0, rtol=1e-9)
    disk = fit_condition_E_F(SpaceSpec.euclidean(2), F2, [[0.0, 0.0]], RADII)
    # the staircase disk costs about 2%, identically at every radius
    np.testing.assert_allclose(disk.values, 0.5, rtol=3e-2)
    np.testing.assert_allclose(disk.values, disk.values[0], rtol=1e-9)
    scaled = fit_condition_E_F(SpaceSpec.euclidean(2, 4.0), F2, [[0.0, 0.0]], RADII)
    np.testing.assert_allclose(scaled.values, np.divide(disk.values, 4), rtol=1e-9)


def test_gasket_conditions_and_wrong_F():
    g = SpaceSpec.gasket(0)
    radii = 2.0 ** -np.arange(1, 7)
    right = fit_condition_lambda_F(g, ParameterFunction.power(GASKET_BETA), [[0.5, 0.0]], radii)
    assert right.passed and abs(right.slope) < 0.1
    wrong = fit_condition_lambda_F(g, F2, [[0.5, 0.0]], radii)
    assert not wrong.passed
    # lambda r^2 ~ r^(2 - beta): the drift is the exponent mismatch
    assert wrong.slope == pytest.approx(2 - GASKET_BETA, abs=0.05)


def test_FK_interval_family():
    fam = [DomainSpec.interval(-w, w) for w in (1.0, 0.5, 0.25, 0.1)]
    fit = fit_condition_FK(E1, F2, ([0.0], 1.0), fam)
    assert fit.passed
    assert fit.slope == pytest.approx(2.0, abs=1e-6)
    with pytest.raises(ContractError):
        fit_condition_FK(E1, F2, ([0.0], 1.0), fam[:1])


def test_Ebar_closed_forms():
    eb = check_condition_Ebar(E1, [[0.0]], RADII)
    assert eb.passed and eb.c_lower == pytest.approx(1.0)
    ebp = check_condition_Ebar_prime(E1, [[0.0]], RADII, delta=0.5)
    assert ebp.passed and ebp.c_lower == pytest.approx(0.75, rel=1e-9)
    shifted = check_condition_Ebar(E1, [[0.0]], RADII, offset=0.9)
    assert shifted.c_lower == pytest.approx(1 - 0.81, abs=1e-6)
    with pytest.raises(ContractError):
        check_condition_Ebar_prime(E1, [[0.0]], RADII, delta=0.95)
    with pytest.raises(ContractError):
        check_condition_Ebar(E1, [[0.0]], [0.5, 1.0])


def _fit(cid, ok):
    return ConditionFit(cid, 1.0, 1.0, 1, ok)


@pytest.mark.parametrize("conds,env,verdict,passed", [
    (True, True, "consistent", True),
    (False, False, "consistently inconsistent", True),
    (False, True, "inconsistency finding", False),
    (True, False, "inconsistency finding", False),
])
def test_consistency_verdicts(conds, env, verdict, passed):
    fits = [_fit("FK_F", True), _fit("lambda_F", conds), _fit("Ebar", True)]
    shape = make_check("envelope_shape", 0.0 if env else 1.0, 0.05)
    c = consistency_prop43(fits, shape)
    assert c.details["verdict"] == verdict and c.passed == passed


def test_consistency_lists_missing_inputs():
    with pytest.raises(ContractError, match="FK_F"):
        consistency_prop43([_fit("lambda_F", True), _fit("Ebar", True)],
                           make_check("envelope_shape", 0, 1))


def test_envelope_shape():
    gk = SpaceSpec.gasket(0)
    right = envelope_shape_fit(gk, ParameterFunction.power(GASKET_BETA), measured=0.67)
    assert right.passed and right.details["expected"] == pytest.approx(math.log(3) / math.log(5))
    assert not envelope_shape_fit(gk, F2, measured=0.67).passed
    assert envelope_shape_fit(E1, F2).passed


def test_hotspots_square_and_disk():
    sq = hotspots(DomainSpec.polygon([[0, 0], [1, 0], [1, 1], [0, 1]]), 1 / 32)
    # phi_2 = cos(pi x) peaks on the boundary; mu_2 / lambda_1 = pi^2 / (2 pi^2)
    assert sq.ratio == pytest.approx(1.0, abs=1e-9)
    assert sq.mu2_over_lambda1 == pytest.approx(0.5, rel=0.01)
    disk = hotspots(DomainSpec.ball([0, 0], 1), 1 / 64)
    assert check_hotspots(disk).passed
    assert disk.mu2_over_lambda1 == pytest.approx((1.8412 / 2.4048) ** 2, rel=0.02)


@pytest.mark.parametrize("g", [build_grid_graph(DomainSpec.interval(-1, 1), 0.02),
                               build_gasket_graph(4)], ids=["interval", "gasket4"])
def test_lemma51_no_violations(g):
    c = check_lemma51(g)
    assert c.passed and c.lhs == 0 and c.details["checked"] == 200 * c.inputs["n_vertices"]


def test_report_merge_and_json():
    a = VerificationReport(meta={"run": 1})
    a.add(make_check("x", 1, 2, inputs={"k": 1}))
    a.add(make_check("y", 3, 2, inputs={"k": 1}))
    b = VerificationReport()
    b.add(make_check("z", 0, 1))
    b.add(_fit("FK_F", True))
    ab, ba = a.merge(b), b.merge(a)
    assert [c.key() for c in ab.checks] == [c.key() for c in ba.checks]
    assert ab.failures() == ["y"] and not ab.passed
    back = VerificationReport.from_dict(json.loads(ab.to_json()))
    assert back.verdicts() == ab.verdicts()
    assert "condition:FK_F" in ab.table()
    with pytest.raises(ValueError):
        VerificationReport.from_dict({"version": 99})
