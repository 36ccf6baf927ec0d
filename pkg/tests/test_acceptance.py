"""Acceptance criteria, one PASS/FAIL line each.

Run under pytest (``pytest tests/test_acceptance.py -s`` shows the lines) or
directly with ``python3 tests/test_acceptance.py`` for the bare summary.
"""

from __future__ import annotations

import functools
import math
import sys
import time

import numpy as np
import pytest

from exitlab import suites as S
from exitlab.core import GASKET_BETA, DomainSpec, ParameterFunction, SpaceSpec
from exitlab.discrete import (
    build_gasket_graph,
    build_grid_graph,
    dirichlet_lambda,
    expected_steps,
    ondiag_decay_fit,
)
from exitlab.estimators import walk_dimension_fit
from exitlab.samplers import SimConfig, run_batch, sample_endpoints
from exitlab.verify import check_envelope, check_lemma51, check_lower_bound

LAM = math.pi ** 2 / 8
SEED = 20240611


class Outcome:
    def __init__(self, name: str, passed: bool, detail: str):
        self.name, self.passed, self.detail = name, bool(passed), detail

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'}  {self.name}: {self.detail}"


def _report(out: Outcome) -> Outcome:
    print(out.line(), flush=True)
    return out


@functools.lru_cache(maxsize=None)
def interval(scale: float = 1.0):
    return S.interval_suite(generator_scale=scale, seed=SEED)


@functools.lru_cache(maxsize=None)
def interval_mc_timed():
    cfg = SimConfig(h=1e-4, t_max=20.0, n_paths=100_000, seed=SEED)
    # warm the compiled kernels so the timing covers the simulation only
    run_batch(SpaceSpec.euclidean(1), DomainSpec.interval(-1, 1), [0.0], SimConfig(1e-3, 1.0, 10))
    t0 = time.perf_counter()
    b = run_batch(SpaceSpec.euclidean(1), DomainSpec.interval(-1, 1), [0.0], cfg)
    return b, time.perf_counter() - t0


@functools.lru_cache(maxsize=None)
def heisenberg():
    return S.heisenberg_suite()


@functools.lru_cache(maxsize=None)
def conditions(kind: str):
    if kind == "e1":
        return S.condition_suite(SpaceSpec.euclidean(1))
    if kind == "e2":
        return S.condition_suite(SpaceSpec.euclidean(2))
    if kind == "gasket":
        return S.condition_suite(SpaceSpec.gasket(0))
    return S.condition_suite(SpaceSpec.gasket(0), ParameterFunction.power(2.0))


# --------------------------------------------------------------------------


def ac01_interval_mean_exit() -> Outcome:
    b, secs = interval_mc_timed()
    m = float(b.tau.mean())
    ok = abs(m - 1.0) <= 0.01 and secs < 30 and b.censored_fraction == 0
    return Outcome("AC01 interval mean exit time", ok,
                   f"mean={m:.5f} (oracle 1), {secs:.1f}s for 1e5 paths")


def ac02_spectral_agreement() -> Outcome:
    lam_h = dirichlet_lambda(build_grid_graph(DomainSpec.interval(-1, 1), 5e-4)).eigenvalue
    r = interval()
    fit = r.artifacts["tail_fit"]
    asym = r.report.verdicts()["asymptotic"]
    e1 = abs(lam_h / LAM - 1)
    e2 = abs(fit.lambda_hat / LAM - 1)
    return Outcome("AC02 spectral agreement", e1 <= 5e-3 and e2 <= 0.05 and asym,
                   f"grid lambda rel err={e1:.2e}, tail slope rel err={e2:.3f}, "
                   f"asymptotic check {'pass' if asym else 'fail'}")


def ac03_moment_sandwich() -> Outcome:
    r = interval()
    lam = r.artifacts["lambda"]
    m1, m2 = r.artifacts["moments"]
    v1, v2 = lam * m1.value, lam ** 2 * m2.value
    ok = (v1 >= 1 and v2 >= 2 and abs(v1 / LAM - 1) <= 0.03
          and abs(v2 / (LAM ** 2 * 5 / 3) - 1) <= 0.03)
    return Outcome("AC03 moment sandwich", ok,
                   f"lambda E[tau]={v1:.4f} (>=1, exact {LAM:.4f}), "
                   f"lambda^2 E[tau^2]={v2:.4f} (>=2, exact {LAM ** 2 * 5 / 3:.4f})")


def _lower_bound(factor: float):
    r = interval()
    return check_lower_bound(r.artifacts["curve"], r.artifacts["lambda"] * factor, (0.1, 3.0))


def ac04_lower_bound() -> Outcome:
    base, hi, lo = _lower_bound(1.0), _lower_bound(1.2), _lower_bound(0.8)
    ok = base.passed and not hi.passed
    return Outcome("AC04 survival lower bound", ok,
                   f"bound {'holds' if base.passed else 'violated'} on [0.1, 3]; "
                   f"control lambda*1.2 {'fails' if not hi.passed else 'does not fail'}; "
                   f"control lambda*0.8 {'fails' if not lo.passed else 'does not fail'}")


def _envelopes():
    out = {}
    r = interval()
    out["interval"] = check_envelope(r.artifacts["curve"], r.artifacts["lambda"], 0.5)
    d = S.disk_suite()
    out["disk"] = d.report.verdicts()["envelope"]
    out["heisenberg"] = heisenberg().report.verdicts()["envelope"]
    g = S.gasket_suite(5)
    out["gasket"] = g.report.verdicts()["envelope"]
    return {k: (v if isinstance(v, bool) else v.passed) for k, v in out.items()}


def ac05_envelope() -> Outcome:
    res = _envelopes()
    return Outcome("AC05 envelope without late blow-up", all(res.values()),
                   ", ".join(f"{k} {'ok' if v else 'blow-up'}" for k, v in res.items()))


def ac06_gasket_renormalization() -> Outcome:
    t0 = time.perf_counter()
    steps = []
    for m in range(3, 8):
        g = build_gasket_graph(m)
        steps.append(expected_steps(g)[g.nearest_vertex([0.5, 0.0])])
    secs = time.perf_counter() - t0
    ratios = np.array(steps[1:]) / np.array(steps[:-1])
    wd = walk_dimension_fit(SpaceSpec.gasket(0), [0.5, 0.0], 2.0 ** -np.arange(1, 7))
    od = ondiag_decay_fit([6, 7])["exponent"]
    target = math.log(3) / math.log(5)
    ok = (np.all(np.abs(ratios / 5 - 1) <= 0.02) and secs < 60
          and abs(wd.beta_hat - GASKET_BETA) <= 0.05 and abs(od - target) <= 0.05)
    return Outcome("AC06 gasket renormalization", ok,
                   f"level ratios {np.round(ratios, 6).tolist()} in {secs:.1f}s, "
                   f"walk dim {wd.beta_hat:.4f}, on-diagonal exponent {od:.4f}")


def ac07_heisenberg() -> Outcome:
    pts = sample_endpoints(SpaceSpec.heisenberg(1), [0, 0, 0], 1.0, 1_000_000, seed=SEED,
                           steps=400)
    var = float(pts[:, 2].var())
    h = heisenberg()
    ok_le = h.report.verdicts()["lambda_E_lower"]
    wd = walk_dimension_fit(SpaceSpec.heisenberg(1), [0, 0, 0], np.geomspace(0.03, 1.0, 4),
                            SimConfig(h=1e-3, t_max=20.0, n_paths=4000, seed=SEED))
    ok = abs(var - 1) <= 0.02 and ok_le and abs(wd.beta_hat - 2) <= 0.1
    return Outcome("AC07 Heisenberg", ok,
                   f"Var(A_1)={var:.4f}, lambda_hat E[tau]={h.artifacts['lambda_E']:.4f} "
                   f"(se {h.artifacts['lambda_E_se']:.4f}), walk dim {wd.beta_hat:.3f}")


def ac08_ondiag_decay_inequality() -> Outcome:
    graphs = {"interval": build_grid_graph(DomainSpec.interval(-1, 1), 0.01)}
    graphs.update({f"gasket{m}": build_gasket_graph(m) for m in range(1, 6)})
    viol = {k: check_lemma51(g).lhs for k, g in graphs.items()}
    return Outcome("AC08 discrete heat-kernel decay inequality", sum(viol.values()) == 0,
                   f"violations {viol}")


def ac09_layercake() -> Outcome:
    rep = S.layercake_suite().report
    res = {c.check_id: c.lhs for c in rep.checks}
    return Outcome("AC09 layer-cake identity", rep.passed,
                   ", ".join(f"{k} residual {v:.1e}" for k, v in res.items()))


def ac10_hot_spots() -> Outcome:
    r = S.hotspots_suite()
    hs = r.artifacts["hotspots"]
    target = (1.8412 / 2.4048) ** 2
    ok = r.report.passed and abs(hs.mu2_over_lambda1 / target - 1) <= 0.01
    return Outcome("AC10 hot spots on the unit disk", ok,
                   f"ratio={hs.ratio:.5f} (<=1.02), mu2/lambda1={hs.mu2_over_lambda1:.5f} "
                   f"(Bessel {target:.5f})")


def ac11_condition_suite() -> Outcome:
    good = {k: conditions(k).report for k in ("e1", "e2", "gasket")}
    wrong = conditions("gasket_wrong").report
    v = wrong.verdicts()
    verdict = [c for c in wrong.checks if c.check_id == "conditions_vs_envelope"][0].details["verdict"]
    ok = (all(r.passed for r in good.values()) and not v["condition:lambda_F"]
          and not v["envelope_shape"] and verdict == "consistently inconsistent")
    return Outcome("AC11 condition suite", ok,
                   ", ".join(f"{k} {'all pass' if r.passed else r.failures()}"
                             for k, r in good.items())
                   + f"; wrong F on gasket: lambda_F {'pass' if v['condition:lambda_F'] else 'fail'}, "
                   f"shape {'pass' if v['envelope_shape'] else 'fail'}, verdict '{verdict}'")


def ac12_convention_invariance() -> Outcome:
    verdicts = {s: interval(s).report.verdicts() for s in (1.0, 2.0, 4.0)}
    same = all(v == verdicts[1.0] for v in verdicts.values())
    allpass = all(all(v.values()) for v in verdicts.values())
    return Outcome("AC12 generator-scale invariance", same and allpass,
                   f"verdict sets identical={same}, all pass={allpass}")


CRITERIA = [ac01_interval_mean_exit, ac02_spectral_agreement, ac03_moment_sandwich,
            ac04_lower_bound, ac05_envelope, ac06_gasket_renormalization, ac07_heisenberg,
            ac08_ondiag_decay_inequality, ac09_layercake, ac10_hot_spots,
            ac11_condition_suite, ac12_convention_invariance]

# ac04 bundles a control that cannot fail: a larger rate only lowers exp(-lambda t)
XFAIL = {"ac04_lower_bound": "raising lambda weakens the lower bound, so the x1.2 control passes"}


@pytest.mark.slow
@pytest.mark.parametrize("criterion", [
    pytest.param(f, marks=pytest.mark.xfail(strict=True, reason=XFAIL[f.__name__]))
    if f.__name__ in XFAIL else f
    for f in CRITERIA], ids=[f.__name__ for f in CRITERIA])
def test_criterion(criterion):
    out = _report(criterion())
    assert out.passed, out.line()


@pytest.mark.slow
def test_lower_bound_holds_and_downward_control_fails():
    assert _lower_bound(1.0).passed
    assert not _lower_bound(0.8).passed


def main() -> int:
    results = []
    for f in CRITERIA:
        results.append(_report(f()))
    n = sum(r.passed for r in results)
    print(f"{n}/{len(results)} criteria pass")
    return 0 if n == len(results) else 1


if __name__ == "__main__":
    sys.exit(main())
