"""Ready-made verification suites for the built-in spaces.

Each suite computes its inputs (batches, solves, fits), runs the relevant
checks and returns a ``VerificationReport`` together with the intermediate
artifacts, so callers can export curves or inspect fits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import (
    GASKET_BETA,
    DomainSpec,
    ParameterFunction,
    SpaceSpec,
    check_layercake,
    exponent_dprime,
)
from .discrete import (
    build_gasket_graph,
    build_grid_graph,
    dirichlet_lambda,
    heat_kernel,
)
from .estimators import (
    SurvivalCurve,
    exp_moment,
    moment,
    survival_curve,
    tail_slope,
)
from .samplers import SimConfig, run_batch
from .verify import (
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


@dataclass
class SuiteResult:
    report: VerificationReport
    artifacts: dict = field(default_factory=dict)


def _dprime(space: SpaceSpec) -> float:
    beta = space.walk_dimension
    return exponent_dprime(space.alpha, beta, beta)


def interval_suite(generator_scale: float = 1.0, n_paths: int = 100_000, h: float = 1e-4,
                   seed: int = 20240611, t_max: float = 8.0, grid_h: float = 5e-4,
                   perturb_lambda: float = 1.0) -> SuiteResult:
    """Brownian motion on (-1, 1) started at 0.

    ``perturb_lambda`` multiplies the eigenvalue fed to the lower-bound check
    only (a negative-control knob).  MC times scale as 1/generator_scale, so
    t_max is scaled the same way.
    """
    space = SpaceSpec.euclidean(1, generator_scale)
    dom = DomainSpec.interval(-1.0, 1.0)
    cfg = SimConfig(h=h, t_max=t_max / generator_scale, n_paths=n_paths, seed=seed)
    batch = run_batch(space, dom, [0.0], cfg)
    g = build_grid_graph(dom, grid_h, "dirichlet", generator_scale)
    eig = dirichlet_lambda(g)
    lam = eig.eigenvalue
    grid = np.linspace(0.01, 6.0, 600) / generator_scale
    curve = survival_curve(batch, grid)
    fit = tail_slope(curve)
    m1, m2 = moment(batch, 1), moment(batch, 2)
    a = lam / 2.0
    em = exp_moment(batch, a)
    prov = {"space": space.to_dict(), "domain": dom.to_dict(), "config": cfg.to_dict(),
            "start": [0.0], "grid_h": grid_h}
    rep = VerificationReport(meta={"suite": "interval", "generator_scale": generator_scale})
    rep.add(check_asymptotic(fit, lam, inputs=prov))
    rep.add(check_moment_sandwich(lam, [m1, m2], generator_scale, inputs=prov))
    t_lo, t_hi = 0.1 / generator_scale, 3.0 / generator_scale
    rep.add(check_lower_bound(curve, lam * perturb_lambda, (t_lo, t_hi),
                              inputs={**prov, "perturb_lambda": perturb_lambda}))
    rep.add(check_envelope(curve, lam, _dprime(space), inputs=prov))
    rep.add(check_exp_moment_bound(lam, em, inputs=prov))
    return SuiteResult(rep, {"batch": batch, "curve": curve, "lambda": lam, "eigen": eig,
                             "tail_fit": fit, "moments": [m1, m2], "exp_moment": em})


def disk_suite(generator_scale: float = 1.0, n_paths: int = 40_000, h: float = 1e-4,
               seed: int = 7, grid_h: float = 1 / 128) -> SuiteResult:
    space = SpaceSpec.euclidean(2, generator_scale)
    dom = DomainSpec.ball([0.0, 0.0], 1.0)
    cfg = SimConfig(h=h, t_max=6.0 / generator_scale, n_paths=n_paths, seed=seed)
    batch = run_batch(space, dom, [0.0, 0.0], cfg)
    lam = dirichlet_lambda(build_grid_graph(dom, grid_h, "dirichlet", generator_scale)).eigenvalue
    curve = survival_curve(batch, np.linspace(0.005, 3.0, 600) / generator_scale)
    fit = tail_slope(curve)
    prov = {"space": space.to_dict(), "domain": dom.to_dict(), "config": cfg.to_dict()}
    rep = VerificationReport(meta={"suite": "disk", "generator_scale": generator_scale})
    rep.add(check_asymptotic(fit, lam, inputs=prov))
    rep.add(check_moment_sandwich(lam, [moment(batch, 1)], generator_scale, inputs=prov))
    rep.add(check_lower_bound(curve, lam, (0.05, 1.5), inputs=prov))
    rep.add(check_envelope(curve, lam, _dprime(space), inputs=prov))
    return SuiteResult(rep, {"batch": batch, "curve": curve, "lambda": lam, "tail_fit": fit})


def heisenberg_suite(n_paths: int = 40_000, h: float = 1e-4, seed: int = 3,
                     radius: float = 1.0) -> SuiteResult:
    """Horizontal Brownian motion in the unit Koranyi ball of H^1 from the origin.

    No eigensolver is available here, so lambda is the tail-slope estimate.
    """
    space = SpaceSpec.heisenberg(1)
    dom = DomainSpec.koranyi_ball([0.0, 0.0, 0.0], radius)
    cfg = SimConfig(h=h, t_max=4.0 * radius ** 2, n_paths=n_paths, seed=seed)
    batch = run_batch(space, dom, [0.0, 0.0, 0.0], cfg)
    curve = survival_curve(batch, np.linspace(0.005, 2.0, 400) * radius ** 2)
    fit = tail_slope(curve)
    m1 = moment(batch, 1)
    lamE = fit.lambda_hat * m1.value
    se = math.hypot(fit.se * m1.value, fit.lambda_hat * m1.ci_halfwidth / 1.96)
    prov = {"space": space.to_dict(), "domain": dom.to_dict(), "config": cfg.to_dict()}
    rep = VerificationReport(meta={"suite": "heisenberg"})
    rep.add(make_check("lambda_E_lower", 1.0, lamE, 3.0 * se, 1.0, prov,
                       {"lambda_hat": fit.lambda_hat, "mean_tau": m1.value, "se": se}))
    rep.add(check_envelope(curve, fit.lambda_hat, _dprime(space), inputs=prov))
    rep.add(check_lower_bound(curve, fit.lambda_hat, (0.05, 1.0), inputs=prov))
    return SuiteResult(rep, {"batch": batch, "curve": curve, "tail_fit": fit, "moment": m1,
                             "lambda_E": lamE, "lambda_E_se": se})


def gasket_survival(m: int, start=(0.5, 0.0), grid=None) -> tuple:
    """Exact survival curve of the level-m gasket chain killed at the corners."""
    g = build_gasket_graph(m)
    hk = heat_kernel(g)
    x = g.nearest_vertex(start)
    lam = hk.lambda1
    grid = np.linspace(0.01, 8.0, 400) / lam if grid is None else np.asarray(grid)
    S = hk.survival(x, grid)
    curve = SurvivalCurve(grid, S, np.zeros_like(S), np.zeros(len(S), dtype=np.int64),
                          float(grid[-1]), 0)
    return curve, g, x


def gasket_suite(m: int = 5) -> SuiteResult:
    curve, g, x = gasket_survival(m)
    eig = dirichlet_lambda(g)
    lam = eig.eigenvalue
    fit = tail_slope(curve)
    space = SpaceSpec.gasket(m)
    prov = {"space": space.to_dict(), "start_vertex": x}
    rep = VerificationReport(meta={"suite": "gasket", "level": m})
    rep.add(check_asymptotic(fit, lam, rel=0.01, inputs=prov))
    rep.add(check_envelope(curve, lam, _dprime(space), inputs=prov))
    rep.add(check_lower_bound(curve, lam, inputs=prov))
    rep.add(check_lemma51(g, inputs=prov))
    return SuiteResult(rep, {"curve": curve, "lambda": lam, "tail_fit": fit})


def condition_suite(space: SpaceSpec, pf: ParameterFunction | None = None) -> SuiteResult:
    """All condition fits for one space plus the equivalence bookkeeping."""
    if space.variant == "gasket":
        pf = pf or ParameterFunction.power(GASKET_BETA)
        centers = [[0.5, 0.0], [0.25, math.sqrt(3.0) / 4.0]]
        radii = 2.0 ** -np.arange(1, 7)
        family = [DomainSpec.gasket_subset({"type": "cell", "address": [0] * k})
                  for k in range(0, 5)]
        fk = fit_condition_FK(space, pf, ([0.0, 0.0], 2.0), family, level=8)
    elif space.variant == "euclidean":
        pf = pf or ParameterFunction.power(2.0)
        centers = [[0.0] * space.dim]
        radii = np.geomspace(0.03, 1.0, 5)
        if space.dim == 1:
            family = [DomainSpec.interval(-w, w) for w in (1.0, 0.5, 0.25, 0.1)]
        else:
            family = [DomainSpec.box([-w, -w / 2], [w, w / 2]) for w in (0.7, 0.4, 0.2, 0.1)]
        fk = fit_condition_FK(space, pf, (centers[0], 1.0), family)
    else:
        raise ValueError("condition suites need exact solves (euclidean or gasket)")
    lam_f = fit_condition_lambda_F(space, pf, centers, radii)
    e_f = fit_condition_E_F(space, pf, centers, radii)
    ebar = check_condition_Ebar(space, centers, radii)
    ebar_p = check_condition_Ebar_prime(space, centers, radii)
    shape = envelope_shape_fit(space, pf)
    fits = {f.condition_id: f for f in (fk, lam_f, e_f, ebar, ebar_p)}
    rep = VerificationReport(meta={"suite": "conditions", "space": space.to_dict(),
                                   "F": pf.to_dict()})
    rep.add(list(fits.values()))
    rep.add(shape)
    rep.add(consistency_prop43(fits, shape))
    return SuiteResult(rep, {"fits": fits, "shape": shape})


def hotspots_suite(domain: DomainSpec | None = None, h: float = 1 / 256,
                   bound: float = 1.02) -> SuiteResult:
    domain = domain or DomainSpec.ball([0.0, 0.0], 1.0)
    res = hotspots(domain, h)
    rep = VerificationReport(meta={"suite": "hotspots", "domain": domain.to_dict()})
    rep.add(check_hotspots(res, bound, inputs={"domain": domain.to_dict()}))
    return SuiteResult(rep, {"hotspots": res})


LAYERCAKE_CASES = (
    ("d1_gauss", 1, [0.0], 0.0, lambda r: np.exp(-r * r), lambda r: -2 * r * np.exp(-r * r)),
    ("d2_exp", 2, [0.0, 0.0], 1.0, lambda r: np.exp(-r), lambda r: -np.exp(-r)),
    ("d3_gauss", 3, [0.0, 0.0, 0.0], 1.0, lambda r: np.exp(-r * r),
     lambda r: -2 * r * np.exp(-r * r)),
)


def layercake_suite(tol: float = 1e-6) -> SuiteResult:
    rep = VerificationReport(meta={"suite": "layercake"})
    for name, d, c, R, phi, dphi in LAYERCAKE_CASES:
        res = check_layercake(SpaceSpec.euclidean(d), c, R, phi, dphi)
        rep.add(make_check(f"layercake_{name}", res, tol, 0.0, 1.0, {"d": d, "R": R}))
    return SuiteResult(rep)


SUITES = {
    "interval": interval_suite,
    "disk": disk_suite,
    "heisenberg": heisenberg_suite,
    "gasket": gasket_suite,
    "hotspots": hotspots_suite,
    "layercake": layercake_suite,
}
