"""Inequality checks and condition fits with machine-readable verdicts.

Every check returns a ``CheckResult`` whose ``slack`` is rhs - lhs in the
orientation "lhs <= rhs"; it passes iff slack >= -tolerance * scale.
Upper-bound statements with non-explicit constants are never tested against
a hard-coded constant.  Instead the constant is fitted and its boundedness
or stability across scales is tested.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .core import ContractError, DomainSpec, ParameterFunction, SpaceSpec, eval_F
from .discrete import (
    Graph,
    build_gasket_graph,
    build_grid_graph,
    dirichlet_lambda,
    gasket_domain_mask,
    heat_kernel,
    interval_decay_fit,
    mean_exit_solve,
    neumann_eigenpair,
    ondiag_decay_fit,
    ondiag_exponent,
    restrict_gasket,
)
from .estimators import (
    ExpMomentEstimate,
    MomentEstimate,
    SurvivalCurve,
    TailFit,
    moment,
    survival_curve,
    tail_slope,
)
from .samplers import SimConfig, run_batch

REPORT_VERSION = 1
REL_TOL = 0.05
N_SE = 3.0


class InstabilityError(RuntimeError):
    """Exponential-moment estimate is dominated by a few samples."""


def _clean(v):
    if isinstance(v, dict):
        return {str(k): _clean(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_clean(x) for x in v]
    if isinstance(v, np.ndarray):
        return _clean(v.tolist())
    if isinstance(v, (np.floating, np.integer, np.bool_)):
        return v.item()
    if isinstance(v, float) and not math.isfinite(v):
        return repr(v)
    return v


@dataclass
class CheckResult:
    check_id: str
    lhs: float
    rhs: float
    slack: float
    passed: bool
    tolerance: float
    scale: float = 1.0
    inputs: dict = field(default_factory=dict)
    details: dict = field(default_factory=dict)
    mandatory: bool = True

    def key(self) -> str:
        blob = json.dumps(_clean(self.inputs), sort_keys=True)
        return self.check_id + ":" + hashlib.sha1(blob.encode()).hexdigest()[:12]

    def to_dict(self) -> dict:
        return _clean(asdict(self))

    @classmethod
    def from_dict(cls, d: dict) -> "CheckResult":
        return cls(**d)


def make_check(check_id: str, lhs: float, rhs: float, tolerance: float = 0.0,
               scale: float = 1.0, inputs=None, details=None, mandatory: bool = True):
    lhs = float(lhs)
    rhs = float(rhs)
    slack = rhs - lhs
    ok = bool(math.isfinite(slack) and slack >= -tolerance * scale)
    return CheckResult(check_id, lhs, rhs, slack, ok, float(tolerance), float(scale),
                       inputs or {}, details or {}, mandatory)


@dataclass
class ConditionFit:
    condition_id: str
    c_lower: float
    c_upper: float
    n: int
    passed: bool
    ratio: float = math.nan
    cap: float = math.nan
    slope: float = math.nan
    values: list = field(default_factory=list)
    inputs: dict = field(default_factory=dict)
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return _clean(asdict(self))

    @classmethod
    def from_dict(cls, d: dict) -> "ConditionFit":
        return cls(**d)


@dataclass
class VerificationReport:
    checks: list = field(default_factory=list)
    conditions: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def add(self, item):
        if isinstance(item, (list, tuple)):
            for x in item:
                self.add(x)
        elif isinstance(item, ConditionFit):
            self.conditions.append(item)
        else:
            self.checks.append(item)
        return self

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks if c.mandatory)

    def failures(self) -> list:
        return [c.check_id for c in self.checks if c.mandatory and not c.passed]

    def verdicts(self) -> dict:
        out = {c.check_id: c.passed for c in self.checks}
        out.update({f"condition:{c.condition_id}": c.passed for c in self.conditions})
        return out

    def merge(self, other: "VerificationReport") -> "VerificationReport":
        """Order-independent union keyed by check id and an inputs hash."""
        checks = {c.key(): c for c in self.checks}
        checks.update({c.key(): c for c in other.checks})
        conds = {}
        for c in self.conditions + other.conditions:
            blob = json.dumps(_clean(c.inputs), sort_keys=True)
            conds[c.condition_id + blob] = c
        return VerificationReport([checks[k] for k in sorted(checks)],
                                  [conds[k] for k in sorted(conds)],
                                  {**self.meta, **other.meta})

    def to_dict(self) -> dict:
        return {"version": REPORT_VERSION, "meta": _clean(self.meta),
                "checks": [c.to_dict() for c in self.checks],
                "conditions": [c.to_dict() for c in self.conditions]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1)

    @classmethod
    def from_dict(cls, d: dict) -> "VerificationReport":
        if d.get("version") != REPORT_VERSION:
            raise ValueError(f"report version {d.get('version')!r} is not {REPORT_VERSION}")
        return cls([CheckResult.from_dict(c) for c in d.get("checks", [])],
                   [ConditionFit.from_dict(c) for c in d.get("conditions", [])],
                   d.get("meta", {}))

    def table(self) -> str:
        rows = [("check", "lhs", "rhs", "slack", "tol", "result")]
        for c in self.checks:
            rows.append((c.check_id, f"{c.lhs:.6g}", f"{c.rhs:.6g}", f"{c.slack:.3g}",
                         f"{c.tolerance * c.scale:.3g}",
                         ("PASS" if c.passed else "FAIL") + ("" if c.mandatory else " (info)")))
        for c in self.conditions:
            rows.append((f"condition:{c.condition_id}", f"{c.c_lower:.6g}", f"{c.c_upper:.6g}",
                         f"ratio={c.ratio:.3g}", f"cap={c.cap:.3g}", "PASS" if c.passed else "FAIL"))
        widths = [max(len(r[i]) for r in rows) for i in range(6)]
        lines = ["  ".join(s.ljust(w) for s, w in zip(r, widths)) for r in rows]
        lines.insert(1, "  ".join("-" * w for w in widths))
        return "\n".join(lines)


# --------------------------------------------------------------------------
# survival and moment inequalities
# --------------------------------------------------------------------------


def _stack_curves(curves):
    if isinstance(curves, SurvivalCurve):
        curves = [curves]
    t = curves[0].t
    for c in curves[1:]:
        if not np.array_equal(c.t, t):
            raise ValueError("survival curves must share a time grid")
    S = np.stack([c.S for c in curves])
    se = np.stack([c.se for c in curves])
    k = np.argmax(S, axis=0)
    cols = np.arange(S.shape[1])
    return t, S[k, cols], se[k, cols], len(curves)


def check_lower_bound(curves, lam: float, t_range=None, rel_tol: float = REL_TOL,
                      n_se: float = N_SE, inputs=None) -> CheckResult:
    """exp(-lam t) <= max over starts of S(t), at every grid time.

    The allowance at time t is rel_tol * S(t) + n_se * se(t); the reported
    lhs/rhs/tolerance are those of the tightest grid point.
    """
    t, S, se, n_starts = _stack_curves(curves)
    sel = np.ones_like(t, dtype=bool) if t_range is None else (t >= t_range[0]) & (t <= t_range[1])
    if not sel.any():
        raise ValueError("no grid points in t_range")
    t, S, se = t[sel], S[sel], se[sel]
    lower = np.exp(-lam * t)
    tol = rel_tol * S + n_se * se
    k = int(np.argmin(S - lower + tol))
    return make_check("lower_bound", lower[k], S[k], tol[k], 1.0,
                      {**(inputs or {}), "lambda": lam, "n_starts": n_starts},
                      {"t_worst": float(t[k]), "n_points": int(len(t)),
                       "violations": int(np.sum(S - lower + tol < 0))})


def envelope_K(curve: SurvivalCurve, lam: float, dprime: float, s_floor: float = 1e-3):
    """K(t) = S(t) exp(lam t) / (1 + 2 lam t / d')**d' on grid points with S >= s_floor."""
    sel = (curve.S >= s_floor) & (curve.t > 0)
    t = curve.t[sel]
    K = curve.S[sel] * np.exp(lam * t) / (1.0 + 2.0 * lam * t / dprime) ** dprime
    return t, K


def check_envelope(curve: SurvivalCurve, lam: float, dprime: float, late_tol: float = REL_TOL,
                   s_floor: float = 1e-3, inputs=None) -> CheckResult:
    """Bounded envelope constant with no late growth.

    K(t) is split into the first two thirds and the last third of the usable
    grid; the check is max_late K <= (1 + late_tol) * max_early K.  The fitted
    constant (the smallest K making the envelope hold on the grid) is reported.
    """
    t, K = envelope_K(curve, lam, dprime, s_floor)
    if len(K) < 6:
        raise ValueError("too few grid points above the survival floor")
    split = (2 * len(K)) // 3
    early = float(K[:split].max())
    late = float(K[split:].max())
    if not np.all(np.isfinite(K)):
        late = math.inf
    return make_check("envelope", late, early, late_tol, early,
                      {**(inputs or {}), "lambda": lam, "dprime": dprime},
                      {"K_fit": float(K.max()), "t_window": [float(t[0]), float(t[-1])]})


def _scale_guard(lam_scale, moments):
    for m in moments:
        if lam_scale is not None and m.generator_scale is not None \
                and not math.isclose(lam_scale, m.generator_scale):
            raise ContractError(
                f"lambda was computed at generator_scale={lam_scale} but the moment at "
                f"{m.generator_scale}")


def check_moment_sandwich(lam: float, moments, lambda_scale: float | None = None,
                          rel_tol: float = REL_TOL, n_se: float = N_SE, inputs=None) -> list:
    """Gamma(p+1) <= lam**p E[tau**p] for each moment; the realized C_p goes in details."""
    if isinstance(moments, MomentEstimate):
        moments = [moments]
    _scale_guard(lambda_scale, moments)
    out = []
    for m in moments:
        rhs = lam ** m.p * m.value
        lhs = math.gamma(m.p + 1.0)
        se = lam ** m.p * m.ci_halfwidth / 1.959963984540054
        tol = max(n_se * se, rel_tol * lhs)
        out.append(make_check(f"moment_lower_p{m.p:g}", lhs, rhs, tol, 1.0,
                              {**(inputs or {}), "lambda": lam, "moment": m.to_dict()},
                              {"C_p": rhs}))
    return out


def check_Cp_stability(cp: dict, cap: float = 10.0, inputs=None) -> CheckResult:
    """Realized C_p = lam**p sup E[tau**p] across domain families: max/min <= cap."""
    vals = np.array(list(cp.values()), dtype=float)
    return make_check("moment_upper_stability", vals.max() / vals.min(), cap, 0.0, 1.0,
                      {**(inputs or {}), "C_p": cp})


def check_exp_moment_bound(lam: float, est: ExpMomentEstimate, rel_tol: float = REL_TOL,
                           n_se: float = N_SE, inputs=None) -> CheckResult:
    """lam >= a + a / (E[exp(a tau)] - 1)."""
    if est.unstable:
        raise InstabilityError(
            f"exp-moment at a={est.a:g} is unstable (top share {est.top_share:.2f})")
    a, E = est.a, est.value
    if not a > 0 or not E > 1:
        raise ValueError("need a > 0 and E[exp(a tau)] > 1")
    bound = a + a / (E - 1.0)
    se_bound = a * est.se / (E - 1.0) ** 2
    tol = max(n_se * se_bound, rel_tol * lam)
    return make_check("exp_moment_bound", bound, lam, tol, 1.0,
                      {**(inputs or {}), "lambda": lam, "estimate": est.to_dict()})


def check_asymptotic(fit: TailFit, lam_eigen: float, rel: float = REL_TOL, inputs=None) -> CheckResult:
    """|lambda_hat - lambda| <= rel * lambda."""
    return make_check("asymptotic", abs(fit.lambda_hat - lam_eigen), rel * lam_eigen, 0.0, 1.0,
                      {**(inputs or {}), "lambda_eigen": lam_eigen, "tail_fit": fit.to_dict()},
                      {"ratio": fit.lambda_hat / lam_eigen})


# --------------------------------------------------------------------------
# balls: spectral and mean-exit data
# --------------------------------------------------------------------------


@dataclass
class BallSolver:
    """Eigenvalues and mean exit times of balls B(center, r) in a space.

    Euclidean balls use grids with h = r / resolution, so the discretization
    is the same at every radius.  Gasket balls are vertex sets of one graph of
    level ``level`` (chosen automatically if None).  Heisenberg balls use Monte
    Carlo with h and t_max scaled by r**2.
    """

    space: SpaceSpec
    resolution: int = 0
    level: int | None = None
    mc: SimConfig | None = None
    _gasket: dict = field(default_factory=dict, repr=False)

    def _res(self):
        if self.resolution:
            return self.resolution
        return 100 if self.space.dim == 1 else 32

    def gasket_graph(self, radii) -> Graph:
        need = int(math.ceil(-math.log2(min(radii)))) + 4
        m = max(need, self.level or 0)
        if m not in self._gasket:
            self._gasket[m] = build_gasket_graph(m, generator_scale=self.space.generator_scale)
        return self._gasket[m]

    def ball_domain(self, center, r):
        c = [float(v) for v in np.atleast_1d(center)]
        if self.space.variant == "euclidean":
            if len(c) == 1:
                return DomainSpec.interval(c[0] - r, c[0] + r)
            return DomainSpec.ball(c, r)
        if self.space.variant == "heisenberg":
            return DomainSpec.koranyi_ball(c, r)
        return DomainSpec.gasket_subset({"type": "ball", "center": c, "radius": float(r)})

    def graph(self, domain: DomainSpec, r: float, radii=None) -> Graph:
        if self.space.variant == "euclidean":
            return build_grid_graph(domain, r / self._res(), "dirichlet",
                                    self.space.generator_scale)
        if self.space.variant == "gasket":
            return restrict_gasket(self.gasket_graph(radii or [r]), domain)
        raise ValueError("exact solves are available for euclidean and gasket spaces only")

    def _mc(self, center, r):
        base = self.mc or SimConfig(h=1e-3, t_max=20.0, n_paths=4000, seed=11)
        cfg = SimConfig(base.h * r * r, base.t_max * r * r, base.n_paths,
                        (base.seed + int(1e6 * r)) % 2 ** 64, base.bridge_correction, base.substeps)
        return run_batch(self.space, self.ball_domain(center, r), center, cfg)

    def lam(self, center, r, radii=None) -> float:
        if self.space.variant == "heisenberg":
            b = self._mc(center, r)
            t = np.linspace(b.config.t_max / 400, b.config.t_max, 400)
            return tail_slope(survival_curve(b, t)).lambda_hat
        g = self.graph(self.ball_domain(center, r), r, radii)
        return dirichlet_lambda(g).eigenvalue

    def mean_exit(self, center, r, radii=None):
        """(E at the vertex nearest the center, E on all ball vertices, their coordinates)."""
        if self.space.variant == "heisenberg":
            b = self._mc(center, r)
            v = moment(b, 1).value
            return v, np.array([v]), np.atleast_2d(np.asarray(center, dtype=float))
        g = self.graph(self.ball_domain(center, r), r, radii)
        E = mean_exit_solve(g)
        inner = g.interior
        x = g.nearest_vertex(np.atleast_1d(center))
        return float(E[x]), E[inner], g.coords[inner]


def _check_radii(radii):
    radii = np.sort(np.asarray(radii, dtype=float))
    if len(radii) < 4 or math.log10(radii[-1] / radii[0]) < 1.5 - 1e-9:
        raise ContractError("condition fits need at least 4 radii spanning 1.5 decades")
    return radii


def _fit(cid, values, radii_used, cap, drift_tol, inputs, details=None) -> ConditionFit:
    v = np.asarray(values, dtype=float)
    r = np.asarray(radii_used, dtype=float)
    lo, hi = float(v.min()), float(v.max())
    slope = float(np.polyfit(np.log(r), np.log(v), 1)[0]) if len(set(r)) > 1 else 0.0
    ratio = hi / lo if lo > 0 else math.inf
    ok = bool(lo > 0 and math.isfinite(hi) and ratio <= cap and abs(slope) <= drift_tol)
    return ConditionFit(cid, lo, hi, len(v), ok, ratio, cap, slope, v.tolist(), inputs,
                        {"drift_tol": drift_tol, **(details or {})})


def fit_condition_lambda_F(space: SpaceSpec, pf: ParameterFunction, centers, radii,
                           cap: float = 10.0, drift_tol: float = 0.1,
                           solver: BallSolver | None = None) -> ConditionFit:
    """c1 / F(r) <= lambda(B(x, r)) <= c2 / F(r): fitted c's, their ratio and drift in r.

    ``slope`` is d log(lambda F) / d log r; a correct F leaves no drift.
    """
    radii = _check_radii(radii)
    solver = solver or BallSolver(space)
    vals, rs = [], []
    for c in centers:
        for r in radii:
            vals.append(solver.lam(c, r, list(radii)) * float(eval_F(pf, r)))
            rs.append(r)
    return _fit("lambda_F", vals, rs, cap, drift_tol,
                {"space": space.to_dict(), "F": pf.to_dict(), "centers": centers,
                 "radii": radii})


def fit_condition_E_F(space: SpaceSpec, pf: ParameterFunction, centers, radii,
                      cap: float = 10.0, drift_tol: float = 0.1,
                      solver: BallSolver | None = None) -> ConditionFit:
    """c1 F(r) <= E_x[tau_B(x, r)] <= c2 F(r)."""
    radii = _check_radii(radii)
    solver = solver or BallSolver(space)
    vals, rs = [], []
    for c in centers:
        for r in radii:
            vals.append(solver.mean_exit(c, r, list(radii))[0] / float(eval_F(pf, r)))
            rs.append(r)
    return _fit("E_F", vals, rs, cap, drift_tol,
                {"space": space.to_dict(), "F": pf.to_dict(), "centers": centers,
                 "radii": radii})


def _domain_measure(space: SpaceSpec, domain: DomainSpec, g: Graph | None) -> float:
    if space.variant == "gasket":
        return float(gasket_domain_mask(g, domain).sum())
    return domain.measure()


def fit_condition_FK(space: SpaceSpec, pf: ParameterFunction, ball, family,
                     cap: float = 10.0, resolution: int = 32,
                     level: int | None = None) -> ConditionFit:
    """lambda(D) >= c / F(r) * (mu(B) / mu(D))**nu for subdomains D of B = B(center, r).

    ``ball`` is (center, r).  Euclidean members are DomainSpecs solved on grids
    with h = (smallest bounding-box side) / resolution; gasket members are
    gasket_subset domains solved on the graph that resolves the ball.
    nu is the slope of log lambda(D) against log(mu(B)/mu(D)); c spans
    [c_lower, c_upper] over the family, and the fit passes iff nu > 0 and
    c_upper / c_lower <= cap.
    """
    family = list(family)
    if len(family) < 2:
        raise ContractError("FK fit needs a family of at least two subdomains")
    center, r = ball
    solver = BallSolver(space, level=level)
    Fr = float(eval_F(pf, r))
    if space.variant == "gasket":
        base = solver.gasket_graph([r])
        muB = float(gasket_domain_mask(base, solver.ball_domain(center, r)).sum())
    elif space.variant == "euclidean":
        base = None
        muB = solver.ball_domain(center, r).measure()
    else:
        raise ValueError("FK fits need exact solves (euclidean or gasket)")
    lams, rel = [], []
    for D in family:
        if space.variant == "gasket":
            g = restrict_gasket(base, D)
            mu = _domain_measure(space, D, base)
        else:
            lo, hi = D.bounding_box()
            g = build_grid_graph(D, float(np.min(hi - lo)) / resolution, "dirichlet",
                                 space.generator_scale)
            mu = D.measure()
        lams.append(dirichlet_lambda(g).eigenvalue)
        rel.append(muB / mu)
    x = np.log(rel)
    if np.ptp(x) == 0:
        raise ContractError("family members all have the same measure; nu is undefined")
    y = np.log(np.asarray(lams) * Fr)
    nu = float(np.polyfit(x, y, 1)[0])
    cs = np.asarray(lams) * Fr * np.asarray(rel) ** (-nu)
    lo, hi = float(cs.min()), float(cs.max())
    ok = bool(nu > 0 and lo > 0 and hi / lo <= cap)
    return ConditionFit("FK_F", lo, hi, len(family), ok, hi / lo, cap, nu, cs.tolist(),
                        {"space": space.to_dict(), "F": pf.to_dict(), "ball": [center, r],
                         "family": [D.to_dict() for D in family]},
                        {"nu": nu, "lambda": lams, "measure_ratio": rel})


def _ball_points(solver, center, r, radii):
    Ec, E, X = solver.mean_exit(center, r, radii)
    d = np.sqrt(np.sum((X - np.atleast_1d(np.asarray(center, dtype=float))) ** 2, axis=1))
    return Ec, E, d


def check_condition_Ebar(space: SpaceSpec, centers, radii, floor: float = 0.05,
                         stability_cap: float = 2.0, offset: float = 0.0,
                         solver: BallSolver | None = None) -> ConditionFit:
    """C sup_y E_y[tau_B] <= E_x[tau_B]: C_fit = min over balls of E_x / max_y E_y.

    The sup runs over every solver vertex in the ball.  ``offset`` evaluates
    E at x + offset * r * e_1 instead of x (a mislabeled center).
    """
    radii = _check_radii(radii)
    if space.variant == "heisenberg":
        raise ValueError("the sup over starting points needs exact solves")
    solver = solver or BallSolver(space)
    vals, rs = [], []
    for c in centers:
        for r in radii:
            c = np.atleast_1d(np.asarray(c, dtype=float))
            Ec, E, X = solver.mean_exit(c, r, list(radii))
            if offset:
                g = solver.graph(solver.ball_domain(c, r), r, list(radii))
                Eall = mean_exit_solve(g)
                shifted = c.copy()
                shifted[0] += offset * r
                Ec = float(Eall[g.nearest_vertex(shifted)])
            vals.append(Ec / E.max())
            rs.append(r)
    v = np.asarray(vals)
    lo, hi = float(v.min()), float(v.max())
    ok = bool(lo >= floor and hi / lo <= stability_cap)
    return ConditionFit("Ebar", lo, hi, len(v), ok, hi / lo, stability_cap, math.nan,
                        v.tolist(), {"space": space.to_dict(), "centers": centers,
                                     "radii": radii, "offset": offset},
                        {"floor": floor, "C_fit": lo})


def check_condition_Ebar_prime(space: SpaceSpec, centers, radii, delta: float = 0.5,
                               floor: float = 0.05, solver: BallSolver | None = None) -> ConditionFit:
    """inf_{B(x, delta r)} E / sup_{B(x, r)} E >= floor for every sampled ball."""
    if not 0 < delta < 0.95:
        raise ContractError("delta must lie in (0, 0.95)")
    radii = _check_radii(radii)
    if space.variant == "heisenberg":
        raise ValueError("the inf/sup over points needs exact solves")
    solver = solver or BallSolver(space)
    vals = []
    for c in centers:
        for r in radii:
            _, E, d = _ball_points(solver, c, r, list(radii))
            inner = d <= delta * r * (1 + 1e-12)
            vals.append(E[inner].min() / E.max())
    v = np.asarray(vals)
    lo, hi = float(v.min()), float(v.max())
    return ConditionFit("Ebar_prime", lo, hi, len(v), bool(lo >= floor), hi / lo, math.nan,
                        math.nan, v.tolist(), {"space": space.to_dict(), "centers": centers,
                                               "radii": radii, "delta": delta},
                        {"floor": floor, "C_fit": lo})


# --------------------------------------------------------------------------
# heat-kernel shape and the equivalence bookkeeping
# --------------------------------------------------------------------------


def measured_ondiag_exponent(space: SpaceSpec, levels=(6,)) -> float:
    """Small-time decay exponent of p(x, x, t) measured on a discretization of the space."""
    if space.variant == "gasket":
        return ondiag_decay_fit(levels, generator_scale=space.generator_scale)["exponent"]
    if space.variant == "euclidean" and space.dim == 1:
        return interval_decay_fit()
    if space.variant == "euclidean" and space.dim == 2:
        g = build_grid_graph(DomainSpec.ball([0.0, 0.0], 1.0), 1 / 32, "dirichlet",
                             space.generator_scale)
        ts = np.geomspace(0.01, 0.05, 20) / space.generator_scale
        return ondiag_exponent(g, g.nearest_vertex([0.0, 0.0]), ts)
    raise ValueError(f"no on-diagonal discretization for {space.variant} dim {space.dim}")


def envelope_shape_fit(space: SpaceSpec, pf: ParameterFunction, tol: float = 0.05,
                       measured: float | None = None, **kw) -> CheckResult:
    """The on-diagonal rate alpha / beta_F implied by the envelope versus the measured one."""
    if measured is None:
        measured = measured_ondiag_exponent(space, **kw)
    expected = space.alpha / pf.beta
    return make_check("envelope_shape", abs(measured - expected), tol, 0.0, 1.0,
                      {"space": space.to_dict(), "F": pf.to_dict()},
                      {"measured": measured, "expected": expected})


EQUIV_REQUIRED = ("FK_F", "lambda_F", "Ebar")


def consistency_prop43(fits, envelope: CheckResult) -> CheckResult:
    """Both sides of the equivalence must agree.

    "consistent": every condition and the envelope fit pass.  "consistently
    inconsistent": some condition fails and so does the envelope fit.  Any
    other combination is an inconsistency finding and fails the check.
    """
    if isinstance(fits, (list, tuple)):
        fits = {f.condition_id: f for f in fits}
    missing = [k for k in EQUIV_REQUIRED if k not in fits]
    if envelope is None:
        missing.append("envelope_shape")
    if missing:
        raise ContractError(f"missing inputs: {', '.join(missing)}")
    conds = all(fits[k].passed for k in EQUIV_REQUIRED)
    env = envelope.passed
    if conds and env:
        verdict = "consistent"
    elif not conds and not env:
        verdict = "consistently inconsistent"
    else:
        verdict = "inconsistency finding"
    return make_check("conditions_vs_envelope", 0.0 if conds == env else 1.0, 0.0, 0.0, 1.0,
                      {k: fits[k].to_dict() for k in EQUIV_REQUIRED},
                      {"verdict": verdict, "conditions_pass": conds, "envelope_pass": env,
                       "failed": [k for k in EQUIV_REQUIRED if not fits[k].passed]})


# --------------------------------------------------------------------------
# Hot Spots and the spectral heat-kernel lemma
# --------------------------------------------------------------------------


@dataclass
class HotSpotsResult:
    ratio: float
    mu2: float
    lambda1: float
    h: float
    n_vertices: int
    argmax: list

    @property
    def mu2_over_lambda1(self) -> float:
        return self.mu2 / self.lambda1

    def to_dict(self) -> dict:
        return {**_clean(asdict(self)), "mu2_over_lambda1": self.mu2_over_lambda1}


def rim_mask(g: Graph) -> np.ndarray:
    """Neumann-grid nodes with a missing lattice neighbor (the discrete boundary)."""
    full = 2 * g.meta.get("dim", g.coords.shape[1])
    return g.degree < full


def hotspots(domain: DomainSpec, h: float, generator_scale: float = 2.0) -> HotSpotsResult:
    """sup phi_2 / sup over the rim of phi_2 for the first nontrivial Neumann mode.

    phi_2 is signed so that its largest absolute value is positive.  The
    Dirichlet eigenvalue lambda_1 comes from the same mesh width.
    """
    gN = build_grid_graph(domain, h, "neumann", generator_scale)
    rN = neumann_eigenpair(gN)
    phi = rN.eigenvector
    rim = rim_mask(gN)
    k = int(np.argmax(phi))
    ratio = float(phi.max() / phi[rim].max())
    gD = build_grid_graph(domain, h, "dirichlet", generator_scale)
    lam1 = dirichlet_lambda(gD).eigenvalue
    return HotSpotsResult(ratio, rN.eigenvalue, lam1, h, gN.n, gN.coords[k].tolist())


def check_hotspots(res: HotSpotsResult, bound: float = 1.02, inputs=None) -> CheckResult:
    return make_check("hotspots_ratio", res.ratio, bound, 0.0, 1.0,
                      {**(inputs or {}), "h": res.h}, res.to_dict())


def check_lemma51(g: Graph, n_t: int = 20, eps=None, t_range=None, rtol: float = 1e-10,
                  inputs=None) -> CheckResult:
    """p(x,x,t) <= exp(-(1-eps) lambda_1 t) p(x,x,eps t) at every interior vertex.

    The (t, eps) grid has n_t * len(eps) points (200 by default); t spans
    [0.01, 30] / lambda_1 geometrically.  Comparison is in log space with a
    relative allowance ``rtol`` for summation rounding.
    """
    hk = heat_kernel(g)
    lam1 = hk.lambda1
    eps = np.linspace(0.05, 0.95, 10) if eps is None else np.asarray(eps, dtype=float)
    if t_range is None:
        t_range = (0.01 / lam1, 30.0 / lam1)
    ts = np.geomspace(*t_range, n_t)
    phi2 = hk.eigenvectors ** 2

    def diag(times):
        return phi2 @ np.exp(-np.outer(hk.eigenvalues, times))

    P = diag(ts)
    worst = -math.inf
    violations = 0
    for e in eps:
        Pe = diag(e * ts)
        lhs = np.log(P)
        rhs = -(1 - e) * lam1 * ts + np.log(Pe)
        excess = lhs - rhs - rtol * np.maximum(1.0, np.abs(lhs))
        violations += int(np.sum(excess > 0))
        worst = max(worst, float((lhs - rhs).max()))
    n_checked = P.size * len(eps)
    return make_check("ondiag_decay_inequality", float(violations), 0.0, 0.0, 1.0,
                      {**(inputs or {}), "n_vertices": int(P.shape[0]), "n_t": n_t,
                       "eps": eps, "t_range": list(t_range)},
                      {"checked": n_checked, "max_log_excess": worst, "lambda1": lam1})
