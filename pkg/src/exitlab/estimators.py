"""Survival curves, moments, tail rates and scaling-exponent fits from exit batches."""

from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.stats import qmc

from .core import ContractError, DomainSpec, SpaceSpec
from .discrete import Graph, build_gasket_graph, expected_steps, gasket_interior_mask
from .samplers import ExitBatch, SimConfig, run_batch

CENSOR_THRESHOLD = 1e-3
S_WINDOW = (0.01, 0.5)
R2_MIN = 0.99
MIN_WINDOW_POINTS = 10
Z95 = 1.959963984540054
CURVE_VERSION = 1
_CURVE_TAG = "# exitlab-survival v"


class CensoringError(RuntimeError):
    """Too many censored paths for an unbiased moment estimate."""


class FitRejected(RuntimeError):
    """A regression did not meet its acceptance criteria."""


@dataclass
class SurvivalCurve:
    t: np.ndarray
    S: np.ndarray
    se: np.ndarray
    n_at_risk: np.ndarray
    t_max: float
    n_total: int

    def to_csv(self, fh) -> None:
        fh.write(f"{_CURVE_TAG}{CURVE_VERSION} t_max={self.t_max!r} n_total={self.n_total}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "S", "se", "n_at_risk"])
        for row in zip(self.t, self.S, self.se, self.n_at_risk):
            w.writerow([repr(float(row[0])), repr(float(row[1])), repr(float(row[2])), int(row[3])])

    @classmethod
    def from_csv(cls, fh) -> "SurvivalCurve":
        first = fh.readline()
        if not first.startswith(_CURVE_TAG):
            raise ValueError("not a survival curve CSV (missing version line)")
        head = first[len(_CURVE_TAG):].split()
        if int(head[0]) != CURVE_VERSION:
            raise ValueError(f"survival CSV version {head[0]} is not {CURVE_VERSION}")
        kv = dict(tok.split("=", 1) for tok in head[1:])
        rows = list(csv.DictReader(fh))
        t = np.array([float(r["t"]) for r in rows])
        S = np.array([float(r["S"]) for r in rows])
        se = np.array([float(r["se"]) for r in rows])
        k = np.array([int(r["n_at_risk"]) for r in rows], dtype=np.int64)
        return cls(t, S, se, k, float(kv["t_max"]), int(kv["n_total"]))


@dataclass
class TailFit:
    lambda_hat: float
    se: float
    window: tuple
    r2: float
    n_points: int = 0

    def to_dict(self) -> dict:
        return {k: (list(v) if isinstance(v, tuple) else v) for k, v in asdict(self).items()}


@dataclass
class MomentEstimate:
    p: float
    value: float
    ci_halfwidth: float
    censored_fraction: float
    generator_scale: float | None = None

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class ExpMomentEstimate:
    a: float
    value: float
    se: float
    top_share: float
    unstable: bool
    censored_fraction: float

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class WalkDimensionFit:
    beta_hat: float
    se: float
    radii: np.ndarray
    mean_exit: np.ndarray
    r2: float

    def to_dict(self) -> dict:
        return {"beta_hat": self.beta_hat, "se": self.se, "radii": self.radii.tolist(),
                "mean_exit": self.mean_exit.tolist(), "r2": self.r2}


def survival_curve(batch: ExitBatch, grid) -> SurvivalCurve:
    """Empirical P(tau > t) on ``grid``.  Censored paths are alive at every t <= t_max."""
    n = len(batch)
    if n == 0:
        raise ValueError("empty batch")
    t_max = batch.config.t_max
    grid = np.asarray(grid, dtype=float)
    if np.any(grid <= 0) or np.any(grid > t_max):
        raise ValueError(f"grid must lie in (0, t_max={t_max}]")
    tau = np.sort(np.where(batch.exited, batch.tau, np.inf))
    alive = n - np.searchsorted(tau, grid, side="right")
    S = alive / n
    return SurvivalCurve(grid, S, np.sqrt(S * (1.0 - S) / n), alive, t_max, n)


def _check_censoring(batch: ExitBatch, threshold: float) -> float:
    frac = batch.censored_fraction
    if frac > threshold:
        raise CensoringError(
            f"censored fraction {frac:.3g} exceeds {threshold:g}; raise t_max "
            f"(currently {batch.config.t_max:g}) or the threshold")
    return frac


def moment(batch: ExitBatch, p: float, threshold: float = CENSOR_THRESHOLD) -> MomentEstimate:
    """Sample mean of tau**p with a 95% normal-approximation interval."""
    if not p > 0:
        raise ValueError("moment order must be positive")
    frac = _check_censoring(batch, threshold)
    x = batch.tau ** p
    n = len(x)
    hw = Z95 * x.std(ddof=1) / math.sqrt(n) if n > 1 else math.inf
    return MomentEstimate(float(p), float(x.mean()), float(hw), frac,
                          float(batch.space.generator_scale))


def exp_moment(batch: ExitBatch, a: float, threshold: float = CENSOR_THRESHOLD,
               top_fraction: float = 0.01, top_share_max: float = 0.2) -> ExpMomentEstimate:
    """Sample mean of exp(a * tau).

    ``unstable`` is set when the largest ``top_fraction`` of the terms carry more
    than ``top_share_max`` of the sum, which is what happens once a reaches
    the decay rate of the tail.
    """
    frac = _check_censoring(batch, threshold)
    x = np.exp(a * batch.tau)
    n = len(x)
    k = max(1, int(math.ceil(top_fraction * n)))
    top = np.partition(x, n - k)[n - k:].sum()
    share = float(top / x.sum())
    se = float(x.std(ddof=1) / math.sqrt(n)) if n > 1 else math.inf
    return ExpMomentEstimate(float(a), float(x.mean()), se, share,
                             bool(a > 0 and share > top_share_max), frac)


def tail_slope(curve: SurvivalCurve, s_window=S_WINDOW, min_points: int = MIN_WINDOW_POINTS,
               r2_min: float = R2_MIN) -> TailFit:
    """Weighted least squares fit of log S(t) = c - lambda t on S_min <= S <= S_max.

    Weights are the delta-method inverse variances of log S, S n / (1 - S); a
    noiseless curve (S = 1 or se = 0) gets unit weights.
    """
    s_lo, s_hi = s_window
    S = np.asarray(curve.S, dtype=float)
    t = np.asarray(curve.t, dtype=float)
    sel = (S >= s_lo) & (S <= s_hi) & (S > 0)
    if sel.sum() < min_points:
        raise FitRejected(f"only {int(sel.sum())} grid points with S in [{s_lo}, {s_hi}]; "
                          f"need {min_points}")
    t, S = t[sel], S[sel]
    y = np.log(S)
    if np.all(curve.se[sel] == 0):
        w = np.ones_like(S)
    else:
        w = S * curve.n_total / np.maximum(1.0 - S, 1e-300)
    tw = np.sum(w * t) / w.sum()
    yw = np.sum(w * y) / w.sum()
    sxx = np.sum(w * (t - tw) ** 2)
    slope = np.sum(w * (t - tw) * (y - yw)) / sxx
    resid = y - (yw + slope * (t - tw))
    ss_tot = np.sum(w * (y - yw) ** 2)
    r2 = 1.0 - np.sum(w * resid ** 2) / ss_tot if ss_tot > 0 else 1.0
    fit = TailFit(float(-slope), float(1.0 / math.sqrt(sxx)), (float(t[0]), float(t[-1])),
                  float(r2), int(sel.sum()))
    if r2 < r2_min:
        raise FitRejected(f"r2={r2:.4f} below {r2_min} on window {fit.window}")
    if not fit.lambda_hat > 0:
        raise FitRejected(f"non-positive decay rate {fit.lambda_hat:.4g}")
    return fit


def _loglog(radii, values):
    x = np.log(radii)
    y = np.log(values)
    A = np.vstack([x, np.ones_like(x)]).T
    coef, res, *_ = np.linalg.lstsq(A, y, rcond=None)
    pred = A @ coef
    ss_res = float(np.sum((y - pred) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    dof = max(len(x) - 2, 1)
    se = math.sqrt(ss_res / dof / np.sum((x - x.mean()) ** 2))
    return float(coef[0]), se, 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0


def gasket_mean_exit_balls(center, radii, level: int | None = None) -> np.ndarray:
    """Walk-clock mean exit times (steps * 5**-level) of gasket balls, by exact solves."""
    radii = np.asarray(radii, dtype=float)
    need = int(math.ceil(-math.log2(radii.min()))) + 4
    m = max(need, level or 0)
    g = build_gasket_graph(m)
    x = g.nearest_vertex(center)
    out = []
    for r in radii:
        dom = DomainSpec.gasket_subset({"type": "ball", "center": list(map(float, g.coords[x])),
                                        "radius": float(r)})
        inner = gasket_interior_mask(g, dom)
        sub = Graph(coords=g.coords, adjacency=g.adjacency, boundary_mask=~inner,
                      laplacian_scale=g.laplacian_scale, mass=g.mass, kind="gasket",
                      meta=g.meta)
        out.append(expected_steps(sub)[x] * 5.0 ** -m)
    return np.array(out)


def walk_dimension_fit(space: SpaceSpec, center, radii, config: SimConfig | None = None,
                       threshold: float = CENSOR_THRESHOLD) -> WalkDimensionFit:
    """Slope of log E[tau_B(center, r)] against log r.

    Euclidean and Heisenberg balls are simulated with step size and horizon
    scaled by r**2 (so every radius has the same relative resolution) and
    independent seeds.  Gasket balls are solved exactly.
    """
    radii = np.sort(np.asarray(radii, dtype=float))
    if len(radii) < 4 or math.log10(radii[-1] / radii[0]) < 1.5 - 1e-9:
        raise ContractError("walk_dimension_fit needs at least 4 radii spanning 1.5 decades")
    if space.variant == "gasket":
        means = gasket_mean_exit_balls(center, radii, space.dim)
    else:
        if config is None:
            config = SimConfig(h=1e-3, t_max=20.0, n_paths=4000, seed=0)
        c = list(map(float, center))
        means = []
        for k, r in enumerate(radii):
            if space.variant == "euclidean":
                dom = DomainSpec.ball(c, r)
            else:
                dom = DomainSpec.koranyi_ball(c, r)
            cfg = SimConfig(config.h * r * r, config.t_max * r * r, config.n_paths,
                            (int(config.seed) + 7919 * k) % 2 ** 64, config.bridge_correction,
                            config.substeps)
            b = run_batch(space, dom, c, cfg)
            means.append(moment(b, 1, threshold).value)
        means = np.array(means)
    beta, se, r2 = _loglog(radii, means)
    return WalkDimensionFit(beta, se, radii, means, r2)


def start_set(domain: DomainSpec, k: int = 8, seed: int = 0, shrink: float = 0.9) -> np.ndarray:
    """Center plus ``k`` quasi-random interior points: a finite stand-in for esup over D.

    Points come from a scrambled Halton sequence on the bounding box shrunk
    toward the center by ``shrink``, keeping those inside the domain.
    """
    lo, hi = domain.bounding_box()
    mid = 0.5 * (lo + hi)
    if domain.variant == "euclidean_ball":
        mid = np.asarray(domain.params["center"], dtype=float)
    lo = mid + shrink * (lo - mid)
    hi = mid + shrink * (hi - mid)
    pts = [mid]
    sampler = qmc.Halton(len(lo), seed=seed)
    while len(pts) < k + 1:
        cand = qmc.scale(sampler.random(4 * k), lo, hi)
        pts.extend(cand[domain.contains(cand)][: k + 1 - len(pts)])
    return np.asarray(pts)
