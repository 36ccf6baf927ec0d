"""Command-line front end.

    exitlab simulate --config cfg.json
    exitlab solve    --config cfg.json
    exitlab estimate --config cfg.json
    exitlab verify   --config cfg.json --suite interval
    exitlab hotspots --config cfg.json
    exitlab report   out/verification.json out/estimates.json out/survival.csv

Exit codes: 0 success, 1 check failure, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import suites as S
from .config import OUTPUT_ENV, ConfigError, ExperimentConfig, load_config
from .core import ContractError, SpaceSpec, exponent_dprime
from .discrete import (
    ConvergenceError,
    Graph,
    SingularSystemError,
    build_gasket_graph,
    build_grid_graph,
    dirichlet_lambda,
    mean_exit_solve,
    restrict_gasket,
    write_eigen_csv,
)
from .estimators import (
    S_WINDOW,
    CensoringError,
    ExpMomentEstimate,
    FitRejected,
    MomentEstimate,
    SurvivalCurve,
    TailFit,
    exp_moment,
    moment,
    survival_curve,
    tail_slope,
)
from .samplers import load_batch, write_binary, write_csv
from .verify import (
    InstabilityError,
    VerificationReport,
    _clean,
    check_asymptotic,
    check_envelope,
    check_exp_moment_bound,
    check_hotspots,
    check_lower_bound,
    check_moment_sandwich,
    hotspots,
)

EXIT_OK, EXIT_CHECK, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3
ARTIFACT_VERSION = 1
NUMERIC_ERRORS = (ConvergenceError, SingularSystemError, CensoringError, FitRejected,
                  InstabilityError, FloatingPointError)


class InputError(ValueError):
    """Missing, corrupt or incompatible input artifact."""


def _write_json(path: str, obj: dict) -> None:
    with open(path, "w") as fh:
        json.dump(_clean(obj), fh, indent=1, sort_keys=False)
        fh.write("\n")


def _read_json(path: str) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: JSON parse error at line {exc.lineno} column {exc.colno}: "
                         f"{exc.msg}") from None


def _artifact(kind: str, cfg: ExperimentConfig, **body) -> dict:
    return {"kind": kind, "version": ARTIFACT_VERSION, "space": cfg.space.to_dict(),
            "domain": cfg.domain.to_dict(), **body}


def _out(cfg: ExperimentConfig, name: str) -> str:
    os.makedirs(cfg.output_dir, exist_ok=True)
    return os.path.join(cfg.output_dir, name)


# --------------------------------------------------------------------------
# subcommands
# --------------------------------------------------------------------------


def cmd_simulate(cfg: ExperimentConfig) -> int:
    from .samplers import run_batch

    try:
        batch = run_batch(cfg.space, cfg.domain, cfg.start, cfg.sim)
    except ContractError as exc:
        raise ConfigError(f"start: {exc}") from None
    formats = cfg.raw["output"]["formats"]
    written = []
    if "binary" in formats:
        with open(_out(cfg, "batch.bin"), "wb") as fh:
            write_binary(batch, fh)
        written.append("batch.bin")
    if "csv" in formats:
        with open(_out(cfg, "batch.csv"), "w") as fh:
            write_csv(batch, fh)
        written.append("batch.csv")
    _write_json(_out(cfg, "config.json"), cfg.to_dict())
    print(f"paths={len(batch)} mean_tau={float(batch.tau.mean())!r} "
          f"censored_fraction={batch.censored_fraction!r}")
    print("wrote " + ", ".join(os.path.join(cfg.output_dir, w) for w in written))
    return EXIT_OK


def solve_graph(cfg: ExperimentConfig) -> Graph:
    solve = cfg.section("solve")
    sp_, dom = cfg.space, cfg.domain
    if sp_.variant == "gasket":
        g = build_gasket_graph(sp_.dim, solve["gasket_boundary"], sp_.generator_scale)
        sel = dom.params.get("selector", {"type": "whole"})
        return g if sel.get("type") == "whole" else restrict_gasket(g, dom)
    if sp_.variant != "euclidean":
        raise ConfigError("space.variant: exact solves need a euclidean or gasket space")
    try:
        return build_grid_graph(dom, solve["grid_h"], "dirichlet", sp_.generator_scale)
    except ValueError as exc:
        raise ConfigError(f"domain: {exc}") from None


def cmd_solve(cfg: ExperimentConfig) -> int:
    solve = cfg.section("solve")
    g = solve_graph(cfg)
    try:
        res = dirichlet_lambda(g, tol=solve["tol"], maxiter=solve["maxiter"])
    except ConvergenceError as exc:
        print(f"error: eigen solve failed: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    E = mean_exit_solve(g)
    body = {"eigenvalue": res.eigenvalue, "residual": res.residual,
            "iterations": res.iterations, "n_vertices": g.n, "n_interior": int(g.interior.sum()),
            "n_edges": g.n_edges, "laplacian_scale": g.laplacian_scale}
    if cfg.space.variant == "euclidean":
        body["grid_h"] = solve["grid_h"]
    _write_json(_out(cfg, "eigen.json"), _artifact("eigen", cfg, **body))
    with open(_out(cfg, "eigenvector.csv"), "w") as fh:
        write_eigen_csv(res, fh)
    with open(_out(cfg, "mean_exit.csv"), "w") as fh:
        dim = g.coords.shape[1]
        fh.write(",".join(["vertex"] + [f"x{k}" for k in range(dim)] + ["mean_exit"]) + "\n")
        for i in range(g.n):
            fh.write(",".join([str(i)] + [repr(float(c)) for c in g.coords[i]]
                              + [repr(float(E[i]))]) + "\n")
    print(f"lambda={res.eigenvalue!r} residual={res.residual:.3e} iterations={res.iterations} "
          f"vertices={g.n} max_mean_exit={float(E.max())!r}")
    return EXIT_OK


def _batch_path(cfg: ExperimentConfig, given: str | None) -> str:
    if given:
        return given
    for name in ("batch.bin", "batch.csv"):
        p = os.path.join(cfg.output_dir, name)
        if os.path.exists(p):
            return p
    raise InputError(f"missing input: batch.bin (looked in {cfg.output_dir}); run simulate first")


def cmd_estimate(cfg: ExperimentConfig, batch_file: str | None = None) -> int:
    est = cfg.section("estimate")
    path = _batch_path(cfg, batch_file)
    try:
        batch = load_batch(path)
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror}") from None
    except ValueError as exc:
        raise InputError(f"{path}: {exc}") from None
    t_max = batch.config.t_max
    t_min = est.get("grid_t_min", t_max / est["grid_points"])
    grid = np.linspace(t_min, t_max, est["grid_points"])
    curve = survival_curve(batch, grid)
    with open(_out(cfg, "survival.csv"), "w") as fh:
        curve.to_csv(fh)
    failures = []
    out = {"n": len(batch), "censored_fraction": batch.censored_fraction,
           "config": batch.config.to_dict(), "start": list(batch.start),
           "moments": [], "exp_moments": []}
    thr = est["censor_threshold"]
    for p in est["moments"]:
        try:
            out["moments"].append(moment(batch, p, thr).to_dict())
        except CensoringError as exc:
            failures.append(f"moment p={p}: {exc}")
    for a in est["exp_a"]:
        try:
            out["exp_moments"].append(exp_moment(batch, a, thr).to_dict())
        except CensoringError as exc:
            failures.append(f"exp moment a={a}: {exc}")
    try:
        out["tail_fit"] = tail_slope(curve, tuple(est["s_window"])).to_dict()
    except FitRejected as exc:
        out["tail_fit"] = None
        failures.append(f"tail fit: {exc}")
    out["failures"] = failures
    # the batch carries its own space and domain
    body = _artifact("estimates", cfg, **out)
    body["space"], body["domain"] = batch.space.to_dict(), batch.domain.to_dict()
    _write_json(_out(cfg, "estimates.json"), body)
    for m in out["moments"]:
        print(f"E[tau^{m['p']:g}]={m['value']!r} +- {m['ci_halfwidth']:.3g}")
    if out["tail_fit"]:
        print(f"tail lambda_hat={out['tail_fit']['lambda_hat']!r} r2={out['tail_fit']['r2']:.4f}")
    for f in failures:
        print(f"error: {f}", file=sys.stderr)
    return EXIT_NUMERIC if failures else EXIT_OK


def _dprime_of(space: SpaceSpec) -> float:
    b = space.walk_dimension
    return exponent_dprime(space.alpha, b, b)


def artifacts_suite(cfg: ExperimentConfig, inputs_dir: str, perturb_lambda: float = 1.0,
                    t_range=None) -> S.SuiteResult:
    """Checks built from simulate/estimate/solve outputs found in ``inputs_dir``."""
    names = ("estimates.json", "survival.csv", "eigen.json")
    missing = [n for n in names if not os.path.exists(os.path.join(inputs_dir, n))]
    if missing:
        raise InputError("missing inputs: " + ", ".join(missing) + f" (in {inputs_dir})")
    est = _read_json(os.path.join(inputs_dir, "estimates.json"))
    eig = _read_json(os.path.join(inputs_dir, "eigen.json"))
    for name, d in (("estimates.json", est), ("eigen.json", eig)):
        if d.get("version") != ARTIFACT_VERSION:
            raise InputError(f"{name}: artifact version {d.get('version')!r} "
                             f"is not {ARTIFACT_VERSION}")
    with open(os.path.join(inputs_dir, "survival.csv")) as fh:
        curve = SurvivalCurve.from_csv(fh)
    space = SpaceSpec.from_dict(est["space"])
    lam = float(eig["eigenvalue"])
    prov = {"space": est["space"], "domain": est["domain"], "config": est["config"],
            "start": est["start"]}
    rep = VerificationReport(meta={"suite": "artifacts", "inputs": inputs_dir})
    if est.get("tail_fit"):
        d = dict(est["tail_fit"])
        d["window"] = tuple(d["window"])
        rep.add(check_asymptotic(TailFit(**d), lam, inputs=prov))
    moms = [MomentEstimate(**m) for m in est.get("moments", [])]
    if moms:
        rep.add(check_moment_sandwich(lam, moms, space.generator_scale, inputs=prov))
    if t_range is None:
        # stop where binomial noise starts to dominate the empirical curve
        usable = curve.t[curve.S >= S_WINDOW[0]]
        t_range = (curve.t[0], usable[-1] if len(usable) else curve.t[-1])
    rep.add(check_lower_bound(curve, lam * perturb_lambda, tuple(t_range),
                              inputs={**prov, "perturb_lambda": perturb_lambda}))
    rep.add(check_envelope(curve, lam, _dprime_of(space), inputs=prov))
    for em in est.get("exp_moments", []):
        rep.add(check_exp_moment_bound(lam, ExpMomentEstimate(**em), inputs=prov))
    return S.SuiteResult(rep, {"curve": curve, "lambda": lam})


BUILTIN = ("interval", "disk", "heisenberg", "gasket", "hotspots", "layercake")
SUITE_CHOICES = BUILTIN + ("conditions", "artifacts")


def run_suite(name: str, cfg: ExperimentConfig, args) -> S.SuiteResult:
    perturb = args.perturb_lambda if args.perturb_lambda is not None else \
        cfg.section("verify").get("perturb_lambda", 1.0)
    if name == "artifacts":
        return artifacts_suite(cfg, args.inputs or cfg.output_dir, perturb,
                               cfg.section("verify").get("t_range"))
    if name == "conditions":
        return S.condition_suite(cfg.space)
    kw = {}
    if name == "interval":
        kw["perturb_lambda"] = perturb
        if cfg.space.variant == "euclidean":
            kw["generator_scale"] = cfg.space.generator_scale
    if name in ("interval", "disk", "heisenberg"):
        if args.n_paths is not None:
            kw["n_paths"] = args.n_paths
        if args.seed is not None:
            kw["seed"] = args.seed
    if name == "gasket" and cfg.space.variant == "gasket" and cfg.space.dim > 0:
        kw["m"] = min(cfg.space.dim, 7)
    return S.SUITES[name](**kw)


def cmd_verify(cfg: ExperimentConfig, args) -> int:
    names = args.suite or cfg.section("verify").get("suites", [])
    if not names:
        raise ConfigError("verify.suites: empty suite selection (pass --suite NAME)")
    bad = [n for n in names if n not in SUITE_CHOICES]
    if bad:
        raise ConfigError(f"verify.suites: unknown suite(s) {bad}; choose from {SUITE_CHOICES}")
    report = VerificationReport(meta={"suites": list(names)})
    for name in names:
        res = run_suite(name, cfg, args)
        res.report.meta = {**res.report.meta, "suite": name}
        report = report.merge(res.report)
        report.meta["suites"] = list(names)
    body = report.to_dict()
    body["kind"] = "verification"
    body["passed"] = report.passed
    _write_json(_out(cfg, "verification.json"), body)
    table = report.table()
    with open(_out(cfg, "verification.txt"), "w") as fh:
        fh.write(table + "\n")
    print(table)
    if not report.passed:
        print("mandatory failures: " + ", ".join(report.failures()), file=sys.stderr)
        return EXIT_CHECK
    return EXIT_OK


def cmd_hotspots(cfg: ExperimentConfig) -> int:
    hs = cfg.section("hotspots")
    if cfg.space.variant != "euclidean" or cfg.space.dim != 2:
        raise ConfigError("space: hotspots needs a planar euclidean space (d=2)")
    try:
        res = hotspots(cfg.domain, hs["h"], cfg.space.generator_scale)
    except ValueError as exc:
        raise ConfigError(f"domain: {exc}") from None
    chk = check_hotspots(res, hs["bound"], inputs={"domain": cfg.domain.to_dict()})
    _write_json(_out(cfg, "hotspots.json"),
                _artifact("hotspots", cfg, **res.to_dict(), bound=hs["bound"],
                          passed=chk.passed))
    print(f"ratio={res.ratio!r} mu2={res.mu2!r} lambda1={res.lambda1!r} "
          f"mu2/lambda1={res.mu2_over_lambda1!r}")
    return EXIT_OK if chk.passed else EXIT_CHECK


# --------------------------------------------------------------------------
# report
# --------------------------------------------------------------------------


def _space_key(space: dict | None) -> str:
    if not space:
        return "unspecified"
    return ",".join(f"{k}={space[k]}" for k in sorted(space))


def overlay_rows(curve: SurvivalCurve, lam: float, dprime: float) -> np.ndarray:
    """Columns t, S, se, exp(-lam t), K (1 + 2 lam t/d')^d' exp(-lam t).

    K is the smallest constant for which the envelope dominates every row
    with S > 0.
    """
    t = curve.t
    shape = (1.0 + 2.0 * lam * t / dprime) ** dprime * np.exp(-lam * t)
    pos = curve.S > 0
    K = float(np.max(curve.S[pos] / shape[pos])) if pos.any() else 0.0
    return np.column_stack([t, curve.S, curve.se, np.exp(-lam * t), K * shape])


def write_overlay(path: str, rows: np.ndarray, lam: float, dprime: float) -> None:
    with open(path, "w") as fh:
        fh.write(f"# exitlab-overlay v{ARTIFACT_VERSION} lambda={lam!r} dprime={dprime!r}\n")
        fh.write("t,S,se,lower_bound,envelope\n")
        for r in rows:
            fh.write(",".join(repr(float(v)) for v in r) + "\n")


def cmd_report(inputs: list, out_dir: str) -> int:
    sections: dict = {}
    curves = []
    for path in inputs:
        if path.endswith(".csv"):
            try:
                with open(path) as fh:
                    curves.append((path, SurvivalCurve.from_csv(fh)))
            except OSError as exc:
                raise InputError(f"{path}: {exc.strerror}") from None
            except (ValueError, KeyError) as exc:
                raise InputError(f"{path}: {exc}") from None
            continue
        d = _read_json(path)
        if not isinstance(d, dict) or "version" not in d:
            raise InputError(f"{path}: not an exitlab artifact (no version field)")
        if d["version"] != ARTIFACT_VERSION:
            raise InputError(f"{path}: schema version {d['version']!r} is not {ARTIFACT_VERSION}")
        kind = d.get("kind") or ("verification" if "checks" in d else "unknown")
        if kind == "verification":
            rep = VerificationReport.from_dict(d)
            for c in rep.checks:
                key = _space_key(c.inputs.get("space"))
                sections.setdefault(key, {}).setdefault("checks", []).append(c.to_dict())
            for c in rep.conditions:
                key = _space_key(c.inputs.get("space"))
                sections.setdefault(key, {}).setdefault("conditions", []).append(c.to_dict())
        else:
            key = _space_key(d.get("space"))
            sections.setdefault(key, {}).setdefault(kind, []).append({"file": path, **d})
    os.makedirs(out_dir, exist_ok=True)

    overlays = []
    for path, curve in curves:
        lam, space = _lambda_for(sections)
        if lam is None:
            raise InputError(f"{path}: no eigen.json or tail fit among the inputs to supply lambda")
        dprime = _dprime_of(space)
        name = os.path.splitext(os.path.basename(path))[0] + "_overlay.csv"
        write_overlay(os.path.join(out_dir, name), overlay_rows(curve, lam, dprime), lam, dprime)
        overlays.append(name)

    merged = {"kind": "report", "version": ARTIFACT_VERSION, "sections": sections,
              "overlays": overlays}
    _write_json(os.path.join(out_dir, "report.json"), merged)
    md = _markdown(sections)
    with open(os.path.join(out_dir, "report.md"), "w") as fh:
        fh.write(md)
    print(md, end="")
    return EXIT_OK


def _lambda_for(sections: dict):
    for key, sec in sections.items():
        for e in sec.get("eigen", []):
            return float(e["eigenvalue"]), SpaceSpec.from_dict(e["space"])
    for key, sec in sections.items():
        for e in sec.get("estimates", []):
            if e.get("tail_fit"):
                return float(e["tail_fit"]["lambda_hat"]), SpaceSpec.from_dict(e["space"])
    return None, None


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.6g}"
    return str(v)


def _markdown(sections: dict) -> str:
    lines = ["# exitlab report", ""]
    for key in sorted(sections):
        sec = sections[key]
        lines += [f"## space: {key}", ""]
        if sec.get("checks"):
            lines += ["| check | lhs | rhs | slack | result |", "|---|---|---|---|---|"]
            for c in sec["checks"]:
                lines.append(f"| {c['check_id']} | {_fmt(c['lhs'])} | {_fmt(c['rhs'])} | "
                             f"{_fmt(c['slack'])} | {'PASS' if c['passed'] else 'FAIL'} |")
            lines.append("")
        if sec.get("conditions"):
            lines += ["| condition | c_lower | c_upper | ratio | result |", "|---|---|---|---|---|"]
            for c in sec["conditions"]:
                lines.append(f"| {c['condition_id']} | {_fmt(c['c_lower'])} | "
                             f"{_fmt(c['c_upper'])} | {_fmt(c['ratio'])} | "
                             f"{'PASS' if c['passed'] else 'FAIL'} |")
            lines.append("")
        for e in sec.get("eigen", []):
            lines.append(f"- eigen ({e['file']}): lambda = {_fmt(e['eigenvalue'])}, "
                         f"vertices = {e.get('n_vertices', 'n/a')}")
        for e in sec.get("estimates", []):
            moms = ", ".join(f"E[tau^{m['p']:g}] = {_fmt(m['value'])}" for m in e["moments"])
            lines.append(f"- estimates ({e['file']}): n = {e['n']}, {moms}")
        for e in sec.get("hotspots", []):
            lines.append(f"- hotspots ({e['file']}): ratio = {_fmt(e['ratio'])}, "
                         f"mu2/lambda1 = {_fmt(e['mu2_over_lambda1'])}")
        lines.append("")
    return "\n".join(lines)


# --------------------------------------------------------------------------
# entry point
# --------------------------------------------------------------------------


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="exitlab", description="Exit-time and spectral experiments.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="JSON experiment config")
        sp.add_argument("--out", help=f"output directory (default: ${OUTPUT_ENV} or ./exitlab_out)")
        sp.add_argument("--threads", type=int, help="cap on worker threads")

    s = sub.add_parser("simulate", help="Monte Carlo exit times")
    common(s)
    s.add_argument("--n-paths", type=int)
    s.add_argument("--seed", type=int)
    s.add_argument("--h", type=float)
    s.add_argument("--t-max", type=float)
    s.add_argument("--no-bridge", action="store_true", help="disable the bridge correction")

    s = sub.add_parser("solve", help="Dirichlet eigenpair and mean exit time on a graph")
    common(s)
    s.add_argument("--grid-h", type=float)

    s = sub.add_parser("estimate", help="survival curve, moments and tail rate from a batch")
    common(s)
    s.add_argument("--batch", help="batch file (default: OUT/batch.bin)")

    s = sub.add_parser("verify", help="run check suites")
    common(s)
    s.add_argument("--suite", action="append", choices=SUITE_CHOICES)
    s.add_argument("--inputs", help="directory with upstream artifacts (suite 'artifacts')")
    s.add_argument("--perturb-lambda", type=float,
                   help="multiply lambda in the lower-bound check (negative control)")
    s.add_argument("--n-paths", type=int)
    s.add_argument("--seed", type=int)

    s = sub.add_parser("hotspots", help="Neumann hot-spots ratio on a planar domain")
    common(s)
    s.add_argument("--h", type=float)

    s = sub.add_parser("report", help="merge artifacts into one report with plot CSVs")
    s.add_argument("inputs", nargs="+")
    s.add_argument("--out", help="output directory")
    return p


def _overrides(args) -> dict:
    o: dict = {"output": {"dir": getattr(args, "out", None)}, "threads": args.threads}
    c = args.command
    if c == "simulate":
        o["simulate"] = {"n_paths": args.n_paths, "seed": args.seed, "h": args.h,
                         "t_max": args.t_max,
                         "bridge_correction": False if args.no_bridge else None}
    elif c == "solve":
        o["solve"] = {"grid_h": args.grid_h}
    elif c == "hotspots":
        o["hotspots"] = {"h": args.h}
    elif c == "verify":
        o["verify"] = {"perturb_lambda": args.perturb_lambda}
    return o


def _set_threads(n) -> None:
    if n:
        import numba

        numba.set_num_threads(max(1, min(int(n), numba.config.NUMBA_NUM_THREADS)))


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.command == "report":
            out = args.out or os.environ.get(OUTPUT_ENV, "exitlab_out")
            return cmd_report(args.inputs, out)
        cfg = load_config(args.config, _overrides(args))
        _set_threads(cfg.raw.get("threads"))
        if args.command == "simulate":
            return cmd_simulate(cfg)
        if args.command == "solve":
            return cmd_solve(cfg)
        if args.command == "estimate":
            return cmd_estimate(cfg, args.batch)
        if args.command == "verify":
            return cmd_verify(cfg, args)
        return cmd_hotspots(cfg)
    except (ConfigError, InputError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NUMERIC_ERRORS as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
