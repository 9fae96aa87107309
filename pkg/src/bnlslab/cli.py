"""Command-line front end.

    bnlslab run CONFIG [section.key=value ...] [--set section.key=value] [--workers N] [--output DIR]
    bnlslab reproduce {subcritical,critical,thresholds} [--workers N] [--output DIR]

Exit codes: 0 success, 1 usage or I/O error, 2 solver non-convergence,
3 detected divergence or blow-up, 4 failed reproduce checks.
"""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import hashlib
import json
import logging
import math
import os
import sys
from pathlib import Path
from typing import Any

import numpy as np

from . import __version__
from .config import ExperimentConfig, opt_str, read_raw, resolve
from .dynamics import EvolutionConfig, evolve, stability_experiment
from .errors import (
    BNLSError,
    BracketError,
    ConfigError,
    NotConvergedError,
    RegimeError,
    RootFindingError,
    SnapshotError,
)
from .functionals import ModelParams
from .grid import Field, Grid, make_grid, quadratic_parts
from .groundstate import (
    GradientFlowConfig,
    GroundStateResult,
    PetviashviliConfig,
    result_from_field,
    solve_constrained,
    solve_constrained_multistart,
    solve_profile,
)
from .snapshot import file_digest, read_snapshot, write_snapshot
from .suites import SUITES, gn_survey, run_suite
from .thresholds import (
    critical_thresholds,
    default_k_grid,
    fk_analysis,
    gn_constants,
    locate_mu0,
    read_report,
    thresholds_report,
    write_report,
)

log = logging.getLogger("bnlslab")

EXIT_OK, EXIT_USAGE, EXIT_NONCONV, EXIT_DIVERGED, EXIT_CHECKS = 0, 1, 2, 3, 4


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


class Outcome(Exception):
    """Carries a non-zero exit code up from a command."""

    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


# -- symbol resolution ---------------------------------------------------------

class SymbolTable:
    """Threshold names for config expressions, from a report or computed lazily."""

    def __init__(self, report_path: str | None):
        self.report = read_report(report_path) if report_path else {}
        self._qstar: GroundStateResult | None = None

    def _critical(self, d: int):
        if {"lambda1", "b_star", "delta_Q_sq", "mass_Q_sq"} <= self.report.keys():
            r = self.report
            return r["lambda1"], r["b_star"], r["mass_Q_sq"] / r["delta_Q_sq"]
        if self._qstar is None:
            self._qstar = solve_profile("qstar", ModelParams(d, 1.0 + 8.0 / d), make_grid(d, 512, 32 * math.pi))
        a, g, m = quadratic_parts(self._qstar.profile)
        return 4.0 * g / m, m ** (4.0 / d), m / a

    def __call__(self, name: str, partial: dict[str, dict[str, Any]]) -> float:
        d = partial["grid"].get("dim", 1)
        if name in self.report and name not in ("b_lower", "beta"):
            v = self.report[name]
            return float(np.mean(v)) if isinstance(v, list) else float(v)
        if name == "mu0":
            if "mu0_bracket" in self.report:
                return float(np.mean(self.report["mu0_bracket"]))
            raise ConfigError("mu0 needs experiment.thresholds_report with a mu0_bracket")
        if name in ("lambda1", "b_star", "b_lower", "beta"):
            lam1, b_star, ratio_ma = self._critical(d)
            if name == "lambda1":
                return lam1
            if name == "b_star":
                return b_star
            if "mu" not in partial["model"]:
                raise ConfigError(f"{name} depends on model.mu, which must not reference it")
            mu = partial["model"]["mu"]
            bracket = 1.0 + 0.25 * ratio_ma * (mu * mu + lam1 * mu)
            return b_star * bracket if name == "b_lower" else bracket ** (d / 8.0)
        if name in ("lambda0", "k_star", "B_pd", "C_pd"):
            p = partial["model"].get("p")
            if p is None or p >= 1.0 + 8.0 / d:
                raise ConfigError(f"{name} needs a subcritical model.p")
            grid = make_grid(d, 512, 32 * math.pi)
            gn = gn_constants(solve_profile("qp", ModelParams(d, p), grid))
            if name in ("B_pd", "C_pd"):
                return getattr(gn, name)
            m0 = solve_constrained(ModelParams(d, p, 0.0), grid).energy
            fk = fk_analysis(gn, m0)
            return fk.lambda0 if name == "lambda0" else fk.k_star
        raise ConfigError(f"unknown threshold name {name!r}")


# -- helpers -------------------------------------------------------------------

def _grid(cfg: ExperimentConfig) -> Grid:
    g = cfg.section("grid")
    return make_grid(g["dim"], g["n"], g["length"])


def _params(cfg: ExperimentConfig) -> ModelParams:
    m = cfg.section("model")
    return ModelParams(cfg["grid.dim"], m["p"], m["mu"], m["b"], m["c"])


def _flow_cfg(cfg: ExperimentConfig) -> GradientFlowConfig:
    s = cfg.section("solver")
    return GradientFlowConfig(
        time_step=s["time_step"], shift=s["shift"], max_iters=s["max_iters"], energy_tol=s["energy_tol"],
        residual_tol=s["residual_tol"], equation_tol=s["equation_tol"], initial_guess=s["initial_guess"],
        initial_width=s["initial_width"], initial_path=s["initial_path"],
    )


def _evo_cfg(cfg: ExperimentConfig) -> EvolutionConfig:
    e = cfg.section("evolution")
    return EvolutionConfig(dt=e["dt"], t_final=e["t_final"], splitting=e["splitting"], dealias=e["dealias"],
                           record_every=e["record_every"], blowup_factor=e["blowup_factor"])


def _load_snapshot(path: str | None, what: str, grid: Grid):
    if not path:
        raise Outcome(EXIT_USAGE, f"{what} snapshot path is not set; run the groundstate command first "
                                  f"and point the config at its ground_state.bnls")
    if not os.path.exists(path):
        raise Outcome(EXIT_USAGE, f"{what} snapshot {path} does not exist; run the groundstate command "
                                  f"first or fix the path")
    f, params = read_snapshot(path)
    if not f.grid.same_as(grid):
        raise Outcome(EXIT_USAGE, f"{what} snapshot grid {f.grid!r} differs from config grid {grid!r}")
    return f, params


def _dump(obj: dict, path: Path) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, default=_jsonable)
        fh.write("\n")


def _jsonable(v):
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, np.bool_):
        return bool(v)
    raise TypeError(f"cannot serialize {type(v)}")


def _result_json(r: GroundStateResult) -> dict:
    b = r.breakdown
    return {
        "problem": r.problem_tag,
        "status": r.status,
        "converged": r.converged,
        "message": r.message,
        "energy": r.energy,
        "lagrange_omega": r.lagrange_omega,
        "iterations": r.iterations,
        "equation_residual": r.equation_residual,
        "pohozaev": {"r1": r.pohozaev.r1, "r2": r.pohozaev.r2, "r1_normalized": r.pohozaev.r1_normalized,
                     "r2_normalized": r.pohozaev.r2_normalized},
        "energy_terms": None if b is None else {"biharmonic": b.biharmonic_term, "gradient": b.gradient_term,
                                                 "potential": b.potential_term},
        "params": {"d": r.params.d, "p": r.params.p, "mu": r.params.mu, "b": r.params.b, "c": r.params.c},
    }


def _status_code(r: GroundStateResult) -> int:
    if r.converged:
        return EXIT_OK
    return EXIT_DIVERGED if r.diverged else EXIT_NONCONV


# -- commands ------------------------------------------------------------------

def cmd_groundstate(cfg: ExperimentConfig, out: Path, workers: int) -> int:
    grid, params = _grid(cfg), _params(cfg)
    problem = cfg["model.problem"]
    flow = _flow_cfg(cfg)
    if cfg["solver.multistart"]:
        r = solve_constrained_multistart(params, grid, flow, problem)
    else:
        r = solve_constrained(params, grid, flow, problem)
    rep = _result_json(r)
    if r.diverged:
        rep["divergence"] = {"detected": True, "reason": r.message,
                             "note": "unbounded-below proxy; not a certificate of m = -inf"}
    _dump(rep, out / "groundstate.json")
    r.write_log(out / "convergence.csv")
    write_snapshot(r.profile, params, out / "ground_state.bnls")
    return _status_code(r)


def cmd_profile(cfg: ExperimentConfig, out: Path, workers: int) -> int:
    grid, params = _grid(cfg), _params(cfg)
    s = cfg.section("solver")
    pcfg = PetviashviliConfig(stabilization=s["stabilization"], max_iters=s["profile_max_iters"],
                              fixed_point_tol=s["fixed_point_tol"], residual_tol=s["residual_tol"])
    r = solve_profile(s["profile"], params, grid, pcfg)
    rep = _result_json(r)
    rep["factors"] = r.factors
    a, g, m = quadratic_parts(r.profile)
    rep["quadratic"] = {"delta_sq": a, "grad_sq": g, "mass": m}
    _dump(rep, out / "profile.json")
    write_snapshot(r.profile, r.params, out / "profile.bnls")
    return _status_code(r)


def _profile_grid(cfg: ExperimentConfig) -> Grid:
    t = cfg.section("thresholds")
    return make_grid(cfg["grid.dim"], t["profile_n"], t["profile_length"])


def cmd_thresholds(cfg: ExperimentConfig, out: Path, workers: int) -> int:
    params = _params(cfg)
    d = params.d
    pg = _profile_grid(cfg)
    t = cfg.section("thresholds")
    digests: dict[str, str] = {}
    gn = fk = mu0 = None
    code = EXIT_OK
    qstar = solve_profile("qstar", ModelParams(d, 1.0 + 8.0 / d), pg)
    write_snapshot(qstar.profile, qstar.params, out / "qstar_result.bnls")
    digests["qstar_result.bnls"] = file_digest(out / "qstar_result.bnls")
    if not qstar.converged:
        raise Outcome(EXIT_NONCONV, f"Q* did not converge: {qstar.message}")
    mu_c = t["mu"] if t["mu"] is not None else (params.mu if params.is_critical else 0.0)
    crit = critical_thresholds(qstar, mu_c)
    if params.regime == "subcritical":
        qp = solve_profile("qp", params.replace(mu=0.0), pg)
        write_snapshot(qp.profile, qp.params, out / "qp_result.bnls")
        digests["qp_result.bnls"] = file_digest(out / "qp_result.bnls")
        if not qp.converged:
            raise Outcome(EXIT_NONCONV, f"Q_p did not converge: {qp.message}")
        gn = gn_constants(qp, "qp_result.bnls")
        m0 = solve_constrained(ModelParams(d, params.p, 0.0), pg, _flow_cfg(cfg))
        if not m0.converged:
            raise Outcome(EXIT_NONCONV, f"(VP0) solve did not converge: {m0.message}")
        fk = fk_analysis(gn, m0.energy, np.logspace(np.log10(t["k_min"]), np.log10(t["k_max"]), t["k_count"]))
        if t["mu0"]:
            mu0 = _run_mu0(cfg, params, workers)
    rep = thresholds_report(gn, crit, fk, mu0, digests)
    rep["closed_form_gap"] = crit.closed_form_gap
    write_report(rep, out / "thresholds.json")
    return code


def _run_mu0(cfg: ExperimentConfig, params: ModelParams, workers: int):
    t = cfg.section("thresholds")
    grid = make_grid(params.d, t["mu0_n"], t["mu0_length"])
    flow = _flow_cfg(cfg)
    flow.max_iters = t["mu0_max_iters"]
    try:
        return locate_mu0(params.replace(mu=0.0), grid, flow, (t["mu0_lo"], t["mu0_hi"]), t["mu0_tol"],
                          workers=workers, progress=lambda s: log.info("mu0 probe %s", s))
    except (BracketError, NotConvergedError) as exc:
        raise Outcome(EXIT_NONCONV, f"mu0 bracketing failed: {exc}") from None


def cmd_mu0(cfg: ExperimentConfig, out: Path, workers: int) -> int:
    params = _params(cfg)
    br = _run_mu0(cfg, params, workers)
    write_report(thresholds_report(mu0=br), out / "mu0.json")
    return EXIT_OK


def cmd_lambda0(cfg: ExperimentConfig, out: Path, workers: int) -> int:
    params = _params(cfg)
    if params.regime != "subcritical":
        raise RegimeError("lambda0 needs 1 < p < 1 + 8/d")
    grid = _grid(cfg)
    t = cfg.section("thresholds")
    qp = solve_profile("qp", params.replace(mu=0.0), grid)
    if not qp.converged:
        raise Outcome(EXIT_NONCONV, f"Q_p did not converge: {qp.message}")
    gn = gn_constants(qp)
    m0 = solve_constrained(params.replace(mu=0.0), grid, _flow_cfg(cfg))
    if not m0.converged:
        raise Outcome(EXIT_NONCONV, f"(VP0) solve did not converge: {m0.message}")
    ks = np.logspace(np.log10(t["k_min"]), np.log10(t["k_max"]), t["k_count"])
    try:
        fk = fk_analysis(gn, m0.energy, ks)
    except RootFindingError as exc:
        raise Outcome(EXIT_NONCONV, f"inconsistent f_k data: {exc}") from None
    rep = thresholds_report(gn=gn, fk=fk)
    rep.update(y1_decreasing=fk.y1_decreasing, unimodal=fk.unimodal)
    write_report(rep, out / "lambda0.json")
    with open(out / "fk.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["k", "y1", "y2", "min_k_y1"])
        for row in zip(fk.k_grid, fk.y1, fk.y2, fk.objective()):
            w.writerow([repr(float(v)) for v in row])
    return EXIT_OK


def cmd_evolve(cfg: ExperimentConfig, out: Path, workers: int) -> int:
    grid, params = _grid(cfg), _params(cfg)
    e = cfg.section("evolution")
    psi0, _ = _load_snapshot(e["initial_path"], "initial", grid)
    ref = _load_snapshot(e["reference_path"], "reference", grid)[0] if e["reference_path"] else None
    tr = evolve(psi0, params, _evo_cfg(cfg), reference=ref)
    tr.write_csv(out / "trace.csv")
    rep = {"blowup_flag": tr.blowup_flag, "message": tr.message, "mass_drift": tr.mass_drift,
           "energy_drift": tr.energy_drift, "t_reached": float(tr.times[-1]),
           "h2_growth": float(tr.h2_norm.max() / tr.h2_norm[0])}
    if tr.orbit_distance is not None:
        rep["max_orbit_distance"] = float(tr.orbit_distance.max())
    _dump(rep, out / "evolve.json")
    write_snapshot(tr.final, params, out / "final.bnls")
    return EXIT_DIVERGED if tr.blowup_flag else EXIT_OK


def cmd_stability(cfg: ExperimentConfig, out: Path, workers: int) -> int:
    grid, params = _grid(cfg), _params(cfg)
    e = cfg.section("evolution")
    f, _ = _load_snapshot(e["ground_state"], "ground-state", grid)
    gs = result_from_field(f, params, cfg["model.problem"], cfg["solver.residual_tol"])
    if not gs.converged:
        raise Outcome(EXIT_NONCONV, gs.message)
    rep = stability_experiment(gs, e["deltas"], params, _evo_cfg(cfg), seed=cfg.seed, workers=workers)
    rep.write_json(out / "stability.json", {"config_digest": _config_digest(cfg)})
    return EXIT_DIVERGED if any(rep.blowup_flags) else EXIT_OK


def cmd_gncheck(cfg: ExperimentConfig, out: Path, workers: int) -> int:
    grid, params = _grid(cfg), _params(cfg)
    if params.regime != "subcritical":
        raise RegimeError("gncheck needs 1 < p < 1 + 8/d")
    qp = solve_profile("qp", params.replace(mu=0.0), grid)
    if not qp.converged:
        raise Outcome(EXIT_NONCONV, f"Q_p did not converge: {qp.message}")
    gn = gn_constants(qp)
    n = cfg["thresholds.samples"]
    rel = gn_survey(params.p, n, cfg.seed, (grid.dim, grid.n, grid.box_length))
    floor = 1e-16
    edges = np.arange(-16, 1)
    hist, _ = np.histogram(np.log10(np.clip(rel, floor, None)), bins=edges)
    viol = int(np.sum(rel < -1e-8))
    rep = {
        "B_pd": gn.B_pd, "C_pd": gn.C_pd, "q_norm_L2": gn.q_norm_L2, "j_mismatch": gn.j_mismatch,
        "samples": n, "seed": cfg.seed, "violations": viol,
        "deficit_over_scale": {"min": float(rel.min()), "median": float(np.median(rel)), "max": float(rel.max()),
                               "quantiles": {str(q): float(np.quantile(rel, q)) for q in (0.01, 0.1, 0.5, 0.9)}},
        "histogram_log10": {"edges": edges.tolist(), "counts": hist.tolist(),
                            "below_floor_or_negative": int(np.sum(rel < floor))},
    }
    _dump(rep, out / "gn_report.json")
    if viol:
        raise Outcome(EXIT_NONCONV, f"{viol} fields violate the GN bound beyond 1e-8 relative")
    return EXIT_OK


COMMANDS = {
    "groundstate": cmd_groundstate, "profile": cmd_profile, "thresholds": cmd_thresholds, "mu0": cmd_mu0,
    "lambda0": cmd_lambda0, "evolve": cmd_evolve, "stability": cmd_stability, "gncheck": cmd_gncheck,
}


# -- manifest ------------------------------------------------------------------

def _config_digest(cfg: ExperimentConfig) -> str:
    return hashlib.sha256(cfg.to_ini().encode()).hexdigest()


def _now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


def write_manifest(out: Path, cfg_digest: str, command: str, started: str, code: int, message: str) -> None:
    files = []
    for p in sorted(out.iterdir()):
        if p.is_file() and p.name != "manifest.json":
            files.append({"path": p.name, "sha256": file_digest(p), "bytes": p.stat().st_size})
    man = {
        "tool": "bnlslab", "version": __version__, "command": command, "config_digest": cfg_digest,
        "started": started, "finished": _now(), "exit_code": code, "message": message, "files": files,
    }
    with open(out / "manifest.json", "w") as fh:
        json.dump(man, fh, indent=2, sort_keys=True)
        fh.write("\n")


def verify_manifest(out: str | os.PathLike) -> bool:
    out = Path(out)
    with open(out / "manifest.json") as fh:
        man = json.load(fh)
    return all(file_digest(out / f["path"]) == f["sha256"] for f in man["files"])


# -- entry points --------------------------------------------------------------

def run(config_path: str | None, overrides: list[str], workers: int = 1, output: str | None = None) -> int:
    try:
        raw = read_raw(config_path, overrides)
        syms = SymbolTable(opt_str(raw["experiment"].get("thresholds_report") or ""))
        cfg = resolve(raw, syms)
    except (ConfigError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except BNLSError as exc:
        print(f"error while resolving config: {exc}", file=sys.stderr)
        return EXIT_USAGE
    out = Path(output or cfg["experiment.output_dir"])
    try:
        out.mkdir(parents=True, exist_ok=True)
        (out / "manifest.json").unlink(missing_ok=True)
        (out / "resolved.cfg").write_text(cfg.to_ini())
    except OSError as exc:
        print(f"error: cannot write to {out}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    started = _now()
    message = ""
    try:
        code = COMMANDS[cfg.command](cfg, out, workers)
    except Outcome as exc:
        code, message = exc.code, str(exc)
    except (SnapshotError, OSError) as exc:
        code, message = EXIT_USAGE, f"I/O error: {exc}"
    except (RegimeError, ConfigError) as exc:
        code, message = EXIT_USAGE, str(exc)
    except BNLSError as exc:
        code, message = EXIT_NONCONV, str(exc)
    if message:
        print(f"error: {message}", file=sys.stderr)
    elif code == EXIT_DIVERGED:
        print("divergence or blow-up detected (see report)", file=sys.stderr)
    elif code == EXIT_NONCONV:
        print("solver did not converge (see report)", file=sys.stderr)
    write_manifest(out, _config_digest(cfg), cfg.command, started, code, message)
    return code


def reproduce(suite: str, workers: int = 1, output: str | None = None) -> int:
    if suite not in SUITES:
        print(f"error: unknown suite {suite!r}; choose from {', '.join(SUITES)}", file=sys.stderr)
        return EXIT_USAGE
    checks = run_suite(suite, workers, echo=print)
    failed = [c for c in checks if not c.passed]
    table = "\n".join(c.line() for c in checks) + "\n"
    if output:
        out = Path(output)
        out.mkdir(parents=True, exist_ok=True)
        (out / f"reproduce_{suite}.txt").write_text(table)
    print(f"{len(checks) - len(failed)}/{len(checks)} checks passed")
    if failed:
        print("failed: " + "; ".join(f"criterion {c.criterion}: {c.name}" for c in failed))
        return EXIT_CHECKS
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="bnlslab", description="Ground states, thresholds and dynamics for biharmonic NLS.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="action", required=True, parser_class=_Parser)
    r = sub.add_parser("run", help="run one configured experiment")
    r.add_argument("config_file", nargs="?", help="INI config (same as --config)")
    r.add_argument("overrides", nargs="*", help="section.key=value overrides")
    r.add_argument("--config", dest="config_flag")
    r.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
    r.add_argument("--workers", type=int, default=1)
    r.add_argument("--output")
    q = sub.add_parser("reproduce", help="run a canned acceptance suite")
    q.add_argument("suite")
    q.add_argument("--workers", type=int, default=1)
    q.add_argument("--output")
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    if args.workers < 1:
        print("error: --workers must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    if args.action == "reproduce":
        return reproduce(args.suite, args.workers, args.output)
    cfg_path = args.config_flag or args.config_file
    overrides = list(args.overrides)
    if args.config_flag and args.config_file:
        overrides.insert(0, args.config_file)
    if cfg_path is None:
        print("error: a config file is required", file=sys.stderr)
        return EXIT_USAGE
    return run(cfg_path, overrides + args.set, args.workers, args.output)


if __name__ == "__main__":
    sys.exit(main())
