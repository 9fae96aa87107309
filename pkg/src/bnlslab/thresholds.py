"""Constants and thresholds derived from computed profiles.

GN constants come from Q_p, the critical-case thresholds (b*, b_*, lambda1,
beta) from Q*, lambda0 from the f_k construction, and mu0 from bisection on
the sign of m_mu.
"""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .errors import BracketError, NotConvergedError, RegimeError, RootFindingError
from .functionals import ModelParams, classify_regime, energy_parts, j_functional
from .grid import Field, boundary_amplitude, quadratic_parts
from .groundstate import GradientFlowConfig, GroundStateResult, solve_constrained

TOL_NEGATIVE = 1e-6
TOL_ZERO = 1e-5
LOCALIZED_EDGE = 5e-2


def _require_converged(res: GroundStateResult, tag: str) -> None:
    if not res.converged:
        raise NotConvergedError(f"{tag} input did not converge (status {res.status})")
    if res.problem_tag != tag:
        raise NotConvergedError(f"expected a {tag} result, got {res.problem_tag}")


# -- GN constants -----------------------------------------------------------

@dataclass(frozen=True)
class GNConstants:
    q_norm_L2: float
    B_pd: float
    C_pd: float
    p: float
    d: int
    j_mismatch: float = 0.0
    source_profile: str | None = None

    @property
    def exponent(self) -> float:
        """(p-1)d/4, the power of ||Dv|| in the GN bound."""
        return (self.p - 1.0) * self.d / 4.0


def gn_constants(qp_result: GroundStateResult, source: str | None = None) -> GNConstants:
    """B_{p,d} = (p+1)/(2||Q_p||^{p-1}) and C_{p,d} = B/(p+1) from a converged Q_p.

    ``j_mismatch`` is the relative gap between J(Q_p) and 1/B_{p,d}; a large
    value signals an under-resolved profile.
    """
    _require_converged(qp_result, "ProfileQp")
    params = qp_result.params
    p = params.p
    _, _, m = quadratic_parts(qp_result.profile)
    qn = math.sqrt(m)
    c_pd = 1.0 / (2.0 * qn ** (p - 1.0))
    b_pd = (p + 1.0) * c_pd
    j = j_functional(qp_result.profile, params)
    return GNConstants(qn, b_pd, c_pd, p, params.d, abs(j * b_pd - 1.0), source)


# -- critical thresholds -----------------------------------------------------

@dataclass(frozen=True)
class CriticalThresholds:
    mu: float
    b_star: float
    b_lower: float
    lambda1: float
    beta: float
    grad_Q_sq: float
    delta_Q_sq: float
    mass_Q_sq: float

    @property
    def ratio(self) -> float:
        return self.b_lower / self.b_star

    @property
    def simplified_ratio(self) -> float:
        """1 + (mu^2 + lambda1 mu)/4, valid because ||Q*||_2 = ||DQ*||_2."""
        return 1.0 + (self.mu**2 + self.lambda1 * self.mu) / 4.0

    @property
    def closed_form_gap(self) -> float:
        return abs(self.ratio - self.simplified_ratio) / abs(self.simplified_ratio)

    def in_window(self, b: float) -> bool:
        return -self.lambda1 < self.mu < 0 and self.b_lower < b < self.b_star


def critical_thresholds(qstar_result: GroundStateResult, mu: float) -> CriticalThresholds:
    _require_converged(qstar_result, "ProfileQstar")
    params = qstar_result.params
    if not params.is_critical:
        raise RegimeError("critical thresholds need p = 1 + 8/d")
    d = params.d
    a, g, m = quadratic_parts(qstar_result.profile)
    lam1 = 4.0 * g / m
    b_star = m ** (4.0 / d)
    bracket = 1.0 + (m / (4.0 * a)) * (mu * mu + lam1 * mu)
    b_lower = b_star * bracket
    beta = bracket ** (d / 8.0) if bracket > 0 else float("nan")
    return CriticalThresholds(float(mu), b_star, b_lower, lam1, beta, g, a, m)


def critical_trial_energy(qstar_result: GroundStateResult, mu: float, b: float) -> float:
    """E_{mu,b} at Q*/||Q*||_2."""
    q = qstar_result.profile
    _, _, m = quadratic_parts(q)
    v = q.scaled(1.0 / math.sqrt(m))
    return energy_parts(v, qstar_result.params.p, mu, b).total


def check_mu2_criterion(result: GroundStateResult, mu: float) -> bool:
    """Strict test energy < -mu^2/8."""
    return bool(result.energy < -mu * mu / 8.0)


# -- f_k and lambda0 -----------------------------------------------------

def f_k(y, k: float, c_pd: float, s: float):
    """y^2/2 - k y/2 - C y^s for y >= 0."""
    y = np.asarray(y, dtype=float)
    return 0.5 * y * y - 0.5 * k * y - c_pd * y**s


@dataclass
class FkAnalysis:
    m0: float
    k_grid: np.ndarray
    y1: np.ndarray
    y2: np.ndarray
    lambda0: float
    k_star: float
    c_pd: float
    s: float
    y1_decreasing: bool = True
    unimodal: bool = True
    notes: list[str] = field(default_factory=list)

    def f(self, k: float, y):
        return f_k(y, k, self.c_pd, self.s)

    def objective(self) -> np.ndarray:
        return np.minimum(self.k_grid, self.y1)


def default_k_grid(n: int = 40) -> np.ndarray:
    return np.logspace(-2.0, 2.0, n)


def fk_roots(k: float, m0: float, c_pd: float, s: float, xtol: float = 1e-14) -> tuple[float, float]:
    """Both roots of f_k(y) = m0 around the unique minimizer of f_k."""
    fmin = minimize_scalar(
        lambda y: float(f_k(y, k, c_pd, s)), bounds=(0.0, _y_upper(k, c_pd, s)), method="bounded",
        options={"xatol": 1e-12},
    )
    y_min = float(fmin.x)
    if not float(f_k(y_min, k, c_pd, s)) < m0:
        raise RootFindingError(f"f_k never dips below m0 = {m0} at k = {k}")
    g = lambda y: float(f_k(y, k, c_pd, s)) - m0
    y_hi = _y_upper(k, c_pd, s)
    while g(y_hi) <= 0:
        y_hi *= 2.0
    y1 = brentq(g, 0.0, y_min, xtol=xtol, rtol=4 * np.finfo(float).eps, maxiter=500)
    y2 = brentq(g, y_min, y_hi, xtol=xtol, rtol=4 * np.finfo(float).eps, maxiter=500)
    return y1, y2


def _y_upper(k: float, c_pd: float, s: float) -> float:
    # beyond this point y^2/2 dominates both negative terms
    return 2.0 * (k + 2.0 * c_pd ** (1.0 / (2.0 - s)) + 1.0)


def fk_analysis(gn: GNConstants, m0: float, k_grid: Sequence[float] | None = None) -> FkAnalysis:
    """Roots y1(k) < y2(k) of f_k = m0 and lambda0 = sup_k min(k, y1(k))."""
    if not m0 < 0:
        raise RootFindingError(f"m0 must be negative, got {m0}")
    ks = np.asarray(default_k_grid() if k_grid is None else k_grid, dtype=float)
    if np.any(ks <= 0) or np.any(np.diff(ks) <= 0):
        raise ValueError("k grid must be positive and strictly increasing")
    s = gn.exponent
    c = gn.C_pd
    roots = np.array([fk_roots(k, m0, c, s) for k in ks])
    y1, y2 = roots[:, 0], roots[:, 1]
    obj = np.minimum(ks, y1)
    notes = []
    y1_dec = bool(np.all(np.diff(y1) < 0))
    if not y1_dec:
        notes.append("y1(k) not strictly decreasing on the grid")
    i = int(np.argmax(obj))
    rises = np.diff(obj[: i + 1])
    falls = np.diff(obj[i:])
    unimodal = bool(np.all(rises >= 0) and np.all(falls <= 0))
    if not unimodal:
        notes.append("min(k, y1(k)) not unimodal on the grid")

    def neg_obj(k):
        return -min(k, fk_roots(k, m0, c, s)[0])

    lo = ks[max(i - 1, 0)]
    hi = ks[min(i + 1, len(ks) - 1)]
    lam0, k_star = float(obj[i]), float(ks[i])
    if hi > lo:
        res = minimize_scalar(neg_obj, bracket=(lo, ks[i], hi), method="golden", tol=1e-12) \
            if lo < ks[i] < hi else minimize_scalar(neg_obj, bounds=(lo, hi), method="bounded")
        if -res.fun > lam0:
            lam0, k_star = float(-res.fun), float(res.x)
    return FkAnalysis(m0, ks, y1, y2, lam0, k_star, c, s, y1_dec, unimodal, notes)


# -- mu0 ---------------------------------------------------------------------

@dataclass
class Mu0Sample:
    mu: float
    energy: float
    klass: str
    status: str
    edge: float


@dataclass
class Mu0Bracket:
    lo: float
    hi: float
    tolerance: float
    samples: list[Mu0Sample]
    tol_negative: float = TOL_NEGATIVE
    tol_zero: float = TOL_ZERO
    monotone: bool = True

    @property
    def width(self) -> float:
        return self.hi - self.lo

    def energy_at(self, mu: float) -> float:
        return next(s.energy for s in self.samples if s.mu == mu)


def classify_probe(res: GroundStateResult, tol_negative: float = TOL_NEGATIVE,
                   tol_zero: float = TOL_ZERO) -> tuple[str, float]:
    """'negative' when a box-localized state certifies m_mu < -tol_negative,
    'zero' when the flow stays within tol_zero of 0, otherwise 'undecided'."""
    edge = boundary_amplitude(res.profile)
    if not math.isfinite(res.energy):
        return "undecided", edge
    if res.energy < -tol_negative and edge < LOCALIZED_EDGE:
        return "negative", edge
    if abs(res.energy) <= tol_zero:
        return "zero", edge
    return "undecided", edge


def _probe(args) -> Mu0Sample:
    params, grid, cfg, tn, tz = args
    res = solve_constrained(params, grid, cfg, "VP")
    klass, edge = classify_probe(res, tn, tz)
    return Mu0Sample(params.mu, res.energy, klass, res.status, edge)


def locate_mu0(
    params: ModelParams,
    grid,
    cfg: GradientFlowConfig | None = None,
    bracket0: tuple[float, float] = (0.0, 0.4),
    tolerance: float = 0.05,
    tol_negative: float = TOL_NEGATIVE,
    tol_zero: float = TOL_ZERO,
    workers: int = 1,
    progress: Callable[[Mu0Sample], None] | None = None,
) -> Mu0Bracket:
    """Bisect on the predicate m_mu < -tol_negative.

    Needs 1 + 4/d <= p < 1 + 8/d; below that range m_mu < 0 for every mu.
    The box should be wide enough that the constant-state energy floor
    -(1/(p+1)) L^{-d(p-1)/2} stays well inside tol_zero.
    """
    d, p = params.d, params.p
    if p < 1.0 + 4.0 / d - 1e-12 or classify_regime(p, d) != "subcritical":
        raise RegimeError(f"mu0 is defined for 1+4/d <= p < 1+8/d, got p = {p}, d = {d}")
    cfg = cfg or GradientFlowConfig(max_iters=20_000)
    lo, hi = bracket0
    if not lo < hi:
        raise BracketError("bracket0 must satisfy lo < hi")

    def job(mu):
        return (params.replace(mu=float(mu)), grid, cfg, tol_negative, tol_zero)

    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            ends = list(ex.map(_probe, [job(lo), job(hi)]))
    else:
        ends = [_probe(job(lo)), _probe(job(hi))]
    samples = list(ends)
    if progress:
        for s_ in ends:
            progress(s_)
    if ends[0].klass != "negative" or ends[1].klass != "zero":
        raise BracketError(
            f"bracket0 not certified: lo -> {ends[0].klass} ({ends[0].energy:.3e}), "
            f"hi -> {ends[1].klass} ({ends[1].energy:.3e})"
        )
    while hi - lo > tolerance:
        mid = 0.5 * (lo + hi)
        s_ = _probe(job(mid))
        samples.append(s_)
        if progress:
            progress(s_)
        if s_.klass == "negative":
            lo = mid
        elif s_.klass == "zero":
            hi = mid
        else:
            raise NotConvergedError(f"probe at mu = {mid} undecided (energy {s_.energy:.3e}, status {s_.status})")
    samples.sort(key=lambda t: t.mu)
    es = np.array([t.energy for t in samples])
    monotone = bool(np.all(np.diff(es) >= -2.0 * tol_zero))
    return Mu0Bracket(lo, hi, tolerance, samples, tol_negative, tol_zero, monotone)


# -- report ----------------------------------------------------------------

def thresholds_report(
    gn: GNConstants | None = None,
    crit: CriticalThresholds | None = None,
    fk: FkAnalysis | None = None,
    mu0: Mu0Bracket | None = None,
    digests: dict[str, str] | None = None,
) -> dict:
    rep: dict = {}
    if gn is not None:
        rep.update(B_pd=gn.B_pd, C_pd=gn.C_pd, q_norm_L2=gn.q_norm_L2, gn_p=gn.p, j_mismatch=gn.j_mismatch)
    if crit is not None:
        rep.update(b_star=crit.b_star, b_lower=crit.b_lower, lambda1=crit.lambda1, beta=crit.beta,
                   critical_mu=crit.mu, grad_Q_sq=crit.grad_Q_sq, delta_Q_sq=crit.delta_Q_sq,
                   mass_Q_sq=crit.mass_Q_sq)
    if fk is not None:
        rep.update(lambda0=fk.lambda0, k_star=fk.k_star, m0=fk.m0, fk_notes=fk.notes)
    if mu0 is not None:
        rep.update(mu0_bracket=[mu0.lo, mu0.hi], mu0_monotone=mu0.monotone,
                   samples=[asdict(s) for s in mu0.samples])
    rep["digests"] = dict(digests or {})
    return rep


def write_report(report: dict, path: str | os.PathLike) -> None:
    with open(path, "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_report(path: str | os.PathLike) -> dict:
    with open(path) as fh:
        return json.load(fh)
