"""Canned desk-scale experiments with pass/fail checks.

Each ``criterion_*`` function runs one experiment and returns a list of
:class:`Check`. ``SUITES`` groups them for ``bnlslab reproduce``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np

from .dynamics import EvolutionConfig, evolve, stability_experiment
from .functionals import (
    ModelParams,
    dilate,
    dilation_energy_closed_form,
    energy_mu,
    gn_deficit,
    j_functional,
    potential_integral,
)
from .grid import Field, Grid, make_grid, quadratic_parts
from .groundstate import (
    GradientFlowConfig,
    GroundStateResult,
    minimization_curve,
    solve_constrained,
    solve_profile,
)
from .thresholds import (
    TOL_NEGATIVE,
    TOL_ZERO,
    critical_thresholds,
    fk_analysis,
    gn_constants,
    locate_mu0,
)

PI = math.pi
DESK = (1, 256, 32 * PI)
PROFILE_GRID = (1, 512, 32 * PI)
CRITICAL_GRID = (1, 1024, 32 * PI)
MU0_GRID = (1, 1024, 64 * PI)


@dataclass(frozen=True)
class Check:
    criterion: str
    name: str
    passed: bool
    value: float
    bound: str
    detail: str = ""

    def line(self) -> str:
        flag = "PASS" if self.passed else "FAIL"
        extra = f"  ({self.detail})" if self.detail else ""
        return f"[{flag}] criterion {self.criterion}: {self.name} = {self.value:.3e} (need {self.bound}){extra}"


def _le(criterion, name, value, bound, detail="") -> Check:
    return Check(criterion, name, bool(value <= bound), float(value), f"<= {bound:g}", detail)


def _in(criterion, name, value, lo, hi, detail="") -> Check:
    return Check(criterion, name, bool(lo <= value <= hi), float(value), f"in [{lo:g}, {hi:g}]", detail)


@lru_cache(maxsize=None)
def grid_of(spec: tuple[int, int, float]) -> Grid:
    return make_grid(*spec)


@lru_cache(maxsize=None)
def profile(which: str, p: float, spec=PROFILE_GRID) -> GroundStateResult:
    d = spec[0]
    return solve_profile(which, ModelParams(d, p), grid_of(spec))


@lru_cache(maxsize=None)
def ground_state(p: float, mu: float, b: float = 1.0, spec=DESK, problem: str = "VP") -> GroundStateResult:
    return solve_constrained(ModelParams(spec[0], p, mu, b), grid_of(spec), GradientFlowConfig(), problem)


@lru_cache(maxsize=None)
def critical_constants(d: int = 1):
    q = profile("qstar", 1.0 + 8.0 / d)
    a, g, m = quadratic_parts(q.profile)
    lam1 = 4.0 * g / m
    return q, lam1, m ** (4.0 / d)


@lru_cache(maxsize=None)
def lambda0_for(p: float) -> float:
    gn = gn_constants(profile("qp", p))
    m0 = solve_constrained(ModelParams(1, p, 0.0), grid_of(PROFILE_GRID)).energy
    return fk_analysis(gn, m0).lambda0


# -- criteria ----------------------------------------------------------------

def criterion_1() -> list[Check]:
    q = profile("qstar", 9.0)
    a, _, m = quadratic_parts(q.profile)
    pot = potential_integral(q.profile, 9.0)
    return [
        _le("1", "|M - A|/M for Q*", abs(m - a) / m, 1e-6),
        _le("1", "|M - P/(1+4/d)|/M for Q*", abs(m - pot / 5.0) / m, 1e-6),
    ]


def criterion_2() -> list[Check]:
    out = []
    for p in (3.0, 5.0, 9.0):
        r = profile("qp", p)
        out.append(_le("2", f"qp p={p:g} max normalized Pohozaev", r.pohozaev.max_normalized, 1e-6))
    r = profile("qstar", 9.0)
    out.append(_le("2", "qstar max normalized Pohozaev", r.pohozaev.max_normalized, 1e-6))
    return out


def random_fields(grid: Grid, count: int, seed: int, near: Field | None = None):
    """Seeded smooth test fields: Gaussian clusters with random phases and
    modulations, plus perturbed copies of ``near`` when given."""
    rng = np.random.default_rng(seed)
    x = grid.coords
    L = grid.box_length
    for i in range(count):
        if near is not None and i % 10 == 0:
            eps = 10.0 ** rng.uniform(-6, -1)
            v = near.physical() * (1.0 + eps * rng.standard_normal() * np.exp(-grid.radius_sq() / 8.0))
            yield Field(grid, v)
            continue
        v = np.zeros(grid.shape, dtype=np.complex128)
        for _ in range(rng.integers(1, 4)):
            cen = [rng.uniform(-L / 8, L / 8) for _ in range(grid.dim)]
            w = rng.uniform(0.4, 4.0)
            r2 = sum((xi - c) ** 2 for xi, c in zip(x, cen))
            k = rng.uniform(-1.5, 1.5)
            amp = rng.standard_normal() + 1j * rng.standard_normal()
            v += amp * np.exp(-r2 / (2 * w * w) + 1j * k * x[0])
        yield Field(grid, v)


def gn_survey(p: float, count: int = 1000, seed: int = 0, spec=PROFILE_GRID) -> np.ndarray:
    q = profile("qp", p, spec)
    gn = gn_constants(q)
    params = ModelParams(spec[0], p)
    vals = []
    for f in random_fields(grid_of(spec), count, seed, near=q.profile):
        deficit, scale = gn_deficit(f, params, gn)
        vals.append(deficit / scale)
    return np.asarray(vals)


def criterion_3() -> list[Check]:
    out = []
    for p in (3.0, 5.0):
        q = profile("qp", p)
        _, _, m = quadratic_parts(q.profile)
        target = 2.0 / (p + 1.0) * m ** ((p - 1.0) / 2.0)
        j = j_functional(q.profile, q.params)
        out.append(_le("3", f"p={p:g} |J(Q_p) - 2/(p+1)||Q_p||^(p-1)| rel", abs(j - target) / target, 1e-6))
    rel = gn_survey(3.0)
    out.append(Check("3", "min deficit/scale over 1000 fields (p=3)", bool(rel.min() >= -1e-8),
                     float(rel.min()), ">= -1e-08"))
    return out


def criterion_4() -> list[Check]:
    g = grid_of(DESK)
    v0 = Field(g, np.exp(-g.radius_sq() / 8.0) * (0.8 + 0j))
    worst = 0.0
    for mu in (-1.0, 0.0, 1.0):
        params = ModelParams(1, 3.0, mu)
        for rho in (0.5, 1.0, 2.0):
            with warnings.catch_warnings():
                warnings.simplefilter("error")
                e = energy_mu(dilate(v0, rho), params).total
            worst = max(worst, abs(e - dilation_energy_closed_form(v0, params, rho)))
    return [_le("4", "max |E(v^rho) - closed form|", worst, 1e-8, "rho in {1/2,1,2}, mu in {-1,0,1}")]


def criterion_5() -> list[Check]:
    mus = (-1.0, -0.5, 0.0, 0.5, 1.0)
    g = grid_of(DESK)
    curve = minimization_curve([ModelParams(1, 3.0, mu) for mu in mus], g)
    es = np.array([e for _, e, _ in curve])
    tol = 2.0 * 1e-8
    conv = all(r.converged for _, _, r in curve)
    return [
        Check("5", "all curve points converged", conv, float(sum(r.converged for *_, r in curve)), "== 5"),
        _le("5", "max energy", es.max(), 1e-8),
        _le("5", "max decrease between consecutive mu", max(0.0, -np.diff(es).min()), tol),
        _le("5", "max energy over mu <= 0", es[:3].max(), -1e-6),
    ]


def criterion_6(workers: int = 1):
    p = 5.0
    g = grid_of(MU0_GRID)
    br = locate_mu0(ModelParams(1, p), g, workers=workers)
    oracle = 4.0 / (3.0 * PI**2)
    below = [s.energy for s in br.samples if s.mu <= br.lo]
    above = [s.energy for s in br.samples if s.mu >= br.hi]
    checks = [
        _le("6", "bracket width", br.width, 0.05, f"[{br.lo:g}, {br.hi:g}], quintic oracle mu0 = {oracle:.6f}"),
        _le("6", "max m_mu at or below lo", max(below), -TOL_NEGATIVE),
        _le("6", "max |m_mu| at or above hi", max(abs(e) for e in above), TOL_ZERO),
        Check("6", "samples monotone within 2*tol_zero", br.monotone, float(br.monotone), "true"),
        Check("6", "independent mu0 inside bracket", br.lo < oracle <= br.hi, oracle, f"in [{br.lo:g}, {br.hi:g}]"),
    ]
    return checks


def criterion_7() -> list[Check]:
    q, lam1, _ = critical_constants()
    out = []
    for frac in (0.25, 0.5, 0.75):
        ct = critical_thresholds(q, -frac * lam1)
        out.append(_le("7", f"mu=-{frac:g} lambda1 closed-form gap", ct.closed_form_gap, 1e-6))
    for mu in (0.0, -lam1):
        ct = critical_thresholds(q, mu)
        out.append(_le("7", f"mu={mu:.4f} |b_lower/b_star - 1|", abs(ct.ratio - 1.0), 1e-10))
    inside = [critical_thresholds(q, -t * lam1).beta for t in np.linspace(0.02, 0.98, 25)]
    outside = [critical_thresholds(q, mu).beta for mu in (-1.5 * lam1, -1.01 * lam1, 0.01, 1.0)]
    ok = all(0 < b < 1 for b in inside) and all(b >= 1 for b in outside)
    out.append(Check("7", "beta in (0,1) exactly on (-lambda1, 0)", ok, float(min(inside)), "inside<1, outside>=1"))
    return out


def critical_window_results():
    q, lam1, b_star = critical_constants()
    mu = -0.5 * lam1
    ct = critical_thresholds(q, mu)
    b_mid = 0.5 * (ct.b_lower + ct.b_star)
    inside = ground_state(9.0, mu, b_mid, CRITICAL_GRID, "VPb")
    above = ground_state(9.0, mu, 1.05 * b_star, CRITICAL_GRID, "VPb")
    return ct, inside, above


def criterion_8() -> list[Check]:
    ct, inside, above = critical_window_results()
    mu = ct.mu
    return [
        Check("8", "b mid-window converged", inside.converged, float(inside.iterations), "converged"),
        _le("8", "energy + mu^2/8 (mid-window)", inside.energy + mu * mu / 8.0, -1e-12),
        Check("8", "b = 1.05 b_star divergence detected", above.diverged, above.energy, "diverged",
              above.message),
    ]


def criterion_9() -> list[Check]:
    p = 3.0
    gn = gn_constants(profile("qp", p))
    m0 = solve_constrained(ModelParams(1, p, 0.0), grid_of(PROFILE_GRID)).energy
    fk = fk_analysis(gn, m0)
    r1 = np.abs(fk.f(fk.k_grid, fk.y1) - m0).max()
    r2 = np.abs(fk.f(fk.k_grid, fk.y2) - m0).max()
    gap = float((fk.objective() - fk.lambda0).max())
    return [
        _le("9", "max |f_k(y1) - m0|", r1, 1e-10),
        _le("9", "max |f_k(y2) - m0|", r2, 1e-10),
        _le("9", "|f_k(0)|", float(np.abs(fk.f(fk.k_grid, 0.0)).max()), 0.0),
        Check("9", "lambda0 > 0", fk.lambda0 > 0, fk.lambda0, "> 0"),
        _le("9", "max_k min(k,y1) - lambda0", gap, 0.0),
        Check("9", "y1 strictly decreasing, objective unimodal", fk.y1_decreasing and fk.unimodal,
              float(len(fk.notes)), "no notes"),
    ]


def plane_wave_study(dts=(0.04, 0.02, 0.01), t_final: float = 10.0):
    """Carrier-phase error and energy drift for a plane wave carrying a small sideband."""
    g = grid_of(DESK)
    x, kk = g.axis, g.wavenumbers
    amp, eps, mode, side = 0.7, 0.1, 3, 16
    params = ModelParams(1, 3.0, 0.5)

    def run(dt, with_side=True):
        v = amp * np.exp(1j * kk[mode] * x)
        if with_side:
            v = v + eps * np.exp(1j * kk[mode + side] * x)
        return evolve(Field(g, v), params, EvolutionConfig(dt=dt, t_final=t_final, record_every=10))

    pure = run(dts[0], False)
    omega = kk[mode] ** 4 + params.mu * kk[mode] ** 2 - amp ** (params.p - 1.0)
    exact = amp * np.exp(1j * (kk[mode] * x - omega * t_final))
    pure_err = float(np.abs(pure.final.physical() - exact).max())
    ref = run(dts[-1] / 32).final.spectral()[mode]
    phase_err, drift, mass = [], [], []
    for dt in dts:
        tr = run(dt)
        phase_err.append(abs(float(np.angle(tr.final.spectral()[mode] / ref))))
        drift.append(tr.energy_drift)
        mass.append(tr.mass_drift)
    return pure_err, phase_err, drift, mass


def criterion_10() -> list[Check]:
    dts = (0.04, 0.02, 0.01)
    pure_err, ph, dr, mass = plane_wave_study(dts)
    out = [_le("10", "pure plane wave max error vs exact Omega", pure_err, 1e-10, "splitting is exact here")]
    for i in range(len(ph) - 1):
        out.append(_in("10", f"phase error ratio dt {dts[i]:g}/{dts[i + 1]:g}", ph[i] / ph[i + 1], 3.6, 4.4))
        out.append(_in("10", f"energy drift ratio dt {dts[i]:g}/{dts[i + 1]:g}", dr[i] / dr[i + 1], 3.6, 4.4))
    out.append(_le("10", "max mass drift over [0,10]", max(mass), 1e-10))
    return out


def subcritical_stability_state():
    lam0 = lambda0_for(3.0)
    return ground_state(3.0, -0.5 * lam0), lam0


def critical_stability_state(fraction: float = 0.1) -> GroundStateResult:
    """Minimizer at b = b_* + fraction (b* - b_*), mu = -lambda1/2.

    Deeper in the window the minimizer narrows and Strang at dt = 1e-4 seeds
    a slowly growing deviation, so the stability cell sits near b_*.
    """
    q, lam1, _ = critical_constants()
    ct = critical_thresholds(q, -0.5 * lam1)
    b = ct.b_lower + fraction * (ct.b_star - ct.b_lower)
    return ground_state(9.0, ct.mu, b, PROFILE_GRID, "VPb")


def criterion_11(workers: int = 1) -> list[Check]:
    gs, lam0 = subcritical_stability_state()
    bound = 10.0 * GradientFlowConfig().residual_tol
    cfg = EvolutionConfig(dt=1e-3, t_final=20.0, record_every=100)
    tr = evolve(gs.profile, gs.params, cfg, reference=gs.profile)
    out = [_le("11", "stationary sup orbit distance (p=3, mu=-lambda0/2)", float(tr.orbit_distance.max()), bound)]
    rep = stability_experiment(gs, [1e-3, 1e-2], gs.params, cfg, seed=0, workers=workers)
    for d, s in zip(rep.deltas, rep.sup_distance):
        out.append(_le("11", f"p=3 sup distance / delta at delta={d:g}", s / d, 10.0))
    crit = critical_stability_state()
    ccfg = EvolutionConfig(dt=1e-4, t_final=20.0, record_every=1000)
    crep = stability_experiment(crit, [1e-3, 1e-2], crit.params, ccfg, seed=0, workers=workers)
    for d, s, f in zip(crep.deltas, crep.sup_distance, crep.blowup_flags):
        out.append(_le("11", f"p=9 window sup distance / delta at delta={d:g}", s / d, 10.0,
                       "blow-up flagged" if f else ""))
    return out


def criterion_12() -> list[Check]:
    _, _, above = critical_window_results()
    return [Check("12", "documented only; divergence proxy stands in", above.diverged, above.energy,
                  "proxy triggers", "non-existence and m = -inf are not certified numerically")]


CRITERIA: dict[str, Callable[..., list[Check]]] = {
    "1": criterion_1, "2": criterion_2, "3": criterion_3, "4": criterion_4, "5": criterion_5,
    "6": criterion_6, "7": criterion_7, "8": criterion_8, "9": criterion_9, "10": criterion_10,
    "11": criterion_11, "12": criterion_12,
}

SUITES: dict[str, tuple[str, ...]] = {
    "subcritical": ("2", "3", "4", "5", "9", "10", "11"),
    "critical": ("1", "2", "7", "8", "12"),
    "thresholds": ("3", "6", "7", "9"),
}


def run_suite(name: str, workers: int = 1, echo: Callable[[str], None] | None = None) -> list[Check]:
    if name not in SUITES:
        raise KeyError(name)
    checks: list[Check] = []
    for key in SUITES[name]:
        fn = CRITERIA[key]
        res = fn(workers=workers) if key in ("6", "11") else fn()
        for c in res:
            checks.append(c)
            if echo:
                echo(c.line())
    return checks
