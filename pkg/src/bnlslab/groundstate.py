"""Ground-state solvers.

Two routes are provided:

* :func:`solve_constrained` -- normalized (imaginary-time) gradient flow that
  minimizes E_mu, E_{mu,b} or E_{mu,1} on the sphere ||u||_2 = c.
* :func:`solve_profile` -- Petviashvili fixed-point iteration for the
  rescaled profile equations whose solutions give Q_p and Q*.
"""

from __future__ import annotations

import csv
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Literal, Sequence

import numpy as np

from .errors import ConfigError, RegimeError
from .functionals import (
    EnergyBreakdown,
    ModelParams,
    PohozaevResiduals,
    energy_parts,
    omega_from_first_identity,
    pohozaev_residuals,
    power_nonlinearity,
)
from .grid import Field, Grid, norm_H2, spectral_quad, spectral_tail_fraction

log = logging.getLogger(__name__)

ProblemTag = Literal["VP", "VPb", "MinPc", "ProfileQstar", "ProfileQp"]
Status = Literal["converged", "max_iters", "diverged", "vanishing", "oscillation", "stagnation"]


@dataclass
class GradientFlowConfig:
    """Settings for the semi-implicit normalized gradient flow.

    ``shift`` is the spectral preconditioner shift alpha; ``None`` picks
    0.1, or mu^2/4 + 0.1 when mu < 0. Divergence thresholds implement the
    unbounded-below proxy; ``vanishing_ratio`` (off by default) stops runs
    whose participation ratio says the state has spread over the box.
    """

    time_step: float = 1.0
    shift: float | None = None
    max_iters: int = 50_000
    energy_tol: float = 1e-13
    residual_tol: float = 1e-6
    equation_tol: float = 1e-9
    initial_guess: Literal["gaussian", "file", "ring", "sech"] = "gaussian"
    initial_width: float = 1.0
    initial_path: str | None = None
    max_halvings: int = 20
    divergence_energy: float = -1e6
    divergence_growth: float = 1e3
    collapse_tail: float = 1e-6
    vanishing_ratio: float | None = None
    record_history: bool = True

    def __post_init__(self) -> None:
        if not self.time_step > 0:
            raise ConfigError("time_step must be positive")
        if self.shift is not None and self.shift < 0:
            raise ConfigError("shift must be nonnegative")
        if not (self.energy_tol > 0 and self.residual_tol > 0 and self.equation_tol > 0):
            raise ConfigError("tolerances must be positive")
        if self.initial_guess == "file" and not self.initial_path:
            raise ConfigError("initial_guess = file needs initial_path")

    def shift_for(self, mu: float) -> float:
        floor = mu * mu / 4.0 + 0.1 if mu < 0 else 0.0
        if self.shift is None:
            return max(0.1, floor)
        if mu < 0 and self.shift < floor:
            raise ConfigError(f"shift {self.shift} below mu^2/4 + 0.1 = {floor} for mu = {mu}")
        return self.shift


@dataclass
class PetviashviliConfig:
    stabilization: float | None = None
    max_iters: int = 5000
    fixed_point_tol: float = 1e-11
    factor_tol: float = 1e-8
    residual_tol: float = 1e-6
    initial_width: float = 1.0
    linear_symbol: np.ndarray | None = None

    def exponent_for(self, p: float) -> float:
        g = p / (p - 1.0) if self.stabilization is None else self.stabilization
        if not (1.0 < g < p + 1.0):
            raise ConfigError(f"stabilization exponent {g} outside (1, p+1)")
        return g


@dataclass
class GroundStateResult:
    profile: Field
    energy: float
    lagrange_omega: float
    pohozaev: PohozaevResiduals
    iterations: int
    converged: bool
    problem_tag: ProblemTag
    params: ModelParams
    status: Status = "converged"
    equation_residual: float = float("nan")
    breakdown: EnergyBreakdown | None = None
    history: list[tuple[int, float, float, float, float]] = field(default_factory=list, repr=False)
    factors: list[float] = field(default_factory=list, repr=False)
    message: str = ""

    @property
    def diverged(self) -> bool:
        return self.status == "diverged"

    def write_log(self, path: str | os.PathLike) -> None:
        """Per-iteration convergence log as CSV."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["iter", "energy", "residual_r1", "residual_r2", "mass_drift"])
            for row in self.history:
                w.writerow([row[0]] + [repr(float(v)) for v in row[1:]])


# -- initial data ----------------------------------------------------------

def initial_guess(grid: Grid, kind: str = "gaussian", c: float = 1.0, width: float = 1.0,
                  path: str | None = None) -> Field:
    r2 = grid.radius_sq()
    if kind == "gaussian":
        v = np.exp(-r2 / (2.0 * width**2))
    elif kind == "sech":
        v = 1.0 / np.cosh(np.sqrt(r2) / width)
    elif kind == "ring":
        r0 = 2.0 * width
        v = np.exp(-r2 / (2.0 * (2.0 * width) ** 2)) * np.exp(-((np.sqrt(r2) - r0) ** 2) / (2.0 * width**2))
    elif kind == "file":
        from .snapshot import read_snapshot

        f, _ = read_snapshot(path)
        if not f.grid.same_as(grid):
            from .errors import GridMismatchError

            raise GridMismatchError(f"initial snapshot grid {f.grid!r} differs from {grid!r}")
        v = f.physical()
    else:
        raise ConfigError(f"unknown initial guess {kind!r}")
    f = Field(grid, v.astype(np.complex128))
    return _normalize(f, c)


def _normalize(f: Field, c: float) -> Field:
    m = spectral_quad(f.grid, np.abs(f.spectral()) ** 2)
    return f.scaled(c / math.sqrt(m))


def gauge_fix(f: Field) -> Field:
    """Roll max |u| to the grid centre and rotate the phase there to zero."""
    u = f.physical()
    g = f.grid
    peak = np.unravel_index(np.argmax(np.abs(u)), u.shape)
    shift = tuple(ci - pi for ci, pi in zip(g.center_index, peak))
    u = np.roll(u, shift, axis=tuple(range(g.dim)))
    z = u[g.center_index]
    if z != 0:
        u = u * (abs(z) / z)
    return Field(g, u)


def problem_coefficient(params: ModelParams, problem: ProblemTag) -> float:
    """Nonlinear coefficient of the energy being minimized."""
    if problem == "VP":
        if params.regime != "subcritical":
            raise RegimeError(f"(VP) needs 1 < p < 1+8/d, got p = {params.p}")
        return 1.0
    if problem in ("VPb", "MinPc"):
        if not params.is_critical:
            raise RegimeError(f"{problem} needs p = 1+8/d = {params.critical_p}, got p = {params.p}")
        if problem == "MinPc":
            return 1.0
        return params.b
    raise RegimeError(f"unknown constrained problem {problem!r}")


def participation_ratio(f: Field) -> float:
    """(int|u|^2)^2 / (|box| int|u|^4); equals 1 for a constant state."""
    g = f.grid
    a = np.abs(f.physical()) ** 2
    m = a.sum() * g.cell_volume
    q = (a**2).sum() * g.cell_volume
    return float(m * m / (g.box_length**g.dim * q)) if q > 0 else 1.0


# -- normalized gradient flow -----------------------------------------------

def solve_constrained(
    params: ModelParams,
    grid: Grid,
    cfg: GradientFlowConfig | None = None,
    problem: ProblemTag = "VP",
    initial: Field | None = None,
) -> GroundStateResult:
    """Minimize the problem's energy on ||u||_2 = params.c by gradient flow.

    Each step solves, mode by mode,

        (1 + tau (|xi|^4 + mu |xi|^2 + alpha)) u_new^ = u^ + tau (N(u) + (alpha + lam) u)^

    with N(u) = coef |u|^{p-1} u and lam the current constrained multiplier
    (Rayleigh quotient of the gradient). Fixed points are exact solutions of
    D^2 u - mu D u - N(u) = lam u, so omega = -lam. The iterate is rescaled
    back to the sphere after every step.
    """
    cfg = cfg or GradientFlowConfig()
    if params.d != grid.dim:
        raise RegimeError(f"params.d = {params.d} but grid.dim = {grid.dim}")
    coef = problem_coefficient(params, problem)
    p, mu, c = params.p, params.mu, params.c
    alpha = cfg.shift_for(mu)
    tau = cfg.time_step
    sym = grid.k4 + mu * grid.k2
    w = grid.cell_volume / grid.size
    c2 = c * c
    pohozaev_coef = coef * (p - 1.0) * grid.dim / (4.0 * p + 4.0)

    if initial is None:
        initial = initial_guess(grid, cfg.initial_guess, c, cfg.initial_width, cfg.initial_path)
    else:
        initial = _normalize(initial, c)

    uh = initial.spectral().copy()

    def evaluate(vh):
        v = np.fft.ifftn(vh)
        a2 = np.abs(vh) ** 2
        A = float(np.sum(grid.k4 * a2)) * w
        G = float(np.sum(grid.k2 * a2)) * w
        nl = coef * power_nonlinearity(v, p)
        P = float(np.real(np.vdot(v, nl))) * grid.cell_volume / coef
        E = 0.5 * A + 0.5 * mu * G - coef * P / (p + 1.0)
        return v, nl, A, G, P, E

    u, nl, A, G, P, E = evaluate(uh)
    lap0 = math.sqrt(A)
    E0 = E
    history: list[tuple[int, float, float, float, float]] = []
    status: Status = "max_iters"
    halvings = 0
    res_rel = float("inf")
    message = ""
    n = 0
    for n in range(cfg.max_iters + 1):
        nh = np.fft.fftn(nl)
        lam = (float(np.sum(sym * np.abs(uh) ** 2)) * w - float(np.real(np.vdot(uh, nh))) * w) / c2
        grad_h = sym * uh - nh - lam * uh
        res_rel = math.sqrt(float(np.sum(np.abs(grad_h) ** 2)) * w) / c
        r2 = A + 0.5 * mu * G - pohozaev_coef * P
        scale = max(A, abs(0.5 * mu * G), pohozaev_coef * P)
        if cfg.record_history:
            mass = float(np.sum(np.abs(uh) ** 2)) * w
            omega = -lam
            r1 = A + mu * G + omega * mass - coef * P
            history.append((n, E, abs(r1) / scale, abs(r2) / scale, abs(mass - c2) / c2))
        if n > 0 and abs(dE) < cfg.energy_tol * max(1.0, abs(E)) and abs(r2) / scale < cfg.residual_tol \
                and res_rel < cfg.equation_tol:
            status = "converged"
            break
        if n == cfg.max_iters:
            break

        a_n = max(alpha, -lam + 0.1)
        while True:
            vh = (uh + tau * (nh + (a_n + lam) * uh)) / (1.0 + tau * (sym + a_n))
            vh *= c / math.sqrt(float(np.sum(np.abs(vh) ** 2)) * w)
            v, nl_v, A_v, G_v, P_v, E_v = evaluate(vh)
            noise = 1e-13 * (A_v + abs(mu) * G_v + coef * P_v)
            if E_v <= E + noise or halvings >= cfg.max_halvings:
                break
            tau *= 0.5
            halvings += 1
            log.debug("energy increase at iter %d; tau -> %g", n, tau)
        dE = E - E_v
        uh, u, nl, A, G, P, E = vh, v, nl_v, A_v, G_v, P_v, E_v

        if not math.isfinite(E):
            status, message = "diverged", "non-finite energy"
            break
        decreasing = E < E0
        if E < cfg.divergence_energy:
            status, message = "diverged", f"energy {E:.3e} below {cfg.divergence_energy:.0e}"
            break
        if decreasing and math.sqrt(A) > cfg.divergence_growth * lap0:
            status, message = "diverged", f"||Du|| grew {math.sqrt(A) / lap0:.1f}x"
            break
        if decreasing and spectral_tail_fraction(Field(grid, vh, "spectral")) > cfg.collapse_tail:
            status = "diverged"
            message = f"collapse to grid scale (||Du|| grew {math.sqrt(A) / lap0:.1f}x, energy {E:.3e})"
            break
        if cfg.vanishing_ratio is not None and n % 50 == 0:
            if participation_ratio(Field(grid, u)) > cfg.vanishing_ratio:
                status, message = "vanishing", "state spread over the box"
                break

    profile = Field(grid, np.fft.ifftn(uh))
    if status == "converged":
        profile = gauge_fix(profile)
    breakdown = energy_parts(profile, p, mu, coef)
    omega = omega_from_first_identity(profile, params, 1.0, coef)
    poh = pohozaev_residuals(profile, params, 1.0, omega, coef)
    converged = status == "converged"
    if status == "max_iters":
        message = f"no convergence after {cfg.max_iters} iterations (residual {res_rel:.2e})"
    return GroundStateResult(
        profile=profile,
        energy=breakdown.total,
        lagrange_omega=omega,
        pohozaev=poh,
        iterations=n,
        converged=converged,
        problem_tag=problem,
        params=params,
        status=status,
        equation_residual=res_rel,
        breakdown=breakdown,
        history=history,
        message=message,
    )


def solve_constrained_multistart(
    params: ModelParams,
    grid: Grid,
    cfg: GradientFlowConfig | None = None,
    problem: ProblemTag = "VP",
    starts: Sequence[tuple[str, float]] = (("gaussian", 1.0), ("gaussian", 2.5), ("sech", 0.7)),
) -> GroundStateResult:
    """Run the flow from several initial guesses and keep the lowest converged energy."""
    cfg = cfg or GradientFlowConfig()
    results = []
    for kind, width in starts:
        init = initial_guess(grid, kind, params.c, width)
        results.append(solve_constrained(params, grid, cfg, problem, initial=init))
    ok = [r for r in results if r.converged]
    pool = ok or results
    return min(pool, key=lambda r: r.energy)


# -- Petviashvili -------------------------------------------------------------

def profile_coefficients(which: str, params: ModelParams) -> tuple[float, float, float]:
    """(gamma, omega, p) of gamma D^2 Q + omega Q - |Q|^{p-1} Q = 0."""
    d = params.d
    if which == "qstar":
        return 1.0, 4.0 / d, 1.0 + 8.0 / d
    if which == "qp":
        p = params.p
        return (p - 1.0) * d / 8.0, 1.0 + (p - 1.0) * (4.0 - d) / 8.0, p
    raise ValueError(f"which must be 'qstar' or 'qp', got {which!r}")


def linear_symbol(which: str, params: ModelParams, grid: Grid) -> np.ndarray:
    gamma, omega, _ = profile_coefficients(which, params)
    return gamma * grid.k4 + omega


def solve_profile(
    which: Literal["qstar", "qp"],
    params: ModelParams,
    grid: Grid,
    cfg: PetviashviliConfig | None = None,
    initial: Field | None = None,
) -> GroundStateResult:
    """Petviashvili iteration for Q_p (qp) or Q* (qstar).

    Q_{n+1}^ = M_n^gamma N(Q_n)^ / L,  M_n = <L Q^, Q^> / <N(Q)^, Q^>,
    with N(Q) = |Q|^{p-1} Q and L the positive linear symbol.
    """
    cfg = cfg or PetviashviliConfig()
    gamma, omega, p = profile_coefficients(which, params)
    target = params if which == "qp" else params.replace(p=p)
    lin = linear_symbol(which, params, grid) if cfg.linear_symbol is None else np.asarray(cfg.linear_symbol)
    if np.any(lin <= 0):
        raise ConfigError("linear symbol must be positive on every mode")
    g_exp = cfg.exponent_for(p)
    tag: ProblemTag = "ProfileQstar" if which == "qstar" else "ProfileQp"

    q = initial if initial is not None else Field(
        grid, 1.5 * np.exp(-grid.radius_sq() / (2.0 * cfg.initial_width**2)).astype(np.complex128)
    )
    qh = q.spectral()
    factors: list[float] = []
    status: Status = "stagnation"
    step = float("inf")
    n = 0
    for n in range(1, cfg.max_iters + 1):
        qv = np.fft.ifftn(qh)
        nh = np.fft.fftn(power_nonlinearity(qv, p))
        m_n = float(np.real(np.vdot(qh, lin * qh)) / np.real(np.vdot(qh, nh)))
        factors.append(m_n)
        new = m_n**g_exp * nh / lin
        step = norm_H2(Field(grid, new - qh, "spectral"))
        qh = new
        if step < cfg.fixed_point_tol and abs(m_n - 1.0) < cfg.factor_tol:
            status = "converged"
            break
    if status != "converged":
        tail = np.abs(np.asarray(factors[-20:]) - 1.0)
        status = "oscillation" if tail.size and tail.min() > cfg.factor_tol else "stagnation"

    profile = gauge_fix(Field(grid, np.fft.ifftn(qh)))
    breakdown = energy_parts(profile, p, 0.0, 1.0)
    poh = pohozaev_residuals(profile, target.replace(mu=0.0), gamma, omega, 1.0)
    converged = status == "converged" and poh.max_normalized < cfg.residual_tol
    message = ""
    if status == "converged" and not converged:
        message = f"fixed point reached but Pohozaev residual {poh.max_normalized:.2e} >= {cfg.residual_tol}"
    res = _profile_equation_residual(profile, lin, p)
    return GroundStateResult(
        profile=profile,
        energy=breakdown.total,
        lagrange_omega=omega,
        pohozaev=poh,
        iterations=n,
        converged=converged,
        problem_tag=tag,
        params=target.replace(mu=0.0),
        status=status if converged or status != "converged" else "stagnation",
        equation_residual=res,
        breakdown=breakdown,
        factors=factors,
        message=message or (f"step {step:.2e}" if status != "converged" else ""),
    )


def _profile_equation_residual(q: Field, lin: np.ndarray, p: float) -> float:
    qh = q.spectral()
    r = lin * qh - np.fft.fftn(power_nonlinearity(q.physical(), p))
    g = q.grid
    return math.sqrt(spectral_quad(g, np.abs(r) ** 2) / spectral_quad(g, np.abs(qh) ** 2))


# -- parameter sweeps ----------------------------------------------------------

def _solve_point(args):
    params, grid, cfg, problem = args
    return solve_constrained(params, grid, cfg, problem)


def minimization_curve(
    params_list: Iterable[ModelParams],
    grid: Grid,
    cfg: GradientFlowConfig | None = None,
    problem: ProblemTag = "VP",
    workers: int = 1,
) -> list[tuple[float, float, GroundStateResult]]:
    """Solve each point of a mu- or b-sweep; returns (varied value, energy, result)."""
    plist = list(params_list)
    if not plist:
        return []
    base = plist[0]
    if any((q.d, q.p, q.c) != (base.d, base.p, base.c) for q in plist):
        raise ConfigError("a minimization curve needs shared (d, p, c)")
    vary_b = len({q.b for q in plist}) > 1
    if vary_b and len({q.mu for q in plist}) > 1:
        raise ConfigError("vary either mu or b, not both")
    cfg = cfg or GradientFlowConfig()
    jobs = [(q, grid, cfg, problem) for q in plist]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_solve_point, jobs))
    else:
        results = [_solve_point(j) for j in jobs]
    return [((q.b if vary_b else q.mu), r.energy, r) for q, r in zip(plist, results)]


def result_from_field(
    f: Field, params: ModelParams, problem: ProblemTag = "VP", residual_tol: float = 1e-6
) -> GroundStateResult:
    """Re-certify a stored profile: omega from the first identity, converged
    when the mass matches c to 1e-10 and both identities hold to residual_tol."""
    coef = problem_coefficient(params, problem)
    breakdown = energy_parts(f, params.p, params.mu, coef)
    omega = omega_from_first_identity(f, params, 1.0, coef)
    poh = pohozaev_residuals(f, params, 1.0, omega, coef)
    m = spectral_quad(f.grid, np.abs(f.spectral()) ** 2)
    mass_ok = abs(math.sqrt(m) - params.c) <= 1e-10 * params.c
    ok = mass_ok and poh.max_normalized < residual_tol
    msg = "" if ok else f"stored profile fails certification (mass ok: {mass_ok}, Pohozaev {poh.max_normalized:.2e})"
    return GroundStateResult(
        profile=f, energy=breakdown.total, lagrange_omega=omega, pohozaev=poh, iterations=0,
        converged=ok, problem_tag=problem, params=params, status="converged" if ok else "stagnation",
        breakdown=breakdown, message=msg,
    )
