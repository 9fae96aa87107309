"""Split-step Fourier integration of i psi_t - D^2 psi + mu D psi + b |psi|^{p-1} psi = 0,
conservation monitoring, orbit distance and the perturbation experiment."""

from __future__ import annotations

import csv
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Literal, Sequence

import numpy as np

from .errors import ConfigError, GridMismatchError, NonFiniteError, NotConvergedError, ZeroFieldError
from .functionals import ModelParams, energy_parts
from .grid import Field, Grid, dealias_mask, norm_H2, spectral_quad
from .groundstate import GroundStateResult


@dataclass
class EvolutionConfig:
    """Time-stepping settings.

    ``nonlinear_coef`` overrides the potential coefficient (``None`` means b
    at the critical power, 1 otherwise; 0 switches the nonlinearity off).
    """

    dt: float = 1e-3
    t_final: float = 1.0
    splitting: Literal["lie", "strang"] = "strang"
    dealias: bool = False
    record_every: int = 10
    blowup_factor: float = 1e6
    nonlinear_coef: float | None = None

    def __post_init__(self) -> None:
        if not self.dt > 0:
            raise ConfigError("dt must be positive")
        if not self.t_final >= self.dt:
            raise ConfigError("t_final must be at least dt")
        if self.splitting not in ("lie", "strang"):
            raise ConfigError(f"unknown splitting {self.splitting!r}")
        if self.record_every < 1:
            raise ConfigError("record_every must be >= 1")

    @property
    def n_steps(self) -> int:
        return int(round(self.t_final / self.dt))

    def coefficient(self, params: ModelParams) -> float:
        if self.nonlinear_coef is not None:
            return self.nonlinear_coef
        return params.b if params.is_critical else 1.0


class _Stepper:
    """Precomputed propagators for one (grid, params, dt)."""

    def __init__(self, grid: Grid, params: ModelParams, cfg: EvolutionConfig, dt: float):
        self.p = params.p
        self.coef = cfg.coefficient(params)
        self.dt = dt
        self.strang = cfg.splitting == "strang"
        self.lin = np.exp(-1j * dt * (grid.k4 + params.mu * grid.k2))
        if cfg.dealias:
            self.lin = self.lin * dealias_mask(grid)

    def _nonlinear(self, u: np.ndarray, h: float) -> np.ndarray:
        if self.coef == 0.0:
            return u
        # overflow shows up as NaN and is reported by the caller
        with np.errstate(over="ignore", invalid="ignore"):
            mod = np.abs(u)
            return u * np.exp(1j * h * self.coef * mod ** (self.p - 1.0))

    def __call__(self, u: np.ndarray) -> np.ndarray:
        if self.strang:
            u = self._nonlinear(u, 0.5 * self.dt)
            u = np.fft.ifftn(self.lin * np.fft.fftn(u))
            return self._nonlinear(u, 0.5 * self.dt)
        u = self._nonlinear(u, self.dt)
        return np.fft.ifftn(self.lin * np.fft.fftn(u))


def step(psi: Field, params: ModelParams, cfg: EvolutionConfig, dt: float | None = None) -> Field:
    """One splitting step; ``dt`` may be negative to run backwards."""
    if not psi.is_finite():
        raise NonFiniteError("cannot step a non-finite field")
    st = _Stepper(psi.grid, params, cfg, cfg.dt if dt is None else dt)
    out = st(psi.physical())
    if not np.all(np.isfinite(out)):
        raise NonFiniteError("step produced NaN/Inf")
    return Field(psi.grid, out)


@dataclass
class EvolutionTrace:
    times: np.ndarray
    mass: np.ndarray
    energy: np.ndarray
    h2_norm: np.ndarray
    orbit_distance: np.ndarray | None
    blowup_flag: bool
    final: Field
    message: str = ""

    @property
    def mass_drift(self) -> float:
        return float(np.max(np.abs(self.mass - self.mass[0])) / self.mass[0])

    @property
    def energy_drift(self) -> float:
        return float(np.max(np.abs(self.energy - self.energy[0])))

    def write_csv(self, path: str | os.PathLike) -> None:
        dist = self.orbit_distance if self.orbit_distance is not None else np.full(self.times.shape, np.nan)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "mass", "energy", "h2_norm", "orbit_distance"])
            for row in zip(self.times, self.mass, self.energy, self.h2_norm, dist):
                w.writerow([repr(float(v)) for v in row])


def evolve(psi0: Field, params: ModelParams, cfg: EvolutionConfig, reference: Field | None = None) -> EvolutionTrace:
    """Integrate to t_final, recording diagnostics every ``record_every`` steps.

    The run stops with ``blowup_flag`` set when the H^2 norm exceeds
    ``blowup_factor`` times its initial value or when the field turns non-finite.
    """
    g = psi0.grid
    if reference is not None and not reference.grid.same_as(g):
        raise GridMismatchError("reference field lives on a different grid")
    if not psi0.is_finite():
        raise NonFiniteError("initial field is not finite")
    st = _Stepper(g, params, cfg, cfg.dt)
    coef = st.coef
    times, mass, energy, h2, dist = [], [], [], [], []

    def record(t, u):
        f = Field(g, u)
        uh = f.spectral()
        a2 = np.abs(uh) ** 2
        times.append(t)
        mass.append(spectral_quad(g, a2))
        energy.append(energy_parts(f, params.p, params.mu, coef).total)
        h2.append(math.sqrt(spectral_quad(g, (1.0 + g.k4) * a2)))
        if reference is not None:
            dist.append(orbit_distance(f, reference).distance)

    u = psi0.physical().copy()
    record(0.0, u)
    limit = cfg.blowup_factor * h2[0]
    blow, msg = False, ""
    n = cfg.n_steps
    for i in range(1, n + 1):
        u = st(u)
        if not np.all(np.isfinite(u)):
            blow, msg = True, f"non-finite field at step {i}"
            break
        if i % cfg.record_every == 0 or i == n:
            record(i * cfg.dt, u)
            if h2[-1] > limit:
                blow, msg = True, f"H2 norm exceeded {cfg.blowup_factor:g}x initial at t = {times[-1]:g}"
                break
    final = Field(g, u) if np.all(np.isfinite(u)) else Field(g, np.nan_to_num(u))
    return EvolutionTrace(
        np.asarray(times), np.asarray(mass), np.asarray(energy), np.asarray(h2),
        np.asarray(dist) if reference is not None else None, blow, final, msg,
    )


# -- orbit distance --------------------------------------------------------

@dataclass(frozen=True)
class OrbitDistanceResult:
    distance: float
    best_shift: tuple[int, ...]
    best_phase: float
    refined_shift: tuple[float, ...] = ()


def _h2_distance(psi_h: np.ndarray, u_h: np.ndarray, g: Grid, shift, phase: float) -> float:
    ph = sum(w * y for w, y in zip(g.xi, shift))
    diff = psi_h - np.exp(1j * phase) * u_h * np.exp(-1j * ph)
    return math.sqrt(spectral_quad(g, (1.0 + g.k4) * np.abs(diff) ** 2))


def orbit_distance(psi: Field, u: Field, refine: bool = True) -> OrbitDistanceResult:
    """min over phase and translation of ||psi - e^{i theta} u(. - y)||_{H^2}.

    All grid shifts are scored at once by an H^2-weighted cross-correlation;
    the best one is optionally refined per axis by a 3-point parabola.
    """
    g = psi.grid
    if not u.grid.same_as(g):
        raise GridMismatchError("orbit distance between fields on different grids")
    ph, uh = psi.spectral(), u.spectral()
    if not np.any(uh):
        raise ZeroFieldError("orbit reference is zero")
    w = (1.0 + g.k4)
    corr = np.fft.ifftn(w * np.conj(uh) * ph)
    amp = np.abs(corr)
    idx = np.unravel_index(int(np.argmax(amp)), amp.shape)
    n = g.points_per_axis
    signed = tuple(int(i) if i < n // 2 else int(i) - n for i in idx)
    h = g.spacing
    shift = tuple(s * h for s in signed)
    theta = float(np.angle(corr[idx]))
    best = _h2_distance(ph, uh, g, shift, theta)
    refined = shift
    if refine:
        frac = []
        for ax in range(g.dim):
            lo = list(idx)
            hi = list(idx)
            lo[ax] = (idx[ax] - 1) % n
            hi[ax] = (idx[ax] + 1) % n
            a_m, a_0, a_p = amp[tuple(lo)], amp[idx], amp[tuple(hi)]
            den = a_m - 2.0 * a_0 + a_p
            frac.append(0.5 * (a_m - a_p) / den if den < 0 else 0.0)
        cand = tuple((s + f) * h for s, f in zip(signed, frac))
        phase_sum = sum(wv * y for wv, y in zip(g.xi, cand))
        c = np.vdot(uh * np.exp(-1j * phase_sum), w * ph)
        th2 = float(np.angle(c))
        d2 = _h2_distance(ph, uh, g, cand, th2)
        if d2 < best:
            best, theta, refined = d2, th2, cand
    return OrbitDistanceResult(best, signed, theta % (2.0 * np.pi), tuple(float(y) for y in refined))


# -- perturbation experiment ---------------------------------------------------

def band_limited_noise(u: Field, seed: int = 0, band_fraction: float = 1.0 / 8.0) -> Field:
    """Complex noise on the lowest N*band_fraction modes per axis, H^2-orthogonal
    to u and of unit H^2 norm."""
    g = u.grid
    rng = np.random.default_rng(seed)
    n = g.points_per_axis
    half = max(1, int(n * band_fraction) // 2)
    idx = np.fft.fftfreq(n, d=1.0 / n)
    mask = np.ones(g.shape, dtype=bool)
    for ax in range(g.dim):
        shape = [1] * g.dim
        shape[ax] = n
        mask &= (np.abs(idx) < half).reshape(shape)
    eta = (rng.standard_normal(g.shape) + 1j * rng.standard_normal(g.shape)) * mask
    w = 1.0 + g.k4
    uh = u.spectral()
    eta = eta - np.vdot(w * uh, eta) / np.vdot(w * uh, uh) * uh
    f = Field(g, eta, "spectral")
    return Field(g, f.physical() / norm_H2(f))


@dataclass
class StabilityReport:
    deltas: list[float]
    sup_distance: list[float]
    blowup_flags: list[bool]
    linear_gain: float
    loglog_slope: float
    monotone: bool
    baseline: float
    t_final: float
    seed: int
    initial_distance: list[float] = field(default_factory=list)

    def bounded_by(self, factor: float) -> bool:
        return all(s <= factor * d for d, s in zip(self.deltas, self.sup_distance) if d > 0)

    def to_json(self, extra: dict | None = None) -> dict:
        out = {
            "delta": self.deltas,
            "sup_distance": self.sup_distance,
            "blowup_flags": self.blowup_flags,
            "initial_distance": self.initial_distance,
            "linear_gain": self.linear_gain,
            "loglog_slope": self.loglog_slope,
            "monotone": self.monotone,
            "baseline": self.baseline,
            "t_final": self.t_final,
            "seed": self.seed,
        }
        out.update(extra or {})
        return out

    def write_json(self, path: str | os.PathLike, extra: dict | None = None) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json(extra), fh, indent=2, sort_keys=True)
            fh.write("\n")


def _run_cell(args):
    psi0, params, cfg, ref = args
    tr = evolve(psi0, params, cfg, reference=ref)
    return float(np.max(tr.orbit_distance)), tr.blowup_flag, float(tr.orbit_distance[0])


def stability_experiment(
    ground: GroundStateResult,
    deltas: Sequence[float],
    params: ModelParams,
    cfg: EvolutionConfig,
    seed: int = 0,
    workers: int = 1,
) -> StabilityReport:
    """Evolve u + delta*noise (rescaled to u's mass) and record sup_t orbit distance."""
    if not ground.converged:
        raise NotConvergedError("stability experiment needs a converged ground state")
    ds = [float(d) for d in deltas]
    if any(not (0.0 <= d <= 0.1) for d in ds):
        raise ConfigError("perturbation sizes must lie in [0, 0.1]")
    u = ground.profile
    g = u.grid
    noise = band_limited_noise(u, seed)
    m_u = spectral_quad(g, np.abs(u.spectral()) ** 2)
    jobs = []
    for d in [0.0] + ds:
        v = u.physical() + d * noise.physical()
        v = v * math.sqrt(m_u / spectral_quad(g, np.abs(np.fft.fftn(v)) ** 2))
        jobs.append((Field(g, v), params, cfg, u))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            out = list(ex.map(_run_cell, jobs))
    else:
        out = [_run_cell(j) for j in jobs]
    baseline = out[0][0]
    sups = [o[0] for o in out[1:]]
    flags = [o[1] for o in out[1:]]
    init = [o[2] for o in out[1:]]
    pos = [(d, s) for d, s in zip(ds, sups) if d > 0]
    if pos:
        dd = np.array([t[0] for t in pos])
        ss = np.array([t[1] for t in pos])
        gain = float(np.dot(dd, ss) / np.dot(dd, dd))
        slope = float(np.polyfit(np.log(dd), np.log(ss), 1)[0]) if len(pos) > 1 else float("nan")
    else:
        gain, slope = float("nan"), float("nan")
    order = np.argsort(ds)
    monotone = bool(np.all(np.diff(np.asarray(sups)[order]) >= 0))
    return StabilityReport(ds, sups, flags, gain, slope, monotone, baseline, cfg.t_final, seed, init)
