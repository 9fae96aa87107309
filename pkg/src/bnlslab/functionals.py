"""Energies, the J-functional, Gagliardo-Nirenberg deficit, Pohozaev
identities and the mass-preserving dilation u -> rho^{d/2} u(rho x)."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace
from typing import TYPE_CHECKING

import numpy as np

from .errors import DilationRangeError, NonFiniteError, RegimeError, ZeroFieldError
from .grid import Field, quad, quadratic_parts

if TYPE_CHECKING:
    from .thresholds import GNConstants

P_CAP = 64.0
CRITICAL_TOL = 1e-12


@dataclass(frozen=True)
class ModelParams:
    """(d, p, mu, b, c) identifying one variational problem.

    ``c`` is the L^2 norm of the constraint sphere, ``||u||_2 = c``.
    """

    d: int
    p: float
    mu: float = 0.0
    b: float = 1.0
    c: float = 1.0

    def __post_init__(self) -> None:
        if self.d not in (1, 2):
            raise RegimeError(f"d must be 1 or 2, got {self.d}")
        if not (1.0 < self.p < energy_critical_cap(self.d)):
            raise RegimeError(f"p must lie in (1, {energy_critical_cap(self.d)}), got {self.p}")
        if not self.b > 0:
            raise RegimeError(f"b must be positive, got {self.b}")
        if not self.c > 0:
            raise RegimeError(f"c must be positive, got {self.c}")
        for name in ("p", "mu", "b", "c"):
            if not math.isfinite(getattr(self, name)):
                raise RegimeError(f"{name} must be finite")

    @property
    def critical_p(self) -> float:
        return 1.0 + 8.0 / self.d

    @property
    def regime(self) -> str:
        return classify_regime(self.p, self.d)

    @property
    def is_critical(self) -> bool:
        return self.regime == "critical"

    @property
    def dilation_exponent(self) -> float:
        """(p-1)d/2: power of rho carried by ||u||_{p+1}^{p+1} under dilation."""
        return (self.p - 1.0) * self.d / 2.0

    def replace(self, **changes) -> "ModelParams":
        return replace(self, **changes)

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.p, self.mu, self.b, self.c)


def energy_critical_cap(d: int) -> float:
    """Upper bound 2d/(d-4)^+ - 1 on p, replaced by P_CAP when d <= 4."""
    if d <= 4:
        return P_CAP
    return 2.0 * d / (d - 4) - 1.0


def classify_regime(p: float, d: int) -> str:
    pc = 1.0 + 8.0 / d
    if abs(p - pc) <= CRITICAL_TOL:
        return "critical"
    return "subcritical" if p < pc else "supercritical"


# -- pointwise nonlinearity ----------------------------------------------------

def power_nonlinearity(u: np.ndarray, p: float) -> np.ndarray:
    """|u|^{p-1} u with 0 mapped to 0 for any p > 1."""
    mod = np.sqrt(u.real**2 + u.imag**2)
    out = np.zeros_like(u)
    nz = mod > 0
    out[nz] = mod[nz] ** (p - 1.0) * u[nz]
    return out


def potential_integral(f: Field, p: float) -> float:
    """int |f|^{p+1}."""
    u = f.physical()
    return quad(f.grid, np.sqrt(u.real**2 + u.imag**2) ** (p + 1.0))


# -- energies --------------------------------------------------------------

@dataclass(frozen=True)
class EnergyBreakdown:
    biharmonic_term: float
    gradient_term: float
    potential_term: float
    total: float


def _check_finite(u: Field) -> None:
    if not u.is_finite():
        raise NonFiniteError("energy of a non-finite field")


def energy_parts(u: Field, p: float, mu: float, coef: float) -> EnergyBreakdown:
    """1/2||Du||^2 + mu/2||grad u||^2 - coef/(p+1) ||u||_{p+1}^{p+1}, term by term."""
    _check_finite(u)
    a, g, _ = quadratic_parts(u)
    bih = 0.5 * a
    grad = 0.5 * mu * g
    pot = coef / (p + 1.0) * potential_integral(u, p)
    return EnergyBreakdown(bih, grad, pot, bih + grad - pot)


def energy_mu(u: Field, params: ModelParams) -> EnergyBreakdown:
    """E_mu(u) with unit nonlinear coefficient."""
    return energy_parts(u, params.p, params.mu, 1.0)


def energy_mub(u: Field, params: ModelParams) -> EnergyBreakdown:
    """E_{mu,b}(u); defined only at the mass-critical power p = 1 + 8/d."""
    if not params.is_critical:
        raise RegimeError(f"E_mu,b requires p = 1+8/d = {params.critical_p}, got p = {params.p}")
    return energy_parts(u, params.critical_p, params.mu, params.b)


def model_energy(u: Field, params: ModelParams) -> EnergyBreakdown:
    """E_{mu,b} in the critical case, E_mu otherwise (b is ignored there)."""
    if params.is_critical:
        return energy_mub(u, params)
    return energy_mu(u, params)


# -- J functional and GN inequality -------------------------------------------

def _norms_for_gn(u: Field, params: ModelParams) -> tuple[float, float, float]:
    a, _, m = quadratic_parts(u)
    if m == 0.0:
        raise ZeroFieldError("J_{p,d} and the GN deficit are undefined at u = 0")
    return math.sqrt(a), math.sqrt(m), potential_integral(u, params.p)


def j_functional(u: Field, params: ModelParams) -> float:
    """||Du||^{(p-1)d/4} ||u||^{p+1-(p-1)d/4} / ||u||_{p+1}^{p+1}."""
    p, d = params.p, params.d
    lap, l2, pot = _norms_for_gn(u, params)
    s = (p - 1.0) * d / 4.0
    return lap**s * l2 ** (p + 1.0 - s) / pot


def gn_exponents(p: float, d: int) -> tuple[float, float]:
    """Exponents of ||v||_2 and ||Dv||_2 in the GN inequality."""
    return ((4.0 - d) * p + 4.0 + d) / 4.0, (p - 1.0) * d / 4.0


def gn_deficit(u: Field, params: ModelParams, gn: "GNConstants") -> tuple[float, float]:
    """Return (deficit, scale) where deficit = B ||u||^a ||Du||^b - ||u||_{p+1}^{p+1}.

    The sharp inequality makes deficit >= 0; ``scale`` is the larger of the two
    sides and is what tolerances are measured against.
    """
    lap, l2, pot = _norms_for_gn(u, params)
    e_l2, e_lap = gn_exponents(params.p, params.d)
    bound = gn.B_pd * l2**e_l2 * lap**e_lap
    return bound - pot, max(abs(bound), abs(pot))


# -- Pohozaev identities -------------------------------------------------------

@dataclass(frozen=True)
class PohozaevResiduals:
    """Residuals of the two integral identities for
    gamma D^2 u - mu D u - c |u|^{p-1} u = -omega u."""

    r1: float
    r2: float
    relative_scale: float

    @property
    def r1_normalized(self) -> float:
        return abs(self.r1) / self.relative_scale if self.relative_scale else abs(self.r1)

    @property
    def r2_normalized(self) -> float:
        return abs(self.r2) / self.relative_scale if self.relative_scale else abs(self.r2)

    @property
    def max_normalized(self) -> float:
        return max(self.r1_normalized, self.r2_normalized)


def pohozaev_residuals(
    u: Field, params: ModelParams, gamma: float, omega: float, c_coef: float
) -> PohozaevResiduals:
    p, d, mu = params.p, params.d, params.mu
    a, g, m = quadratic_parts(u)
    pot = potential_integral(u, p)
    t1 = (gamma * a, mu * g, omega * m, c_coef * pot)
    t2 = (gamma * a, 0.5 * mu * g, c_coef * (p - 1.0) * d / (4.0 * p + 4.0) * pot)
    r1 = t1[0] + t1[1] + t1[2] - t1[3]
    r2 = t2[0] + t2[1] - t2[2]
    scale = max(abs(t) for t in t1 + t2)
    return PohozaevResiduals(r1, r2, scale)


def omega_from_first_identity(u: Field, params: ModelParams, gamma: float, c_coef: float) -> float:
    """Solve r1 = 0 for omega."""
    a, g, m = quadratic_parts(u)
    if m == 0.0:
        raise ZeroFieldError("omega undefined at u = 0")
    return (c_coef * potential_integral(u, params.p) - gamma * a - params.mu * g) / m


# -- dilation ---------------------------------------------------------------

RHO_MIN, RHO_MAX = 0.25, 4.0
ALIAS_TOL = 1e-8
# only the top of the band signals lost resolution
TAIL_CUTOFF = 0.9


def _interp_matrix(grid, rho: float) -> np.ndarray:
    """E[j, k] evaluates the trigonometric interpolant at rho * x_j.

    Points with |rho x_j| >= L/2 fall outside the box and get zero rows, so
    the field is treated as compactly supported in the box rather than
    periodic. The Nyquist column uses the symmetric cosine so real data stays real.
    """
    n = grid.points_per_axis
    xs = rho * grid.axis
    xi = grid.wavenumbers
    # FFT samples sit at x0 + j h with x0 = axis[0]
    xr = xs - grid.axis[0]
    e = np.exp(1j * np.outer(xr, xi))
    e[:, n // 2] = np.cos(xi[n // 2] * xr)
    # the interpolant is periodic in x; the box is centred at 0
    inside = np.abs(xs) < grid.box_length / 2
    e[~inside, :] = 0.0
    return e / n


def dilate(u: Field, rho: float, warn: bool = True) -> Field:
    """u^rho(x) = rho^{d/2} u(rho x), by evaluating the Fourier interpolant of u."""
    if not (RHO_MIN <= rho <= RHO_MAX):
        raise DilationRangeError(f"rho must lie in [{RHO_MIN}, {RHO_MAX}], got {rho}")
    g = u.grid
    uh = u.spectral()
    e = _interp_matrix(g, rho)
    if g.dim == 1:
        v = e @ uh
    else:
        v = e @ uh @ e.T
    out = Field(g, rho ** (g.dim / 2.0) * v)
    if warn:
        from .grid import boundary_amplitude, spectral_tail_fraction

        tail = math.sqrt(spectral_tail_fraction(out, cutoff=TAIL_CUTOFF))
        edge = boundary_amplitude(out)
        if tail > ALIAS_TOL or edge > ALIAS_TOL:
            warnings.warn(
                f"dilation by rho={rho}: spectral tail {tail:.2e}, boundary amplitude {edge:.2e}",
                stacklevel=2,
            )
    return out


def dilation_energy_closed_form(v0: Field, params: ModelParams, rho: float, coef: float = 1.0) -> float:
    """rho^4/2 ||Dv0||^2 + mu rho^2/2 ||grad v0||^2 - rho^{(p-1)d/2}/(p+1) coef ||v0||_{p+1}^{p+1}."""
    a, g, _ = quadratic_parts(v0)
    pot = potential_integral(v0, params.p)
    return (
        0.5 * rho**4 * a
        + 0.5 * params.mu * rho**2 * g
        - coef * rho**params.dilation_exponent / (params.p + 1.0) * pot
    )
