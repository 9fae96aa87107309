"""Periodic Fourier discretization of R^d (d = 1, 2).

The box is [-L/2, L/2)^d with N points per axis. Wavenumbers follow the
standard FFT ordering ``xi = 2*pi*k/L`` with ``k = 0, 1, ..., N/2-1, -N/2, ..., -1``.
Transforms are numpy's unnormalized FFT, so for the uniform-weight quadrature

    int |u|^2 dx = h^d * sum |u_j|^2 = (h^d / N^d) * sum |u_hat_k|^2

where ``h = L/N`` is the grid spacing.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Literal

import numpy as np

from .errors import (
    GridMismatchError,
    InvalidDimensionError,
    NonFiniteError,
    NonPositiveLengthError,
    NonPowerOfTwoError,
)

Space = Literal["physical", "spectral"]
SymbolKind = Literal["laplacian", "bilaplacian", "gradient_sq_form"]


@dataclass(frozen=True, eq=False)
class Grid:
    """Immutable periodic grid with precomputed Fourier multipliers."""

    dim: int
    points_per_axis: int
    box_length: float

    @property
    def n(self) -> int:
        return self.points_per_axis

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.points_per_axis,) * self.dim

    @property
    def spacing(self) -> float:
        return self.box_length / self.points_per_axis

    @property
    def cell_volume(self) -> float:
        return self.spacing**self.dim

    @property
    def size(self) -> int:
        return self.points_per_axis**self.dim

    @property
    def key(self) -> tuple[int, int, float]:
        return (self.dim, self.points_per_axis, float(self.box_length))

    def same_as(self, other: "Grid") -> bool:
        return self is other or self.key == other.key

    @cached_property
    def axis(self) -> np.ndarray:
        """Physical coordinates along one axis, centred so that x[N/2] = 0."""
        n = self.points_per_axis
        return (np.arange(n) - n // 2) * self.spacing

    @cached_property
    def wavenumbers(self) -> np.ndarray:
        """Per-axis wavenumbers in FFT ordering."""
        return 2.0 * np.pi * np.fft.fftfreq(self.points_per_axis, d=self.spacing)

    @cached_property
    def coords(self) -> tuple[np.ndarray, ...]:
        return tuple(np.meshgrid(*([self.axis] * self.dim), indexing="ij"))

    @cached_property
    def xi(self) -> tuple[np.ndarray, ...]:
        return tuple(np.meshgrid(*([self.wavenumbers] * self.dim), indexing="ij"))

    @cached_property
    def k2(self) -> np.ndarray:
        """|xi|^2 on the full spectral array."""
        out = sum(w**2 for w in self.xi)
        out.flags.writeable = False
        return out

    @cached_property
    def k4(self) -> np.ndarray:
        """|xi|^4 on the full spectral array."""
        out = self.k2**2
        out.flags.writeable = False
        return out

    @property
    def max_wavenumber(self) -> float:
        return float(np.max(np.abs(self.wavenumbers)))

    @property
    def center_index(self) -> tuple[int, ...]:
        return (self.points_per_axis // 2,) * self.dim

    def radius_sq(self) -> np.ndarray:
        return sum(c**2 for c in self.coords)

    def check(self, values: np.ndarray) -> None:
        if values.shape != self.shape:
            raise GridMismatchError(f"array shape {values.shape} does not match grid {self.shape}")

    def __repr__(self) -> str:
        return f"Grid(dim={self.dim}, N={self.points_per_axis}, L={self.box_length:g})"


def make_grid(dim: int, n: int, length: float) -> Grid:
    """Build a Grid after validating (dim, N, L)."""
    if dim not in (1, 2):
        raise InvalidDimensionError(f"dim must be 1 or 2, got {dim}")
    if int(n) != n or n < 16 or (int(n) & (int(n) - 1)) != 0:
        raise NonPowerOfTwoError(f"N must be a power of two >= 16, got {n}")
    if not np.isfinite(length) or length <= 0:
        raise NonPositiveLengthError(f"box length must be positive, got {length}")
    return Grid(int(dim), int(n), float(length))


@dataclass(eq=False)
class Field:
    """Discretized wave function bound to a grid.

    ``values`` is stored in the representation named by ``space``; spectral
    values are the unnormalized FFT of the physical samples.
    """

    grid: Grid
    values: np.ndarray
    space: Space = "physical"

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=np.complex128)
        self.grid.check(self.values)
        if self.space not in ("physical", "spectral"):
            raise ValueError(f"unknown space {self.space!r}")

    @classmethod
    def from_function(cls, grid: Grid, func) -> "Field":
        return cls(grid, func(*grid.coords))

    @classmethod
    def zeros(cls, grid: Grid) -> "Field":
        return cls(grid, np.zeros(grid.shape, dtype=np.complex128))

    def physical(self) -> np.ndarray:
        if self.space == "physical":
            return self.values
        return np.fft.ifftn(self.values)

    def spectral(self) -> np.ndarray:
        if self.space == "spectral":
            return self.values
        return np.fft.fftn(self.values)

    def to_physical(self) -> "Field":
        return Field(self.grid, self.physical(), "physical")

    def to_spectral(self) -> "Field":
        return Field(self.grid, self.spectral(), "spectral")

    def copy(self) -> "Field":
        return Field(self.grid, self.values.copy(), self.space)

    def with_values(self, values: np.ndarray) -> "Field":
        return Field(self.grid, values, "physical")

    def scaled(self, alpha: complex) -> "Field":
        return Field(self.grid, alpha * self.values, self.space)

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.values)))

    def __add__(self, other: "Field") -> "Field":
        _same_grid(self, other)
        return Field(self.grid, self.physical() + other.physical())

    def __sub__(self, other: "Field") -> "Field":
        _same_grid(self, other)
        return Field(self.grid, self.physical() - other.physical())

    def __mul__(self, alpha: complex) -> "Field":
        return self.scaled(alpha)

    __rmul__ = __mul__

    def __len__(self) -> int:
        return self.values.size


def as_array(f: Field | np.ndarray) -> np.ndarray:
    return f.physical() if isinstance(f, Field) else np.asarray(f)


def _same_grid(f: Field, g: Field) -> None:
    if not f.grid.same_as(g.grid):
        raise GridMismatchError(f"{f.grid!r} vs {g.grid!r}")


def _require_finite(values: np.ndarray) -> None:
    if not np.all(np.isfinite(values)):
        raise NonFiniteError("field contains NaN or Inf")


# -- quadrature ---------------------------------------------------------------

def quad(grid: Grid, density: np.ndarray) -> float:
    """Uniform-weight quadrature of a physical-space density."""
    return float(np.real(np.sum(density))) * grid.cell_volume


def spectral_quad(grid: Grid, density_hat: np.ndarray) -> float:
    """Quadrature of a spectral-side density (Parseval weight h^d / N^d)."""
    return float(np.real(np.sum(density_hat))) * grid.cell_volume / grid.size


def apply_symbol(f: Field, kind: SymbolKind):
    """Apply a Fourier multiplier.

    ``laplacian`` multiplies spectral values by -|xi|^2, ``bilaplacian`` by
    |xi|^4; both return a Field. ``gradient_sq_form`` returns ||grad f||_2^2.
    """
    fh = f.spectral()
    _require_finite(fh)
    g = f.grid
    if kind == "laplacian":
        return Field(g, np.fft.ifftn(-g.k2 * fh))
    if kind == "bilaplacian":
        return Field(g, np.fft.ifftn(g.k4 * fh))
    if kind == "gradient_sq_form":
        return spectral_quad(g, g.k2 * np.abs(fh) ** 2)
    raise ValueError(f"unknown multiplier kind {kind!r}")


def inner(f: Field, g: Field) -> complex:
    """L^2 inner product, conjugate-linear in the first argument."""
    _same_grid(f, g)
    return complex(np.vdot(f.physical(), g.physical())) * f.grid.cell_volume


def norm_L2(f: Field) -> float:
    return float(np.sqrt(quad(f.grid, np.abs(f.physical()) ** 2)))


def norm_Lq(f: Field, q: float) -> float:
    if not (1.0 <= q < np.inf):
        raise ValueError(f"q must lie in [1, inf), got {q}")
    return quad(f.grid, np.abs(f.physical()) ** q) ** (1.0 / q)


def mass(f: Field) -> float:
    """int |f|^2."""
    return quad(f.grid, np.abs(f.physical()) ** 2)


def quadratic_parts(f: Field) -> tuple[float, float, float]:
    """(||Delta f||^2, ||grad f||^2, ||f||^2) from one transform."""
    g = f.grid
    a = np.abs(f.spectral()) ** 2
    return spectral_quad(g, g.k4 * a), spectral_quad(g, g.k2 * a), spectral_quad(g, a)


def norm_H2(f: Field) -> float:
    """(||Delta f||_2^2 + ||f||_2^2)^(1/2)."""
    g = f.grid
    return float(np.sqrt(spectral_quad(g, (1.0 + g.k4) * np.abs(f.spectral()) ** 2)))


def spectral_shift(f: Field, shift: np.ndarray | tuple[float, ...]) -> Field:
    """Translate f(x) -> f(x - y) by Fourier interpolation; y may be sub-cell."""
    g = f.grid
    phase = sum(w * y for w, y in zip(g.xi, np.broadcast_to(shift, (g.dim,))))
    return Field(g, np.fft.ifftn(f.spectral() * np.exp(-1j * phase)))


def spectral_tail_fraction(f: Field, cutoff: float = 2.0 / 3.0) -> float:
    """Fraction of L^2 mass carried by modes with max_j |xi_j| > cutoff * xi_max."""
    g = f.grid
    a = np.abs(f.spectral()) ** 2
    total = a.sum()
    if total == 0:
        return 0.0
    kmax = g.max_wavenumber
    mask = np.zeros(g.shape, dtype=bool)
    for w in g.xi:
        mask |= np.abs(w) > cutoff * kmax
    return float(a[mask].sum() / total)


def boundary_amplitude(f: Field) -> float:
    """max |f| on the box faces, relative to max |f|."""
    v = np.abs(f.physical())
    top = v.max()
    if top == 0:
        return 0.0
    edge = max(np.take(v, 0, axis=ax).max() for ax in range(v.ndim))
    return float(edge / top)


def dealias_mask(grid: Grid) -> np.ndarray:
    """2/3-rule mask on the spectral array."""
    kmax = grid.max_wavenumber
    mask = np.ones(grid.shape, dtype=bool)
    for w in grid.xi:
        mask &= np.abs(w) <= (2.0 / 3.0) * kmax
    return mask
