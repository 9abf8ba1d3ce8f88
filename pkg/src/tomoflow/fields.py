"""Grid-backed containers shared by the tomography and evolution layers.

Conventions used throughout the package (hbar = 1):

* Wigner functions are normalized so that the double trapezoid integral
  over phase space equals 2*pi, i.e. integral W(q, p) dq dp / (2*pi) = 1.
* A homodyne-style marginal w(X, mu, nu, delta) is the probability density
  of the observable mu*q + nu*p + delta.  It obeys two exact identities:

      shift:    w(X, mu, nu, delta) = w(X - delta, mu, nu, 0)
      scaling:  w(l*X, l*mu, l*nu, l*delta) = w(X, mu, nu, delta) / |l|

All grids are uniform and ascending.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

MarginalEvaluator = Callable[..., np.ndarray]
WignerEvaluator = Callable[[np.ndarray, np.ndarray], np.ndarray]


def uniform_grid(lo: float, hi: float, n: int) -> np.ndarray:
    if not (np.isfinite(lo) and np.isfinite(hi)) or hi <= lo:
        raise ValueError(f"bad grid range [{lo}, {hi}]")
    if n < 2:
        raise ValueError(f"grid needs at least 2 points, got {n}")
    return np.linspace(float(lo), float(hi), int(n))


def grid_step(grid: np.ndarray) -> float:
    return float(grid[1] - grid[0])


def check_uniform(grid: np.ndarray, name: str = "grid") -> None:
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size < 2:
        raise ValueError(f"{name} must be 1-d with >= 2 points")
    steps = np.diff(grid)
    if steps[0] <= 0 or not np.allclose(steps, steps[0], rtol=1e-9, atol=0.0):
        raise ValueError(f"{name} must be uniform and ascending")


def trapezoid_weights(grid: np.ndarray) -> np.ndarray:
    w = np.full(grid.shape, grid_step(grid))
    w[0] *= 0.5
    w[-1] *= 0.5
    return w


# Default evaluation grids.
DEFAULT_X_GRID = uniform_grid(-10.0, 10.0, 1024)
DEFAULT_PHASE_GRID = uniform_grid(-6.0, 6.0, 241)


@dataclass(frozen=True)
class PhasePoint:
    """A single phase-space point (q, p)."""

    q: float
    p: float

    def __post_init__(self):
        if not (np.isfinite(self.q) and np.isfinite(self.p)):
            raise ValueError("phase-space coordinates must be finite")


@dataclass(frozen=True)
class TomographyParams:
    """Direction and offset (mu, nu, delta) of one measured quadrature.

    The pair (mu, nu) = (cos phi, sin phi) with delta = 0 recovers the
    rotated-quadrature (optical homodyne) family.  Line operations require
    mu**2 + nu**2 > 0; a zero direction is rejected at the call site.
    """

    mu: float
    nu: float
    delta: float = 0.0

    def __post_init__(self):
        vals = (self.mu, self.nu, self.delta)
        if not all(np.isfinite(v) for v in vals):
            raise ValueError("tomography parameters must be finite")

    @property
    def r(self) -> float:
        return float(np.hypot(self.mu, self.nu))


@dataclass(frozen=True)
class WignerField:
    """Wigner function samples on a rectangular (q, p) grid."""

    q_grid: np.ndarray
    p_grid: np.ndarray
    values: np.ndarray
    warnings: tuple[str, ...] = ()
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        check_uniform(self.q_grid, "q_grid")
        check_uniform(self.p_grid, "p_grid")
        if self.values.shape != (self.q_grid.size, self.p_grid.size):
            raise ValueError("values shape does not match grids")

    def normalization(self) -> float:
        """Trapezoid estimate of integral W dq dp / (2*pi)."""
        inner = np.trapezoid(self.values, self.p_grid, axis=1)
        return float(np.trapezoid(inner, self.q_grid) / (2.0 * np.pi))


@dataclass(frozen=True)
class MarginalSlice:
    """One marginal w(X) at fixed (mu, nu, delta)."""

    params: TomographyParams
    x_grid: np.ndarray
    values: np.ndarray
    warnings: tuple[str, ...] = ()

    def __post_init__(self):
        check_uniform(self.x_grid, "x_grid")
        if self.values.shape != self.x_grid.shape:
            raise ValueError("values shape does not match x_grid")

    def normalization(self) -> float:
        return float(np.trapezoid(self.values, self.x_grid))

    def min_value(self) -> float:
        return float(self.values.min())


@dataclass(frozen=True)
class MarginalField:
    """Marginal samples w(X; mu, nu) at delta = 0 on a rectangular grid.

    values has shape (len(mu_grid), len(nu_grid), len(x_grid)).  The cell
    at (mu, nu) = (0, 0), if present, carries no information (the marginal
    degenerates there) and is excluded by `valid_mask`.
    """

    mu_grid: np.ndarray
    nu_grid: np.ndarray
    x_grid: np.ndarray
    values: np.ndarray
    warnings: tuple[str, ...] = ()
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        check_uniform(self.mu_grid, "mu_grid")
        check_uniform(self.nu_grid, "nu_grid")
        check_uniform(self.x_grid, "x_grid")
        expected = (self.mu_grid.size, self.nu_grid.size, self.x_grid.size)
        if self.values.shape != expected:
            raise ValueError(f"values shape {self.values.shape} != {expected}")

    def radius(self) -> np.ndarray:
        """|(mu, nu)| per cell, shape (n_mu, n_nu)."""
        return np.hypot(self.mu_grid[:, None], self.nu_grid[None, :])

    def valid_mask(self, min_radius: float = 0.0) -> np.ndarray:
        """Cells whose direction norm exceeds min_radius (and is nonzero)."""
        r = self.radius()
        return r > max(min_radius, 0.0)

    def slice_at(self, i: int, j: int, delta: float = 0.0) -> MarginalSlice:
        """Extract one cell; nonzero delta applies the shift identity."""
        params = TomographyParams(float(self.mu_grid[i]), float(self.nu_grid[j]), delta)
        vals = self.values[i, j]
        if delta != 0.0:
            vals = np.interp(self.x_grid - delta, self.x_grid, vals, left=0.0, right=0.0)
        return MarginalSlice(params, self.x_grid, vals)

    def cell_normalizations(self) -> np.ndarray:
        return np.trapezoid(self.values, self.x_grid, axis=2)


@dataclass(frozen=True)
class CharacteristicGrid:
    """Symmetric-ordered characteristic function chi(a, b) on a grid.

    chi(a, b) is the expectation of exp(i*(a*q + b*p)); chi(0, 0) = 1 and
    chi(-a, -b) = conj(chi(a, b)) for any physical input.
    """

    a_grid: np.ndarray
    b_grid: np.ndarray
    values: np.ndarray
    warnings: tuple[str, ...] = ()

    def __post_init__(self):
        check_uniform(self.a_grid, "a_grid")
        check_uniform(self.b_grid, "b_grid")
        if self.values.shape != (self.a_grid.size, self.b_grid.size):
            raise ValueError("values shape does not match grids")

    def hermitian_defect(self) -> float:
        """max | chi(-a,-b) - conj chi(a,b) | over the grid (symmetric grids)."""
        flipped = self.values[::-1, ::-1]
        return float(np.max(np.abs(flipped - np.conj(self.values))))


@dataclass(frozen=True)
class ReconstructionConfig:
    """Quadrature plan for the density-matrix double integral.

    s is a free rescaling of the kernel; any admissible input gives
    s-independent output, which is used as a consistency check.  The inner
    X integral for a direction of norm r runs over r*y_range with y_samples
    points, so narrow and wide slices are resolved alike.
    """

    s: float = 1.0
    mu_range: tuple[float, float] = (-8.0, 8.0)
    mu_samples: int = 801
    y_range: tuple[float, float] = (-20.0, 20.0)
    y_samples: int = 512

    def __post_init__(self):
        if self.s == 0.0 or not np.isfinite(self.s):
            raise ValueError("s must be finite and nonzero")
        if self.mu_samples < 9 or self.y_samples < 9:
            raise ValueError("sample counts too small")


@dataclass(frozen=True)
class DensityMatrixGrid:
    """Position-representation density matrix rho(q, q') on a square grid."""

    q_grid: np.ndarray
    values: np.ndarray
    config: ReconstructionConfig = field(default_factory=ReconstructionConfig)
    warnings: tuple[str, ...] = ()

    def __post_init__(self):
        check_uniform(self.q_grid, "q_grid")
        n = self.q_grid.size
        if self.values.shape != (n, n):
            raise ValueError("values must be square over q_grid")

    def trace(self) -> float:
        return float(np.real(np.trapezoid(np.diag(self.values), self.q_grid)))

    def purity(self) -> float:
        w = trapezoid_weights(self.q_grid)
        return float(np.real(np.sum(w[:, None] * w[None, :] * np.abs(self.values) ** 2)))

    def hermiticity_defect(self) -> float:
        return float(np.max(np.abs(self.values - self.values.conj().T)))

    def eigenvalues(self) -> np.ndarray:
        """Operator spectrum estimated with symmetric trapezoid weighting."""
        sw = np.sqrt(trapezoid_weights(self.q_grid))
        sym = sw[:, None] * self.values * sw[None, :]
        return np.linalg.eigvalsh(0.5 * (sym + sym.conj().T))
