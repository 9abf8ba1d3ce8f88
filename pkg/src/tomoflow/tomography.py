"""Transforms between Wigner functions, marginal families and density matrices.

Conventions (hbar = 1, phase-space measure dq dp / 2pi):

    w(X, mu, nu, delta) = (1/2pi) Int W(q, p) delta(X - mu q - nu p - delta) dq dp
    chi(a, b)           = Int w(X, a, b, 0) exp(i X) dX
    W(q, p)             = (1/2pi) Int chi(a, b) exp(-i a q - i b p) da db
    rho(q, q')          = (|s|/2pi) Int dmu Int dY w(Y, mu, (q - q')/s, 0)
                                    exp(i s Y) exp(-i s mu (q + q') / 2)

The density-matrix integral is independent of the scale s != 0; keeping s
explicit allows that invariance to be checked numerically.  Every inverse
here consumes a "marginal source": any callable w(x, mu, nu, delta) that
broadcasts over numpy arrays.  Closed-form evaluators from `states` and the
interpolating `RadonMarginalEvaluator` both qualify.

All scans of the direction plane use the exact scaling law
w(X, mu, nu, 0) = (1/r) w(X/r, mu/r, nu/r, 0), r = |(mu, nu)|, so only unit
directions are ever integrated and the r -> 0 region costs no accuracy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.ndimage import map_coordinates

from .fields import (
    DEFAULT_PHASE_GRID,
    DEFAULT_X_GRID,
    CharacteristicGrid,
    DensityMatrixGrid,
    MarginalField,
    MarginalSlice,
    ReconstructionConfig,
    TomographyParams,
    WignerField,
    grid_step,
    trapezoid_weights,
    uniform_grid,
)

TWO_PI = 2.0 * math.pi


def wigner_field_sampler(field: WignerField):
    """Bilinear sampler for a gridded Wigner function; zero outside the box."""
    q0, p0 = field.q_grid[0], field.p_grid[0]
    hq, hp = grid_step(field.q_grid), grid_step(field.p_grid)

    def sample(q, p):
        q = np.asarray(q, dtype=float)
        p = np.asarray(p, dtype=float)
        coords = np.broadcast_arrays((q - q0) / hq, (p - p0) / hp)
        return map_coordinates(field.values, np.stack(coords), order=1,
                               mode="constant", cval=0.0)

    return sample


def _as_wigner_callable(wigner):
    return wigner_field_sampler(wigner) if isinstance(wigner, WignerField) else wigner


def radon_marginal(wigner, params: TomographyParams,
                   x_grid: np.ndarray | None = None, *,
                   line_half_width: float = 8.0,
                   line_step: float = 0.02) -> MarginalSlice:
    """Project a Wigner function onto the marginal of mu q + nu p + delta.

    ``wigner`` is a callable W(q, p) or a WignerField (sampled bilinearly,
    zero outside its box).  The line integral runs over arc length l in
    [-line_half_width, line_half_width]; both limits are in absolute
    phase-space units, independent of the direction norm.
    """
    x_grid = DEFAULT_X_GRID if x_grid is None else np.asarray(x_grid, dtype=float)
    r = params.r
    if r == 0.0:
        raise ValueError("degenerate direction: mu and nu both zero")
    sample = _as_wigner_callable(wigner)
    n = 2 * int(math.ceil(line_half_width / line_step)) + 1
    line = np.linspace(-line_half_width, line_half_width, n)
    y = (x_grid - params.delta) / (r * r)
    q = y[:, None] * params.mu - line[None, :] * (params.nu / r)
    p = y[:, None] * params.nu + line[None, :] * (params.mu / r)
    values = np.trapezoid(sample(q, p), line, axis=1) / (TWO_PI * r)
    return MarginalSlice(params, x_grid, values)


def marginal_field_from_wigner(wigner, mu_grid: np.ndarray, nu_grid: np.ndarray,
                               x_grid: np.ndarray, *,
                               line_half_width: float = 8.0,
                               line_step: float = 0.04) -> MarginalField:
    """Radon-project a Wigner function over a whole (mu, nu, X) box.

    Cost grows as n_mu * n_nu * n_x * n_line; intended for moderate grids.
    The degenerate (0, 0) cell, if present, is stored as zero.
    """
    mu_grid = np.asarray(mu_grid, dtype=float)
    nu_grid = np.asarray(nu_grid, dtype=float)
    x_grid = np.asarray(x_grid, dtype=float)
    values = np.zeros((mu_grid.size, nu_grid.size, x_grid.size))
    for i, mu in enumerate(mu_grid):
        for j, nu in enumerate(nu_grid):
            if mu == 0.0 and nu == 0.0:
                continue
            sl = radon_marginal(wigner, TomographyParams(mu, nu), x_grid,
                                line_half_width=line_half_width,
                                line_step=line_step)
            values[i, j] = sl.values
    return MarginalField(mu_grid, nu_grid, x_grid, values)


class UnitSliceSource:
    """Marginal source reduced to a table of unit-direction slices.

    Subclasses fill a (n_phi, n_y) table of w(y, cos phi, sin phi, 0)
    rows; arbitrary (x, mu, nu, delta) queries reduce to it through the
    shift and scaling identities, interpolating with a periodic cubic
    spline in phi and a cubic spline in y.  Queries with |X - delta| / r
    outside the y table return 0.
    """

    def _build(self, phi_grid: np.ndarray, table: np.ndarray):
        phi_ext = np.concatenate([phi_grid, [TWO_PI]])
        table_ext = np.vstack([table, table[:1]])
        self.phi_grid = phi_grid
        self._phi_spline = CubicSpline(phi_ext, table_ext, axis=0,
                                       bc_type="periodic")

    def unit_slices(self, phis) -> np.ndarray:
        """Rows w(y, cos phi, sin phi, 0) on self.y_grid, one per angle."""
        return self._phi_spline(np.mod(np.asarray(phis, dtype=float), TWO_PI))

    def __call__(self, x, mu, nu, delta=0.0):
        x = np.asarray(x, dtype=float)
        mu_arr = np.atleast_1d(np.asarray(mu, dtype=float))
        if mu_arr.size > 1 or np.ndim(mu) > 0:
            raise ValueError("this source evaluates one direction per call")
        mu = float(mu_arr[0])
        nu = float(np.asarray(nu).reshape(()))
        r = math.hypot(mu, nu)
        if r == 0.0:
            raise ValueError("degenerate direction: mu and nu both zero")
        row = self.unit_slices(math.atan2(nu, mu))
        y = (x - delta) / r
        spline = CubicSpline(self.y_grid, row, extrapolate=False)
        vals = np.nan_to_num(spline(y), nan=0.0)
        return vals / r


class RadonMarginalEvaluator(UnitSliceSource):
    """Marginal source backed by Radon projections of a Wigner function."""

    def __init__(self, wigner, *, n_phi: int = 360,
                 y_grid: np.ndarray | None = None,
                 line_half_width: float = 8.0, line_step: float = 0.04):
        self.y_grid = (uniform_grid(-12.0, 12.0, 1201) if y_grid is None
                       else np.asarray(y_grid, dtype=float))
        if n_phi < 8:
            raise ValueError("n_phi too small for stable interpolation")
        sample = _as_wigner_callable(wigner)
        phi_grid = np.linspace(0.0, TWO_PI, n_phi, endpoint=False)
        n = 2 * int(math.ceil(line_half_width / line_step)) + 1
        line = np.linspace(-line_half_width, line_half_width, n)
        table = np.empty((n_phi, self.y_grid.size))
        for k, phi in enumerate(phi_grid):
            c, s = math.cos(phi), math.sin(phi)
            q = self.y_grid[:, None] * c - line[None, :] * s
            p = self.y_grid[:, None] * s + line[None, :] * c
            table[k] = np.trapezoid(sample(q, p), line, axis=1) / TWO_PI
        self._build(phi_grid, table)


class FieldMarginalSource(UnitSliceSource):
    """Marginal source backed by a stored MarginalField grid.

    Unit slices are read off the field along a circle of working_radius
    (bicubic in the direction plane, at the field's own X nodes, so no X
    interpolation enters) and rescaled to radius 1.  The field's box must
    surround the origin with some margin; the default working radius
    stays inside the box corner-to-edge.
    """

    def __init__(self, field: MarginalField, *, n_phi: int = 360,
                 working_radius: float | None = None):
        if n_phi < 8:
            raise ValueError("n_phi too small for stable interpolation")
        reach = min(field.mu_grid[-1], -field.mu_grid[0],
                    field.nu_grid[-1], -field.nu_grid[0])
        if not reach > 0.0:
            raise ValueError("field box must surround the origin")
        if working_radius is None:
            working_radius = 0.75 * reach
        if not 0.0 < working_radius <= reach:
            raise ValueError("working_radius must lie inside the box")
        self.working_radius = float(working_radius)
        self.y_grid = field.x_grid / self.working_radius
        phi_grid = np.linspace(0.0, TWO_PI, n_phi, endpoint=False)
        mu = self.working_radius * np.cos(phi_grid)
        nu = self.working_radius * np.sin(phi_grid)
        coords = np.empty((2, n_phi))
        coords[0] = (mu - field.mu_grid[0]) / grid_step(field.mu_grid)
        coords[1] = (nu - field.nu_grid[0]) / grid_step(field.nu_grid)
        table = np.empty((n_phi, field.x_grid.size))
        for k in range(field.x_grid.size):
            table[:, k] = map_coordinates(field.values[:, :, k], coords,
                                          order=3, mode="nearest")
        table *= self.working_radius
        self._build(phi_grid, table)


def characteristic_from_marginal(marginal, a_grid: np.ndarray | None = None,
                                 b_grid: np.ndarray | None = None,
                                 y_grid: np.ndarray | None = None
                                 ) -> CharacteristicGrid:
    """chi(a, b) = Int w(X, a, b, 0) e^{iX} dX on a rectangular (a, b) grid.

    Integration uses the scaled abscissa X = r y, so the integrand is the
    unit-direction slice times exp(i r y) and the origin needs no special
    case (chi(0, 0) is the marginal normalization).
    """
    a_grid = uniform_grid(-10.0, 10.0, 201) if a_grid is None else np.asarray(a_grid, dtype=float)
    b_grid = uniform_grid(-10.0, 10.0, 201) if b_grid is None else np.asarray(b_grid, dtype=float)
    if y_grid is None:
        y_grid = getattr(marginal, "y_grid", None)
        y_grid = uniform_grid(-12.0, 12.0, 1201) if y_grid is None else y_grid
    y_grid = np.asarray(y_grid, dtype=float)

    values = np.empty((a_grid.size, b_grid.size), dtype=complex)
    use_table = hasattr(marginal, "unit_slices")
    if use_table:
        source_grid = marginal.y_grid
    for i, a in enumerate(a_grid):
        phi = np.arctan2(b_grid, a)
        r = np.hypot(a, b_grid)
        if use_table:
            rows = marginal.unit_slices(phi)
            if source_grid.shape != y_grid.shape or not np.allclose(source_grid, y_grid):
                rows = CubicSpline(source_grid, rows, axis=1,
                                   extrapolate=False)(y_grid)
                rows = np.nan_to_num(rows, nan=0.0)
        else:
            rows = marginal(y_grid[None, :], np.cos(phi)[:, None],
                            np.sin(phi)[:, None], 0.0)
        kernel = np.exp(1j * r[:, None] * y_grid[None, :])
        values[i] = np.trapezoid(rows * kernel, y_grid, axis=1)
    return CharacteristicGrid(a_grid, b_grid, values)


def wigner_from_characteristic(chi: CharacteristicGrid,
                               q_grid: np.ndarray | None = None,
                               p_grid: np.ndarray | None = None) -> WignerField:
    """Invert chi to W(q, p) = (1/2pi) Int chi e^{-iaq - ibp} da db.

    The imaginary residue of the double integral (zero for an exact chi of
    a physical state) is recorded in meta["max_imag"] and raised as a
    warning when it exceeds 1e-6.
    """
    q_grid = DEFAULT_PHASE_GRID if q_grid is None else np.asarray(q_grid, dtype=float)
    p_grid = DEFAULT_PHASE_GRID if p_grid is None else np.asarray(p_grid, dtype=float)
    wa = trapezoid_weights(chi.a_grid)
    wb = trapezoid_weights(chi.b_grid)
    left = np.exp(-1j * np.outer(q_grid, chi.a_grid)) * wa[None, :]
    right = np.exp(-1j * np.outer(chi.b_grid, p_grid)) * wb[:, None]
    w_complex = left @ chi.values @ right / TWO_PI
    max_imag = float(np.max(np.abs(w_complex.imag)))
    warnings = ()
    if max_imag > 1e-6:
        warnings = (f"imaginary residue {max_imag:.3g} exceeds 1e-6",)
    return WignerField(q_grid, p_grid, np.ascontiguousarray(w_complex.real),
                       warnings, {"max_imag": max_imag})


def density_matrix_from_marginal(marginal, q_grid: np.ndarray | None = None,
                                 config: ReconstructionConfig | None = None
                                 ) -> DensityMatrixGrid:
    """Reconstruct rho(q, q') on q_grid x q_grid from a marginal source.

    The double integral is evaluated as an inner Fourier integral over the
    scaled abscissa Y = r y (per direction cell, window config.y_range in
    units of r) followed by an outer mu quadrature.  Both quadrature grids
    are symmetric, which makes the result hermitian to rounding error for
    any marginal with the physical parity w(X, -mu, -nu) = w(-X, mu, nu).
    """
    q_grid = uniform_grid(-5.0, 5.0, 101) if q_grid is None else np.asarray(q_grid, dtype=float)
    config = ReconstructionConfig() if config is None else config
    s = config.s
    n = q_grid.size
    mu = np.linspace(config.mu_range[0], config.mu_range[1], config.mu_samples)
    use_table = hasattr(marginal, "unit_slices")
    # Table-backed sources already carry a scaled-abscissa grid; reuse it.
    y_unit = (np.asarray(marginal.y_grid, dtype=float) if use_table
              else np.linspace(config.y_range[0], config.y_range[1],
                               config.y_samples))

    # Distinct values of v = q - q' and u = q + q' on the product grid.
    v_vals = np.concatenate([q_grid - q_grid[-1], (q_grid - q_grid[0])[1:]])
    u_vals = np.concatenate([q_grid + q_grid[0], (q_grid + q_grid[-1])[1:]])

    nu = v_vals / s
    r_cell = np.sqrt(mu[:, None] ** 2 + nu[None, :] ** 2)  # (n_mu, n_v)

    # Inner integral in scaled form: with Y = r y and the scaling law,
    # F(mu, v) = Int w(Y, mu, v/s) e^{isY} dY
    #          = Int w_unit(y, phi) e^{i s r y} dy,  phi = atan2(v/s, mu).
    # The integrand is continuous through r = 0, where F is the marginal
    # normalization for any approach angle.
    f_table = np.empty((mu.size, v_vals.size), dtype=complex)
    y_w = trapezoid_weights(y_unit)
    for k in range(mu.size):
        r_row = r_cell[k]
        if use_table:
            w_scaled = marginal.unit_slices(np.arctan2(nu, mu[k]))
        else:
            deg = (mu[k] == 0.0) & (nu == 0.0)
            mu_b = np.where(deg, 1.0, mu[k])
            nu_b = np.where(deg, 0.0, nu)
            r_eff = np.where(deg, 1.0, r_row)
            w_scaled = r_eff[:, None] * marginal(r_eff[:, None] * y_unit[None, :],
                                                 mu_b[:, None], nu_b[:, None], 0.0)
        kernel = np.exp(1j * s * np.outer(r_row, y_unit)) * y_w[None, :]
        f_table[k] = np.sum(w_scaled * kernel, axis=1)

    # Outer integral over mu, one u per column: rho_uv[u, v].
    mu_w = trapezoid_weights(mu)
    phase = np.exp(-0.5j * s * np.outer(u_vals, mu)) * mu_w[None, :]
    rho_uv = phase @ f_table * (abs(s) / TWO_PI)

    i_idx = np.arange(n)[:, None]
    j_idx = np.arange(n)[None, :]
    rho = rho_uv[i_idx + j_idx, i_idx - j_idx + (n - 1)]
    return DensityMatrixGrid(q_grid, rho, config)


def slice_moments(sl: MarginalSlice) -> tuple[float, float]:
    """(mean, variance) of one marginal slice by trapezoid quadrature.

    The slice is renormalized by its own quadrature mass so that grid
    truncation shifts both moments consistently instead of biasing them.
    """
    mass = sl.normalization()
    if mass <= 0.0:
        raise ValueError("slice has nonpositive mass")
    mean = float(np.trapezoid(sl.x_grid * sl.values, sl.x_grid) / mass)
    second = float(np.trapezoid(sl.x_grid ** 2 * sl.values, sl.x_grid) / mass)
    return mean, second - mean * mean


def quadrature_moments(marginal, params: TomographyParams,
                       x_grid: np.ndarray | None = None) -> tuple[float, float]:
    """(mean, variance) of mu q + nu p + delta from a marginal source."""
    x_grid = DEFAULT_X_GRID if x_grid is None else np.asarray(x_grid, dtype=float)
    values = np.asarray(marginal(x_grid, params.mu, params.nu, params.delta))
    return slice_moments(MarginalSlice(params, x_grid, values))


def uncertainty_product(marginal, x_grid: np.ndarray | None = None) -> float:
    """Var(q) * Var(p) from the two axis slices; >= 1/4 for physical input."""
    _, var_q = quadrature_moments(marginal, TomographyParams(1.0, 0.0), x_grid)
    _, var_p = quadrature_moments(marginal, TomographyParams(0.0, 1.0), x_grid)
    return var_q * var_p
