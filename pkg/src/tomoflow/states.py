"""Closed-form reference states for the oscillator (hbar = 1, unit frequency).

Each state provides two exact evaluators:

* a Wigner function W(q, p), normalized to integral W dq dp = 2*pi, and
* the marginal w(X, mu, nu, delta) of the observable mu*q + nu*p + delta.

With r^2 = mu^2 + nu^2 and y = X - delta the t = 0 marginals are

    Ground / Coherent(q0, p0):
        w = exp(-(y - m0)^2 / r^2) / sqrt(pi r^2),  m0 = mu*q0 + nu*p0
    ExcitedFirst:
        w = (2 / sqrt(pi)) * y^2 * exp(-y^2 / r^2) / r^3
    OddCat(q0, p0), the normalized odd superposition of +-(q0, p0):
        w = Nm2 * [ g(y - m0) + g(y + m0)
                    - 2 exp(-(y^2 + m0^2)/r^2) cos(2 y k0) / sqrt(pi r^2) ],
        g(u) = exp(-u^2 / r^2) / sqrt(pi r^2),  k0 = (nu*q0 - mu*p0) / r^2

Time dependence for the free and harmonic Hamiltonians enters only through
a linear flow of the arguments: Wigner points follow the classical motion
backwards, and (mu, nu) follow the conjugate (Heisenberg) flow

    Free:      (mu, nu) -> (mu, nu + mu*t)
    Harmonic:  (mu, nu) -> (mu cos t - nu sin t, mu sin t + nu cos t)

which keeps every identity (normalization, shift, scaling) exact at all t.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .fields import (
    DEFAULT_PHASE_GRID,
    DEFAULT_X_GRID,
    MarginalField,
    MarginalSlice,
    PhasePoint,
    TomographyParams,
    WignerField,
    check_uniform,
)

SQRT_PI = math.sqrt(math.pi)


class StateKind(str, enum.Enum):
    GROUND = "ground"
    EXCITED_FIRST = "excited1"
    COHERENT = "coherent"
    ODD_CAT = "oddcat"


class DynamicsKind(str, enum.Enum):
    STATIC = "static"
    FREE = "free"
    HARMONIC = "harmonic"


@dataclass(frozen=True)
class StateSpec:
    """A catalog state; (q0, p0) is the displacement where applicable."""

    kind: StateKind
    q0: float = 0.0
    p0: float = 0.0

    def __post_init__(self):
        if not (np.isfinite(self.q0) and np.isfinite(self.p0)):
            raise ValueError("displacement must be finite")
        if self.kind == StateKind.ODD_CAT and self.q0 == 0.0 and self.p0 == 0.0:
            raise ValueError("odd superposition is undefined at zero displacement")
        if self.kind in (StateKind.GROUND, StateKind.EXCITED_FIRST):
            if self.q0 != 0.0 or self.p0 != 0.0:
                raise ValueError(f"{self.kind.value} takes no displacement")


GROUND = StateSpec(StateKind.GROUND)
EXCITED_FIRST = StateSpec(StateKind.EXCITED_FIRST)


def cat_normalization(q0: float, p0: float) -> float:
    """Normalization constant of the odd superposition of +-(q0, p0).

    Equals (2 * (1 - exp(-(q0^2 + p0^2))))**-0.5, which tends to 1/sqrt(2)
    for large displacement and diverges as the components merge.
    """
    if q0 == 0.0 and p0 == 0.0:
        raise ValueError("odd superposition is undefined at zero displacement")
    s2 = q0 * q0 + p0 * p0
    return 1.0 / math.sqrt(2.0 * -math.expm1(-s2))


def _flow_params(mu, nu, t: float, dyn: DynamicsKind):
    """Conjugate flow of the direction (mu, nu); X picks up no shift here."""
    if t == 0.0 or dyn == DynamicsKind.STATIC:
        return mu, nu
    if dyn == DynamicsKind.FREE:
        return mu, nu + mu * t
    if dyn == DynamicsKind.HARMONIC:
        c, s = math.cos(t), math.sin(t)
        return mu * c - nu * s, mu * s + nu * c
    raise ValueError(f"unknown dynamics {dyn!r}")


def _flow_phase_point(q, p, t: float, dyn: DynamicsKind):
    """Backward classical flow of a phase-space point."""
    if t == 0.0 or dyn == DynamicsKind.STATIC:
        return q, p
    if dyn == DynamicsKind.FREE:
        return q - p * t, p
    if dyn == DynamicsKind.HARMONIC:
        c, s = math.cos(t), math.sin(t)
        return q * c - p * s, p * c + q * s
    raise ValueError(f"unknown dynamics {dyn!r}")


def _wigner_zero_t(state: StateSpec, q, p):
    q = np.asarray(q, dtype=float)
    p = np.asarray(p, dtype=float)
    if state.kind in (StateKind.GROUND, StateKind.COHERENT):
        return 2.0 * np.exp(-((q - state.q0) ** 2) - (p - state.p0) ** 2)
    if state.kind == StateKind.EXCITED_FIRST:
        r2 = q * q + p * p
        return 2.0 * (2.0 * r2 - 1.0) * np.exp(-r2)
    if state.kind == StateKind.ODD_CAT:
        q0, p0 = state.q0, state.p0
        nm2 = cat_normalization(q0, p0) ** 2
        plus = np.exp(-((q - q0) ** 2) - (p - p0) ** 2)
        minus = np.exp(-((q + q0) ** 2) - (p + p0) ** 2)
        cross = np.exp(-q * q - p * p) * np.cos(2.0 * (q * p0 - p * q0))
        return 2.0 * nm2 * (plus + minus - 2.0 * cross)
    raise ValueError(f"unknown state kind {state.kind!r}")


def _marginal_zero_t(state: StateSpec, y, mu, nu):
    y = np.asarray(y, dtype=float)
    mu = np.asarray(mu, dtype=float)
    nu = np.asarray(nu, dtype=float)
    r2 = mu * mu + nu * nu
    if np.any(r2 == 0.0):
        raise ValueError("degenerate direction: mu and nu both zero")
    norm = 1.0 / np.sqrt(np.pi * r2)
    if state.kind in (StateKind.GROUND, StateKind.COHERENT):
        m0 = mu * state.q0 + nu * state.p0
        return norm * np.exp(-((y - m0) ** 2) / r2)
    if state.kind == StateKind.EXCITED_FIRST:
        return (2.0 / SQRT_PI) * y * y * np.exp(-y * y / r2) * r2 ** -1.5
    if state.kind == StateKind.ODD_CAT:
        q0, p0 = state.q0, state.p0
        nm2 = cat_normalization(q0, p0) ** 2
        m0 = mu * q0 + nu * p0
        k0 = (nu * q0 - mu * p0) / r2
        plus = np.exp(-((y - m0) ** 2) / r2)
        minus = np.exp(-((y + m0) ** 2) / r2)
        cross = np.exp(-(y * y + m0 * m0) / r2) * np.cos(2.0 * y * k0)
        return nm2 * norm * (plus + minus - 2.0 * cross)
    raise ValueError(f"unknown state kind {state.kind!r}")


def _check_time(t: float) -> float:
    t = float(t)
    if not np.isfinite(t):
        raise ValueError("time must be finite")
    return t


def wigner_evaluator(state: StateSpec, t: float = 0.0,
                     dyn: DynamicsKind = DynamicsKind.STATIC):
    """Return W(q, p) as a broadcasting callable at fixed (t, dyn)."""
    t = _check_time(t)

    def evaluate(q, p):
        q0, p0 = _flow_phase_point(np.asarray(q, dtype=float),
                                   np.asarray(p, dtype=float), t, dyn)
        return _wigner_zero_t(state, q0, p0)

    return evaluate


def wigner_eval(state: StateSpec, point, t: float = 0.0,
                dyn: DynamicsKind = DynamicsKind.STATIC):
    """Evaluate the Wigner function at a PhasePoint or (q, p) arrays."""
    if isinstance(point, PhasePoint):
        q, p = point.q, point.p
    else:
        q, p = point
    q = np.asarray(q, dtype=float)
    p = np.asarray(p, dtype=float)
    if not (np.all(np.isfinite(q)) and np.all(np.isfinite(p))):
        raise ValueError("phase-space coordinates must be finite")
    out = wigner_evaluator(state, t, dyn)(q, p)
    return float(out) if out.ndim == 0 else out


def marginal_evaluator(state: StateSpec, t: float = 0.0,
                       dyn: DynamicsKind = DynamicsKind.STATIC):
    """Return w(x, mu, nu, delta=0) as a broadcasting callable."""
    t = _check_time(t)

    def evaluate(x, mu, nu, delta=0.0):
        mu_t, nu_t = _flow_params(np.asarray(mu, dtype=float),
                                  np.asarray(nu, dtype=float), t, dyn)
        y = np.asarray(x, dtype=float) - np.asarray(delta, dtype=float)
        return _marginal_zero_t(state, y, mu_t, nu_t)

    return evaluate


def marginal_eval(state: StateSpec, params: TomographyParams, x,
                  t: float = 0.0, dyn: DynamicsKind = DynamicsKind.STATIC):
    """Evaluate the marginal on x for one parameter triple."""
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError("x values must be finite")
    return marginal_evaluator(state, t, dyn)(x, params.mu, params.nu, params.delta)


def marginal_slice(state: StateSpec, params: TomographyParams,
                   x_grid: np.ndarray | None = None, t: float = 0.0,
                   dyn: DynamicsKind = DynamicsKind.STATIC) -> MarginalSlice:
    x_grid = DEFAULT_X_GRID if x_grid is None else np.asarray(x_grid, dtype=float)
    values = marginal_eval(state, params, x_grid, t, dyn)
    return MarginalSlice(params, x_grid, values)


def sample_wigner_field(state: StateSpec, q_grid: np.ndarray | None = None,
                        p_grid: np.ndarray | None = None, t: float = 0.0,
                        dyn: DynamicsKind = DynamicsKind.STATIC) -> WignerField:
    """Sample W on a rectangular grid and record its normalization.

    Grids must be uniform, ascending and have at least 16 points per axis.
    A field whose trapezoid normalization strays from 1 by more than 1e-3
    is returned with a warning attached rather than rejected.
    """
    q_grid = DEFAULT_PHASE_GRID if q_grid is None else np.asarray(q_grid, dtype=float)
    p_grid = DEFAULT_PHASE_GRID if p_grid is None else np.asarray(p_grid, dtype=float)
    for name, g in (("q_grid", q_grid), ("p_grid", p_grid)):
        check_uniform(g, name)
        if g.size < 16:
            raise ValueError(f"{name} needs at least 16 points")
    values = wigner_evaluator(state, t, dyn)(q_grid[:, None], p_grid[None, :])
    field = WignerField(q_grid, p_grid, values)
    norm = field.normalization()
    warnings = ()
    if abs(norm - 1.0) > 1e-3:
        warnings = (f"normalization {norm:.6g} deviates from 1 beyond 1e-3",)
    return WignerField(q_grid, p_grid, values, warnings, {"normalization": norm})


def sample_marginal_field(state: StateSpec, mu_grid: np.ndarray,
                          nu_grid: np.ndarray, x_grid: np.ndarray,
                          t: float = 0.0,
                          dyn: DynamicsKind = DynamicsKind.STATIC) -> MarginalField:
    """Sample the marginal at delta = 0 over a (mu, nu, X) box.

    The degenerate (0, 0) cell, if the grids contain it, is stored as zero
    and flagged invalid by the field's mask.
    """
    mu_grid = np.asarray(mu_grid, dtype=float)
    nu_grid = np.asarray(nu_grid, dtype=float)
    x_grid = np.asarray(x_grid, dtype=float)
    evaluate = marginal_evaluator(state, t, dyn)
    mu = mu_grid[:, None, None]
    nu = nu_grid[None, :, None]
    values = np.zeros((mu_grid.size, nu_grid.size, x_grid.size))
    ok = (mu * mu + nu * nu) > 0.0
    safe_mu = np.where(ok, mu, 1.0)
    values = np.where(ok, evaluate(x_grid[None, None, :], safe_mu, nu), 0.0)
    return MarginalField(mu_grid, nu_grid, x_grid, values)
