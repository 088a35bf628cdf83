"""Last passage time to an alarm level for killed Brownian motion with drift.

For an alarm level alpha above the killing level c, lambda_alpha is the last
time the process visits alpha before it is killed (0 if it never does). Its
law has an atom at 0 and a continuous part with density

    P_y(lambda_alpha in dt, lambda_alpha > 0) / dt = p(t; y, alpha) / (s(alpha) - s(c)).
"""
import logging
import math

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator

from diffusion_core import (
    DensityCurve,
    DiffusionSpec,
    integration_upper_limit,
    log_scale_diff,
    log_transition_density,
    transition_density_lebesgue,
)
from errors import ModelInputError
from numerics import adaptive_simpson, geometric_grid, QUAD_TOL

logger = logging.getLogger(__name__)

TIME_PANELS = 64
SPACE_PANELS = 32
TAIL_EXPONENT = 80.0  # mu^2 T / 2 beyond which the density is negligible

_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


class AlarmQuery(BaseModel):
    """An alarm level alpha (log scale) for a given diffusion."""

    model_config = ConfigDict(frozen=True)

    alpha: float
    spec: DiffusionSpec

    @model_validator(mode="after")
    def _check(self):
        if not math.isfinite(self.alpha):
            raise ValueError("alpha must be finite")
        if not self.alpha > self.spec.c:
            raise ValueError(f"alpha = {self.alpha} must lie above the killing level c = {self.spec.c}")
        return self


# --- Density and atom ---
def lp_density(t: float, q: AlarmQuery) -> float:
    """Density of the continuous part of lambda_alpha at time t > 0.

    Valid on either side of y; for alpha > y it is the continuous part only.
    """
    t = float(t)
    if not t > 0.0:
        raise ModelInputError(f"time must be positive, got {t}")
    spec = q.spec
    return math.exp(log_transition_density(t, spec.y, q.alpha, spec)
                    - log_scale_diff(spec.c, q.alpha, spec))


def _lp_density_sqrt_time(q: AlarmQuery):
    """Integrand 2u * f(u^2) for the substitution t = u^2 (bounded at u = 0)."""
    spec = q.spec
    if q.alpha == spec.y:
        # p(u^2; y, y) ~ exp(-2 mu y) / (2 sqrt(2 pi) u) as u -> 0
        at_zero = math.exp(-2.0 * spec.mu * spec.y - _LOG_SQRT_2PI
                           - log_scale_diff(spec.c, q.alpha, spec))
    else:
        at_zero = 0.0

    def integrand(u: float) -> float:
        if u <= 0.0:
            return at_zero
        return 2.0 * u * lp_density(u * u, q)

    return integrand


def lp_atom(q: AlarmQuery) -> float:
    """P_y(lambda_alpha = 0).

    alpha > y: the path is killed before ever reaching alpha,
        1 - (s(y) - s(c)) / (s(alpha) - s(c)).
    alpha <= y, mu < 0: every path is killed and must cross alpha, so 0.
    alpha <= y, mu > 0: the path escapes upward without returning to alpha,
        1 - exp(-2 mu (y - alpha)).
    """
    spec = q.spec
    if q.alpha > spec.y:
        ratio = math.exp(log_scale_diff(spec.c, spec.y, spec) - log_scale_diff(spec.c, q.alpha, spec))
        return max(0.0, 1.0 - ratio)
    if spec.mu < 0:
        return 0.0
    return -math.expm1(-2.0 * spec.mu * (spec.y - q.alpha))


def _tail_horizon(q: AlarmQuery) -> float:
    spec = q.spec
    m = abs(spec.mu)
    return 2.0 * abs(spec.y - q.alpha) / m + TAIL_EXPONENT / (m * m) + 1.0


# --- Interval probabilities ---
def lp_interval(t0: float, t1: float, q: AlarmQuery, tol: float = QUAD_TOL) -> float:
    """P_y(lambda_alpha in [t0, t1], lambda_alpha > 0); t1 may be +inf.

    Integrated in u = sqrt(t) so that the 1/sqrt(t) behaviour at alpha = y
    does not reach the quadrature.
    """
    t0, t1 = float(t0), float(t1)
    if math.isnan(t0) or math.isnan(t1) or t0 < 0.0:
        raise ModelInputError(f"interval must satisfy 0 <= t0 <= t1, got [{t0}, {t1}]")
    if t1 < t0:
        raise ModelInputError(f"inverted interval [{t0}, {t1}]")
    if t0 == t1:
        return 0.0
    t_max = _tail_horizon(q)
    if t0 >= t_max:
        return 0.0
    upper = min(t1, t_max)
    value = adaptive_simpson(_lp_density_sqrt_time(q), math.sqrt(t0), math.sqrt(upper),
                             tol=tol, panels=TIME_PANELS)
    return max(0.0, value)


def lp_within(t: float, q: AlarmQuery, tol: float = QUAD_TOL) -> float:
    """P_y(lambda_alpha in [0, t]): the atom plus the continuous part up to t."""
    return min(1.0, lp_atom(q) + lp_interval(0.0, t, q, tol=tol))


# --- Joint probability with the position at t ---
def _space_integral(t: float, q: AlarmQuery, weighted: bool, tol: float) -> float:
    t = float(t)
    if not t > 0.0:
        raise ModelInputError(f"time must be positive, got {t}")
    spec = q.spec
    upper = min(q.alpha, integration_upper_limit(t, spec))
    if upper <= spec.c:
        return 0.0
    log_norm = log_scale_diff(spec.c, q.alpha, spec)

    def integrand(z: float) -> float:
        if z <= spec.c:
            return 0.0
        density = transition_density_lebesgue(t, spec.y, z, spec)
        if not weighted:
            return density
        if z >= q.alpha:
            return 0.0
        # (s(alpha) - s(z)) / (s(alpha) - s(c)) = P_z(T_c < T_alpha)
        return math.exp(log_scale_diff(z, q.alpha, spec) - log_norm) * density

    return max(0.0, adaptive_simpson(integrand, spec.c, upper, tol=tol, panels=SPACE_PANELS))


def q_joint_prob(t: float, q: AlarmQuery, tol: float = QUAD_TOL) -> float:
    """P_y(Q_t = lambda_alpha, X_t in (c, alpha)).

    Q_t is the last visit to alpha before t; the event says the process sits
    below alpha at t and never comes back to alpha before being killed.
    """
    return min(1.0, _space_integral(t, q, weighted=True, tol=tol))


def occupancy_prob(t: float, q: AlarmQuery, tol: float = QUAD_TOL) -> float:
    """P_y(X_t in (c, alpha))."""
    return min(1.0, _space_integral(t, q, weighted=False, tol=tol))


# --- Curves ---
def lp_density_curve(q: AlarmQuery, grid=None, label: str = "") -> DensityCurve:
    """lp_density sampled on a time grid (geometric 1e-4..10 by default)."""
    grid = geometric_grid() if grid is None else np.asarray(grid, dtype=float)
    values = [lp_density(t, q) for t in grid]
    return DensityCurve(grid=grid, values=values, kind="density",
                        label=label or f"last-passage alpha={q.alpha:.6g}")


def lp_within_curve(q: AlarmQuery, grid=None, label: str = "") -> DensityCurve:
    """lp_within sampled on a time grid, accumulated interval by interval."""
    grid = geometric_grid() if grid is None else np.asarray(grid, dtype=float)
    running = lp_atom(q)
    previous = 0.0
    values = []
    for t in grid:
        running += lp_interval(previous, float(t), q)
        previous = float(t)
        values.append(min(1.0, running))
    logger.debug("lp_within_curve alpha=%g reached %g at t=%g", q.alpha, values[-1], grid[-1])
    return DensityCurve(grid=grid, values=values, kind="cdf",
                        label=label or f"last-passage-cdf alpha={q.alpha:.6g}")
