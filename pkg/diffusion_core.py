"""Brownian motion with drift mu and unit variance, killed at level c.

Everything here is written for the process X_t = y + mu*t + B_t on the state
space (c, inf). Scale and speed follow the usual conventions

    s(x)  = (1 - exp(-2*mu*x)) / (2*mu)
    m'(v) = 2*exp(2*mu*v)

so that transition densities taken against the speed measure are symmetric in
their two space arguments.
"""
import logging
import math
from typing import Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, field_validator, model_validator

from config import SETTINGS
from errors import ModelInputError
from numerics import log_normal_cdf

logger = logging.getLogger(__name__)

# --- Configuration (Defaults/Constants) ---
MU_MIN = SETTINGS.mu_min
TAIL_WIDTH = 12.0  # upper limit for spatial integrals: y + 12*sqrt(t) + |mu|*t

_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


# --- Domain Types ---
class DiffusionSpec(BaseModel):
    """Killed Brownian motion with drift: drift mu, killing level c, start y."""

    model_config = ConfigDict(frozen=True)

    mu: float
    c: float
    y: float = 0.0

    @model_validator(mode="after")
    def _check(self):
        for name in ("mu", "c", "y"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        if abs(self.mu) < MU_MIN:
            raise ValueError(f"|mu| = {abs(self.mu):g} is below MU_MIN = {MU_MIN:g}")
        if not self.c < self.y:
            raise ValueError(f"killing level c = {self.c} must lie below the start y = {self.y}")
        return self


class DensityCurve(BaseModel):
    """A sampled density or distribution function on a strictly increasing time grid."""

    model_config = ConfigDict(frozen=True)

    grid: list[float]
    values: list[float]
    kind: Literal["density", "cdf"]
    label: str = ""
    clip_min: float | None = None  # smallest raw value before clipping at zero, if clipped

    @field_validator("grid", "values", mode="before")
    @classmethod
    def _to_list(cls, value):
        return np.asarray(value, dtype=float).tolist()

    @model_validator(mode="after")
    def _check(self):
        if len(self.grid) != len(self.values):
            raise ValueError("grid and values must have the same length")
        grid = np.asarray(self.grid)
        if grid.size > 1 and not np.all(np.diff(grid) > 0):
            raise ValueError("grid must be strictly increasing")
        values = np.asarray(self.values)
        if not np.all(np.isfinite(values)) or np.any(values < 0):
            raise ValueError("curve values must be finite and nonnegative")
        return self


# --- Validation helpers ---
def _finite(name: str, value: float) -> float:
    value = float(value)
    if not math.isfinite(value):
        raise ModelInputError(f"{name} must be finite, got {value}")
    return value


def _above_c(name: str, value: float, spec: DiffusionSpec) -> float:
    value = _finite(name, value)
    if value <= spec.c:
        raise ModelInputError(f"{name} = {value} must lie above the killing level c = {spec.c}")
    return value


def _positive_time(t: float) -> float:
    t = float(t)
    if not t > 0.0:
        raise ModelInputError(f"time must be positive, got {t}")
    return t


def _log1mexp(x: float) -> float:
    """log(1 - exp(-x)) for x > 0."""
    if x <= 0.0:
        return -math.inf
    if x <= math.log(2.0):
        return math.log(-math.expm1(-x))
    return math.log1p(-math.exp(-x))


# --- Scale function and speed measure ---
def scale(x: float, spec: DiffusionSpec) -> float:
    """s(x) = (1 - exp(-2 mu x)) / (2 mu); s(+inf) = 1/(2 mu) for mu > 0."""
    x = float(x)
    if math.isnan(x) or x == -math.inf:
        raise ModelInputError(f"scale needs a finite level or +inf, got {x}")
    mu = spec.mu
    if x == math.inf:
        return 1.0 / (2.0 * mu) if mu > 0 else math.inf
    # expm1 keeps s(x) accurate for small |mu x|
    return -math.expm1(-2.0 * mu * x) / (2.0 * mu)


def log_scale_diff(a: float, b: float, spec: DiffusionSpec) -> float:
    """log(s(b) - s(a)) for a < b, finite even when exp(-2 mu x) overflows.

    With m = |mu|:
        mu > 0: s(b) - s(a) = exp(-2 m a) * (1 - exp(-2 m (b - a))) / (2 m)
        mu < 0: s(b) - s(a) = exp( 2 m b) * (1 - exp(-2 m (b - a))) / (2 m)
    """
    a = _finite("a", a)
    b = float(b)
    if math.isnan(b) or not b > a:
        raise ModelInputError(f"log_scale_diff needs a < b, got a={a}, b={b}")
    m = abs(spec.mu)
    if b == math.inf:
        if spec.mu < 0:
            return math.inf
        return -2.0 * m * a - math.log(2.0 * m)
    anchor = -2.0 * m * a if spec.mu > 0 else 2.0 * m * b
    return anchor + _log1mexp(2.0 * m * (b - a)) - math.log(2.0 * m)


def scale_diff(a: float, b: float, spec: DiffusionSpec) -> float:
    """s(b) - s(a), evaluated as (exp(-2 mu a) - exp(-2 mu b)) / (2 mu) in log space."""
    if a == b:
        return 0.0
    if a > b:
        return -scale_diff(b, a, spec)
    return math.exp(log_scale_diff(a, b, spec))


def speed_density(v: float, spec: DiffusionSpec) -> float:
    """m'(v) = 2 exp(2 mu v)."""
    return 2.0 * math.exp(2.0 * spec.mu * float(v))


# --- Transition density ---
def _log_killed_kernel(t: float, u: float, v: float, spec: DiffusionSpec) -> float:
    """log of exp(-(u-v)^2/2t) - exp(-(u+v-2c)^2/2t).

    The difference of squares is 4(u-c)(v-c), so the bracket factors as
    exp(-(u-v)^2/2t) * (1 - exp(-2(u-c)(v-c)/t)).
    """
    gap = 2.0 * (u - spec.c) * (v - spec.c) / t
    return -(u - v) ** 2 / (2.0 * t) + _log1mexp(gap)


def log_transition_density(t: float, u: float, v: float, spec: DiffusionSpec) -> float:
    """log p(t; u, v), density with respect to the speed measure."""
    t = _positive_time(t)
    u = _above_c("u", u, spec)
    v = _above_c("v", v, spec)
    mu = spec.mu
    return (-mu * (u + v) - 0.5 * mu * mu * t - math.log(2.0) - _LOG_SQRT_2PI - 0.5 * math.log(t)
            + _log_killed_kernel(t, u, v, spec))


def transition_density(t: float, u: float, v: float, spec: DiffusionSpec) -> float:
    """p(t; u, v) with respect to the speed measure m(dv) = 2 exp(2 mu v) dv.

    p(t;u,v) = exp(-mu(u+v) - mu^2 t/2) / (2 sqrt(2 pi t))
               * [exp(-(u-v)^2/2t) - exp(-(u+v-2c)^2/2t)]
    """
    return math.exp(log_transition_density(t, u, v, spec))


def transition_density_lebesgue(t: float, u: float, v: float, spec: DiffusionSpec) -> float:
    """P_u(X_t in dv, t < T_c) / dv, i.e. p(t;u,v) * m'(v)."""
    t = _positive_time(t)
    u = _above_c("u", u, spec)
    v = _above_c("v", v, spec)
    mu = spec.mu
    log_value = (mu * (v - u) - 0.5 * mu * mu * t - _LOG_SQRT_2PI - 0.5 * math.log(t)
                 + _log_killed_kernel(t, u, v, spec))
    return math.exp(log_value)


def integration_upper_limit(t: float, spec: DiffusionSpec) -> float:
    """Truncation point for integrals over (c, inf) at time t."""
    return spec.y + TAIL_WIDTH * math.sqrt(t) + abs(spec.mu) * t


# --- First passage to c ---
def first_passage_density(u: float, spec: DiffusionSpec) -> float:
    """Density of T_c at u: b / sqrt(2 pi u^3) * exp(-(b + mu u)^2 / 2u), b = y - c."""
    u = float(u)
    if u < 0.0:
        raise ModelInputError(f"time must be nonnegative, got {u}")
    if u == 0.0:
        return 0.0
    b = spec.y - spec.c
    log_value = math.log(b) - _LOG_SQRT_2PI - 1.5 * math.log(u) - (b + spec.mu * u) ** 2 / (2.0 * u)
    return math.exp(log_value)


def first_passage_cdf(t: float, spec: DiffusionSpec) -> float:
    """P_y(T_c < t) from the inverse Gaussian closed form.

        Phi((c - y - mu t)/sqrt t) + exp(2 mu (c - y)) * Phi((c - y + mu t)/sqrt t)

    The second product is formed as exp(2 mu (c-y) + log Phi(.)) so that the
    exponential factor cannot overflow for mu < 0.
    """
    t = float(t)
    if math.isnan(t) or t < 0.0:
        raise ModelInputError(f"time must be nonnegative, got {t}")
    if t == 0.0:
        return 0.0
    b = spec.c - spec.y
    mu = spec.mu
    if t == math.inf:
        return 1.0 if mu < 0 else math.exp(2.0 * mu * b)
    root_t = math.sqrt(t)
    first = math.exp(float(log_normal_cdf((b - mu * t) / root_t)))
    second = math.exp(2.0 * mu * b + float(log_normal_cdf((b + mu * t) / root_t)))
    return min(1.0, first + second)


def escape_probability(spec: DiffusionSpec) -> float:
    """P_y(T_inf < T_c): 1 - exp(-2 mu (y - c)) when mu > 0, else 0."""
    if spec.mu <= 0:
        return 0.0
    return -math.expm1(-2.0 * spec.mu * (spec.y - spec.c))
