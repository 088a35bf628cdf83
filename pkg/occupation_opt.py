"""Choosing the alarm level.

The objective for an alarm level alpha in [c, y] is

    v(alpha) = Gamma * [P_y(Q_t = lambda_alpha, X_t in (c, alpha)) + P_y(T_c < t)]
               + (1 - Gamma) * E_y[exp(-q A_inf), T_c < T_inf]

where A_inf is the total time spent below alpha before killing. The first
term rewards an alarm that reliably flags paths that never recover; the
second penalizes time spent in the alarm zone, discounted at rate q.
"""
import logging
import math

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field

from diffusion_core import DiffusionSpec, first_passage_cdf
from errors import ModelInputError
from last_passage import AlarmQuery, q_joint_prob
from numerics import golden_section_max

logger = logging.getLogger(__name__)

TIE_TOL = 1e-12
TABLE_START_ALPHA = -1.0  # initial level for the drift x discount-rate table


class OptimizerConfig(BaseModel):
    """Weights and search controls for the alarm-level problem."""

    model_config = ConfigDict(frozen=True)

    gamma: float = Field(..., ge=0.0, le=1.0)
    q: float = Field(..., gt=0.0, description="Discount rate per year, usually the WACC")
    horizon_t: float = Field(1.0, gt=0.0)
    coarse_grid_n: int = Field(400, ge=100)
    refine_tol: float = Field(1e-6, gt=0.0)
    start_alpha: float | None = Field(None, description="Climb to the nearest local maximum from this level "
                                                         "instead of taking the global one")


class ObjectiveBreakdown(BaseModel):
    alpha: float
    gamma: float
    alarm_term: float       # q_joint_prob + first_passage_cdf
    occupation_term: float  # occupation_laplace
    total: float


class OptimizeResult(BaseModel):
    alpha_star: float
    value: float
    breakdown: ObjectiveBreakdown


def _check_alpha_range(alpha: float, spec: DiffusionSpec) -> float:
    alpha = float(alpha)
    if math.isnan(alpha) or alpha < spec.c or alpha > spec.y:
        raise ModelInputError(f"alpha = {alpha} must lie in [c, y] = [{spec.c}, {spec.y}]")
    return alpha


# --- Occupation time below alpha ---
def occupation_laplace(alpha: float, spec: DiffusionSpec, q: float) -> float:
    """E_y[exp(-q A_inf), T_c < T_inf] with A_inf the time spent below alpha.

    With k = sqrt(mu^2 + 2q) and d = alpha - c:
        mu > 0: exp(-2 mu y) / [exp(-mu (alpha + c)) (cosh(k d) + (mu/k) sinh(k d))]
        mu < 0: exp(-mu d)   / [cosh(k d) - (mu/k) sinh(k d)]
    The hyperbolic bracket is factored as exp(k d)/2 * (...) before taking logs.
    """
    alpha = _check_alpha_range(alpha, spec)
    q = float(q)
    if not q > 0.0:
        raise ModelInputError(f"discount rate q must be positive, got {q}")
    mu = spec.mu
    k = math.sqrt(mu * mu + 2.0 * q)
    d = alpha - spec.c
    e = math.exp(-2.0 * k * d)
    sign = 1.0 if mu > 0 else -1.0
    bracket = (1.0 + e) + sign * (mu / k) * (1.0 - e)
    log_den = k * d - math.log(2.0) + math.log(bracket)
    if mu > 0:
        log_value = -2.0 * mu * spec.y + mu * (alpha + spec.c) - log_den
    else:
        log_value = -mu * d - log_den
    return math.exp(log_value)


# --- Objective ---
def _alarm_term(alpha: float, spec: DiffusionSpec, horizon_t: float) -> float:
    joint = 0.0 if alpha <= spec.c else q_joint_prob(horizon_t, AlarmQuery(alpha=alpha, spec=spec))
    return joint + first_passage_cdf(horizon_t, spec)


def _combine(alpha: float, gamma: float, alarm: float, occupation: float) -> ObjectiveBreakdown:
    return ObjectiveBreakdown(alpha=alpha, gamma=gamma, alarm_term=alarm, occupation_term=occupation,
                              total=gamma * alarm + (1.0 - gamma) * occupation)


def objective(alpha: float, spec: DiffusionSpec, cfg: OptimizerConfig) -> ObjectiveBreakdown:
    """Gamma * (q_joint + first passage) + (1 - Gamma) * occupation_laplace, with both parts."""
    alpha = _check_alpha_range(alpha, spec)
    return _combine(alpha, cfg.gamma,
                    _alarm_term(alpha, spec, cfg.horizon_t),
                    occupation_laplace(alpha, spec, cfg.q))


# --- Optimizer ---
class _GridTerms:
    """Alarm and occupation terms on the coarse grid; independent of Gamma."""

    def __init__(self, spec: DiffusionSpec, cfg: OptimizerConfig):
        self.spec = spec
        self.cfg = cfg
        self.alphas = np.linspace(spec.c, spec.y, cfg.coarse_grid_n)
        self.alarm = np.array([_alarm_term(a, spec, cfg.horizon_t) for a in self.alphas])
        self.occupation = np.array([occupation_laplace(a, spec, cfg.q) for a in self.alphas])


def _global_best(values: np.ndarray) -> int:
    # index-ordered: smallest alpha among ties
    return int(np.flatnonzero(values >= values.max() - TIE_TOL)[0])


def _local_best(values: np.ndarray, alphas: np.ndarray, start_alpha: float) -> int:
    """Grid ascent from the level nearest ``start_alpha`` to the first local maximum."""
    best = int(np.argmin(np.abs(alphas - start_alpha)))
    last = len(values) - 1
    while True:
        left = values[best - 1] if best > 0 else -np.inf
        right = values[best + 1] if best < last else -np.inf
        if left > values[best] + TIE_TOL and left >= right:
            best -= 1
        elif right > values[best] + TIE_TOL:
            best += 1
        else:
            return best


def _optimize_on_grid(terms: _GridTerms, gamma: float) -> OptimizeResult:
    spec, cfg = terms.spec, terms.cfg
    values = gamma * terms.alarm + (1.0 - gamma) * terms.occupation
    if cfg.start_alpha is None:
        best = _global_best(values)
    else:
        best = _local_best(values, terms.alphas, cfg.start_alpha)
    grid_alpha = float(terms.alphas[best])

    lo = float(terms.alphas[max(best - 1, 0)])
    hi = float(terms.alphas[min(best + 1, len(terms.alphas) - 1)])

    def f(alpha: float) -> float:
        return (gamma * _alarm_term(alpha, spec, cfg.horizon_t)
                + (1.0 - gamma) * occupation_laplace(alpha, spec, cfg.q))

    refined_alpha, refined_value = golden_section_max(f, lo, hi, tol=cfg.refine_tol)

    if refined_value > values[best] + TIE_TOL:
        alpha_star = refined_alpha
    else:
        alpha_star = grid_alpha
    breakdown = _combine(alpha_star, gamma,
                         _alarm_term(alpha_star, spec, cfg.horizon_t),
                         occupation_laplace(alpha_star, spec, cfg.q))
    return OptimizeResult(alpha_star=alpha_star, value=breakdown.total, breakdown=breakdown)


def optimize_alpha(spec: DiffusionSpec, cfg: OptimizerConfig) -> OptimizeResult:
    """Maximizes the objective over [c, y].

    Coarse scan on ``coarse_grid_n`` equally spaced levels, then golden-section
    refinement inside the bracket around the best grid point. Ties go to the
    smallest alpha. With ``cfg.start_alpha`` set, the grid point is the local
    maximum reached by ascent from that level; the objective can have a second
    maximum at the corner c that the ascent does not jump to.
    """
    result = _optimize_on_grid(_GridTerms(spec, cfg), cfg.gamma)
    logger.info("Optimal alarm level alpha*=%.6f (value %.6f, Gamma=%.3f, q=%.4f)",
                result.alpha_star, result.value, cfg.gamma, cfg.q)
    return result


def gamma_sweep(spec: DiffusionSpec, cfg: OptimizerConfig, gammas) -> list[tuple[float, float]]:
    """alpha* for each Gamma; the coarse grid terms are computed once and reused."""
    gammas = [float(g) for g in gammas]
    if any(not 0.0 <= g <= 1.0 for g in gammas):
        raise ModelInputError("every Gamma must lie in [0, 1]")
    terms = _GridTerms(spec, cfg)
    return [(g, _optimize_on_grid(terms, g).alpha_star) for g in gammas]


def comparative_statics(c: float, mus, qs, gamma: float = 0.4, horizon_t: float = 1.0,
                        y: float = 0.0, coarse_grid_n: int = 400,
                        start_alpha: float | None = TABLE_START_ALPHA) -> pd.DataFrame:
    """alpha* over a (mu, q) grid at a fixed killing level; rows are mu, columns q.

    Each cell is the local maximum climbed to from ``start_alpha`` (None for the
    global maximum).
    """
    table = pd.DataFrame(index=pd.Index([float(m) for m in mus], name="mu"),
                         columns=pd.Index([float(q) for q in qs], name="q"), dtype=float)
    for mu in table.index:
        spec = DiffusionSpec(mu=mu, c=c, y=y)
        for q in table.columns:
            cfg = OptimizerConfig(gamma=gamma, q=q, horizon_t=horizon_t, coarse_grid_n=coarse_grid_n,
                                  start_alpha=start_alpha)
            table.loc[mu, q] = optimize_alpha(spec, cfg).alpha_star
    return table
