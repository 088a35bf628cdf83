"""Structural calibration of the leverage process.

The firm's assets follow a geometric Brownian motion with log-drift nu and
volatility sigma, debt grows at the risk-free rate r, and equity is a
one-year call on the assets struck at the debt. The leverage ratio
R_t = A_t / D_t then reduces to the killed Brownian motion with drift

    X_t = log(R_t / R_0) / sigma,  mu = (nu - r) / sigma,  c = log(D_0 / A_0) / sigma,  y = 0.
"""
import logging
import math
from functools import cached_property
from pathlib import Path

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, computed_field, field_validator, model_validator
from scipy import optimize, stats

from config import SETTINGS
from diffusion_core import DiffusionSpec
from errors import ConvergenceError, ModelInputError
from numerics import normal_cdf

logger = logging.getLogger(__name__)

# --- Configuration (Defaults/Constants) ---
TRADING_DAYS = SETTINGS.trading_days
MIN_WINDOW = 60
MAX_ITERATIONS = 500
SIGMA_TOL = 1e-8
REFERENCE_QUARTERS_FILE = Path(__file__).resolve().parent / "data" / "reference_quarters.csv"


# --- Domain Types ---
class MarketData(BaseModel):
    """Dated equity values, quarterly debt levels and index returns."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    equity: pd.Series
    debt_points: pd.Series
    index_returns: pd.Series | None = None
    risk_free: float = 0.0

    @field_validator("equity", "debt_points", "index_returns")
    @classmethod
    def _dated(cls, series, info):
        if series is None:
            return series
        if not isinstance(series.index, pd.DatetimeIndex):
            raise ValueError(f"{info.field_name} must be indexed by dates")
        if not series.index.is_monotonic_increasing or series.index.has_duplicates:
            raise ValueError(f"{info.field_name} dates must be strictly increasing")
        if info.field_name != "index_returns" and not (series > 0).all():
            raise ValueError(f"{info.field_name} values must be positive")
        return series.astype(float)


class FirmModel(BaseModel):
    """Calibrated firm economics and the leverage diffusion derived from them."""

    model_config = ConfigDict(frozen=True)

    nu: float
    sigma: float = Field(..., gt=0.0)
    r: float
    A0: float = Field(..., gt=0.0)
    D0: float = Field(..., gt=0.0)
    se_nu: float | None = None
    se_sigma: float | None = None
    label: str = ""

    @model_validator(mode="after")
    def _check(self):
        if not self.A0 > self.D0:
            raise ValueError(f"assets A0 = {self.A0} must exceed debt D0 = {self.D0}")
        # builds the diffusion eagerly so an inadmissible mu fails here
        _ = self.spec
        return self

    @computed_field
    @cached_property
    def spec(self) -> DiffusionSpec:
        return DiffusionSpec(mu=(self.nu - self.r) / self.sigma,
                             c=math.log(self.D0 / self.A0) / self.sigma,
                             y=0.0)

    @computed_field
    @property
    def R0(self) -> float:
        return self.A0 / self.D0

    def alpha_of_rstar(self, rstar: float) -> float:
        return alpha_of_rstar(rstar, self)

    def rstar_of_alpha(self, alpha: float) -> float:
        return rstar_of_alpha(alpha, self)


class ParameterEstimate(BaseModel):
    nu: float
    sigma: float
    se_nu: float
    se_sigma: float
    A0: float
    D0: float
    iterations: int
    n_returns: int


class WaccInputs(BaseModel):
    """Inputs of the CAPM-based weighted average cost of capital."""

    equity_value: float = Field(..., gt=0.0)
    debt_value: float = Field(..., gt=0.0)
    interest_paid: float = Field(..., ge=0.0)
    prior_debt_value: float = Field(..., ge=0.0)
    index_annual_return: float
    risk_free: float
    beta: float
    tax_rate: float = Field(SETTINGS.tax_rate, ge=0.0, le=1.0)

    @property
    def asset_value(self) -> float:
        return self.equity_value + self.debt_value

    @property
    def w_equity(self) -> float:
        return self.equity_value / self.asset_value

    @property
    def w_debt(self) -> float:
        return self.debt_value / self.asset_value


class WaccBreakdown(BaseModel):
    q: float
    beta: float
    cost_equity: float
    cost_debt: float
    w_equity: float
    w_debt: float
    tax_rate: float


# --- Black-Scholes equity ---
def _check_positive(**values):
    for name, value in values.items():
        if not (np.all(np.isfinite(value)) and np.all(np.asarray(value) > 0)):
            raise ModelInputError(f"{name} must be positive and finite")


def bs_equity(A, D, sigma: float, T: float = 1.0):
    """E = A Phi(d0) - D Phi(d0 - sigma sqrt T), d0 = (ln(A/D) + sigma^2 T/2) / (sigma sqrt T).

    Works element-wise on arrays. The discount factor is one, matching a
    zero rate inside d0.
    """
    _check_positive(A=A, D=D, sigma=sigma, T=T)
    A = np.asarray(A, dtype=float)
    D = np.asarray(D, dtype=float)
    vol = sigma * math.sqrt(T)
    d0 = (np.log(A / D) + 0.5 * vol * vol) / vol
    equity = A * normal_cdf(d0) - D * normal_cdf(d0 - vol)
    return float(equity) if equity.ndim == 0 else equity


def _bs_delta(A, D, sigma: float, T: float = 1.0):
    vol = sigma * math.sqrt(T)
    return normal_cdf((np.log(A / D) + 0.5 * vol * vol) / vol)


def invert_asset(E: float, D: float, sigma: float, T: float = 1.0) -> float:
    """The asset value A with bs_equity(A, D, sigma) = E, by bracketed root finding.

    bs_equity is increasing in A and lies between A - D and A, so the root
    sits in [E, E + D]; the upper end is widened geometrically if rounding
    leaves the bracket without a sign change.
    """
    _check_positive(E=E, D=D, sigma=sigma)

    def gap(A: float) -> float:
        return bs_equity(A, D, sigma, T) - E

    lo = E
    hi = (E + D) * 1.0000001
    for _ in range(60):
        if gap(hi) >= 0.0:
            break
        hi *= 2.0
    else:
        raise ConvergenceError(f"could not bracket the asset value for E={E}, D={D}")
    if gap(lo) > 0.0:
        raise ConvergenceError(f"equity E={E} is inconsistent with D={D}, sigma={sigma}")
    return optimize.brentq(gap, lo, hi, xtol=1e-10 * (E + D), rtol=4 * np.finfo(float).eps)


def invert_assets(E, D, sigma: float, T: float = 1.0) -> np.ndarray:
    """Vectorized invert_asset for a whole series.

    Newton's method from A = E + D converges monotonically because the call
    value is convex in A and the start lies above the root; any element that
    fails is redone with the bracketed scalar solver.
    """
    E = np.asarray(E, dtype=float)
    D = np.broadcast_to(np.asarray(D, dtype=float), E.shape)
    _check_positive(E=E, D=D, sigma=sigma)

    def gap(A):
        return bs_equity(A, D, sigma, T) - E

    def slope(A):
        return _bs_delta(A, D, sigma, T)

    try:
        tol = 1e-12 * float(np.max(E + D))
        assets = np.array(optimize.newton(gap, E + D, fprime=slope, tol=tol, maxiter=200), dtype=float)
    except RuntimeError:
        assets = np.full(E.shape, np.nan)
    bad = ~np.isfinite(assets) | (np.abs(gap(np.where(np.isfinite(assets), assets, 1.0))) > 1e-8 * (E + D))
    for i in np.flatnonzero(bad):
        assets[i] = invert_asset(float(E[i]), float(D[i]), sigma, T)
    return assets


# --- Debt schedule ---
def interpolate_debt(points: pd.Series, dates=None) -> pd.Series:
    """Linear-in-level interpolation of quarterly debt, flat beyond the end knots.

    Without ``dates`` the result is a calendar-daily series spanning the knots.
    """
    if points is None or len(points) < 2:
        raise ModelInputError("debt interpolation needs at least two dated points")
    points = points.sort_index()
    if dates is None:
        dates = pd.date_range(points.index[0], points.index[-1], freq="D")
    dates = pd.DatetimeIndex(dates)
    knots = points.index.asi8.astype(float)
    values = np.interp(dates.asi8.astype(float), knots, points.to_numpy(dtype=float))
    return pd.Series(values, index=dates, name="debt_value")


# --- Estimation ---
def _log_return_moments(values: np.ndarray, dt: float) -> tuple[float, float]:
    returns = np.diff(np.log(values))
    sigma = math.sqrt(np.mean((returns - returns.mean()) ** 2) / dt)
    return returns.mean() / dt, sigma


def estimate_params(data: MarketData, window: int | None = None,
                    trading_days: int = TRADING_DAYS) -> ParameterEstimate:
    """Iterated-inversion maximum likelihood for (nu, sigma).

    Start from the equity log-return volatility; then repeatedly invert the
    daily assets with the current sigma and re-estimate nu and sigma as the
    Gaussian MLE of the implied asset log-returns. Stops when sigma moves by
    less than 1e-8. Standard errors come from the Fisher information of the
    Gaussian log-return likelihood: se_nu = sigma / sqrt(T_obs),
    se_sigma = sigma / sqrt(2 n).
    """
    equity = data.equity
    if window is not None:
        if window < MIN_WINDOW:
            raise ModelInputError(f"estimation window must be at least {MIN_WINDOW} observations, got {window}")
        equity = equity.iloc[-window:]
    if len(equity) < MIN_WINDOW:
        raise ModelInputError(f"need at least {MIN_WINDOW} equity observations, got {len(equity)}")

    debt = interpolate_debt(data.debt_points, equity.index).to_numpy()
    equity_values = equity.to_numpy(dtype=float)
    dt = 1.0 / trading_days
    n = len(equity_values) - 1

    _, sigma = _log_return_moments(equity_values, dt)
    if not sigma > 0.0:
        raise ModelInputError("equity series has zero variance; volatility is not identified")

    for iteration in range(1, MAX_ITERATIONS + 1):
        assets = invert_assets(equity_values, debt, sigma)
        nu, new_sigma = _log_return_moments(assets, dt)
        if not new_sigma > 0.0:
            raise ModelInputError("implied assets have zero variance; volatility is not identified")
        logger.debug("iteration %d: nu=%.6f sigma=%.8f", iteration, nu, new_sigma)
        converged = abs(new_sigma - sigma) < SIGMA_TOL
        sigma = new_sigma
        if converged:
            break
    else:
        raise ConvergenceError(f"volatility did not converge in {MAX_ITERATIONS} iterations")

    assets = invert_assets(equity_values, debt, sigma)
    nu, _ = _log_return_moments(assets, dt)
    estimate = ParameterEstimate(nu=nu, sigma=sigma,
                                 se_nu=sigma / math.sqrt(n * dt),
                                 se_sigma=sigma / math.sqrt(2.0 * n),
                                 A0=float(assets[-1]), D0=float(debt[-1]),
                                 iterations=iteration, n_returns=n)
    logger.info("Calibration converged after %d iterations: nu=%.4f (%.4f), sigma=%.4f (%.4f)",
                iteration, estimate.nu, estimate.se_nu, estimate.sigma, estimate.se_sigma)
    return estimate


# --- Model derivation ---
def derive_model(nu: float, sigma: float, r: float, A0: float, D0: float, **extra) -> FirmModel:
    """FirmModel with y = 0, c = ln(D0/A0)/sigma, mu = (nu - r)/sigma and R0 = A0/D0."""
    try:
        return FirmModel(nu=nu, sigma=sigma, r=r, A0=A0, D0=D0, **extra)
    except ValueError as e:
        raise ModelInputError(str(e)) from e


def alpha_of_rstar(rstar: float, model: FirmModel) -> float:
    """alpha = ln(R* D0 / A0) / sigma."""
    rstar = float(rstar)
    if not rstar > 0.0:
        raise ModelInputError(f"R* must be positive, got {rstar}")
    return math.log(rstar * model.D0 / model.A0) / model.sigma


def rstar_of_alpha(alpha: float, model: FirmModel) -> float:
    return math.exp(model.sigma * float(alpha)) * model.A0 / model.D0


def calibrate(data: MarketData, window: int | None = None, label: str = "") -> FirmModel:
    """Estimation followed by model derivation at the last observation date."""
    estimate = estimate_params(data, window)
    return derive_model(estimate.nu, estimate.sigma, data.risk_free, estimate.A0, estimate.D0,
                        se_nu=estimate.se_nu, se_sigma=estimate.se_sigma, label=label)


def load_reference_model(label: str, path: Path = REFERENCE_QUARTERS_FILE) -> FirmModel:
    """FirmModel for one of the shipped reference quarter-ends, e.g. '2013-12'."""
    table = pd.read_csv(path, dtype={"label": str}).set_index("label")
    if label not in table.index:
        raise ModelInputError(f"unknown reference quarter '{label}'; available: {', '.join(table.index)}")
    row = table.loc[label]
    return derive_model(row["nu"], row["sigma"], row["r"], row["A0"], row["D0"],
                        se_nu=row["se_nu"], se_sigma=row["se_sigma"], label=label)


def reference_labels(path: Path = REFERENCE_QUARTERS_FILE) -> list[str]:
    return pd.read_csv(path, dtype={"label": str})["label"].tolist()


# --- Cost of capital ---
def beta_regress(stock_returns, index_returns) -> float:
    """OLS slope (with intercept) of stock returns on index returns."""
    stock = np.asarray(stock_returns, dtype=float)
    index = np.asarray(index_returns, dtype=float)
    if stock.shape != index.shape or stock.size < 3:
        raise ModelInputError("beta regression needs two aligned series of at least 3 returns")
    if np.ptp(index) == 0.0:
        raise ModelInputError("index returns are constant; beta is not identified")
    return float(stats.linregress(index, stock).slope)


def wacc(inputs: WaccInputs) -> WaccBreakdown:
    """q = w_E (R_f + beta (R_m - R_f)) + w_D C_D (1 - tax), C_D = interest / mean(D, D_prior)."""
    average_debt = 0.5 * (inputs.debt_value + inputs.prior_debt_value)
    if average_debt == 0.0:
        raise ModelInputError("average debt is zero; cost of debt is undefined")
    cost_equity = inputs.risk_free + inputs.beta * (inputs.index_annual_return - inputs.risk_free)
    cost_debt = inputs.interest_paid / average_debt
    q = inputs.w_equity * cost_equity + inputs.w_debt * cost_debt * (1.0 - inputs.tax_rate)
    return WaccBreakdown(q=q, beta=inputs.beta, cost_equity=cost_equity, cost_debt=cost_debt,
                         w_equity=inputs.w_equity, w_debt=inputs.w_debt, tax_rate=inputs.tax_rate)
