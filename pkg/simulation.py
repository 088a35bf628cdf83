"""Monte Carlo engine for the leverage process and its brute-force oracle.

Paths are produced in fixed-size blocks. Block b draws from its own Philox
stream seeded with (seed, b) and always draws a full block of normals per
step, so path i depends only on (seed, i) and never on n_paths or on the
number of worker threads. Per-block results are reduced in block order.
"""
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from typing import Literal

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, model_validator
from tqdm import tqdm

from calibration import FirmModel
from config import SETTINGS
from diffusion_core import DiffusionSpec
from errors import ModelInputError
from numerics import normal_cdf
from occupation_opt import OptimizerConfig

logger = logging.getLogger(__name__)

# --- Configuration (Defaults/Constants) ---
TRADING_DT = 1.0 / SETTINGS.trading_days
EXTENDED_HORIZON = 30.0
RSTAR_GRID_POINTS = 91

# Published per-step adjustments, keyed by drift regime (sign of nu - r).
STRATEGY_PRESETS = {
    "positive": {
        "creditors": {"d_nu": -0.0005, "d_sigma": -0.0003, "min_excess_drift": 0.0},
        "shareholders": {"d_nu": 0.0008, "d_sigma": 0.0005},
    },
    "negative": {
        "creditors": {"d_nu": 0.0005, "d_sigma": 0.0003},
        "shareholders": {"d_nu": 0.0015, "d_sigma": 0.0009},
    },
}


# --- Domain Types ---
class StrategySpec(BaseModel):
    """Management reaction while the leverage ratio is at or below R*.

    Each step spent at or below R* adds (d_nu, d_sigma) to the parameters used
    for the next step; the adjustments accumulate. A step's adjustment is
    allowed only while the adjusted parameters keep sigma > 0 and respect the
    optional bounds (``min_excess_drift`` and ``max_excess_drift`` on nu - r,
    ``sigma_cap`` on sigma). Otherwise the path keeps its current parameters.
    """

    model_config = ConfigDict(frozen=True)

    mode: Literal["no_change", "creditors", "shareholders"] = "no_change"
    d_nu: float = 0.0
    d_sigma: float = 0.0
    min_excess_drift: float | None = None
    max_excess_drift: float | None = None
    sigma_cap: float | None = None

    @model_validator(mode="after")
    def _check(self):
        if self.mode == "no_change" and (self.d_nu != 0.0 or self.d_sigma != 0.0):
            raise ValueError("no_change strategy cannot carry parameter adjustments")
        return self

    def adjust(self, nu: np.ndarray, sigma: np.ndarray, mask: np.ndarray, r: float):
        """Applies one step of adjustment to the masked paths where the bounds allow it."""
        new_nu = nu + self.d_nu
        new_sigma = sigma + self.d_sigma
        allowed = mask & (new_sigma > 0.0)
        if self.min_excess_drift is not None:
            allowed &= new_nu - r >= self.min_excess_drift
        if self.max_excess_drift is not None:
            allowed &= new_nu - r <= self.max_excess_drift
        if self.sigma_cap is not None:
            allowed &= new_sigma <= self.sigma_cap
        return np.where(allowed, new_nu, nu), np.where(allowed, new_sigma, sigma)


class SimConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    n_paths: int = Field(50_000, ge=1)
    dt: float = Field(TRADING_DT, gt=0.0)
    horizon: float = Field(1.0, ge=0.0)
    seed: int = Field(SETTINGS.seed, ge=0, lt=2**64)
    block_size: int = Field(1024, ge=1)
    threads: int = Field(SETTINGS.threads, ge=1)
    progress: bool = False

    @model_validator(mode="after")
    def _check(self):
        if self.horizon > 0.0 and self.dt > self.horizon:
            raise ValueError(f"dt = {self.dt} exceeds the horizon {self.horizon}")
        return self

    @property
    def n_steps(self) -> int:
        return int(round(self.horizon / self.dt))

    @property
    def n_blocks(self) -> int:
        return -(-self.n_paths // self.block_size)

    def paths_in_block(self, block: int) -> int:
        return min(self.block_size, self.n_paths - block * self.block_size)


class StrategyOutcome(BaseModel):
    insolvency_prob: float
    insolvency_se: float
    time_above_frac: float
    n_paths: int


class SimulatedOptimum(BaseModel):
    rstar_opt: float
    objective_value: float
    insolvency_prob: float
    time_above_frac: float
    rstar_grid: list[float]
    objective: list[float]


class OracleStats(BaseModel):
    """Per-path statistics of Euler paths of X_t = y + mu t + B_t absorbed at c."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    killing_times: np.ndarray            # +inf for paths alive at the horizon
    terminal: np.ndarray                 # X at the horizon, nan if killed
    last_visit: np.ndarray | None = None  # last visit to the level before killing (0 if none)
    occupation_below: np.ndarray | None = None
    horizon: float

    @property
    def killed(self) -> np.ndarray:
        return np.isfinite(self.killing_times)


# --- Block machinery ---
def _block_generator(seed: int, block: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, block])))


def _run_blocks(kernel, cfg: SimConfig, desc: str) -> list:
    """kernel(block) for every block, returned in block order."""
    blocks = range(cfg.n_blocks)
    if cfg.threads > 1:
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            results = pool.map(kernel, blocks)
            return list(tqdm(results, total=cfg.n_blocks, desc=desc, disable=not cfg.progress))
    return [kernel(b) for b in tqdm(blocks, desc=desc, disable=not cfg.progress)]


def _check_rstar(rstar: float) -> float:
    rstar = float(rstar)
    if math.isnan(rstar) or rstar < 1.0:
        raise ModelInputError(f"R* must be at least 1, got {rstar}")
    return rstar


# --- Strategy simulation ---
def simulate_strategy(model: FirmModel, rstar: float, strat: StrategySpec, cfg: SimConfig) -> StrategyOutcome:
    """Insolvency probability and mean fraction of time above R* under a strategy.

    A evolves by exact GBM steps and D grows at r, so log R moves by
    (nu - r) dt + sigma sqrt(dt) Z. Insolvency is checked on the step grid
    (R <= 1 ends the path); time above counts steps with R > R*.
    """
    rstar = _check_rstar(rstar)
    if cfg.n_steps < 1:
        raise ModelInputError("simulation horizon must cover at least one step")
    log_rstar = math.log(rstar)
    dt, n_steps = cfg.dt, cfg.n_steps
    root_dt = math.sqrt(dt)
    adjusting = strat.mode != "no_change"

    def kernel(block: int):
        rng = _block_generator(cfg.seed, block)
        size = cfg.block_size
        x = np.full(size, math.log(model.R0))
        nu = np.full(size, model.nu)
        sigma = np.full(size, model.sigma)
        alive = np.ones(size, dtype=bool)
        above = np.zeros(size)
        for _ in range(n_steps):
            z = rng.standard_normal(size)
            x = np.where(alive, x + (nu - model.r) * dt + sigma * root_dt * z, x)
            alive &= x > 0.0
            above += alive & (x > log_rstar)
            if adjusting:
                nu, sigma = strat.adjust(nu, sigma, alive & (x <= log_rstar), model.r)
            if not alive.any():
                break
        n = cfg.paths_in_block(block)
        return float(np.sum(~alive[:n])), float(np.sum(above[:n] / n_steps))

    results = np.array(_run_blocks(kernel, cfg, f"R*={rstar:.4g} {strat.mode}"))
    p = results[:, 0].sum() / cfg.n_paths
    outcome = StrategyOutcome(insolvency_prob=p,
                              insolvency_se=math.sqrt(p * (1.0 - p) / cfg.n_paths),
                              time_above_frac=results[:, 1].sum() / cfg.n_paths,
                              n_paths=cfg.n_paths)
    logger.info("Strategy %s at R*=%.4f: insolvency %.4f, time above %.4f",
                strat.mode, rstar, outcome.insolvency_prob, outcome.time_above_frac)
    return outcome


def preset_strategy(mode: str, model: FirmModel) -> StrategySpec:
    """The published strategy of the given kind for the model's drift regime."""
    if mode == "no_change":
        return StrategySpec()
    regime = "positive" if model.nu - model.r > 0 else "negative"
    try:
        params = STRATEGY_PRESETS[regime][mode]
    except KeyError:
        raise ModelInputError(f"unknown strategy '{mode}'") from None
    return StrategySpec(mode=mode, **params)


def strategy_table(model: FirmModel, rstars, modes, cfg: SimConfig) -> pd.DataFrame:
    """simulate_strategy for every (R*, strategy) pair on common random numbers."""
    rows = []
    for rstar in rstars:
        for mode in modes:
            outcome = simulate_strategy(model, rstar, preset_strategy(mode, model), cfg)
            rows.append({"rstar": float(rstar), "strategy": mode,
                         "insolvency_prob": outcome.insolvency_prob,
                         "time_above_frac": outcome.time_above_frac})
    return pd.DataFrame(rows)


# --- Default probability ---
def default_probability(model: FirmModel, cfg: SimConfig) -> float:
    """Fraction of paths with A_1 < D_0 e^r, i.e. log R_1 < 0 at the one-year mark."""
    if not math.isclose(cfg.horizon, 1.0):
        raise ModelInputError("default probability is defined on a one-year horizon")
    dt, n_steps = cfg.dt, cfg.n_steps
    drift = (model.nu - model.r) * n_steps * dt

    def kernel(block: int):
        rng = _block_generator(cfg.seed, block)
        shocks = np.zeros(cfg.block_size)
        for _ in range(n_steps):
            shocks += rng.standard_normal(cfg.block_size)
        x = math.log(model.R0) + drift + model.sigma * math.sqrt(dt) * shocks
        return float(np.sum(x[:cfg.paths_in_block(block)] < 0.0))

    defaults = np.array(_run_blocks(kernel, cfg, "default probability"))
    return defaults.sum() / cfg.n_paths


def default_probability_analytic(model: FirmModel, horizon: float = 1.0) -> float:
    """P(log R_T < 0) = Phi((c - mu T) / sqrt T); Phi(c - mu) at one year."""
    spec = model.spec
    return float(normal_cdf((spec.c - spec.mu * horizon) / math.sqrt(horizon)))


# --- Alarm level chosen on simulated paths ---
def optimize_rstar_by_simulation(model: FirmModel, strat: StrategySpec, cfg: SimConfig,
                                 opt: OptimizerConfig, n_grid: int = RSTAR_GRID_POINTS,
                                 extended_horizon: float = EXTENDED_HORIZON) -> SimulatedOptimum:
    """Maximizes the alarm objective over R in [1, R0] with the strategy in force.

    Every R on the grid sees the same random numbers. For each path:
      term 1: insolvent by t, or below R at t, never back at R afterwards and
              insolvent within the extended horizon;
      term 2: exp(-q * time spent below R) on paths insolvent within the
              extended horizon, 0 otherwise.
    Paths still alive at the extended horizon count as never insolvent.
    """
    if n_grid < 2:
        raise ModelInputError("the R grid needs at least two points")
    if extended_horizon < opt.horizon_t:
        raise ModelInputError("extended horizon must cover the objective horizon t")
    rstars = np.linspace(1.0, model.R0, n_grid)
    log_r = np.log(rstars)[:, None]
    dt = cfg.dt
    root_dt = math.sqrt(dt)
    t_steps = max(1, int(round(opt.horizon_t / dt)))
    ext_steps = int(round(extended_horizon / dt))
    adjusting = strat.mode != "no_change"
    shape = (n_grid, cfg.block_size)

    def kernel(block: int):
        rng = _block_generator(cfg.seed, block)
        x = np.full(shape, math.log(model.R0))
        nu = np.full(shape, model.nu)
        sigma = np.full(shape, model.sigma)
        alive = np.ones(shape, dtype=bool)
        occupation = np.zeros(shape)
        revisit = np.zeros(shape, dtype=bool)
        insolvent_by_t = below_at_t = None
        for step in range(1, ext_steps + 1):
            z = rng.standard_normal(cfg.block_size)
            occupation += dt * (alive & (x < log_r))
            x = np.where(alive, x + (nu - model.r) * dt + sigma * root_dt * z, x)
            alive &= x > 0.0
            if step == t_steps:
                insolvent_by_t = ~alive
                below_at_t = alive & (x < log_r)
            elif step > t_steps:
                revisit |= alive & (x >= log_r)
            if adjusting:
                nu, sigma = strat.adjust(nu, sigma, alive & (x <= log_r), model.r)
            if not alive.any():
                break
        if insolvent_by_t is None:
            insolvent_by_t = ~alive
            below_at_t = np.zeros(shape, dtype=bool)
        insolvent = ~alive
        n = cfg.paths_in_block(block)
        term1 = (insolvent_by_t | (below_at_t & ~revisit & insolvent))[:, :n]
        term2 = (np.exp(-opt.q * occupation) * insolvent)[:, :n]
        return term1.sum(axis=1), term2.sum(axis=1)

    results = _run_blocks(kernel, cfg, f"R* grid {strat.mode}")
    term1 = np.sum([r[0] for r in results], axis=0) / cfg.n_paths
    term2 = np.sum([r[1] for r in results], axis=0) / cfg.n_paths
    values = opt.gamma * term1 + (1.0 - opt.gamma) * term2
    best = int(np.argmax(values))
    rstar_opt = float(rstars[best])

    outcome = simulate_strategy(model, rstar_opt, strat, cfg.model_copy(update={"horizon": opt.horizon_t}))
    logger.info("Simulated optimum for %s: R*=%.4f (objective %.6f)", strat.mode, rstar_opt, values[best])
    return SimulatedOptimum(rstar_opt=rstar_opt, objective_value=float(values[best]),
                            insolvency_prob=outcome.insolvency_prob,
                            time_above_frac=outcome.time_above_frac,
                            rstar_grid=rstars.tolist(), objective=values.tolist())


# --- Oracle paths ---
def oracle_paths(spec: DiffusionSpec, cfg: SimConfig, level: float | None = None,
                 band: float = 1e-3, bridge: bool = True) -> OracleStats:
    """Brute-force paths of X_t = y + mu t + B_t absorbed at c.

    Gaussian increments are exact on the grid. With ``bridge`` set, a
    Brownian-bridge test catches killings (and visits to ``level``) that
    happen between grid points. A visit to ``level`` is a grid point within
    band/2 of it, a sign change across it, or a bridge touch.
    """
    dt, n_steps = cfg.dt, cfg.n_steps
    root_dt = math.sqrt(dt)
    track_level = level is not None
    level = float(level) if track_level else 0.0

    def kernel(block: int):
        rng = _block_generator(cfg.seed, block)
        size = cfg.block_size
        x = np.full(size, spec.y)
        alive = np.ones(size, dtype=bool)
        killing = np.full(size, np.inf)
        last_visit = np.zeros(size)
        occupation = np.zeros(size)
        for step in range(1, n_steps + 1):
            z = rng.standard_normal(size)
            u_kill = rng.random(size)
            u_level = rng.random(size)
            t_prev = (step - 1) * dt
            x_new = x + spec.mu * dt + root_dt * z
            killed_now = alive & (x_new <= spec.c)
            if bridge:
                gap = np.maximum(x - spec.c, 0.0) * np.maximum(x_new - spec.c, 0.0)
                killed_now |= alive & (u_kill < np.exp(-2.0 * gap / dt))
            if track_level:
                occupation += dt * (alive & (x < level))
                before, after = x - level, x_new - level
                crossed = alive & (before * after <= 0.0)
                with np.errstate(divide="ignore", invalid="ignore"):
                    frac = np.where(before != after, before / (before - after), 1.0)
                visit_time = np.where(crossed, t_prev + dt * np.clip(frac, 0.0, 1.0), -1.0)
                near = alive & ~killed_now & (np.abs(after) <= 0.5 * band)
                visit_time = np.where(near & ~crossed, step * dt, visit_time)
                if bridge:
                    touched = (alive & ~crossed & ~near
                               & (u_level < np.exp(-2.0 * np.abs(before) * np.abs(after) / dt)))
                    visit_time = np.where(touched, t_prev + 0.5 * dt, visit_time)
                last_visit = np.maximum(last_visit, visit_time)
            killing = np.where(killed_now, step * dt, killing)
            alive &= ~killed_now
            x = np.where(alive, x_new, x)
            if not alive.any():
                break
        n = cfg.paths_in_block(block)
        terminal = np.where(alive, x, np.nan)
        return killing[:n], terminal[:n], last_visit[:n], occupation[:n]

    results = _run_blocks(kernel, cfg, "oracle paths")
    stats = [np.concatenate([r[i] for r in results]) for i in range(4)]
    return OracleStats(killing_times=stats[0], terminal=stats[1],
                       last_visit=stats[2] if track_level else None,
                       occupation_below=stats[3] if track_level else None,
                       horizon=cfg.horizon)
