import numpy as np
import pandas as pd
import pytest

from calibration import WaccInputs, bs_equity, load_reference_model
from diffusion_core import DiffusionSpec
from time_reversal import ReversedSpec


@pytest.fixture
def dec13_model():
    return load_reference_model("2013-12")


@pytest.fixture
def dec12_model():
    return load_reference_model("2012-12")


@pytest.fixture
def dec13_spec():
    return DiffusionSpec(mu=-1.7128, c=-2.0862, y=0.0)


@pytest.fixture
def jun12_spec():
    return DiffusionSpec(mu=1.3268, c=-1.3471, y=0.0)


@pytest.fixture
def dec13_reversed(dec13_spec):
    return ReversedSpec(base=dec13_spec)


@pytest.fixture
def wacc_2013():
    return WaccInputs(equity_value=135.43, debt_value=157.55, interest_paid=18.95, prior_debt_value=117.05,
                      index_annual_return=0.3832, risk_free=0.0013, beta=1.426, tax_rate=0.35)


@pytest.fixture
def wacc_2012():
    return WaccInputs(equity_value=106.52, debt_value=117.05, interest_paid=10.95, prior_debt_value=101.75,
                      index_annual_return=0.1591, risk_free=0.0016, beta=1.1143, tax_rate=0.35)


def make_market_frames(seed=7, n_days=253, nu=0.1, sigma=0.3, A0=330.0, D=150.0):
    """Equity and quarterly debt generated from a GBM asset path with constant debt."""
    rng = np.random.default_rng(seed)
    dt = 1.0 / 252
    shocks = rng.standard_normal(n_days - 1)
    log_assets = np.log(A0) + np.concatenate([[0.0], np.cumsum(nu * dt + sigma * np.sqrt(dt) * shocks)])
    assets = np.exp(log_assets)
    dates = pd.bdate_range("2013-01-02", periods=n_days)
    equity = pd.Series(bs_equity(assets, D, sigma), index=dates, name="equity_value")
    quarter_ends = pd.DatetimeIndex(["2012-12-31", "2013-03-31", "2013-06-30", "2013-09-30", "2013-12-31",
                                     "2014-03-31"])
    debt = pd.Series(D, index=quarter_ends, name="debt_value")
    return equity, debt, assets


@pytest.fixture
def market_frames():
    return make_market_frames()


@pytest.fixture
def synthetic_market():
    return make_market_frames


@pytest.fixture
def market_csvs(tmp_path, market_frames):
    equity, debt, _ = market_frames
    equity_path = tmp_path / "equity.csv"
    debt_path = tmp_path / "debt.csv"
    index_path = tmp_path / "index.csv"
    equity.rename_axis("date").reset_index().to_csv(equity_path, index=False, date_format="%Y-%m-%d")
    debt.rename_axis("date").reset_index().to_csv(debt_path, index=False, date_format="%Y-%m-%d")
    rng = np.random.default_rng(11)
    index_returns = pd.Series(rng.normal(0.0005, 0.01, len(equity)), index=equity.index, name="return")
    index_returns.rename_axis("date").reset_index().to_csv(index_path, index=False, date_format="%Y-%m-%d")
    return {"equity": equity_path, "debt": debt_path, "index": index_path}
