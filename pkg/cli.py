"""Command-line front end.

    python cli.py calibrate --equity equity.csv --debt debt.csv --risk-free 0.0013 --out model.json
    python cli.py analyze   --reference 2013-12 --rstar 1.25,1.67 --t 1 --out report.json
    python cli.py density   --model model.json --alpha -1.3358 --kind time-to-default --out curve.csv
    python cli.py optimize  --reference 2013-12 --gamma 0.4 --q 0.3006 --out alpha_star.json
    python cli.py wacc      --inputs wacc_inputs.csv
    python cli.py simulate  --reference 2012-12 --rstar 1.25,1.67 --paths 50000 --out strategies.csv

Exit codes: 0 success, 2 input or validation error, 3 numerical failure.
"""
import argparse
import logging
import sys

import numpy as np
import pandas as pd

from calibration import (
    MarketData,
    WaccInputs,
    beta_regress,
    derive_model,
    estimate_params,
    load_reference_model,
    reference_labels,
    wacc,
)
from config import SETTINGS, setup_logging
from errors import ConvergenceError, ModelInputError, NumericalError
from io_utils import (
    dumps_json,
    load_model,
    read_debt_csv,
    read_equity_csv,
    read_index_csv,
    read_wacc_inputs_csv,
    save_json_data,
    write_curve_csv,
    write_table_csv,
)
from last_passage import AlarmQuery, lp_density_curve, lp_within_curve
from numerics import geometric_grid
from occupation_opt import TABLE_START_ALPHA, OptimizerConfig, comparative_statics, gamma_sweep, optimize_alpha
from reports import analysis_table, build_report, report_payload, rows_frame
from simulation import (
    SimConfig,
    default_probability,
    default_probability_analytic,
    optimize_rstar_by_simulation,
    preset_strategy,
    strategy_table,
)
from time_reversal import ReversedSpec, time_to_default_cdf, time_to_default_density

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_NUMERICAL = 3

STRATEGIES = ("no_change", "creditors", "shareholders")
DENSITY_KINDS = ("last-passage", "last-passage-cdf", "time-to-default", "time-to-default-cdf")


# --- Argument helpers ---
def float_list(text: str) -> list[float]:
    """'1.25,1.67' -> [1.25, 1.67]."""
    try:
        values = [float(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got '{text}'") from None
    if not values:
        raise argparse.ArgumentTypeError("expected at least one number")
    return values


def float_range(text: str) -> list[float]:
    """'start:stop:step' inclusive of both ends, e.g. '0:1:0.02'."""
    try:
        start, stop, step = (float(part) for part in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected start:stop:step, got '{text}'") from None
    if not step > 0.0 or stop < start:
        raise argparse.ArgumentTypeError(f"invalid range '{text}'")
    count = int(round((stop - start) / step)) + 1
    return np.linspace(start, stop, count).tolist()


def _add_model_source(parser: argparse.ArgumentParser) -> None:
    source = parser.add_mutually_exclusive_group(required=True)
    source.add_argument("--model", help="model.json written by 'calibrate'")
    source.add_argument("--reference", help=f"shipped reference quarter, one of: {', '.join(reference_labels())}")


def _add_sim_options(parser: argparse.ArgumentParser, paths: int = 50_000) -> None:
    parser.add_argument("--paths", type=int, default=paths, help="Number of simulated paths")
    parser.add_argument("--dt", type=float, default=1.0 / SETTINGS.trading_days, help="Step size in years")
    parser.add_argument("--seed", type=int, default=SETTINGS.seed)
    parser.add_argument("--threads", type=int, default=SETTINGS.threads)
    parser.add_argument("--progress", action="store_true", help="Show progress bars")


def _load_model(args):
    return load_model(args.model) if args.model else load_reference_model(args.reference)


def _sim_config(args, horizon: float = 1.0) -> SimConfig:
    try:
        return SimConfig(n_paths=args.paths, dt=args.dt, horizon=horizon, seed=args.seed,
                         threads=args.threads, progress=args.progress)
    except ValueError as e:
        raise ModelInputError(str(e)) from e


def _emit(payload, out) -> None:
    if out:
        save_json_data(payload, out)
    else:
        print(dumps_json(payload))


# --- Subcommands ---
def cmd_calibrate(args) -> int:
    equity = read_equity_csv(args.equity)
    debt = read_debt_csv(args.debt)
    index = read_index_csv(args.index) if args.index else None
    try:
        data = MarketData(equity=equity, debt_points=debt, index_returns=index, risk_free=args.risk_free)
    except ValueError as e:
        raise ModelInputError(str(e)) from e

    estimate = estimate_params(data, window=args.window)
    model = derive_model(estimate.nu, estimate.sigma, args.risk_free, estimate.A0, estimate.D0,
                         se_nu=estimate.se_nu, se_sigma=estimate.se_sigma, label=args.label)
    payload = model.model_dump()
    payload["iterations"] = estimate.iterations
    payload["n_returns"] = estimate.n_returns
    if index is not None:
        stock_returns = equity.pct_change().dropna()
        aligned = pd.concat([stock_returns, index], axis=1, join="inner").dropna()
        payload["beta"] = beta_regress(aligned.iloc[:, 0], aligned.iloc[:, 1])
    _emit(payload, args.out)
    return EXIT_OK


def cmd_analyze(args) -> int:
    model = _load_model(args)
    rows = analysis_table(model, args.rstar, args.t)
    tables = {"analysis": rows}
    if args.paths > 0:
        simulated = default_probability(model, _sim_config(args, horizon=1.0))
        tables["default_probability"] = [{
            "default_probability": simulated,
            "default_probability_analytic": default_probability_analytic(model),
            "n_paths": args.paths,
        }]
    payload = report_payload(build_report(model, tables=tables))
    if args.csv:
        write_table_csv(rows_frame(rows), args.csv)
    _emit(payload, args.out)
    return EXIT_OK


def _density_levels(args, model) -> list[float]:
    if args.alpha is not None:
        return args.alpha
    return [model.alpha_of_rstar(rstar) for rstar in args.rstar]


def cmd_density(args) -> int:
    model = _load_model(args)
    grid = geometric_grid(args.grid_start, args.grid_stop, args.grid_n)
    curves = []
    for alpha in _density_levels(args, model):
        if not alpha > model.spec.c:
            raise ModelInputError(f"alpha = {alpha} must lie above the killing level c = {model.spec.c}")
        if args.kind == "last-passage":
            curve = lp_density_curve(AlarmQuery(alpha=alpha, spec=model.spec), grid)
        elif args.kind == "last-passage-cdf":
            curve = lp_within_curve(AlarmQuery(alpha=alpha, spec=model.spec), grid)
        elif args.kind == "time-to-default":
            curve = time_to_default_density(alpha, ReversedSpec(base=model.spec), grid)
        else:
            curve = time_to_default_cdf(alpha, ReversedSpec(base=model.spec), grid)
        curves.append((alpha, curve))

    if len(curves) == 1:
        write_curve_csv(curves[0][1], args.out)
    else:
        frame = pd.DataFrame({"t": grid})
        for alpha, curve in curves:
            frame[f"alpha={alpha:.6g}"] = curve.values
        write_table_csv(frame, args.out)
    return EXIT_OK


def _discount_rate(args) -> float:
    if args.q is not None:
        return args.q
    return wacc(read_wacc_inputs_csv(args.wacc_inputs)).q


def cmd_optimize(args) -> int:
    model = _load_model(args)
    if args.table:
        start = TABLE_START_ALPHA if args.start_alpha is None else args.start_alpha
        table = comparative_statics(model.spec.c, args.mus, args.qs, gamma=args.gamma, horizon_t=args.t,
                                    coarse_grid_n=args.grid_n, start_alpha=start)
        frame = table.reset_index()
        frame.columns = ["mu"] + [f"q={q:g}" for q in table.columns]
        write_table_csv(frame, args.out)
        return EXIT_OK

    try:
        cfg = OptimizerConfig(gamma=args.gamma, q=_discount_rate(args), horizon_t=args.t,
                              coarse_grid_n=args.grid_n, start_alpha=args.start_alpha)
    except ValueError as e:
        raise ModelInputError(str(e)) from e

    if args.gamma_sweep:
        sweep = gamma_sweep(model.spec, cfg, args.gamma_sweep)
        frame = pd.DataFrame(sweep, columns=["gamma", "alpha_star"])
        frame["rstar"] = [model.rstar_of_alpha(a) for a in frame["alpha_star"]]
        write_table_csv(frame, args.out)
        return EXIT_OK

    if args.simulate:
        strat = preset_strategy(args.strategy, model)
        result = optimize_rstar_by_simulation(model, strat, _sim_config(args, horizon=cfg.horizon_t), cfg,
                                              n_grid=args.rstar_grid_n)
        payload = {"method": "simulation", "strategy": args.strategy, "gamma": cfg.gamma, "q": cfg.q,
                   "t": cfg.horizon_t, "rstar": result.rstar_opt,
                   "alpha_star": model.alpha_of_rstar(result.rstar_opt),
                   "value": result.objective_value, "insolvency_prob": result.insolvency_prob,
                   "time_above_frac": result.time_above_frac}
    else:
        result = optimize_alpha(model.spec, cfg)
        payload = {"method": "analytic", "gamma": cfg.gamma, "q": cfg.q, "t": cfg.horizon_t,
                   "alpha_star": result.alpha_star, "rstar": model.rstar_of_alpha(result.alpha_star),
                   "value": result.value, "breakdown": result.breakdown.model_dump()}
    _emit(payload, args.out)
    return EXIT_OK


def cmd_wacc(args) -> int:
    if args.inputs:
        inputs = read_wacc_inputs_csv(args.inputs)
    else:
        flags = {"equity_value": args.equity, "debt_value": args.debt, "interest_paid": args.interest,
                 "prior_debt_value": args.prior_debt, "index_annual_return": args.index_return,
                 "risk_free": args.risk_free, "beta": args.beta}
        missing = [name for name, value in flags.items() if value is None]
        if missing:
            raise ModelInputError(f"missing WACC inputs: {', '.join(missing)}")
        if args.tax_rate is not None:
            flags["tax_rate"] = args.tax_rate
        try:
            inputs = WaccInputs(**flags)
        except ValueError as e:
            raise ModelInputError(str(e)) from e
    _emit(wacc(inputs).model_dump(), args.out)
    return EXIT_OK


def cmd_simulate(args) -> int:
    model = _load_model(args)
    cfg = _sim_config(args, horizon=args.horizon)
    table = strategy_table(model, args.rstar, args.strategy, cfg)
    write_table_csv(table, args.out)
    return EXIT_OK


# --- Parser ---
def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="Last-passage-time credit alarms on the leverage ratio.")
    parser.add_argument("--log-level", default=SETTINGS.log_level)
    parser.add_argument("--log-file", default=SETTINGS.log_file)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("calibrate", help="Estimate (nu, sigma) and write model.json")
    p.add_argument("--equity", required=True, help="CSV with date, equity_value")
    p.add_argument("--debt", required=True, help="CSV with date, debt_value at quarter-ends")
    p.add_argument("--index", help="CSV with date, return; adds beta to the output")
    p.add_argument("--risk-free", type=float, required=True)
    p.add_argument("--window", type=int, help="Use only the last WINDOW equity observations")
    p.add_argument("--label", default="")
    p.add_argument("--out", help="Output JSON path (stdout if omitted)")
    p.set_defaults(handler=cmd_calibrate)

    p = sub.add_parser("analyze", help="Last-passage, first-passage and occupancy probabilities")
    _add_model_source(p)
    p.add_argument("--rstar", type=float_list, default=[1.25, 1.67])
    p.add_argument("--t", type=float_list, default=[1.0])
    p.add_argument("--out", help="report.json path (stdout if omitted)")
    p.add_argument("--csv", help="Also write the analysis rows as CSV")
    _add_sim_options(p, paths=0)
    p.set_defaults(handler=cmd_analyze)

    p = sub.add_parser("density", help="Plottable curves on a geometric time grid")
    _add_model_source(p)
    level = p.add_mutually_exclusive_group(required=True)
    level.add_argument("--alpha", type=float_list)
    level.add_argument("--rstar", type=float_list)
    p.add_argument("--kind", choices=DENSITY_KINDS, default="last-passage")
    p.add_argument("--grid-start", type=float, default=1e-4)
    p.add_argument("--grid-stop", type=float, default=10.0)
    p.add_argument("--grid-n", type=int, default=400)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=cmd_density)

    p = sub.add_parser("optimize", help="Optimal alarm level")
    _add_model_source(p)
    p.add_argument("--gamma", type=float, default=0.4)
    rate = p.add_mutually_exclusive_group()
    rate.add_argument("--q", type=float)
    rate.add_argument("--wacc-inputs", help="One-row CSV of WACC inputs")
    p.add_argument("--t", type=float, default=1.0)
    p.add_argument("--grid-n", type=int, default=400)
    p.add_argument("--gamma-sweep", type=float_range, help="start:stop:step; writes a CSV")
    p.add_argument("--table", action="store_true", help="alpha* over --mus x --qs; writes a CSV")
    p.add_argument("--mus", type=float_list, default=[-2.0, -1.9, -1.8, -1.7, -1.6, -1.5])
    p.add_argument("--qs", type=float_list, default=[0.25, 0.28, 0.31, 0.34, 0.37, 0.4])
    p.add_argument("--start-alpha", type=float,
                   help="Climb to the local maximum from this level (the --table default is -1)")
    p.add_argument("--simulate", action="store_true", help="Choose R* on simulated paths")
    p.add_argument("--strategy", choices=STRATEGIES, default="no_change")
    p.add_argument("--rstar-grid-n", type=int, default=91)
    _add_sim_options(p)
    p.add_argument("--out", help="Output path (stdout if omitted for JSON results)")
    p.set_defaults(handler=cmd_optimize)

    p = sub.add_parser("wacc", help="Weighted average cost of capital")
    p.add_argument("--inputs", help="One-row CSV of WACC inputs")
    p.add_argument("--equity", type=float)
    p.add_argument("--debt", type=float)
    p.add_argument("--interest", type=float)
    p.add_argument("--prior-debt", type=float)
    p.add_argument("--index-return", type=float)
    p.add_argument("--risk-free", type=float)
    p.add_argument("--beta", type=float)
    p.add_argument("--tax-rate", type=float)
    p.add_argument("--out")
    p.set_defaults(handler=cmd_wacc)

    p = sub.add_parser("simulate", help="Insolvency and time above R* under management strategies")
    _add_model_source(p)
    p.add_argument("--rstar", type=float_list, default=[1.25, 1.67])
    p.add_argument("--strategy", type=lambda s: s.split(","), default=list(STRATEGIES))
    p.add_argument("--horizon", type=float, default=1.0)
    _add_sim_options(p)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=cmd_simulate)
    return parser


def _check_command_args(parser: argparse.ArgumentParser, args) -> None:
    if args.command == "optimize" and not args.table and args.q is None and args.wacc_inputs is None:
        parser.error("optimize needs --q or --wacc-inputs")
    if args.command in ("optimize", "density", "simulate") and not getattr(args, "out", None):
        needs_out = args.command != "optimize" or args.table or args.gamma_sweep
        if needs_out:
            parser.error(f"{args.command} needs --out")
    if args.command == "simulate":
        unknown = [s for s in args.strategy if s not in STRATEGIES]
        if unknown:
            parser.error(f"unknown strategy: {', '.join(unknown)}")


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        _check_command_args(parser, args)
    except SystemExit as e:
        return EXIT_INPUT if e.code else EXIT_OK

    try:
        setup_logging(args.log_level, args.log_file)
        return args.handler(args)
    except ModelInputError as e:
        logging.critical(f"Input error: {e}")
        return EXIT_INPUT
    except (ConvergenceError, NumericalError) as e:
        logging.critical(f"Numerical failure: {e}")
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
