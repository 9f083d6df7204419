"""Command-line entry point.

Subcommands: price, benchmark, simulate, fitdemo, calibrate, report.
Exit codes: 0 success, 1 validation failure, 2 I/O failure.  Everything a
command prints or writes is deterministic for a given config and seed,
wall-clock timings aside.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time
from dataclasses import replace

import numpy as np

from .binomial import BsSetup, binomial_put
from .calibration import (OptimizerConfig, calibrate_bcc, calibrate_cir_report,
                          chain_mse, implied_short_rate, price_chain)
from .config import RunConfig, load_config
from .engine import BccParams, GridSpec, martingale_diagnostic, simulate
from .market_data import (apply_filters, load_bonds, load_chain, mse_report,
                          write_bucket_report)
from .pricer import PutContract, price_american_put
from .regressors import (BoostedTreesSpec, MlpSpec, PolynomialSpec, fit, predict)

__all__ = ["main"]

# Benchmark constants: flat 20% volatility and flat 6% rate expressed as a
# degenerate stochastic model, so every module runs through one code path.
BENCHMARK_BINOMIAL = BsSetup(s0=36.0, strike=40.0, maturity=1.0, rate=0.06,
                             sigma=0.2, steps=500)
BENCHMARK_MODEL = BccParams(kappa_v=0.0, theta_v=0.04, sigma_v=0.0, rho=0.0,
                            v0=0.04, lam=0.0, mu_j=0.0, delta=0.0,
                            kappa_r=0.0, theta_r=0.06, sigma_r=0.0, r0=0.06)
BENCHMARK_GRID = GridSpec(s0=36.0, horizon=1.0, steps=20, paths=25000, seed=42,
                          antithetic=True, moment_match=True)
BENCHMARK_CONTRACT = PutContract(strike=40.0, maturity=1.0)
BENCHMARK_REGRESSORS = [
    PolynomialSpec(degree=5),
    BoostedTreesSpec(estimators=50, max_depth=3, learning_rate=0.05),
    MlpSpec(hidden_layers=(20, 20, 20, 20), batch_size=256, epochs=30,
            learning_rate=1e-3, seed=0),
]


def _load(path: str, seed: int | None) -> RunConfig:
    cfg = load_config(path)
    if seed is not None and cfg.grid is not None:
        cfg = replace(cfg, grid=replace(cfg.grid, seed=seed))
    return cfg


def cmd_price(args: argparse.Namespace) -> None:
    cfg = _load(args.config, args.seed)
    cfg.require("model", "grid", "contract", "regressor")
    grid = simulate(cfg.model, cfg.grid)
    result = price_american_put(grid, cfg.contract, cfg.regressor,
                                itm_only=cfg.pricing.itm_only,
                                features=cfg.pricing.features,
                                control_variate=cfg.pricing.control_variate)
    print(f"regressor: {result.regressor.name}")
    print(f"price: {result.price!r}")
    print(f"std_error: {result.std_error!r}")
    print(f"wall_time_sec: {result.wall_time:.3f}")


def cmd_benchmark(args: argparse.Namespace) -> None:
    grid_spec = BENCHMARK_GRID if args.seed is None else replace(BENCHMARK_GRID,
                                                                 seed=args.seed)
    t0 = time.perf_counter()
    reference = binomial_put(BENCHMARK_BINOMIAL)
    t_binomial = time.perf_counter() - t0

    grid = simulate(BENCHMARK_MODEL, grid_spec)
    rows = [("binomial", reference, None, t_binomial)]
    for spec in BENCHMARK_REGRESSORS:
        result = price_american_put(grid, BENCHMARK_CONTRACT, spec)
        rows.append((spec.name, result.price, result.std_error, result.wall_time))

    print(f"{'method':<16}{'price':<22}{'std_error':<22}{'wall_time_sec':<14}")
    for name, price, se, wall in rows:
        se_text = "-" if se is None else repr(se)
        print(f"{name:<16}{price!r:<22}{se_text:<22}{wall:.3f}")


def cmd_simulate(args: argparse.Namespace) -> None:
    cfg = _load(args.config, args.seed)
    cfg.require("model", "grid")
    grid = simulate(cfg.model, cfg.grid)
    estimate, se = martingale_diagnostic(grid, cfg.grid.s0)
    z = (estimate - cfg.grid.s0) / se if se > 0.0 else 0.0
    print(f"paths: {grid.paths}  steps: {grid.steps}  horizon: {grid.horizon}")
    print(f"discounted_terminal_mean: {estimate!r}")
    print(f"std_error: {se!r}")
    print(f"z_vs_s0: {z:.3f}")
    print(f"terminal_index: min {grid.index[:, -1].min():.6g}  "
          f"mean {grid.index[:, -1].mean():.6g}  max {grid.index[:, -1].max():.6g}")
    if args.dump_paths:
        os.makedirs(args.out, exist_ok=True)
        dump_path = os.path.join(args.out, "paths.csv")
        with open(dump_path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["path", "step", "index", "variance", "rate", "discount"])
            for i in range(grid.paths):
                for t in range(grid.steps + 1):
                    writer.writerow([i, t, repr(float(grid.index[i, t])),
                                     repr(float(grid.variance[i, t])),
                                     repr(float(grid.rate[i, t])),
                                     repr(float(grid.discount[i, t]))])
        from .figures import path_fan_figure
        fan_path = os.path.join(args.out, "paths.png")
        path_fan_figure(grid, fan_path)
        print(f"wrote {dump_path}")
        print(f"wrote {fan_path}")


def _read_xy(path: str) -> tuple[np.ndarray, np.ndarray]:
    xs, ys = [], []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [c.strip() for c in header] != ["x", "y"]:
            raise ValueError(f"{path}: header must be exactly x,y")
        for row in reader:
            xs.append(float(row[0]))
            ys.append(float(row[1]))
    if not xs:
        raise ValueError(f"{path}: no data rows")
    return np.asarray(xs), np.asarray(ys)


def cmd_fitdemo(args: argparse.Namespace) -> None:
    x, y = _read_xy(args.chain)
    x2 = x.reshape(-1, 1)
    specs = [PolynomialSpec(), BoostedTreesSpec(), MlpSpec()]
    columns = ["yhat_poly", "yhat_trees", "yhat_mlp"]
    fits: dict[str, np.ndarray] = {}
    for spec, column in zip(specs, columns):
        model = fit(spec, x2, y)
        yhat = predict(model, x2)
        fits[column] = yhat
        mse = float(((yhat - y) ** 2).mean())
        print(f"{spec.name}: in-sample mse {mse!r}")

    os.makedirs(args.out, exist_ok=True)
    csv_path = os.path.join(args.out, "fitdemo.csv")
    with open(csv_path, "w", newline="") as fh:
        fh.write("x,y,yhat_poly,yhat_trees,yhat_mlp\n")
        for i in range(len(x)):
            # float() strips the numpy scalar type so repr stays CSV-clean
            cells = [x[i], y[i], fits["yhat_poly"][i], fits["yhat_trees"][i],
                     fits["yhat_mlp"][i]]
            fh.write(",".join(repr(float(c)) for c in cells) + "\n")
    from .figures import fit_comparison_figure
    png_path = os.path.join(args.out, "fitdemo.png")
    fit_comparison_figure(x, y, fits, png_path)
    print(f"wrote {csv_path}")
    print(f"wrote {png_path}")


def _print_params(params: dict[str, float]) -> None:
    for key, value in params.items():
        print(f"  {key}: {value!r}")


def cmd_calibrate(args: argparse.Namespace) -> None:
    cfg = _load(args.config, args.seed)
    cfg.require("grid", "regressor", "calibration")
    settings = cfg.calibration
    optimizer: OptimizerConfig = settings.optimizer

    bonds = load_bonds(args.bonds)
    r0 = implied_short_rate(bonds)
    cir, cir_record = calibrate_cir_report(bonds, r0, optimizer)

    quotes = apply_filters(load_chain(args.chain, settings.spot, settings.quote_date))
    if not quotes:
        raise ValueError(f"{args.chain}: no quotes survive the filters")

    report = calibrate_bcc(quotes, cir, cfg.regressor, cfg.grid, optimizer,
                           cir_record=cir_record)

    os.makedirs(args.out, exist_ok=True)
    json_path = os.path.join(args.out, "calibration_report.json")
    with open(json_path, "w") as fh:
        json.dump(report.as_dict(), fh, indent=2)
        fh.write("\n")

    model_prices = price_chain(report.final, quotes, cfg.regressor, cfg.grid)
    bucket = mse_report(list(zip(quotes, model_prices)))
    csv_path = os.path.join(args.out, "bucket_report.csv")
    write_bucket_report(bucket, csv_path)

    from .figures import bucket_mse_figure, chain_fit_figure, stage_objective_figure
    stage_objective_figure(report, os.path.join(args.out, "calibration_stages.png"))
    chain_fit_figure([q.strike for q in quotes], [q.maturity_years for q in quotes],
                     [q.mid_price for q in quotes], model_prices,
                     os.path.join(args.out, "chain_fit.png"))
    bucket_mse_figure(bucket, os.path.join(args.out, "bucket_report.png"))

    print("final parameters:")
    _print_params(report.final_dict())
    print(f"in_sample_mse: {bucket.overall_mse!r}")
    print(f"wrote {json_path}")
    print(f"wrote {csv_path}")

    if args.chain2:
        if settings.spot2 is None or settings.quote_date2 is None:
            raise ValueError("--chain2 requires spot2 and quote_date2 in the "
                             "calibration config section")
        quotes2 = apply_filters(load_chain(args.chain2, settings.spot2,
                                           settings.quote_date2))
        if not quotes2:
            raise ValueError(f"{args.chain2}: no quotes survive the filters")
        prices2 = price_chain(report.final, quotes2, cfg.regressor, cfg.grid)
        bucket2 = mse_report(list(zip(quotes2, prices2)))
        oos_path = os.path.join(args.out, "bucket_report_oos.csv")
        write_bucket_report(bucket2, oos_path)
        print(f"out_of_sample_mse: {bucket2.overall_mse!r}")
        print(f"wrote {oos_path}")


def cmd_report(args: argparse.Namespace) -> None:
    cfg = _load(args.config, args.seed)
    cfg.require("model", "grid", "regressor", "calibration")
    settings = cfg.calibration
    quotes = apply_filters(load_chain(args.chain, settings.spot, settings.quote_date))
    if not quotes:
        raise ValueError(f"{args.chain}: no quotes survive the filters")
    model_prices = price_chain(cfg.model, quotes, cfg.regressor, cfg.grid)
    bucket = mse_report(list(zip(quotes, model_prices)))

    os.makedirs(args.out, exist_ok=True)
    csv_path = os.path.join(args.out, "bucket_report.csv")
    write_bucket_report(bucket, csv_path)
    from .figures import bucket_mse_figure, chain_fit_figure
    chain_fit_figure([q.strike for q in quotes], [q.maturity_years for q in quotes],
                     [q.mid_price for q in quotes], model_prices,
                     os.path.join(args.out, "chain_fit.png"))
    bucket_mse_figure(bucket, os.path.join(args.out, "bucket_report.png"))

    for entry in bucket.entries:
        mse_text = "-" if entry.mse is None else repr(entry.mse)
        print(f"{entry.bucket.maturity.value:<6}{entry.bucket.moneyness.value:<5}"
              f"count {entry.count:<4} mse {mse_text}")
    print(f"overall_mse: {bucket.overall_mse!r}")
    print(f"wrote {csv_path}")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bcclsm",
        description="American put pricing by least-squares Monte Carlo under "
                    "stochastic volatility, stochastic rates, and jumps.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("price", help="price one contract from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_price)

    p = sub.add_parser("benchmark", help="flat-volatility benchmark table")
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_benchmark)

    p = sub.add_parser("simulate", help="simulate a path grid and report diagnostics")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=".")
    p.add_argument("--dump-paths", action="store_true")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fitdemo", help="fit all three regressors to an x,y CSV")
    p.add_argument("--chain", required=True, help="input CSV with header x,y")
    p.add_argument("--out", default=".")
    p.set_defaults(func=cmd_fitdemo)

    p = sub.add_parser("calibrate", help="run the 4-stage calibration")
    p.add_argument("--config", required=True)
    p.add_argument("--chain", required=True)
    p.add_argument("--bonds", required=True)
    p.add_argument("--chain2", default=None)
    p.add_argument("--out", default=".")
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("report", help="price a chain at config parameters and "
                                      "write the bucketed error report")
    p.add_argument("--config", required=True)
    p.add_argument("--chain", required=True)
    p.add_argument("--out", default=".")
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_report)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        args.func(args)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
