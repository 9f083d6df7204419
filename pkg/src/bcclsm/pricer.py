"""Least-squares Monte Carlo pricing of the American put.

Backward induction over a simulated PathGrid: at each decision date a
regressor maps state features to the expected discounted value of keeping
the option alive, and a path exercises when intrinsic value is at least
that estimate (ties exercise).  Regression targets are the pathwise
discounted future cashflows, so the stochastic short rate flows through the
discounting instead of a flat curve.

By default regressions run on in-the-money paths only and the feature is
the strike-normalized spot; full-state features add variance and rate
columns.  A control variate on the discounted terminal index is available
for variance reduction.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from .engine import PathGrid
from .regressors import RegressorSpec, fit, predict

__all__ = ["PutContract", "PricingResult", "price_american_put", "continuation_surface"]

FEATURE_SETS = ("price-only", "full-state")


@dataclass(frozen=True)
class PutContract:
    """American put terms: strike and maturity in years."""

    strike: float
    maturity: float

    def __post_init__(self) -> None:
        if self.strike <= 0.0:
            raise ValueError(f"strike must be positive, got {self.strike}")
        if self.maturity <= 0.0:
            raise ValueError(f"maturity must be positive, got {self.maturity}")


@dataclass(frozen=True)
class PricingResult:
    """Point estimate with sampling error and exercise profile.

    ``exercise_fraction[t]`` is the fraction of paths exercising at step t
    with positive payoff (index 0 is always zero; the time-zero floor is
    applied to the price, not the paths).  ``std_error`` is computed before
    the intrinsic-value floor.
    """

    price: float
    std_error: float
    exercise_fraction: np.ndarray
    wall_time: float
    regressor: RegressorSpec


def _check_inputs(grid: PathGrid, contract: PutContract, features: str) -> None:
    if features not in FEATURE_SETS:
        raise ValueError(f"features must be one of {FEATURE_SETS}, got {features!r}")
    if grid.paths < 100:
        raise ValueError(f"need at least 100 paths for the regression, got {grid.paths}")
    if not math.isclose(grid.horizon, contract.maturity, rel_tol=1e-9, abs_tol=1e-12):
        raise ValueError(f"grid horizon {grid.horizon} does not match "
                         f"contract maturity {contract.maturity}")


def _features_at(grid: PathGrid, contract: PutContract, t: int, features: str,
                 rows: np.ndarray) -> np.ndarray:
    moneyness = grid.index[rows, t] / contract.strike
    if features == "price-only":
        return moneyness[:, None]
    return np.column_stack((moneyness, grid.variance[rows, t], grid.rate[rows, t]))


def _induct(grid: PathGrid, contract: PutContract, spec: RegressorSpec, *,
            itm_only: bool, features: str, foresight: bool,
            capture_step: int | None = None):
    """Run the backward induction; returns (cashflow, exercise step, capture).

    ``capture_step`` snapshots (features, targets, fitted continuation) of
    the regression at that step for the surface dump.
    """
    s = grid.index
    disc = grid.discount
    n_paths = grid.paths
    n_steps = grid.steps
    strike = contract.strike
    rows = np.arange(n_paths)

    cashflow = np.maximum(strike - s[:, n_steps], 0.0)
    tau = np.full(n_paths, n_steps)
    captured = None

    for t in range(n_steps - 1, 0, -1):
        intrinsic = np.maximum(strike - s[:, t], 0.0)
        itm = intrinsic > 0.0
        target = disc[rows, tau] / disc[:, t] * cashflow

        if foresight:
            if not itm.any():
                continue
            continuation = target[itm]
            train_rows = rows[itm]
        else:
            train_rows = rows[itm] if itm_only else rows
            if itm_only and train_rows.size == 0:
                continue  # nothing in the money: keep every path alive
            x_train = _features_at(grid, contract, t, features, train_rows)
            model = fit(spec, x_train, target[train_rows])
            if itm_only:
                continuation = predict(model, x_train)
            else:
                continuation = predict(model, _features_at(grid, contract, t, features, rows[itm]))
            if capture_step == t:
                fitted = continuation if itm_only else predict(model, x_train)
                captured = (x_train.copy(), target[train_rows].copy(), fitted.copy())

        exercise = rows[itm][intrinsic[itm] >= continuation]
        cashflow[exercise] = intrinsic[exercise]
        tau[exercise] = t

    return cashflow, tau, captured


def price_american_put(grid: PathGrid, contract: PutContract, spec: RegressorSpec, *,
                       itm_only: bool = True, features: str = "price-only",
                       control_variate: bool = False,
                       _foresight: bool = False) -> PricingResult:
    """Price an American put on a simulated grid.

    The estimate is the mean pathwise discounted cashflow, floored at the
    immediate-exercise value of the initial spot; the standard error is the
    sample standard deviation over paths divided by sqrt(paths), taken
    before the floor.  With ``control_variate`` the discounted terminal
    index minus the spot is regressed out with an in-sample beta.

    ``_foresight=True`` replaces the fitted continuation values with the
    realized pathwise targets.  That injects perfect foresight and biases
    the price high; it exists so tests can verify the regression is doing
    its job.  Not part of the pricing interface.
    """
    _check_inputs(grid, contract, features)
    start = time.perf_counter()

    cashflow, tau, _ = _induct(grid, contract, spec, itm_only=itm_only,
                               features=features, foresight=_foresight)

    rows = np.arange(grid.paths)
    discounted = grid.discount[rows, tau] * cashflow
    if control_variate:
        control = grid.discount[:, -1] * grid.index[:, -1] - grid.index[0, 0]
        var = control.var(ddof=1)
        if var > 0.0:
            beta = float(np.cov(discounted, control, ddof=1)[0, 1] / var)
            discounted = discounted - beta * control

    estimate = float(discounted.mean())
    std_error = float(discounted.std(ddof=1) / math.sqrt(grid.paths))

    exercised = cashflow > 0.0
    fraction = np.bincount(tau[exercised], minlength=grid.steps + 1) / grid.paths

    intrinsic_now = max(contract.strike - float(grid.index[0, 0]), 0.0)
    price = max(estimate, intrinsic_now)

    return PricingResult(price=price, std_error=std_error,
                         exercise_fraction=fraction,
                         wall_time=time.perf_counter() - start,
                         regressor=spec)


def continuation_surface(grid: PathGrid, contract: PutContract, spec: RegressorSpec,
                         step: int, *, itm_only: bool = True,
                         features: str = "price-only") -> tuple[list[str], np.ndarray]:
    """Dump the regression at one decision step as (header, rows).

    Rows hold the training features, the discounted-cashflow target and the
    fitted continuation value for every path in the regression set at
    ``step``.  Handy for eyeballing how the three regressor families shape
    the continuation function.
    """
    _check_inputs(grid, contract, features)
    if not 1 <= step <= grid.steps - 1:
        raise ValueError(f"step must lie in [1, {grid.steps - 1}], got {step}")

    _, _, captured = _induct(grid, contract, spec, itm_only=itm_only,
                             features=features, foresight=False, capture_step=step)
    if captured is None:
        raise ValueError(f"no in-the-money paths at step {step}; nothing to dump")

    x_train, target, fitted = captured
    if features == "price-only":
        header = ["moneyness"]
    else:
        header = ["moneyness", "variance", "rate"]
    header += ["target", "continuation"]
    return header, np.column_stack((x_train, target, fitted))
