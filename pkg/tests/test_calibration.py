import datetime
import math

import numpy as np
import pytest

from bcclsm.calibration import (CalibrationReport, CirParams, OptimizerConfig,
                                StageRecord, calibrate_bcc, calibrate_cir,
                                calibrate_cir_report, chain_mse,
                                cir_bond_price, implied_short_rate,
                                nelder_mead, price_chain)
from bcclsm.engine import BccParams, GridSpec
from bcclsm.market_data import OptionQuote, ZeroBondQuote
from bcclsm.regressors import PolynomialSpec

CIR_TRUTH = CirParams(0.123, 0.066, 0.001, 0.01)
MODEL = BccParams(kappa_v=20.850, theta_v=0.012, sigma_v=0.712, rho=-0.984,
                  v0=0.002, lam=0.0001, mu_j=-0.378, delta=0.0005,
                  kappa_r=0.123, theta_r=0.066, sigma_r=0.001, r0=0.01)
QD = datetime.date(2017, 9, 5)
SPEC = PolynomialSpec(degree=5)
SMALL_MC = GridSpec(s0=100.0, horizon=1.0, steps=5, paths=600, seed=11,
                    antithetic=True, moment_match=True)


def make_chain(day_strike_pairs, mids=None, spot=100.0):
    quotes = []
    for i, (days, strike) in enumerate(day_strike_pairs):
        mid = 1.0 if mids is None else mids[i]
        quotes.append(OptionQuote(QD, QD + datetime.timedelta(days=days),
                                  strike, float(mid), 100, spot))
    return quotes


class TestCirBondPrice:
    def test_constant_rate_limit(self):
        p = CirParams(0.0, 0.05, 0.0, 0.05)
        assert cir_bond_price(p, 2.0) == pytest.approx(math.exp(-0.1), rel=1e-12)

    def test_decreasing_in_maturity(self):
        prices = [cir_bond_price(CIR_TRUTH, t)
                  for t in (0.25, 0.5, 1.0, 2.0, 3.0, 5.0, 7.0, 10.0)]
        assert all(a > b for a, b in zip(prices, prices[1:]))
        assert all(0.0 < px <= 1.0 for px in prices)

    def test_continuity_at_vanishing_sigma(self):
        for t in (0.25, 1.0, 2.0, 5.0, 10.0):
            limit = cir_bond_price(CirParams(0.123, 0.066, 0.0, 0.01), t)
            near = cir_bond_price(CirParams(0.123, 0.066, 1e-8, 0.01), t)
            assert abs(near - limit) < 1e-6

    def test_mean_reversion_pulls_toward_theta(self):
        # r0 below theta: long-maturity yield must exceed the spot rate
        p = CirParams(0.5, 0.06, 0.01, 0.01)
        y10 = -math.log(cir_bond_price(p, 10.0)) / 10.0
        assert y10 > 0.02

    def test_nonpositive_maturity_rejected(self):
        with pytest.raises(ValueError):
            cir_bond_price(CIR_TRUTH, 0.0)

    def test_negative_params_rejected(self):
        with pytest.raises(ValueError):
            CirParams(-0.1, 0.05, 0.01, 0.01)


class TestImpliedShortRate:
    def test_shortest_bond_wins(self):
        bonds = [ZeroBondQuote(1.0, 0.94), ZeroBondQuote(0.25, 0.99)]
        assert implied_short_rate(bonds) == pytest.approx(-math.log(0.99) / 0.25)

    def test_empty_list(self):
        with pytest.raises(ValueError):
            implied_short_rate([])


class TestNelderMead:
    def test_quadratic_bowl(self):
        def f(x):
            return (x[0] - 2.0) ** 2 + (x[1] + 1.0) ** 2

        x, fx, evals = nelder_mead(f, np.array([0.0, 0.0]), OptimizerConfig())
        assert abs(x[0] - 2.0) < 1e-4
        assert abs(x[1] + 1.0) < 1e-4
        assert evals <= 200

    def test_constant_objective_echoes_start(self):
        x, fx, _ = nelder_mead(lambda v: 3.5, np.array([1.0, 2.0]),
                               OptimizerConfig())
        assert fx == 3.5
        assert np.array_equal(x, [1.0, 2.0])

    def test_rosenbrock_budgeted(self):
        def rosen(v):
            return 100.0 * (v[1] - v[0] ** 2) ** 2 + (1.0 - v[0]) ** 2

        cfg = OptimizerConfig(max_evaluations=2000, tolerance=0.0)
        _, fx, evals = nelder_mead(rosen, np.array([-1.2, 1.0]), cfg)
        assert fx < 1e-3
        assert evals <= 2000

    def test_zero_budget_echoes_start(self):
        calls = []

        def f(v):
            calls.append(v.copy())
            return float(v[0] ** 2)

        cfg = OptimizerConfig(max_evaluations=0)
        x, fx, evals = nelder_mead(f, np.array([3.0]), cfg)
        assert np.array_equal(x, [3.0])
        assert fx == 9.0
        assert evals == 1 and len(calls) == 1

    def test_f_start_skips_reevaluation(self):
        calls = []

        def f(v):
            calls.append(v.copy())
            return float((v[0] - 1.0) ** 2)

        cfg = OptimizerConfig(max_evaluations=0)
        x, fx, evals = nelder_mead(f, np.array([3.0]), cfg, f_start=4.0)
        assert fx == 4.0
        assert evals == 0 and calls == []

    def test_never_worse_than_start(self):
        def nasty(v):
            return math.sin(5.0 * v[0]) * math.cos(3.0 * v[1]) + 0.1 * v[0] ** 2

        start = np.array([0.7, -0.3])
        _, fx, _ = nelder_mead(nasty, start, OptimizerConfig(max_evaluations=50))
        assert fx <= nasty(start)

    def test_bounds_clamp_every_evaluation(self):
        seen = []

        def f(v):
            seen.append(v.copy())
            return float((v[0] - 5.0) ** 2)  # pulls hard against the bound

        bounds = [(0.0, 1.0)]
        nelder_mead(f, np.array([0.5]), OptimizerConfig(max_evaluations=60),
                    bounds=bounds)
        assert seen
        assert all(0.0 <= v[0] <= 1.0 for v in seen)

    def test_start_outside_bounds_is_clamped(self):
        x, fx, _ = nelder_mead(lambda v: float(v[0] ** 2), np.array([4.0]),
                               OptimizerConfig(max_evaluations=30),
                               bounds=[(1.0, 2.0)])
        assert 1.0 <= x[0] <= 2.0
        assert fx == pytest.approx(1.0)

    def test_non_finite_start_rejected(self):
        with pytest.raises(ValueError):
            nelder_mead(lambda v: float("nan"), np.array([1.0]),
                        OptimizerConfig())

    def test_inverted_bounds_rejected(self):
        with pytest.raises(ValueError):
            nelder_mead(lambda v: 0.0, np.array([1.0]), OptimizerConfig(),
                        bounds=[(2.0, 1.0)])


class TestOptimizerConfig:
    def test_validation(self):
        with pytest.raises(ValueError):
            OptimizerConfig(max_evaluations=-1)
        with pytest.raises(ValueError):
            OptimizerConfig(tolerance=-1e-9)
        with pytest.raises(ValueError):
            OptimizerConfig(bounds={"kappa_v": (2.0, 1.0)})

    def test_start_override(self):
        cfg = OptimizerConfig(start={"kappa_v": 7.0})
        assert cfg.start_value("kappa_v") == 7.0
        assert cfg.start_value("theta_v") == 0.02


class TestCalibrateCir:
    def test_round_trip_on_generated_curve(self):
        bonds = [ZeroBondQuote(t, cir_bond_price(CIR_TRUTH, t))
                 for t in (0.25, 0.5, 1.0, 2.0, 3.0, 5.0, 7.0, 10.0)]
        fitted, record = calibrate_cir_report(bonds, CIR_TRUTH.r0,
                                              OptimizerConfig())
        assert record.objective_out < 1e-10
        assert record.objective_out <= record.objective_in
        assert record.stage == 1
        assert fitted.r0 == CIR_TRUTH.r0

    def test_flat_curve_fit(self):
        bonds = [ZeroBondQuote(t, math.exp(-0.02 * t))
                 for t in (0.5, 1.0, 2.0, 5.0)]
        fitted = calibrate_cir(bonds, 0.02, OptimizerConfig())
        sse = sum((cir_bond_price(fitted, b.maturity_years) - b.price) ** 2
                  for b in bonds)
        assert sse < 1e-8

    def test_triplicated_quote_is_feasible(self):
        bonds = [ZeroBondQuote(1.0, 0.95)] * 3
        fitted = calibrate_cir(bonds, -math.log(0.95), OptimizerConfig())
        assert cir_bond_price(fitted, 1.0) == pytest.approx(0.95, abs=1e-6)

    def test_too_few_bonds(self):
        with pytest.raises(ValueError):
            calibrate_cir([ZeroBondQuote(1.0, 0.95)] * 2, 0.05,
                          OptimizerConfig())


class TestChainPricing:
    def test_prices_align_with_interleaved_quotes(self):
        quotes = make_chain([(10, 100.0), (30, 100.0), (10, 102.0),
                             (30, 102.0)])
        prices = price_chain(MODEL, quotes, SPEC, SMALL_MC)
        assert len(prices) == 4
        # higher strike is worth more at both expiries
        assert prices[2] > prices[0]
        assert prices[3] > prices[1]
        # longer expiry is worth at least as much near the money
        assert prices[1] >= prices[0] - 1e-12

    def test_bit_determinism(self):
        quotes = make_chain([(10, 100.0), (30, 102.0)])
        a = price_chain(MODEL, quotes, SPEC, SMALL_MC)
        b = price_chain(MODEL, quotes, SPEC, SMALL_MC)
        assert np.array_equal(a, b)

    def test_chain_mse_zero_at_generating_params(self):
        skeleton = make_chain([(10, 100.0), (30, 102.0)])
        mids = price_chain(MODEL, skeleton, SPEC, SMALL_MC)
        quotes = make_chain([(10, 100.0), (30, 102.0)], mids=mids)
        assert chain_mse(MODEL, quotes, SPEC, SMALL_MC) == 0.0

    def test_chain_mse_hand_value(self):
        skeleton = make_chain([(10, 100.0)])
        price = price_chain(MODEL, skeleton, SPEC, SMALL_MC)[0]
        quotes = make_chain([(10, 100.0)], mids=[price + 0.5])
        assert chain_mse(MODEL, quotes, SPEC, SMALL_MC) == pytest.approx(0.25)


class TestCalibrateBcc:
    def echo_config(self):
        return OptimizerConfig(max_evaluations=0, grid={})

    def test_zero_budget_echoes_start(self):
        quotes = make_chain([(10, 100.0), (30, 102.0)])
        report = calibrate_bcc(quotes, CIR_TRUTH, SPEC, SMALL_MC,
                               self.echo_config())
        assert [s.stage for s in report.stages] == [1, 2, 3, 4]
        stage2 = report.stages[1]
        assert stage2.params_out == stage2.params_in
        assert stage2.objective_out == stage2.objective_in
        assert stage2.evaluations == 1
        assert report.final.kappa_v == 15.0  # documented default start
        assert report.final.lam == 0.1

    def test_stage3_skipped_without_short_quotes(self):
        quotes = make_chain([(30, 100.0), (40, 102.0)])
        report = calibrate_bcc(quotes, CIR_TRUTH, SPEC, SMALL_MC,
                               self.echo_config())
        stage3 = report.stages[2]
        assert "skipped" in stage3.note
        assert stage3.evaluations == 0
        assert report.final.lam == 0.0  # jumps never taken off zero

    def test_per_stage_improvement_and_report_keys(self):
        quotes = make_chain([(10, 100.0), (10, 102.0), (30, 100.0),
                             (30, 102.0)])
        cfg = OptimizerConfig(max_evaluations=6,
                              grid={"kappa_v": [10.0, 20.0]})
        report = calibrate_bcc(quotes, CIR_TRUTH, SPEC, SMALL_MC, cfg)
        for s in report.stages:
            assert s.objective_out <= s.objective_in + 1e-15

        d = report.as_dict()
        assert set(d) == {"stages", "final"}
        assert [s["stage"] for s in d["stages"]] == [1, 2, 3, 4]
        assert set(d["stages"][1]) == {"stage", "params_in", "params_out",
                                       "objective_in", "objective_out",
                                       "evaluations", "wall_time", "note"}
        assert list(d["final"]) == ["kappa_v", "theta_v", "sigma_v", "rho",
                                    "v0", "lambda", "mu_j", "delta",
                                    "kappa_r", "theta_r", "sigma_r", "r0"]
        assert d["final"]["kappa_r"] == CIR_TRUTH.kappa_r

    def test_supplied_cir_record_is_first_stage(self):
        bonds = [ZeroBondQuote(t, cir_bond_price(CIR_TRUTH, t))
                 for t in (0.5, 1.0, 2.0, 5.0)]
        fitted, record = calibrate_cir_report(bonds, CIR_TRUTH.r0,
                                              OptimizerConfig())
        quotes = make_chain([(10, 100.0), (30, 102.0)])
        report = calibrate_bcc(quotes, fitted, SPEC, SMALL_MC,
                               self.echo_config(), cir_record=record)
        assert report.stages[0] is record

    def test_empty_quotes_rejected(self):
        with pytest.raises(ValueError):
            calibrate_bcc([], CIR_TRUTH, SPEC, SMALL_MC, self.echo_config())
