"""American put pricing by least-squares Monte Carlo.

The model couples a square-root stochastic variance, a CIR short rate, and
lognormal jumps.  Continuation values in the backward induction come from
one of three interchangeable regressors (polynomial, boosted trees, MLP),
and a staged calibration fits the twelve parameters to zero-coupon bonds
and an option chain.
"""

from .binomial import BsSetup, binomial_put
from .calibration import (CalibrationReport, CirParams, OptimizerConfig,
                          StageRecord, calibrate_bcc, calibrate_cir,
                          calibrate_cir_report, chain_mse, cir_bond_price,
                          implied_short_rate, nelder_mead, price_chain)
from .config import CalibrationSettings, PricingFlags, RunConfig, load_config
from .engine import (BccParams, DrawBlock, GridSpec, PathGrid, generate_draws,
                     martingale_diagnostic, simulate)
from .market_data import (Bucket, BucketEntry, BucketReport, MaturityBand,
                          Moneyness, OptionQuote, ZeroBondQuote, apply_filters,
                          bucketize, load_bonds, load_chain, mse_report,
                          write_bucket_report)
from .pricer import (FEATURE_SETS, PricingResult, PutContract,
                     continuation_surface, price_american_put)
from .regressors import (BoostedTreesSpec, MlpSpec, PolynomialSpec,
                         RegressorSpec, fit, gradient_check, predict)

__version__ = "0.1.0"

__all__ = [
    "BsSetup", "binomial_put",
    "CalibrationReport", "CirParams", "OptimizerConfig", "StageRecord",
    "calibrate_bcc", "calibrate_cir", "calibrate_cir_report", "chain_mse",
    "cir_bond_price", "implied_short_rate", "nelder_mead", "price_chain",
    "CalibrationSettings", "PricingFlags", "RunConfig", "load_config",
    "BccParams", "DrawBlock", "GridSpec", "PathGrid", "generate_draws",
    "martingale_diagnostic", "simulate",
    "Bucket", "BucketEntry", "BucketReport", "MaturityBand", "Moneyness",
    "OptionQuote", "ZeroBondQuote", "apply_filters", "bucketize", "load_bonds",
    "load_chain", "mse_report", "write_bucket_report",
    "FEATURE_SETS", "PricingResult", "PutContract", "continuation_surface",
    "price_american_put",
    "BoostedTreesSpec", "MlpSpec", "PolynomialSpec", "RegressorSpec", "fit",
    "gradient_check", "predict",
    "__version__",
]
