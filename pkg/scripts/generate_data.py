"""Regenerate the bundled synthetic data under data/.

The option chain is priced from a fixed parameter set with the same grid
spec the bundled calibrate config uses, so the demo calibration is a
self-consistent round trip.  Bond prices come from the closed-form CIR
formula at the same rate parameters.  Run from the repository root:

    python3 scripts/generate_data.py
"""

import datetime
import os
import sys

import numpy as np

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from bcclsm.calibration import CirParams, cir_bond_price, price_chain
from bcclsm.engine import BccParams, GridSpec
from bcclsm.market_data import OptionQuote
from bcclsm.regressors import PolynomialSpec

OUT_DIR = os.path.join(os.path.dirname(__file__), "..", "data")

CIR = CirParams(kappa_r=0.123, theta_r=0.066, sigma_r=0.001, r0=0.01)
MODEL = BccParams(kappa_v=20.850, theta_v=0.012, sigma_v=0.712, rho=-0.984,
                  v0=0.002, lam=0.0001, mu_j=-0.378, delta=0.0005,
                  kappa_r=CIR.kappa_r, theta_r=CIR.theta_r,
                  sigma_r=CIR.sigma_r, r0=CIR.r0)
GRID = GridSpec(s0=100.0, horizon=1.0, steps=20, paths=2000, seed=123,
                antithetic=True, moment_match=True)
QUOTE_DATE = datetime.date(2017, 9, 5)
SPOT = 100.0
EXPIRY_DAYS = (10, 14, 21, 28, 35, 42)
STRIKES = (97.0, 98.0, 99.0, 100.0, 101.0, 102.0, 103.0, 104.0)
BOND_MATURITIES = (0.25, 0.5, 1.0, 2.0, 3.0, 5.0, 7.0, 10.0)


def write_bonds(path: str) -> None:
    with open(path, "w", newline="") as fh:
        fh.write("maturity_years,price\n")
        for m in BOND_MATURITIES:
            fh.write(f"{m},{cir_bond_price(CIR, m):.10f}\n")


def write_chain(path: str) -> None:
    quotes = []
    for days in EXPIRY_DAYS:
        expiry = QUOTE_DATE + datetime.timedelta(days=days)
        for strike in STRIKES:
            quotes.append(OptionQuote(QUOTE_DATE, expiry, strike, 1.0, 100, SPOT))
    mids = price_chain(MODEL, quotes, PolynomialSpec(), GRID)
    with open(path, "w", newline="") as fh:
        fh.write("expiry,strike,bid,ask,volume\n")
        for i, (quote, mid) in enumerate(zip(quotes, mids)):
            bid = max(round(mid - 0.01, 4), 0.0)
            ask = round(mid + 0.01, 4)
            volume = 60 + (37 * i) % 700
            fh.write(f"{quote.expiry_date.isoformat()},{quote.strike:g},"
                     f"{bid},{ask},{volume}\n")


def write_fitdemo(path: str) -> None:
    rng = np.random.default_rng(7)
    x = np.sort(rng.uniform(20.0, 60.0, size=200))
    smooth = 2.0 * np.exp(-0.5 * ((x - 42.0) / 5.0) ** 2)
    y = np.maximum(40.0 - x, 0.0) + smooth + rng.normal(0.0, 0.35, size=x.size)
    with open(path, "w", newline="") as fh:
        fh.write("x,y\n")
        for xi, yi in zip(x, y):
            fh.write(f"{xi:.6f},{yi:.6f}\n")


def main() -> None:
    os.makedirs(OUT_DIR, exist_ok=True)
    write_bonds(os.path.join(OUT_DIR, "zero_bonds.csv"))
    write_chain(os.path.join(OUT_DIR, "synthetic_chain.csv"))
    write_fitdemo(os.path.join(OUT_DIR, "fitdemo_sample.csv"))
    print(f"wrote data files under {os.path.abspath(OUT_DIR)}")


if __name__ == "__main__":
    main()
