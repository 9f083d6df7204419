"""Cox-Ross-Rubinstein reference price for the American put.

Constant volatility and constant rate only.  This is the independent anchor
the Monte Carlo pricers are checked against.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = ["BsSetup", "binomial_put"]


@dataclass(frozen=True)
class BsSetup:
    """Black-Scholes style inputs for the lattice."""

    s0: float
    strike: float
    maturity: float
    rate: float
    sigma: float
    steps: int

    def __post_init__(self) -> None:
        if self.s0 <= 0.0:
            raise ValueError(f"s0 must be positive, got {self.s0}")
        if self.strike <= 0.0:
            raise ValueError(f"strike must be positive, got {self.strike}")
        if self.maturity <= 0.0:
            raise ValueError(f"maturity must be positive, got {self.maturity}")
        if self.sigma <= 0.0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        if self.steps < 1:
            raise ValueError(f"steps must be >= 1, got {self.steps}")


def binomial_put(setup: BsSetup, *, early_exercise: bool = True) -> float:
    """Price a put on a CRR lattice by backward induction.

    ``u = exp(sigma sqrt(dt))``, ``d = 1/u`` and the risk-neutral up
    probability ``p = (exp(r dt) - d) / (u - d)`` must land strictly inside
    (0, 1) or the grid is too coarse for the drift and a ValueError is
    raised.  ``early_exercise=False`` prices the European put on the same
    lattice, used by tests for the American >= European bound.
    """
    dt = setup.maturity / setup.steps
    u = math.exp(setup.sigma * math.sqrt(dt))
    d = 1.0 / u
    growth = math.exp(setup.rate * dt)
    p = (growth - d) / (u - d)
    if not 0.0 < p < 1.0:
        raise ValueError(f"risk-neutral probability {p} outside (0, 1); "
                         "grid too coarse for the drift")

    n = setup.steps
    # terminal nodes, lowest first: s0 * u^j * d^(n-j)
    j = np.arange(n + 1)
    prices = setup.s0 * u ** j * d ** (n - j)
    values = np.maximum(setup.strike - prices, 0.0)

    disc = math.exp(-setup.rate * dt)
    for step in range(n - 1, -1, -1):
        values = disc * (p * values[1:] + (1.0 - p) * values[:-1])
        if early_exercise:
            prices = setup.s0 * u ** j[: step + 1] * d ** (step - j[: step + 1])
            values = np.maximum(values, setup.strike - prices)
    return float(values[0])
