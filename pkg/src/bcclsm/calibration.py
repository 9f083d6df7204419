"""Staged calibration: CIR curve first, then the option surface.

Stage 1 fits the short-rate parameters to zero-coupon bond prices through
the closed-form CIR discount bond.  Stage 2 fits the variance parameters to
option mid prices with jumps frozen off, stage 3 fits the jump parameters
on the short-maturity subset with the variance frozen, and stage 4 refines
all eight jointly.  Stages 2 and 3 scan a configured parameter grid before
the local simplex search.

Every objective evaluation prices the full quote set with the LSM pricer on
grids drawn from one fixed seed (common random numbers), so the objective
is a deterministic function of the parameter vector and optimizer progress
is meaningful.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .engine import BccParams, GridSpec, simulate
from .market_data import MaturityBand, OptionQuote, ZeroBondQuote, bucketize
from .pricer import PutContract, price_american_put
from .regressors import RegressorSpec

__all__ = [
    "CirParams",
    "OptimizerConfig",
    "StageRecord",
    "CalibrationReport",
    "cir_bond_price",
    "implied_short_rate",
    "nelder_mead",
    "calibrate_cir",
    "calibrate_cir_report",
    "price_chain",
    "chain_mse",
    "calibrate_bcc",
]

# JSON parameter names, in report order.  The intensity is "lambda" on the
# wire and `lam` on BccParams (keyword clash).
VOL_NAMES = ("kappa_v", "theta_v", "sigma_v", "rho", "v0")
JUMP_NAMES = ("lambda", "mu_j", "delta")
CIR_NAMES = ("kappa_r", "theta_r", "sigma_r")
ALL_NAMES = VOL_NAMES + JUMP_NAMES + CIR_NAMES + ("r0",)

DEFAULT_BOUNDS: dict[str, tuple[float, float]] = {
    "kappa_v": (0.5, 50.0),
    "theta_v": (1e-4, 0.25),
    "sigma_v": (0.01, 2.0),
    "rho": (-0.999, 0.0),
    "v0": (1e-5, 0.25),
    "lambda": (0.0, 1.0),
    "mu_j": (-0.9, 0.5),
    "delta": (1e-4, 0.5),
    "kappa_r": (1e-6, 10.0),
    "theta_r": (0.0, 0.2),
    "sigma_r": (0.0, 0.5),
}

DEFAULT_START: dict[str, float] = {
    "kappa_v": 15.0,
    "theta_v": 0.02,
    "sigma_v": 0.5,
    "rho": -0.75,
    "v0": 0.01,
    "lambda": 0.1,
    "mu_j": -0.2,
    "delta": 0.1,
}

DEFAULT_GRID: dict[str, list[float]] = {
    "kappa_v": [5.0, 15.0, 30.0],
    "theta_v": [0.005, 0.02, 0.08],
    "sigma_v": [0.2, 0.7],
    "rho": [-0.9, -0.4],
    "v0": [0.002, 0.02],
    "lambda": [0.0, 0.1, 0.3],
    "mu_j": [-0.4, -0.1],
    "delta": [0.05, 0.2],
}


@dataclass(frozen=True)
class CirParams:
    """Square-root short-rate parameters plus the spot rate."""

    kappa_r: float
    theta_r: float
    sigma_r: float
    r0: float

    def __post_init__(self) -> None:
        for name in ("kappa_r", "theta_r", "sigma_r", "r0"):
            if getattr(self, name) < 0.0:
                raise ValueError(f"{name} must be nonnegative, got {getattr(self, name)}")


@dataclass
class OptimizerConfig:
    """Simplex coefficients, budgets, and per-parameter grid/bounds/start.

    ``grid`` lists candidate values per parameter name for the stage 2/3
    scans; missing names fall back to the start value.  ``bounds`` clamp
    every evaluated point.  ``start`` overrides the documented default
    start per name.
    """

    reflection: float = 1.0
    expansion: float = 2.0
    contraction: float = 0.5
    shrink: float = 0.5
    max_evaluations: int = 200
    tolerance: float = 1e-12
    grid: dict[str, list[float]] = field(default_factory=lambda: {k: list(v) for k, v in DEFAULT_GRID.items()})
    bounds: dict[str, tuple[float, float]] = field(default_factory=lambda: dict(DEFAULT_BOUNDS))
    start: dict[str, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.max_evaluations < 0:
            raise ValueError(f"max_evaluations must be >= 0, got {self.max_evaluations}")
        if self.tolerance < 0.0:
            raise ValueError(f"tolerance must be >= 0, got {self.tolerance}")
        for name, (lo, hi) in self.bounds.items():
            if lo > hi:
                raise ValueError(f"bounds for {name} are inverted: [{lo}, {hi}]")

    def bound(self, name: str) -> tuple[float, float]:
        return self.bounds.get(name, (-math.inf, math.inf))

    def start_value(self, name: str) -> float:
        if name in self.start:
            return self.start[name]
        return DEFAULT_START[name]


@dataclass
class StageRecord:
    """One calibration stage: parameters and objective before and after."""

    stage: int
    params_in: dict[str, float]
    params_out: dict[str, float]
    objective_in: float
    objective_out: float
    evaluations: int
    wall_time: float
    note: str = ""

    def as_dict(self) -> dict:
        return {
            "stage": self.stage,
            "params_in": dict(self.params_in),
            "params_out": dict(self.params_out),
            "objective_in": self.objective_in,
            "objective_out": self.objective_out,
            "evaluations": self.evaluations,
            "wall_time": self.wall_time,
            "note": self.note,
        }


@dataclass
class CalibrationReport:
    """Stage-by-stage log plus the final parameter set."""

    stages: list[StageRecord]
    final: BccParams

    def final_dict(self) -> dict[str, float]:
        return {
            "kappa_v": self.final.kappa_v,
            "theta_v": self.final.theta_v,
            "sigma_v": self.final.sigma_v,
            "rho": self.final.rho,
            "v0": self.final.v0,
            "lambda": self.final.lam,
            "mu_j": self.final.mu_j,
            "delta": self.final.delta,
            "kappa_r": self.final.kappa_r,
            "theta_r": self.final.theta_r,
            "sigma_r": self.final.sigma_r,
            "r0": self.final.r0,
        }

    def as_dict(self) -> dict:
        return {"stages": [s.as_dict() for s in self.stages], "final": self.final_dict()}


# ------------------------------------------------------------------ CIR bond

def cir_bond_price(params: CirParams, maturity: float) -> float:
    """Closed-form CIR zero-coupon bond price for one unit at ``maturity``.

    The textbook A(T) puts 2*kappa*theta/sigma^2 over a log whose terms
    cancel to O(sigma^2), which is catastrophic in doubles for small sigma.
    Rewriting with eps = gamma - kappa = 2 sigma^2/(gamma + kappa) cancels
    sigma^2 analytically in the leading term and leaves a log1p of a small,
    accurately computed argument, so one branch covers every sigma > 1e-12.
    Below that the deterministic mean-reverting rate integral takes over
    (exact at sigma = 0, error O(sigma^2) otherwise).
    """
    if maturity <= 0.0:
        raise ValueError(f"maturity must be positive, got {maturity}")
    k, th, sg, r0 = params.kappa_r, params.theta_r, params.sigma_r, params.r0

    if sg < 1e-12:
        if k > 0.0:
            integral = th * maturity + (r0 - th) * (-math.expm1(-k * maturity)) / k
        else:
            integral = r0 * maturity
        return math.exp(-integral)

    gamma = math.sqrt(k * k + 2.0 * sg * sg)
    eps = 2.0 * sg * sg / (gamma + k)
    y = -math.expm1(-gamma * maturity)
    b = 2.0 * y / ((gamma + k) * y + 2.0 * gamma * (1.0 - y))
    log_a = (-2.0 * k * th * maturity / (gamma + k)
             - (2.0 * k * th / (sg * sg)) * math.log1p(-eps * y / (2.0 * gamma)))
    return math.exp(log_a - b * r0)


def implied_short_rate(bonds: list[ZeroBondQuote]) -> float:
    """Continuously compounded rate implied by the shortest bond."""
    if not bonds:
        raise ValueError("empty bond list")
    shortest = min(bonds, key=lambda b: b.maturity_years)
    return -math.log(shortest.price) / shortest.maturity_years


# --------------------------------------------------------------- Nelder-Mead

def nelder_mead(objective, start, config: OptimizerConfig, *,
                bounds: list[tuple[float, float]] | None = None,
                f_start: float | None = None) -> tuple[np.ndarray, float, int]:
    """Simplex minimization with bound clamping.

    Every proposed point is clamped into ``bounds`` before evaluation, so
    the objective never sees an out-of-bounds vector.  Terminates when the
    simplex objective spread falls below ``config.tolerance`` or the
    evaluation budget is spent.  Returns (argmin, min value, evaluations);
    the minimum never exceeds the start value because the start is a
    simplex vertex and the best vertex only improves.

    ``f_start`` passes a known objective value at ``start`` so it is not
    recomputed; with a zero budget the start is echoed back.
    """
    x0 = np.asarray(start, dtype=float).copy()
    n = x0.size
    if bounds is not None:
        lo = np.array([b[0] for b in bounds])
        hi = np.array([b[1] for b in bounds])
        if (lo > hi).any():
            raise ValueError("inverted bounds")
        x0 = np.clip(x0, lo, hi)
    else:
        lo = hi = None

    def clamp(x: np.ndarray) -> np.ndarray:
        return np.clip(x, lo, hi) if lo is not None else x

    evals = 0
    budget = config.max_evaluations

    def f(x: np.ndarray) -> float:
        nonlocal evals
        evals += 1
        return float(objective(x))

    if f_start is None:
        if budget == 0:
            return x0, float(objective(x0)), 1
        f0 = f(x0)
    else:
        f0 = float(f_start)
    if not math.isfinite(f0):
        raise ValueError(f"objective is not finite at the start point: {f0}")
    if budget == 0 or n == 0:
        return x0, f0, evals

    # initial simplex: perturb each coordinate by 5% (0.00025 at zero)
    simplex = [x0]
    values = [f0]
    for i in range(n):
        x = x0.copy()
        step = 0.05 * abs(x0[i]) if x0[i] != 0.0 else 0.00025
        x[i] += step
        x = clamp(x)
        if np.array_equal(x, x0):
            x = x0.copy()
            x[i] -= step  # clamped against the upper bound: step down instead
            x = clamp(x)
        simplex.append(x)
        values.append(f(x) if evals < budget else f0)

    while True:
        order = np.argsort(values, kind="stable")
        simplex = [simplex[i] for i in order]
        values = [values[i] for i in order]
        if values[-1] - values[0] < config.tolerance or evals >= budget:
            return simplex[0].copy(), values[0], evals

        centroid = np.mean(simplex[:-1], axis=0)
        reflected = clamp(centroid + config.reflection * (centroid - simplex[-1]))
        f_r = f(reflected)
        if f_r < values[0]:
            if evals < budget:
                expanded = clamp(centroid + config.expansion * (reflected - centroid))
                f_e = f(expanded)
                if f_e < f_r:
                    simplex[-1], values[-1] = expanded, f_e
                    continue
            simplex[-1], values[-1] = reflected, f_r
            continue
        if f_r < values[-2]:
            simplex[-1], values[-1] = reflected, f_r
            continue
        if evals >= budget:
            return simplex[0].copy(), values[0], evals
        contracted = clamp(centroid + config.contraction * (simplex[-1] - centroid))
        f_c = f(contracted)
        if f_c < values[-1]:
            simplex[-1], values[-1] = contracted, f_c
            continue
        # shrink toward the best vertex
        for i in range(1, n + 1):
            simplex[i] = clamp(simplex[0] + config.shrink * (simplex[i] - simplex[0]))
            if evals >= budget:
                return simplex[0].copy(), values[0], evals
            values[i] = f(simplex[i])


# ---------------------------------------------------------------- CIR fit

def _cir_objective(bonds: list[ZeroBondQuote], r0: float):
    maturities = [b.maturity_years for b in bonds]
    prices = [b.price for b in bonds]

    def objective(vec: np.ndarray) -> float:
        p = CirParams(max(vec[0], 0.0), max(vec[1], 0.0), max(vec[2], 0.0), r0)
        return sum((cir_bond_price(p, m) - px) ** 2 for m, px in zip(maturities, prices))

    return objective


def calibrate_cir_report(bonds: list[ZeroBondQuote], r0: float,
                         config: OptimizerConfig) -> tuple[CirParams, StageRecord]:
    """Fit (kappa_r, theta_r, sigma_r) to bond prices; r0 is given.

    Start: kappa 0.3, theta at the rate implied by the longest bond, sigma
    0.05.  The simplex restarts from its own result until the squared-error
    sum stops improving (a fresh simplex escapes the collapsed one), which
    round-trip tests drive below 1e-10.
    """
    if not bonds:
        raise ValueError("empty bond list")
    if len(bonds) < 3:
        raise ValueError(f"need at least 3 bond quotes, got {len(bonds)}")
    t0 = time.perf_counter()
    objective = _cir_objective(bonds, r0)
    longest = max(bonds, key=lambda b: b.maturity_years)
    theta_start = -math.log(longest.price) / longest.maturity_years
    bnds = [config.bound(n) for n in CIR_NAMES]
    start = np.clip([0.3, theta_start, 0.05],
                    [b[0] for b in bnds], [b[1] for b in bnds])

    f_in = objective(start)
    evals = 1
    x, fx = start, f_in
    for _ in range(12):
        x_new, fx_new, used = nelder_mead(objective, x, config, bounds=bnds, f_start=fx)
        evals += used
        improved = fx_new < fx - max(config.tolerance, 1e-18)
        x, fx = x_new, fx_new
        if not improved:
            break

    params = CirParams(float(x[0]), float(x[1]), float(x[2]), r0)
    record = StageRecord(
        stage=1,
        params_in={"kappa_r": float(start[0]), "theta_r": float(start[1]),
                   "sigma_r": float(start[2]), "r0": r0},
        params_out={"kappa_r": params.kappa_r, "theta_r": params.theta_r,
                    "sigma_r": params.sigma_r, "r0": r0},
        objective_in=f_in,
        objective_out=fx,
        evaluations=evals,
        wall_time=time.perf_counter() - t0,
        note="bond squared-error objective",
    )
    return params, record


def calibrate_cir(bonds: list[ZeroBondQuote], r0: float,
                  config: OptimizerConfig) -> CirParams:
    """Convenience wrapper returning only the fitted parameters."""
    return calibrate_cir_report(bonds, r0, config)[0]


# ------------------------------------------------------------- chain pricing

def _params_from_dict(d: dict[str, float], cir: CirParams) -> BccParams:
    return BccParams(
        kappa_v=d["kappa_v"], theta_v=d["theta_v"], sigma_v=d["sigma_v"],
        rho=d["rho"], v0=d["v0"], lam=d["lambda"], mu_j=d["mu_j"],
        delta=d["delta"], kappa_r=cir.kappa_r, theta_r=cir.theta_r,
        sigma_r=cir.sigma_r, r0=cir.r0)


def price_chain(params: BccParams, quotes: list[OptionQuote], spec: RegressorSpec,
                mc: GridSpec, *, itm_only: bool = True,
                features: str = "price-only") -> np.ndarray:
    """LSM model prices for every quote, one simulation per expiry.

    Quotes sharing (maturity, spot) share a PathGrid; the grid keeps the
    seed and path/step counts of ``mc`` so every call with equal parameters
    reuses identical draws (common random numbers).
    """
    if not quotes:
        raise ValueError("empty quote list")
    prices = np.empty(len(quotes))
    groups: dict[tuple[float, float], list[int]] = {}
    for i, q in enumerate(quotes):
        groups.setdefault((q.maturity_years, q.spot), []).append(i)
    for (maturity, spot), idxs in groups.items():
        grid_spec = replace(mc, s0=spot, horizon=maturity)
        grid = simulate(params, grid_spec)
        for i in idxs:
            contract = PutContract(quotes[i].strike, maturity)
            prices[i] = price_american_put(grid, contract, spec, itm_only=itm_only,
                                           features=features).price
    return prices


def chain_mse(params: BccParams, quotes: list[OptionQuote], spec: RegressorSpec,
              mc: GridSpec) -> float:
    """Mean squared difference between model prices and quote mids."""
    model = price_chain(params, quotes, spec, mc)
    mids = np.array([q.mid_price for q in quotes])
    return float(((model - mids) ** 2).mean())


# ------------------------------------------------------------ staged fitting

def _grid_candidates(names: tuple[str, ...], config: OptimizerConfig,
                     start: dict[str, float]) -> list[dict[str, float]]:
    import itertools
    axes = [config.grid.get(n, [start[n]]) for n in names]
    out = []
    for combo in itertools.product(*axes):
        out.append(dict(zip(names, combo)))
    return out


def _run_stage(stage: int, names: tuple[str, ...], full: dict[str, float],
               objective_full, config: OptimizerConfig, *, use_grid: bool,
               note: str) -> tuple[dict[str, float], StageRecord]:
    """Grid scan (optional) then simplex over ``names``, others frozen."""
    t0 = time.perf_counter()
    evals = 0

    def objective_vec(vec: np.ndarray) -> float:
        trial = dict(full)
        trial.update({n: float(v) for n, v in zip(names, vec)})
        return objective_full(trial)

    start_vec = np.array([full[n] for n in names])
    f_in = objective_vec(start_vec)
    evals += 1

    best_vec, best_val = start_vec, f_in
    if use_grid and config.max_evaluations > 0:
        for cand in _grid_candidates(names, config, full):
            vec = np.array([cand[n] for n in names])
            val = objective_vec(vec)
            evals += 1
            if val < best_val:
                best_vec, best_val = vec, val

    if config.max_evaluations > 0:
        x, fx, used = nelder_mead(objective_vec, best_vec, config,
                                  bounds=[config.bound(n) for n in names],
                                  f_start=best_val)
        evals += used
    else:
        x, fx = best_vec, best_val

    out = dict(full)
    out.update({n: float(v) for n, v in zip(names, x)})
    record = StageRecord(
        stage=stage,
        params_in={n: full[n] for n in names},
        params_out={n: out[n] for n in names},
        objective_in=f_in,
        objective_out=fx,
        evaluations=evals,
        wall_time=time.perf_counter() - t0,
        note=note,
    )
    return out, record


def calibrate_bcc(quotes: list[OptionQuote], cir: CirParams, spec: RegressorSpec,
                  mc: GridSpec, config: OptimizerConfig, *,
                  cir_record: StageRecord | None = None) -> CalibrationReport:
    """Stages 2-4 on option quotes, prefixed by the stage-1 CIR record.

    Stage 2 fits (kappa_v, theta_v, sigma_v, rho, v0) with the jump part
    frozen at zero; stage 3 fits (lambda, mu_j, delta) on the short-maturity
    subset with the variance part frozen; stage 4 refines all eight on the
    full set.  When no short-maturity quotes exist, stage 3 is skipped with
    an annotated record and zero jump parameters carry into stage 4.

    ``cir_record`` is the record calibrate_cir_report produced; without it
    an echo record marks the CIR parameters as supplied.
    """
    if not quotes:
        raise ValueError("empty quote list")

    def objective_full(p: dict[str, float]) -> float:
        return chain_mse(_params_from_dict(p, cir), quotes, spec, mc)

    current = {n: config.start_value(n) for n in VOL_NAMES}
    current.update({"lambda": 0.0, "mu_j": 0.0, "delta": 0.0})

    stages = []
    if cir_record is not None:
        stages.append(cir_record)
    else:
        echo = {"kappa_r": cir.kappa_r, "theta_r": cir.theta_r,
                "sigma_r": cir.sigma_r, "r0": cir.r0}
        stages.append(StageRecord(stage=1, params_in=dict(echo), params_out=dict(echo),
                                  objective_in=0.0, objective_out=0.0, evaluations=0,
                                  wall_time=0.0, note="cir parameters supplied"))

    current, rec2 = _run_stage(2, VOL_NAMES, current, objective_full, config,
                               use_grid=True, note="full-chain objective, jumps frozen at zero")
    stages.append(rec2)

    short = [q for q in quotes if bucketize(q).maturity is MaturityBand.SHORT]
    if short:
        def objective_short(p: dict[str, float]) -> float:
            return chain_mse(_params_from_dict(p, cir), short, spec, mc)

        jump_start = {n: config.start_value(n) for n in JUMP_NAMES}
        staged = dict(current)
        staged.update(jump_start)
        staged, rec3 = _run_stage(3, JUMP_NAMES, staged, objective_short, config,
                                  use_grid=True,
                                  note="short-maturity subset objective, variance frozen")
        current = staged
        stages.append(rec3)
    else:
        stages.append(StageRecord(stage=3, params_in={n: 0.0 for n in JUMP_NAMES},
                                  params_out={n: 0.0 for n in JUMP_NAMES},
                                  objective_in=rec2.objective_out,
                                  objective_out=rec2.objective_out,
                                  evaluations=0, wall_time=0.0,
                                  note="skipped: no short-maturity quotes"))

    current, rec4 = _run_stage(4, VOL_NAMES + JUMP_NAMES, current, objective_full,
                               config, use_grid=False, note="joint refinement, full chain")
    stages.append(rec4)

    return CalibrationReport(stages=stages, final=_params_from_dict(current, cir))
