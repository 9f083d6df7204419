"""JSON run configuration: typed sections, strict keys.

A config document carries up to six sections (model, grid, contract,
regressor, pricing, calibration).  Unknown keys anywhere are rejected so a
typo fails loudly instead of silently falling back to a default, and every
value passes through the owning dataclass so module invariants are
revalidated on load.
"""

from __future__ import annotations

import datetime
import json
from dataclasses import dataclass, field

from .calibration import OptimizerConfig
from .engine import BccParams, GridSpec
from .pricer import FEATURE_SETS, PutContract
from .regressors import BoostedTreesSpec, MlpSpec, PolynomialSpec, RegressorSpec

__all__ = ["PricingFlags", "CalibrationSettings", "RunConfig", "load_config"]

MODEL_KEYS = ["kappa_v", "theta_v", "sigma_v", "rho", "v0", "lambda", "mu_j",
              "delta", "kappa_r", "theta_r", "sigma_r", "r0"]
GRID_KEYS = ["s0", "horizon", "steps", "paths", "seed", "antithetic", "moment_match"]
CONTRACT_KEYS = ["strike", "maturity"]
PRICING_KEYS = ["itm_only", "features", "control_variate"]
CALIBRATION_KEYS = ["spot", "quote_date", "spot2", "quote_date2", "optimizer"]
OPTIMIZER_KEYS = ["reflection", "expansion", "contraction", "shrink",
                  "max_evaluations", "tolerance", "grid", "bounds", "start"]
REGRESSOR_KINDS = {
    "polynomial": (PolynomialSpec, ["degree", "terms"]),
    "boosted_trees": (BoostedTreesSpec, ["estimators", "max_depth", "learning_rate"]),
    "mlp": (MlpSpec, ["hidden_layers", "batch_size", "epochs", "learning_rate", "seed"]),
}
SECTION_KEYS = ["model", "grid", "contract", "regressor", "pricing", "calibration"]


@dataclass(frozen=True)
class PricingFlags:
    itm_only: bool = True
    features: str = "price-only"
    control_variate: bool = False

    def __post_init__(self) -> None:
        if self.features not in FEATURE_SETS:
            raise ValueError(
                f"features must be one of {FEATURE_SETS}, got {self.features!r}")


@dataclass(frozen=True)
class CalibrationSettings:
    """Chain metadata plus optimizer settings for calibrate/report runs."""

    spot: float
    quote_date: datetime.date
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    spot2: float | None = None
    quote_date2: datetime.date | None = None

    def __post_init__(self) -> None:
        if self.spot <= 0.0:
            raise ValueError(f"spot must be positive, got {self.spot}")
        if self.spot2 is not None and self.spot2 <= 0.0:
            raise ValueError(f"spot2 must be positive, got {self.spot2}")


@dataclass(frozen=True)
class RunConfig:
    """Parsed configuration; sections a command does not need stay None."""

    model: BccParams | None = None
    grid: GridSpec | None = None
    contract: PutContract | None = None
    regressor: RegressorSpec | None = None
    pricing: PricingFlags = field(default_factory=PricingFlags)
    calibration: CalibrationSettings | None = None

    def require(self, *sections: str) -> None:
        missing = [s for s in sections if getattr(self, s) is None]
        if missing:
            raise ValueError(f"config missing required section(s): {', '.join(missing)}")


def _reject_unknown(section: str, data: dict, allowed: list[str]) -> None:
    if not isinstance(data, dict):
        raise ValueError(f"config section {section!r} must be a JSON object")
    unknown = sorted(set(data) - set(allowed))
    if unknown:
        raise ValueError(
            f"unknown key(s) in config section {section!r}: {', '.join(unknown)}")


def _parse_model(data: dict) -> BccParams:
    _reject_unknown("model", data, MODEL_KEYS)
    missing = sorted(set(MODEL_KEYS) - set(data))
    if missing:
        raise ValueError(f"model section missing key(s): {', '.join(missing)}")
    kwargs = {k: float(data[k]) for k in MODEL_KEYS if k != "lambda"}
    return BccParams(lam=float(data["lambda"]), **kwargs)


def _parse_grid(data: dict) -> GridSpec:
    _reject_unknown("grid", data, GRID_KEYS)
    missing = sorted({"s0", "horizon", "steps", "paths", "seed"} - set(data))
    if missing:
        raise ValueError(f"grid section missing key(s): {', '.join(missing)}")
    return GridSpec(
        s0=float(data["s0"]), horizon=float(data["horizon"]),
        steps=int(data["steps"]), paths=int(data["paths"]), seed=int(data["seed"]),
        antithetic=bool(data.get("antithetic", True)),
        moment_match=bool(data.get("moment_match", True)))


def _parse_contract(data: dict) -> PutContract:
    _reject_unknown("contract", data, CONTRACT_KEYS)
    missing = sorted(set(CONTRACT_KEYS) - set(data))
    if missing:
        raise ValueError(f"contract section missing key(s): {', '.join(missing)}")
    return PutContract(strike=float(data["strike"]), maturity=float(data["maturity"]))


def _parse_regressor(data: dict) -> RegressorSpec:
    if not isinstance(data, dict) or "kind" not in data:
        raise ValueError("regressor section must carry a 'kind' key")
    kind = data["kind"]
    if kind not in REGRESSOR_KINDS:
        raise ValueError(
            f"unknown regressor kind {kind!r}; expected one of {sorted(REGRESSOR_KINDS)}")
    cls, keys = REGRESSOR_KINDS[kind]
    _reject_unknown(f"regressor ({kind})", data, ["kind"] + keys)
    kwargs = {k: data[k] for k in keys if k in data}
    if "hidden_layers" in kwargs:
        kwargs["hidden_layers"] = tuple(int(n) for n in kwargs["hidden_layers"])
    return cls(**kwargs)


def _parse_optimizer(data: dict) -> OptimizerConfig:
    _reject_unknown("calibration.optimizer", data, OPTIMIZER_KEYS)
    kwargs = dict(data)
    if "grid" in kwargs:
        kwargs["grid"] = {k: [float(v) for v in vals]
                          for k, vals in kwargs["grid"].items()}
    if "bounds" in kwargs:
        kwargs["bounds"] = {k: (float(lo), float(hi))
                            for k, (lo, hi) in kwargs["bounds"].items()}
    if "start" in kwargs:
        kwargs["start"] = {k: float(v) for k, v in kwargs["start"].items()}
    return OptimizerConfig(**kwargs)


def _parse_calibration(data: dict) -> CalibrationSettings:
    _reject_unknown("calibration", data, CALIBRATION_KEYS)
    missing = sorted({"spot", "quote_date"} - set(data))
    if missing:
        raise ValueError(f"calibration section missing key(s): {', '.join(missing)}")
    optimizer = _parse_optimizer(data.get("optimizer", {}))
    quote_date2 = data.get("quote_date2")
    return CalibrationSettings(
        spot=float(data["spot"]),
        quote_date=datetime.date.fromisoformat(data["quote_date"]),
        optimizer=optimizer,
        spot2=float(data["spot2"]) if data.get("spot2") is not None else None,
        quote_date2=datetime.date.fromisoformat(quote_date2) if quote_date2 else None)


def load_config(path: str) -> RunConfig:
    """Parse and validate a JSON config file into a RunConfig."""
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValueError(f"{path}: invalid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ValueError(f"{path}: config root must be a JSON object")
    _reject_unknown("(root)", doc, SECTION_KEYS)
    try:
        return RunConfig(
            model=_parse_model(doc["model"]) if "model" in doc else None,
            grid=_parse_grid(doc["grid"]) if "grid" in doc else None,
            contract=_parse_contract(doc["contract"]) if "contract" in doc else None,
            regressor=_parse_regressor(doc["regressor"]) if "regressor" in doc else None,
            pricing=PricingFlags(**doc["pricing"]) if _checked_pricing(doc) else PricingFlags(),
            calibration=_parse_calibration(doc["calibration"]) if "calibration" in doc else None)
    except TypeError as exc:
        raise ValueError(f"{path}: {exc}") from exc


def _checked_pricing(doc: dict) -> bool:
    if "pricing" not in doc:
        return False
    _reject_unknown("pricing", doc["pricing"], PRICING_KEYS)
    return True
