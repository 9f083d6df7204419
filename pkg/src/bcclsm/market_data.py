"""Option-chain and zero-curve ingestion, filtering, and error buckets.

CSV is the only ingestion format.  Chains carry the header
``expiry,strike,bid,ask,volume``; zero-coupon curves carry
``maturity_years,price``.  Quotes are bucketed by moneyness (ITM, NTM,
OTM) and maturity band (Short, Mid) for the pricing-error report, which is
written back out as CSV with a final OVERALL row.
"""

from __future__ import annotations

import csv
import datetime
import logging
from dataclasses import dataclass
from enum import Enum

log = logging.getLogger(__name__)

__all__ = [
    "OptionQuote",
    "ZeroBondQuote",
    "Moneyness",
    "MaturityBand",
    "Bucket",
    "BucketEntry",
    "BucketReport",
    "load_chain",
    "load_bonds",
    "apply_filters",
    "bucketize",
    "mse_report",
    "write_bucket_report",
]

CHAIN_COLUMNS = ["expiry", "strike", "bid", "ask", "volume"]
BOND_COLUMNS = ["maturity_years", "price"]
REPORT_HEADER = "maturity_bucket,moneyness_bucket,count,mse"

WEEK = 1.0 / 52.0


class Moneyness(Enum):
    ITM = "ITM"
    NTM = "NTM"
    OTM = "OTM"


class MaturityBand(Enum):
    SHORT = "Short"
    MID = "Mid"


@dataclass(frozen=True)
class Bucket:
    moneyness: Moneyness
    maturity: MaturityBand


# fixed report order
ALL_BUCKETS = [Bucket(m, b) for b in (MaturityBand.SHORT, MaturityBand.MID)
               for m in (Moneyness.ITM, Moneyness.NTM, Moneyness.OTM)]


@dataclass(frozen=True)
class OptionQuote:
    """One American put quote against a spot observation.

    ``maturity_years`` is derived from the dates under ACT/365 and not
    passed in.  Strike and spot must be positive, the mid nonnegative and
    at most the strike (an American put never exceeds its strike), and the
    expiry strictly after the quote date.
    """

    quote_date: datetime.date
    expiry_date: datetime.date
    strike: float
    mid_price: float
    volume: int
    spot: float
    maturity_years: float = 0.0

    def __post_init__(self) -> None:
        days = (self.expiry_date - self.quote_date).days
        object.__setattr__(self, "maturity_years", days / 365.0)
        if self.strike <= 0.0:
            raise ValueError(f"strike must be positive, got {self.strike}")
        if self.spot <= 0.0:
            raise ValueError(f"spot must be positive, got {self.spot}")
        if self.mid_price < 0.0:
            raise ValueError(f"mid_price must be nonnegative, got {self.mid_price}")
        if self.mid_price > self.strike:
            raise ValueError(
                f"mid_price {self.mid_price} exceeds strike {self.strike}")
        if self.volume < 0:
            raise ValueError(f"volume must be nonnegative, got {self.volume}")
        if self.maturity_years <= 0.0:
            raise ValueError(
                f"expiry {self.expiry_date} is not after quote date {self.quote_date}")


@dataclass(frozen=True)
class ZeroBondQuote:
    """Zero-coupon bond price as a fraction of face value."""

    maturity_years: float
    price: float

    def __post_init__(self) -> None:
        if self.maturity_years <= 0.0:
            raise ValueError(f"maturity_years must be positive, got {self.maturity_years}")
        if not 0.0 < self.price <= 1.0:
            raise ValueError(f"price must be in (0, 1], got {self.price}")


@dataclass(frozen=True)
class BucketEntry:
    bucket: Bucket
    count: int
    mse: float | None


@dataclass(frozen=True)
class BucketReport:
    entries: list[BucketEntry]
    overall_count: int
    overall_mse: float | None


def _check_header(fieldnames: list[str] | None, expected: list[str], path: str) -> None:
    if fieldnames is None:
        raise ValueError(f"{path}: empty file, expected header {','.join(expected)}")
    cleaned = [c.strip() for c in fieldnames]
    if cleaned != expected:
        raise ValueError(
            f"{path}: header must be exactly {','.join(expected)}, got {','.join(cleaned)}")


def load_chain(path: str, spot: float, quote_date: datetime.date) -> list[OptionQuote]:
    """Read an option chain CSV into quotes, unsorted.

    Rows whose fields fail to parse (bad date, non-numeric strike) are
    skipped with a row-numbered log entry.  Rows that parse but violate a
    quote invariant, negative numbers included, raise instead: silently
    dropping well-formed bad data would hide a corrupt file.
    """
    quotes: list[OptionQuote] = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        _check_header(reader.fieldnames, CHAIN_COLUMNS, path)
        for row in reader:
            line = reader.line_num
            try:
                expiry = datetime.date.fromisoformat(row["expiry"].strip())
                strike = float(row["strike"])
                bid = float(row["bid"])
                ask = float(row["ask"])
                volume = int(row["volume"])
            except (ValueError, TypeError, AttributeError) as exc:
                log.warning("%s row %d skipped: %s", path, line, exc)
                continue
            if bid < 0.0 or ask < 0.0:
                raise ValueError(f"{path} row {line}: negative bid/ask ({bid}, {ask})")
            try:
                quotes.append(OptionQuote(quote_date, expiry, strike,
                                          (bid + ask) / 2.0, volume, spot))
            except ValueError as exc:
                raise ValueError(f"{path} row {line}: {exc}") from exc
    return quotes


def load_bonds(path: str) -> list[ZeroBondQuote]:
    """Read a zero-coupon curve CSV, sorted by maturity.

    A price increasing with maturity is legal (negative forward rates) but
    usually a data problem, so it logs a warning rather than raising.
    """
    bonds: list[ZeroBondQuote] = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        _check_header(reader.fieldnames, BOND_COLUMNS, path)
        for row in reader:
            line = reader.line_num
            try:
                maturity = float(row["maturity_years"])
                price = float(row["price"])
            except (ValueError, TypeError) as exc:
                log.warning("%s row %d skipped: %s", path, line, exc)
                continue
            try:
                bonds.append(ZeroBondQuote(maturity, price))
            except ValueError as exc:
                raise ValueError(f"{path} row {line}: {exc}") from exc
    bonds.sort(key=lambda b: b.maturity_years)
    for prev, cur in zip(bonds, bonds[1:]):
        if cur.price > prev.price:
            log.warning("%s: bond price rises with maturity (%g @ %gy vs %g @ %gy)",
                        path, prev.price, prev.maturity_years,
                        cur.price, cur.maturity_years)
    return bonds


def apply_filters(quotes: list[OptionQuote]) -> list[OptionQuote]:
    """Liquidity and moneyness screen, order preserving and idempotent."""
    out = []
    for q in quotes:
        ratio = q.strike / q.spot
        if not 0.80 <= ratio <= 1.20:
            continue
        if q.volume < 50:
            continue
        if q.mid_price < 0.10:
            continue
        if not WEEK <= q.maturity_years <= 6.0 * WEEK:
            continue
        out.append(q)
    return out


def bucketize(quote: OptionQuote) -> Bucket:
    """Assign a filtered quote to its (moneyness, maturity) bucket.

    The near-the-money band wins ties: a quote within 2% of spot is NTM
    even where the OTM rule would also match.
    """
    # multiplier form instead of |strike/spot - 1| <= 0.02: division plus
    # subtraction rounds the exact 2% tie off the NTM band (98/100 lands on
    # 0.020000000000000018), and the tie belongs to NTM
    if 50.0 * abs(quote.strike - quote.spot) <= quote.spot:
        moneyness = Moneyness.NTM
    elif 50.0 * quote.spot > 51.0 * quote.strike:
        moneyness = Moneyness.OTM
    else:
        moneyness = Moneyness.ITM

    t = quote.maturity_years
    if WEEK <= t < 3.0 * WEEK:
        band = MaturityBand.SHORT
    elif 3.0 * WEEK <= t <= 6.0 * WEEK:
        band = MaturityBand.MID
    else:
        raise ValueError(
            f"maturity {t:.6f}y outside the bucketed range [1/52, 6/52]")
    return Bucket(moneyness, band)


def mse_report(pairs: list[tuple[OptionQuote, float]]) -> BucketReport:
    """Per-bucket and overall mean squared pricing error.

    Errors are absolute price differences, model minus mid.  All six
    buckets appear in the report; an empty bucket carries count 0 and no
    MSE.  The overall figure is the count-weighted bucket mean, which
    equals the plain MSE over all pairs.
    """
    if not pairs:
        raise ValueError("empty pair list")
    sse: dict[Bucket, float] = {b: 0.0 for b in ALL_BUCKETS}
    count: dict[Bucket, int] = {b: 0 for b in ALL_BUCKETS}
    for quote, model_price in pairs:
        b = bucketize(quote)
        # numpy scalars sneak in from MC pricers; keep repr() CSV-clean
        sse[b] += (float(model_price) - quote.mid_price) ** 2
        count[b] += 1
    entries = [BucketEntry(b, count[b], sse[b] / count[b] if count[b] else None)
               for b in ALL_BUCKETS]
    total = sum(count.values())
    overall = sum(sse.values()) / total if total else None
    return BucketReport(entries, total, overall)


def write_bucket_report(report: BucketReport, path: str) -> None:
    """Write the bucket report as CSV with a final OVERALL row."""
    with open(path, "w", newline="") as fh:
        fh.write(REPORT_HEADER + "\n")
        for e in report.entries:
            mse = "" if e.mse is None else repr(e.mse)
            fh.write(f"{e.bucket.maturity.value},{e.bucket.moneyness.value},"
                     f"{e.count},{mse}\n")
        overall = "" if report.overall_mse is None else repr(report.overall_mse)
        fh.write(f"OVERALL,,{report.overall_count},{overall}\n")
