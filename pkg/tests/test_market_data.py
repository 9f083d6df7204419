import datetime
import logging

import pytest

from bcclsm.market_data import (Bucket, MaturityBand, Moneyness, OptionQuote,
                                ZeroBondQuote, apply_filters, bucketize,
                                load_bonds, load_chain, mse_report,
                                write_bucket_report)

QD = datetime.date(2017, 9, 5)


def quote(days=14, strike=100.0, mid=1.10, volume=300, spot=100.0):
    return OptionQuote(QD, QD + datetime.timedelta(days=days), strike, mid,
                       volume, spot)


def write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


class TestOptionQuote:
    def test_maturity_derived_act_365(self):
        q = quote(days=14)
        assert q.maturity_years == pytest.approx(0.0384, abs=5e-5)
        assert q.maturity_years == 14 / 365

    def test_invariants(self):
        with pytest.raises(ValueError):
            quote(strike=0.0)
        with pytest.raises(ValueError):
            quote(spot=-1.0)
        with pytest.raises(ValueError):
            quote(mid=-0.01)
        with pytest.raises(ValueError):
            quote(strike=100.0, mid=100.5)  # put worth more than its strike
        with pytest.raises(ValueError):
            quote(days=0)
        with pytest.raises(ValueError):
            quote(volume=-1)


class TestZeroBondQuote:
    def test_price_range(self):
        assert ZeroBondQuote(1.0, 1.0).price == 1.0
        with pytest.raises(ValueError):
            ZeroBondQuote(1.0, 0.0)
        with pytest.raises(ValueError):
            ZeroBondQuote(1.0, 1.01)
        with pytest.raises(ValueError):
            ZeroBondQuote(0.0, 0.9)


class TestLoadChain:
    def test_mid_and_maturity_from_row(self, tmp_path):
        path = write(tmp_path, "chain.csv",
                     "expiry,strike,bid,ask,volume\n"
                     "2017-09-19,100,1.0,1.2,300\n")
        quotes = load_chain(path, spot=100.0, quote_date=QD)
        assert len(quotes) == 1
        assert quotes[0].mid_price == pytest.approx(1.10)
        assert quotes[0].maturity_years == pytest.approx(0.0384, abs=5e-5)
        assert quotes[0].volume == 300

    def test_empty_data_section(self, tmp_path):
        path = write(tmp_path, "chain.csv", "expiry,strike,bid,ask,volume\n")
        assert load_chain(path, 100.0, QD) == []

    def test_unparseable_row_skipped_others_kept(self, tmp_path, caplog):
        path = write(tmp_path, "chain.csv",
                     "expiry,strike,bid,ask,volume\n"
                     "2017-09-19,100,1.0,1.2,abc\n"
                     "2017-09-19,101,1.5,1.7,200\n")
        with caplog.at_level(logging.WARNING, logger="bcclsm.market_data"):
            quotes = load_chain(path, 100.0, QD)
        assert len(quotes) == 1
        assert quotes[0].strike == 101.0
        assert "row 2" in caplog.text

    def test_negative_bid_raises(self, tmp_path):
        path = write(tmp_path, "chain.csv",
                     "expiry,strike,bid,ask,volume\n"
                     "2017-09-19,100,-1.0,1.2,300\n")
        with pytest.raises(ValueError, match="negative"):
            load_chain(path, 100.0, QD)

    def test_header_must_match_exactly(self, tmp_path):
        path = write(tmp_path, "chain.csv",
                     "expiry,strike,bid,ask,vol\n"
                     "2017-09-19,100,1.0,1.2,300\n")
        with pytest.raises(ValueError, match="header"):
            load_chain(path, 100.0, QD)

    def test_missing_file(self):
        with pytest.raises(FileNotFoundError):
            load_chain("/nonexistent/chain.csv", 100.0, QD)

    def test_invariant_violations_raise_with_row_number(self, tmp_path):
        # parseable but invalid: mid above strike must not be dropped quietly
        path = write(tmp_path, "chain.csv",
                     "expiry,strike,bid,ask,volume\n"
                     "2017-09-19,1,1.4,1.6,300\n")
        with pytest.raises(ValueError, match="row 2"):
            load_chain(path, 100.0, QD)


class TestLoadBonds:
    def test_sorted_by_maturity(self, tmp_path):
        path = write(tmp_path, "bonds.csv",
                     "maturity_years,price\n2.0,0.88\n0.5,0.97\n1.0,0.94\n")
        bonds = load_bonds(path)
        assert [b.maturity_years for b in bonds] == [0.5, 1.0, 2.0]

    def test_rising_price_logs_warning(self, tmp_path, caplog):
        path = write(tmp_path, "bonds.csv",
                     "maturity_years,price\n0.5,0.90\n1.0,0.95\n")
        with caplog.at_level(logging.WARNING, logger="bcclsm.market_data"):
            bonds = load_bonds(path)
        assert len(bonds) == 2
        assert "rises" in caplog.text

    def test_header_checked(self, tmp_path):
        path = write(tmp_path, "bonds.csv", "maturity,price\n1.0,0.9\n")
        with pytest.raises(ValueError, match="header"):
            load_bonds(path)


class TestFilters:
    def test_volume_floor(self):
        assert apply_filters([quote(volume=49)]) == []
        assert len(apply_filters([quote(volume=50)])) == 1

    def test_price_floor(self):
        assert apply_filters([quote(mid=0.09)]) == []
        assert len(apply_filters([quote(mid=0.10)])) == 1

    def test_moneyness_window(self):
        assert apply_filters([quote(strike=79.9)]) == []
        assert apply_filters([quote(strike=120.1)]) == []
        kept = apply_filters([quote(strike=80.0, mid=0.10),
                              quote(strike=120.0, mid=1.0)])
        assert len(kept) == 2

    def test_maturity_window(self):
        assert apply_filters([quote(days=6)]) == []   # under one week
        assert apply_filters([quote(days=43)]) == []  # over six weeks
        # 1/52 year is 7.02 days, so the shortest surviving expiry is 8 days
        kept = apply_filters([quote(days=8), quote(days=42)])
        assert len(kept) == 2

    def test_retained_example(self):
        q = quote(days=14, strike=100.0, mid=2.0, volume=100)
        assert apply_filters([q]) == [q]

    def test_idempotent_and_order_preserving(self):
        quotes = [quote(strike=101.0, mid=2.0), quote(volume=10),
                  quote(strike=99.0, mid=1.5)]
        once = apply_filters(quotes)
        assert apply_filters(once) == once
        assert [q.strike for q in once] == [101.0, 99.0]


class TestBucketize:
    def test_spec_examples(self):
        assert bucketize(quote(days=14, strike=101.0)) == \
            Bucket(Moneyness.NTM, MaturityBand.SHORT)
        assert bucketize(quote(days=28, strike=97.0)) == \
            Bucket(Moneyness.OTM, MaturityBand.MID)
        assert bucketize(quote(days=14, strike=105.0)) == \
            Bucket(Moneyness.ITM, MaturityBand.SHORT)

    def test_ntm_band_wins_boundary_tie(self):
        # strike 98: spot > 1.02*98 = 99.96 says OTM, but |98/100-1| = 0.02
        # sits on the NTM boundary and the band takes precedence
        assert bucketize(quote(strike=98.0)).moneyness is Moneyness.NTM

    def test_band_edges(self):
        assert bucketize(quote(days=8)).maturity is MaturityBand.SHORT
        assert bucketize(quote(days=21)).maturity is MaturityBand.SHORT
        assert bucketize(quote(days=22)).maturity is MaturityBand.MID
        assert bucketize(quote(days=42)).maturity is MaturityBand.MID

    def test_out_of_range_maturity(self):
        with pytest.raises(ValueError):
            bucketize(quote(days=6))
        with pytest.raises(ValueError):
            bucketize(quote(days=50))


class TestMseReport:
    def test_zero_residuals(self):
        pairs = [(quote(strike=101.0, mid=2.0), 2.0),
                 (quote(days=28, strike=97.0, mid=0.5), 0.5)]
        report = mse_report(pairs)
        assert report.overall_mse == 0.0
        assert all(e.mse in (0.0, None) for e in report.entries)

    def test_single_residual(self):
        report = mse_report([(quote(mid=1.0), 1.5)])
        assert report.overall_mse == pytest.approx(0.25)
        assert report.overall_count == 1

    def test_bucket_mean_of_squares(self):
        pairs = [(quote(strike=105.0, mid=5.0), 6.0),   # residual 1
                 (quote(strike=106.0, mid=6.0), 9.0)]   # residual 3
        report = mse_report(pairs)
        itm_short = next(e for e in report.entries
                         if e.bucket == Bucket(Moneyness.ITM, MaturityBand.SHORT))
        assert itm_short.mse == pytest.approx(5.0)
        assert itm_short.count == 2

    def test_all_six_buckets_present_with_empty_markers(self):
        report = mse_report([(quote(mid=1.0), 1.0)])
        assert len(report.entries) == 6
        empties = [e for e in report.entries if e.count == 0]
        assert len(empties) == 5
        assert all(e.mse is None for e in empties)

    def test_counts_sum_and_permutation_invariance(self):
        pairs = [(quote(days=d, strike=k, mid=1.0), 1.0 + 0.1 * i)
                 for i, (d, k) in enumerate([(10, 99.0), (10, 104.0),
                                             (30, 101.0), (30, 96.0),
                                             (14, 100.0), (40, 107.0)])]
        fwd = mse_report(pairs)
        rev = mse_report(list(reversed(pairs)))
        assert sum(e.count for e in fwd.entries) == fwd.overall_count == 6
        assert fwd.overall_mse == pytest.approx(rev.overall_mse, rel=1e-15)

    def test_overall_is_count_weighted_bucket_mean(self):
        pairs = [(quote(strike=105.0, mid=1.0), 2.0),
                 (quote(strike=100.0, mid=1.0), 1.5),
                 (quote(strike=100.0, mid=1.0), 1.1)]
        report = mse_report(pairs)
        weighted = sum(e.count * e.mse for e in report.entries if e.count)
        assert report.overall_mse == pytest.approx(weighted / 3.0)

    def test_empty_input(self):
        with pytest.raises(ValueError):
            mse_report([])


class TestWriteReport:
    def test_csv_layout(self, tmp_path):
        report = mse_report([(quote(mid=1.0), 1.5)])
        path = tmp_path / "report.csv"
        write_bucket_report(report, str(path))
        lines = path.read_text().splitlines()
        assert lines[0] == "maturity_bucket,moneyness_bucket,count,mse"
        assert len(lines) == 8  # header + six buckets + OVERALL
        assert lines[1] == "Short,ITM,0,"
        assert lines[2] == "Short,NTM,1,0.25"
        assert lines[-1] == "OVERALL,,1,0.25"

    def test_round_trip_parses_as_floats(self, tmp_path):
        import csv
        report = mse_report([(quote(mid=1.0), 1.25)])
        path = tmp_path / "report.csv"
        write_bucket_report(report, str(path))
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        overall = rows[-1]
        assert overall["maturity_bucket"] == "OVERALL"
        assert float(overall["mse"]) == pytest.approx(0.0625)
