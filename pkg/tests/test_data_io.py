import datetime as dt
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aparchpiv import DomainError, load_prices_csv, read_report, to_returns, write_report
from aparchpiv.data_io import (build_report, business_days, dumps, prices_from_returns,
                               write_prices_csv)


def write(tmp_path, text, name="p.csv"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


def test_two_rows(tmp_path):
    dates, prices = load_prices_csv(write(tmp_path, "date,price\n2020-01-01,100\n2020-01-02,105\n"))
    assert dates == [dt.date(2020, 1, 1), dt.date(2020, 1, 2)]
    np.testing.assert_array_equal(prices, [100.0, 105.0])
    series = to_returns(dates, prices)
    assert series.returns[0] == pytest.approx(4.87902, abs=5e-6)
    assert series.returns[0] == pytest.approx(100 * math.log(1.05), rel=1e-15)
    assert series.dates == [dt.date(2020, 1, 2)]


def test_missing_price_row_dropped(tmp_path, caplog):
    text = "DATE,DCOILWTICO\n2020-01-01,100\n2020-01-02,.\n2020-01-03,\n2020-01-06,110\n"
    with caplog.at_level("INFO"):
        dates, prices = load_prices_csv(write(tmp_path, text))
    assert "dropped 2" in caplog.text
    assert len(prices) == 2
    r = to_returns(dates, prices).returns
    assert r[0] == pytest.approx(100 * math.log(1.1))


@pytest.mark.parametrize("text,match", [
    ("date,price\n2020-01-01,100\n2020-01-02,abc\n", ":3: bad price"),
    ("date,price\n2020-01-01,100\n2020-13-02,1\n", ":3: bad date"),
    ("date,price\n2020-01-02,100\n2020-01-01,101\n", "strictly increasing"),
    ("date,price\n2020-01-01,100\n2020-01-01,101\n", "strictly increasing"),
    ("date,price\n2020-01-01,100,7\n", ":2: expected 2 fields"),
    ("", "empty file"),
    ("date,price\n", "no price rows"),
    ("when,price,volume\n", "expected header"),
])
def test_malformed_files(tmp_path, text, match):
    with pytest.raises(DomainError, match=match):
        load_prices_csv(write(tmp_path, text))


def test_missing_file_is_os_error(tmp_path):
    with pytest.raises(OSError):
        load_prices_csv(tmp_path / "absent.csv")


@pytest.mark.parametrize("prices", [[100.0, 0.0], [100.0, -1.0], [5.0]])
def test_bad_prices(prices):
    with pytest.raises(DomainError):
        to_returns(list(range(len(prices))), prices)


def test_flat_prices_give_zero_return():
    assert to_returns([1, 2], [100.0, 100.0]).returns.tolist() == [0.0]


@settings(max_examples=40, deadline=None)
@given(r=st.lists(st.floats(-20, 20), min_size=1, max_size=200))
def test_price_return_roundtrip(r):
    r = np.array(r)
    p = prices_from_returns(r)
    back = to_returns(list(range(p.size)), p).returns
    np.testing.assert_allclose(back, r, atol=1e-12)


def test_csv_roundtrip(tmp_path):
    r = np.random.default_rng(0).standard_normal(300) * 2
    p = prices_from_returns(r, 50.0)
    days = business_days(dt.date(2001, 1, 1), p.size)
    assert all(d.weekday() < 5 for d in days)
    path = tmp_path / "sim.csv"
    write_prices_csv(path, days, p)
    dates, prices = load_prices_csv(path)
    assert dates == days
    np.testing.assert_allclose(to_returns(dates, prices).returns, r, atol=1e-12)


def test_dumps_is_deterministic_and_tagged():
    value = {"b": [1.0, math.nan, -math.inf], "a": {"z": 1, "y": 0.1}, "c": "q\"x"}
    text = dumps(value)
    assert text == dumps(dict(reversed(list(value.items()))))
    assert '"NaN"' in text and '"-Infinity"' in text
    assert "0.10000000000000001" in text
    parsed = json.loads(text)
    assert parsed["c"] == 'q"x'


def test_report_roundtrip_and_byte_stability(tmp_path):
    report = build_report(config={"seed": 1, "quantiles": [0.05, 0.95]},
                          input_fingerprint="abc", flags=["x"],
                          tails=[{"level": 0.05, "tce1": math.nan, "es": 1.5}])
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    write_report(report, a)
    write_report(report, b)
    assert a.read_bytes() == b.read_bytes()
    back = read_report(a)
    assert back["schema_version"] == "1.0"
    assert math.isnan(back["tail_measures"][0]["tce1"])
    assert back["tail_measures"][0]["es"] == 1.5
    assert back["config"] == {"seed": 1, "quantiles": [0.05, 0.95]}


def test_write_report_surfaces_path(tmp_path):
    with pytest.raises(OSError, match="cannot write report"):
        write_report({"a": 1}, tmp_path / "missing" / "r.json")
