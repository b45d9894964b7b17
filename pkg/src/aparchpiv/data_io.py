"""Price ingestion, percentage log returns and the JSON report."""

from __future__ import annotations

import csv
import datetime as dt
import hashlib
import json
import logging
import math
from dataclasses import dataclass, fields, is_dataclass
from pathlib import Path

import numpy as np

from ._errors import DomainError

logger = logging.getLogger(__name__)

SCHEMA_VERSION = "1.0"

_MARKER_VALUES = {"NaN": math.nan, "Infinity": math.inf, "-Infinity": -math.inf}

_MISSING = {"", ".", "na", "nan", "null"}


@dataclass
class ReturnSeries:
    dates: list
    returns: np.ndarray
    source_label: str = ""

    def __len__(self) -> int:
        return int(self.returns.size)


def load_prices_csv(path):
    """Read a ``date,price`` CSV.

    The header may also be a two-column FRED export (``DATE,DCOILWTICO`` or
    ``observation_date,...``). Rows whose price is empty or ``.`` are dropped
    and counted in the log, so the previous close pairs with the next one.

    Returns
    -------
    dates : list of datetime.date
    prices : ndarray
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8-sig") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise DomainError(f"{path}: empty file")
        header = [h.strip().lower() for h in header]
        if len(header) != 2 or "date" not in header[0] or not header[1]:
            raise DomainError(f"{path}: expected header 'date,price', got {','.join(header)}")
        dates, prices = [], []
        dropped = 0
        for row in reader:
            line = reader.line_num
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 2:
                raise DomainError(f"{path}:{line}: expected 2 fields, got {len(row)}")
            raw_date, raw_price = row[0].strip(), row[1].strip()
            try:
                day = dt.date.fromisoformat(raw_date)
            except ValueError:
                raise DomainError(f"{path}:{line}: bad date {raw_date!r}") from None
            if raw_price.lower() in _MISSING:
                dropped += 1
                continue
            try:
                price = float(raw_price)
            except ValueError:
                raise DomainError(f"{path}:{line}: bad price {raw_price!r}") from None
            if not math.isfinite(price):
                raise DomainError(f"{path}:{line}: non-finite price {raw_price!r}")
            if dates and day <= dates[-1]:
                raise DomainError(f"{path}:{line}: dates must be strictly increasing "
                                  f"({day} after {dates[-1]})")
            dates.append(day)
            prices.append(price)
    if not prices:
        raise DomainError(f"{path}: no price rows")
    if dropped:
        logger.info("%s: dropped %d rows with missing prices", path, dropped)
    return dates, np.asarray(prices, dtype=float)


def to_returns(dates, prices, source_label: str = "") -> ReturnSeries:
    """r_t = 100 ln(p_t / p_{t-1}), dated at t."""
    p = np.asarray(prices, dtype=float)
    if p.size < 2:
        raise DomainError("need at least two prices")
    if len(dates) != p.size:
        raise DomainError("dates and prices differ in length")
    if not np.all(p > 0):
        bad = int(np.argmax(~(p > 0)))
        raise DomainError(f"price {p[bad]} at {dates[bad]} is not positive")
    return ReturnSeries(dates=list(dates[1:]), returns=100.0 * np.diff(np.log(p)),
                        source_label=source_label)


def prices_from_returns(returns, start_price: float = 100.0) -> np.ndarray:
    """Inverse of :func:`to_returns`: p_0 = start_price, p_t = p_0 exp(Σ r / 100)."""
    r = np.asarray(returns, dtype=float)
    return start_price * np.exp(np.concatenate(([0.0], np.cumsum(r) / 100.0)))


def business_days(start: dt.date, count: int) -> list:
    days = []
    day = start
    while len(days) < count:
        if day.weekday() < 5:
            days.append(day)
        day += dt.timedelta(days=1)
    return days


def write_prices_csv(path, dates, prices) -> None:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        fh.write("date,price\n")
        for day, price in zip(dates, prices):
            fh.write(f"{day.isoformat()},{price:.17g}\n")


def file_fingerprint(path) -> str:
    digest = hashlib.sha256()
    with Path(path).open("rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


# ----------------------------------------------------------------------
# JSON report
# ----------------------------------------------------------------------
def to_plain(obj):
    """Convert dataclasses, numpy values and containers to JSON-ready values."""
    if is_dataclass(obj) and not isinstance(obj, type):
        return {f.name: to_plain(getattr(obj, f.name)) for f in fields(obj)}
    if isinstance(obj, dict):
        return {str(k): to_plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [to_plain(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj)
    if isinstance(obj, (dt.date, dt.datetime)):
        return obj.isoformat()
    if obj is None or isinstance(obj, str):
        return obj
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _encode_float(x: float) -> str:
    if math.isnan(x):
        return '"NaN"'
    if math.isinf(x):
        return '"Infinity"' if x > 0 else '"-Infinity"'
    text = format(x, ".17g")
    if text.lstrip("-").isdigit():
        text += ".0"
    return text


def _encode_str(s: str) -> str:
    out = ['"']
    for ch in s:
        if ch == '"':
            out.append('\\"')
        elif ch == "\\":
            out.append("\\\\")
        elif ch == "\n":
            out.append("\\n")
        elif ord(ch) < 0x20:
            out.append(f"\\u{ord(ch):04x}")
        else:
            out.append(ch)
    out.append('"')
    return "".join(out)


def dumps(value, indent: int = 0) -> str:
    """Deterministic JSON: sorted keys, 17 significant digits, tagged non-finite floats."""
    pad = "  " * (indent + 1)
    close = "  " * indent
    if isinstance(value, dict):
        if not value:
            return "{}"
        items = [f"{pad}{_encode_str(k)}: {dumps(value[k], indent + 1)}" for k in sorted(value)]
        return "{\n" + ",\n".join(items) + "\n" + close + "}"
    if isinstance(value, list):
        if not value:
            return "[]"
        if all(isinstance(v, (int, float, str, bool)) or v is None for v in value):
            return "[" + ", ".join(dumps(v) for v in value) + "]"
        return "[\n" + ",\n".join(pad + dumps(v, indent + 1) for v in value) + "\n" + close + "]"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return _encode_float(value)
    if isinstance(value, str):
        return _encode_str(value)
    if value is None:
        return "null"
    raise TypeError(f"cannot encode {type(value).__name__}")


def _decode_markers(obj):
    if isinstance(obj, dict):
        return {k: _decode_markers(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_decode_markers(v) for v in obj]
    if isinstance(obj, str) and obj in _MARKER_VALUES:
        return _MARKER_VALUES[obj]
    return obj


def build_report(*, config: dict, input_fingerprint: str | None = None, summary=None,
                 fit=None, losses=None, backtest=None, tails=None, flags=()) -> dict:
    """Assemble the report dictionary from whichever analyses were run."""
    report = {
        "schema_version": SCHEMA_VERSION,
        "config": to_plain(config),
        "input_fingerprint": input_fingerprint,
        "flags": list(flags),
    }
    if summary is not None:
        report["summary_statistics"] = to_plain(summary)
    if fit is not None:
        report["fit"] = fit_to_plain(fit)
    if losses is not None:
        report["volatility_losses"] = to_plain(losses)
    if backtest is not None:
        report["var_backtest"] = to_plain(backtest)
    if tails is not None:
        report["tail_measures"] = to_plain(tails)
    return report


def fit_to_plain(fit) -> dict:
    """Fit summary without the per-observation filter arrays."""
    return {
        "params": fit.params.as_dict(),
        "loglik": float(fit.loglik),
        "robust_se": to_plain(fit.robust_se),
        "t_stats": to_plain(fit.t_stats),
        "p_values": to_plain(fit.p_values),
        "persistence": float(fit.persistence),
        "converged": bool(fit.converged),
        "iterations": int(fit.iterations),
        "flags": list(fit.flags),
    }


def write_report(report: dict, path) -> None:
    """Write ``report`` as deterministic JSON; identical input gives identical bytes."""
    text = dumps(to_plain(report)) + "\n"
    path = Path(path)
    try:
        path.write_text(text, encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot write report to {path}: {exc.strerror or exc}") from exc


def read_report(path) -> dict:
    with Path(path).open(encoding="utf-8") as fh:
        return _decode_markers(json.load(fh))
