import os
from pathlib import Path

import numpy as np
import pytest

ACCEPTANCE_LINES = {}

DATA_DIR = Path(__file__).parent / "data"


def wti_path():
    """Location of the FRED WTI price CSV, or None when it is not available."""
    env = os.environ.get("WTI_CSV")
    for candidate in (env, DATA_DIR / "DCOILWTICO.csv"):
        if candidate and Path(candidate).is_file():
            return Path(candidate)
    return None


@pytest.fixture(scope="session")
def wti_returns():
    """Percentage log returns for 1990-04-02 .. 2015-09-28, or None."""
    import datetime as dt

    from aparchpiv import load_prices_csv, to_returns

    path = wti_path()
    if path is None:
        return None
    dates, prices = load_prices_csv(path)
    keep = [i for i, d in enumerate(dates) if dt.date(1990, 4, 2) <= d <= dt.date(2015, 9, 28)]
    dates = [dates[i] for i in keep]
    prices = np.asarray(prices)[keep]
    return to_returns(dates, prices, source_label=path.name)


@pytest.fixture(scope="session")
def record():
    def _record(number, status, detail):
        ACCEPTANCE_LINES[number] = f"criterion {number:>2}: {status:<4} {detail}"
        print(ACCEPTANCE_LINES[number])

    return _record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[number])
