from __future__ import annotations

from datetime import date, timedelta

import numpy as np
import pytest

from leakbench.series import TimeSeries
from leakbench.synthetic import reference_series


@pytest.fixture(scope="session")
def climate() -> TimeSeries:
    return reference_series()


def make_series(values, start=date(2020, 1, 1), name="x") -> TimeSeries:
    """Small helper: a daily series over arbitrary values."""
    values = np.asarray(values, dtype=float)
    stamps = tuple(start + timedelta(days=i) for i in range(len(values)))
    return TimeSeries(name=name, timestamps=stamps, values=values)
