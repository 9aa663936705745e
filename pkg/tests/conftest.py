"""
Shared fixtures for panelspectra tests
"""
import os
import sys

import numpy as np
import pandas as pd
import pytest

# Add the project root directory to sys.path for imports
project_root = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
sys.path.insert(0, project_root)

from panel_ingest import CountySeries  # noqa: E402
from synthetic import grid_polygons  # noqa: E402


def make_series(rates, fips="13001", name="Appling", start_year=2003) -> CountySeries:
    rates = np.asarray(rates, dtype=np.float64)
    return CountySeries(fips=fips, name=name, years=tuple(range(start_year, start_year + len(rates))), rates=rates)


def write_panel(path, rows) -> str:
    """Write (name, fips, year, rate) tuples as a panel CSV"""
    pd.DataFrame(rows, columns=['name', 'fips', 'year', 'rate']).to_csv(path, index=False)
    return str(path)


@pytest.fixture
def grid_2x2():
    return grid_polygons(2, 2)


@pytest.fixture
def grid_3x3():
    return grid_polygons(3, 3)


@pytest.fixture
def grid_4x4():
    return grid_polygons(4, 4)


@pytest.fixture
def grid_10x10():
    return grid_polygons(10, 10)


@pytest.fixture
def small_panel_csv(tmp_path):
    rows = []
    for fips, name, slope in (("13001", "Appling", 1.0), ("13003", "Atkinson", 2.0), ("13005", "Bacon", 0.5)):
        for i, year in enumerate(range(2003, 2022)):
            rows.append((name, fips, year, 5.0 + slope * i))
    return write_panel(tmp_path / "panel.csv", rows)
