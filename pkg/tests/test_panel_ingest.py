#!/usr/bin/env python3
"""
Tests for panel loading, name harmonization and demeaning
"""
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_series, write_panel
from errors import (
    AmbiguousMatch,
    DuplicateYearForUnit,
    MissingColumn,
    NegativeRate,
    NonNumericRate,
    SeriesTooShort,
    UnbalancedPanel,
    UnmatchedUnit,
)
from panel_ingest import CsvSchema, demean, harmonize_names, load_panel, normalize_name


def _rows(units, years=range(2003, 2022)):
    return [(name, fips, year, float(i)) for name, fips in units for i, year in enumerate(years)]


def test_load_two_complete_units(tmp_path):
    """Two counties with complete 2003-2021 data load as a 19-year panel"""
    path = write_panel(tmp_path / "p.csv", _rows([("Appling", "13001"), ("Atkinson", "13003")]))
    panel = load_panel(path)

    assert len(panel) == 2, f"Expected 2 series, got {len(panel)}"
    assert panel.n_years == 19, f"Expected T=19, got {panel.n_years}"
    assert panel.start_year == 2003
    assert all(unit.years == panel.years for unit in panel), "All series must share the panel years"


def test_rows_are_sorted_by_year_within_unit(tmp_path):
    rows = _rows([("Appling", "13001")])
    path = write_panel(tmp_path / "p.csv", list(reversed(rows)))
    unit = load_panel(path).get("13001")

    assert list(unit.years) == list(range(2003, 2022))
    np.testing.assert_array_equal(unit.rates, np.arange(19, dtype=float))


def test_missing_year_names_unit_and_year(tmp_path):
    rows = [r for r in _rows([("Appling", "13001"), ("Atkinson", "13003")]) if not (r[1] == "13001" and r[2] == 2010)]
    path = write_panel(tmp_path / "p.csv", rows)

    with pytest.raises(UnbalancedPanel) as excinfo:
        load_panel(path)
    assert excinfo.value.fips == "13001"
    assert excinfo.value.missing_years == [2010]


def test_missing_column(tmp_path):
    path = tmp_path / "p.csv"
    path.write_text("name,fips,year\nAppling,13001,2003\n")

    with pytest.raises(MissingColumn) as excinfo:
        load_panel(path)
    assert excinfo.value.column == "rate"


def test_non_numeric_and_negative_rates(tmp_path):
    rows = _rows([("Appling", "13001")])
    rows[3] = ("Appling", "13001", 2006, "suppressed")
    with pytest.raises(NonNumericRate):
        load_panel(write_panel(tmp_path / "a.csv", rows))

    rows[3] = ("Appling", "13001", 2006, -1.0)
    with pytest.raises(NegativeRate):
        load_panel(write_panel(tmp_path / "b.csv", rows))


def test_duplicate_year(tmp_path):
    rows = _rows([("Appling", "13001")]) + [("Appling", "13001", 2005, 3.0)]
    with pytest.raises(DuplicateYearForUnit) as excinfo:
        load_panel(write_panel(tmp_path / "p.csv", rows))
    assert excinfo.value.year == 2005


def test_schema_mapping_and_window(tmp_path):
    path = tmp_path / "p.csv"
    lines = ["County,GEOID,Yr,Value"] + [f"Appling,1001,{y},{y - 2000}" for y in range(2000, 2022)]
    path.write_text("\n".join(lines) + "\n")

    schema = CsvSchema(name="County", fips="GEOID", year="Yr", rate="Value", start_year=2003, end_year=2021)
    panel = load_panel(path, schema)

    assert panel.fips_codes == ["01001"], "Short fips codes are zero-padded to 5 characters"
    assert panel.n_years == 19


def test_harmonize_strips_county_suffix():
    from panel_ingest import Panel
    unit = make_series([1.0, 2.0, 3.0], name="Fulton County")
    panel = Panel(series=(unit,), start_year=2003, n_years=3)

    renamed = harmonize_names(panel, ["Fulton", "DeKalb"])
    assert renamed.series[0].name == "Fulton"
    assert harmonize_names(renamed, ["Fulton", "DeKalb"]).series[0].name == "Fulton", "Harmonization is idempotent"


def test_harmonize_reports_unmatched():
    from panel_ingest import Panel
    panel = Panel(series=(make_series([1.0, 2.0], name="Fultn"),), start_year=2003, n_years=2)

    with pytest.raises(UnmatchedUnit) as excinfo:
        harmonize_names(panel, ["Fulton"])
    assert excinfo.value.names == ["Fultn"]


def test_harmonize_rejects_ambiguous_names():
    from panel_ingest import Panel
    panel = Panel(series=(make_series([1.0, 2.0], name="FULTON"),), start_year=2003, n_years=2)

    with pytest.raises(AmbiguousMatch) as excinfo:
        harmonize_names(panel, ["Fulton", "Fulton County", "DeKalb"])
    assert excinfo.value.name == "FULTON"
    assert excinfo.value.candidates == ["Fulton", "Fulton County"]


def test_normalize_name():
    assert normalize_name("  DeKalb County ") == "dekalb"
    assert normalize_name("FULTON") == "fulton"


def test_demean_examples():
    constant = demean(make_series([7.0] * 5))
    assert constant.mean == 7.0
    np.testing.assert_array_equal(constant.values, np.zeros(5))

    simple = demean(make_series([1.0, 2.0, 3.0]))
    assert simple.mean == 2.0
    np.testing.assert_allclose(simple.values, [-1.0, 0.0, 1.0])

    assert demean(simple).mean == pytest.approx(0.0, abs=1e-15), "Demeaning twice leaves a zero mean"


def test_demean_too_short():
    with pytest.raises(SeriesTooShort):
        demean(make_series([4.0]))


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(min_value=0, max_value=1e4, allow_nan=False), min_size=2, max_size=40))
def test_demeaned_values_sum_to_zero(rates):
    result = demean(make_series(rates))
    tolerance = 1e-9 * len(rates) * max(1.0, abs(result.mean))
    assert abs(result.values.sum()) <= tolerance, f"Sum {result.values.sum()} exceeds {tolerance}"
