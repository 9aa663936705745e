"""
Panel ingest for panelspectra
Loads, validates, harmonizes and demeans the balanced unit x year panel
"""
import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from errors import (
    AmbiguousMatch,
    DuplicateYearForUnit,
    MissingColumn,
    NegativeRate,
    NonNumericRate,
    PanelError,
    SeriesTooShort,
    UnbalancedPanel,
    UnmatchedUnit,
)

logger = logging.getLogger(__name__)

NAME_SUFFIX = " county"


def _frozen_array(values: Iterable[float]) -> np.ndarray:
    array = np.array(values, dtype=np.float64)
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class CountySeries:
    """One unit's aligned annual rate trajectory"""

    fips: str
    name: str
    years: Tuple[int, ...]
    rates: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, 'years', tuple(int(y) for y in self.years))
        object.__setattr__(self, 'rates', _frozen_array(self.rates))

        if len(self.fips) != 5:
            raise PanelError(f"fips code must have 5 characters, got '{self.fips}'")
        if len(self.years) != len(self.rates):
            raise PanelError(f"Unit {self.fips}: {len(self.years)} years but {len(self.rates)} rates")
        if any(b - a != 1 for a, b in zip(self.years, self.years[1:])):
            raise PanelError(f"Unit {self.fips}: years must increase in steps of 1")
        if not np.all(np.isfinite(self.rates)):
            raise NonNumericRate(f"Unit {self.fips}: rates must be finite")
        if np.any(self.rates < 0):
            raise NegativeRate(f"Unit {self.fips}: rates must be non-negative")

    @property
    def start_year(self) -> int:
        return self.years[0]

    def __len__(self) -> int:
        return len(self.rates)


@dataclass(frozen=True, eq=False)
class DemeanedSeries:
    """A series with its mean removed; values sum to zero"""

    fips: str
    values: np.ndarray
    mean: float

    def __post_init__(self):
        object.__setattr__(self, 'values', _frozen_array(self.values))

    def __len__(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class Panel:
    """A balanced collection of CountySeries sharing one year window"""

    series: Tuple[CountySeries, ...]
    start_year: int
    n_years: int
    canonical_names: Tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, 'series', tuple(self.series))
        object.__setattr__(self, 'canonical_names', tuple(self.canonical_names))

        seen = set()
        expected = tuple(range(self.start_year, self.start_year + self.n_years))
        for unit in self.series:
            if unit.fips in seen:
                raise PanelError(f"Duplicate fips code {unit.fips}")
            seen.add(unit.fips)
            if unit.years != expected:
                missing = set(expected) - set(unit.years)
                raise UnbalancedPanel(unit.fips, missing or unit.years)

    @property
    def years(self) -> Tuple[int, ...]:
        return tuple(range(self.start_year, self.start_year + self.n_years))

    @property
    def fips_codes(self) -> List[str]:
        return [unit.fips for unit in self.series]

    def get(self, fips: str) -> Optional[CountySeries]:
        for unit in self.series:
            if unit.fips == fips:
                return unit
        return None

    def rate_matrix(self) -> np.ndarray:
        """Rates as an (n_units, T) array in series order"""
        if not self.series:
            return np.empty((0, self.n_years))
        return np.vstack([unit.rates for unit in self.series])

    def __len__(self) -> int:
        return len(self.series)

    def __iter__(self):
        return iter(self.series)


@dataclass(frozen=True)
class CsvSchema:
    """Column mapping for panel CSV files"""

    name: str = "name"
    fips: str = "fips"
    year: str = "year"
    rate: str = "rate"
    start_year: Optional[int] = None
    end_year: Optional[int] = None


def load_panel(csv_path: Union[str, Path], schema: CsvSchema = CsvSchema(),
               canonical_names: Sequence[str] = ()) -> Panel:
    """
    Load a long-format panel CSV (one row per unit and year)

    Args:
        csv_path: Path to a UTF-8 comma-delimited file with a header row
        schema: Column mapping and optional year window
        canonical_names: Reference list stored on the panel

    Returns:
        Balanced Panel with one CountySeries per fips code, ordered by fips
    """
    path = Path(csv_path)
    if not path.exists():
        raise FileNotFoundError(f"Panel file not found: {path}")

    frame = pd.read_csv(path, dtype=str, encoding='utf-8', keep_default_na=False)
    frame.columns = [c.strip() for c in frame.columns]

    for column in (schema.name, schema.fips, schema.year, schema.rate):
        if column not in frame.columns:
            raise MissingColumn(column, frame.columns)

    frame = frame[[schema.name, schema.fips, schema.year, schema.rate]].copy()
    frame.columns = ['name', 'fips', 'year', 'rate']
    frame['fips'] = frame['fips'].str.strip().str.zfill(5)
    frame['name'] = frame['name'].str.strip()

    years = pd.to_numeric(frame['year'].str.strip(), errors='coerce')
    if years.isna().any():
        bad = frame.loc[years.isna(), 'year'].iloc[0]
        raise PanelError(f"Non-integer year value '{bad}'")
    frame['year'] = years.astype(np.int64)

    rates = pd.to_numeric(frame['rate'].str.strip(), errors='coerce')
    invalid = pd.Series(~np.isfinite(rates.to_numpy(dtype=np.float64)), index=frame.index)
    if invalid.any():
        row = frame.loc[invalid].iloc[0]
        raise NonNumericRate(f"Unit {row['fips']} year {row['year']}: rate '{row['rate']}' is not a finite number")
    frame['rate'] = rates.astype(np.float64)
    if (frame['rate'] < 0).any():
        row = frame.loc[frame['rate'] < 0].iloc[0]
        raise NegativeRate(f"Unit {row['fips']} year {row['year']}: negative rate {row['rate']}")

    start = schema.start_year if schema.start_year is not None else int(frame['year'].min())
    end = schema.end_year if schema.end_year is not None else int(frame['year'].max())
    frame = frame[(frame['year'] >= start) & (frame['year'] <= end)]
    if frame.empty:
        raise PanelError(f"No rows inside the year window {start}-{end}")

    duplicated = frame.duplicated(subset=['fips', 'year'], keep='first')
    if duplicated.any():
        row = frame.loc[duplicated].iloc[0]
        raise DuplicateYearForUnit(row['fips'], int(row['year']))

    window = set(range(start, end + 1))
    series = []
    for fips, group in frame.sort_values(['fips', 'year']).groupby('fips', sort=True):
        missing = window - set(group['year'])
        if missing:
            raise UnbalancedPanel(fips, missing)
        series.append(CountySeries(
            fips=fips,
            name=group['name'].iloc[0],
            years=tuple(group['year']),
            rates=group['rate'].to_numpy(),
        ))

    logger.info("Loaded %d units x %d years from %s", len(series), end - start + 1, path)
    return Panel(series=tuple(series), start_year=start, n_years=end - start + 1,
                 canonical_names=tuple(canonical_names))


def load_canonical_names(path: Union[str, Path]) -> List[str]:
    """Read a newline-delimited list of canonical unit names"""
    with open(path, 'r', encoding='utf-8') as f:
        return [line.strip() for line in f if line.strip()]


def normalize_name(name: str) -> str:
    """Case-fold a unit name and strip a trailing ' County' suffix"""
    key = name.strip().casefold()
    if key.endswith(NAME_SUFFIX):
        key = key[:-len(NAME_SUFFIX)].rstrip()
    return key


def harmonize_names(panel: Panel, canonical: Sequence[str]) -> Panel:
    """
    Replace every unit name by its canonical match

    Raises UnmatchedUnit listing every name without a match, and AmbiguousMatch
    when one name resolves to several canonical entries.
    """
    if not canonical:
        raise PanelError("Canonical name list is empty")

    lookup: Dict[str, List[str]] = {}
    for entry in canonical:
        lookup.setdefault(normalize_name(entry), []).append(entry)

    renamed = []
    unmatched = []
    for unit in panel.series:
        candidates = sorted(set(lookup.get(normalize_name(unit.name), [])))
        if not candidates:
            unmatched.append(unit.name)
            continue
        if len(candidates) > 1:
            raise AmbiguousMatch(unit.name, candidates)
        renamed.append(replace(unit, name=candidates[0]) if unit.name != candidates[0] else unit)

    if unmatched:
        logger.warning("Unmatched unit names: %s", ", ".join(unmatched))
        raise UnmatchedUnit(unmatched)

    return replace(panel, series=tuple(renamed), canonical_names=tuple(canonical))


def demean(series: Union[CountySeries, DemeanedSeries]) -> DemeanedSeries:
    """Subtract the series mean; accepts an already demeaned series too"""
    values = series.rates if isinstance(series, CountySeries) else series.values
    if len(values) < 2:
        raise SeriesTooShort(len(values), 2, series.fips)

    mean = math.fsum(values) / len(values)
    return DemeanedSeries(fips=series.fips, values=np.asarray(values) - mean, mean=mean)
