"""
Synthetic generators for panelspectra

Seeded panels and series with known ground truth (periodic signal, phase
coupling, break location, spatial clustering). Every unit draws from its own
counter-based stream derived from (seed, unit index), so output does not
depend on generation order.
"""
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Dict, Mapping, Tuple, Union

import numpy as np
import pandas as pd
from numpy.lib.stride_tricks import sliding_window_view
from scipy import special
from shapely.geometry import Polygon, box

from errors import InvalidGrid, InvalidSpec
from panel_ingest import CountySeries, Panel

logger = logging.getLogger(__name__)

DEFAULT_T = 19
DEFAULT_START_YEAR = 2003


class SynthKind(Enum):
    SINUSOID = "sinusoid"
    COUPLED_TRIAD = "coupled-triad"
    PIECEWISE_LINEAR = "piecewise-linear"
    GAUSSIAN_NOISE = "gaussian-noise"
    TREND_PLUS_NOISE = "trend-plus-noise"
    SPATIAL_SURFACE = "spatial-surface"


DEFAULT_PARAMETERS: Dict[SynthKind, Dict[str, float]] = {
    SynthKind.SINUSOID: {'amplitude': 1.0, 'frequency': 4 / 19, 'phase': 0.0, 'level': 0.0, 'noise_sd': 0.0},
    SynthKind.COUPLED_TRIAD: {'freq_a': 2 / 19, 'freq_b': 3 / 19, 'level': 0.0, 'noise_sd': 0.0},
    SynthKind.PIECEWISE_LINEAR: {'intercept': 2.0, 'beta1': 1.0, 'beta2': 3.0, 'tau': 10, 'noise_sd': 0.0},
    SynthKind.GAUSSIAN_NOISE: {'mean': 10.0, 'sd': 1.0},
    SynthKind.TREND_PLUS_NOISE: {'intercept': 5.0, 'slope_mean': 1.0, 'slope_sd': 0.5, 'noise_sd': 0.5},
    SynthKind.SPATIAL_SURFACE: {'rows': 10, 'cols': 10, 'smoothness': 3, 'intercept': 5.0,
                                'slope_mean': 1.0, 'slope_sd': 0.5, 'noise_sd': 0.5},
}


@dataclass(frozen=True)
class SynthSpec:
    kind: Union[SynthKind, str]
    parameters: Dict[str, float] = field(default_factory=dict)
    seed: int = 0
    T: int = DEFAULT_T
    n_units: int = 1
    start_year: int = DEFAULT_START_YEAR

    def __post_init__(self):
        try:
            kind = SynthKind(self.kind)
        except ValueError:
            raise InvalidSpec(f"Unknown generator kind '{self.kind}'")
        object.__setattr__(self, 'kind', kind)

        unknown = set(self.parameters) - set(DEFAULT_PARAMETERS[kind])
        if unknown:
            raise InvalidSpec(f"Unknown parameter(s) for {kind.value}: {', '.join(sorted(unknown))}")
        if self.T < 4:
            raise InvalidSpec(f"T must be at least 4, got {self.T}")
        if self.n_units < 1:
            raise InvalidSpec(f"n_units must be at least 1, got {self.n_units}")

    @property
    def resolved(self) -> Dict[str, float]:
        """Kind defaults overlaid with the given parameters"""
        return {**DEFAULT_PARAMETERS[self.kind], **self.parameters}


def unit_fips(index: int) -> str:
    """Synthetic fips code for the zero-based unit index"""
    return f"{index + 1:05d}"


def unit_stream(seed: int, index: int) -> np.random.Generator:
    """Independent Philox stream for one unit"""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, index])))


def gaussian(rng: np.random.Generator, size, sd: float = 1.0) -> np.ndarray:
    """Normal draws by inverse-CDF transform of uniforms"""
    u = rng.uniform(np.nextafter(0.0, 1.0), 1.0, size=size)
    return sd * special.ndtri(u)


def _check_frequency(name: str, value: float) -> None:
    if not 0 < value <= 0.5:
        raise InvalidSpec(f"{name} must be in (0, 0.5], got {value}")


def _validate(spec: SynthSpec, params: Mapping[str, float]) -> None:
    for name in ('noise_sd', 'sd', 'slope_sd'):
        if name in params and params[name] < 0:
            raise InvalidSpec(f"{name} must be non-negative, got {params[name]}")

    if spec.kind is SynthKind.SINUSOID:
        _check_frequency('frequency', params['frequency'])
    elif spec.kind is SynthKind.COUPLED_TRIAD:
        _check_frequency('freq_a', params['freq_a'])
        _check_frequency('freq_b', params['freq_b'])
        _check_frequency('freq_a + freq_b', params['freq_a'] + params['freq_b'])
    elif spec.kind is SynthKind.PIECEWISE_LINEAR:
        tau = params['tau']
        if int(tau) != tau or not 1 <= tau <= spec.T - 1:
            raise InvalidSpec(f"tau must be an integer in 1..{spec.T - 1}, got {tau}")
    elif spec.kind is SynthKind.SPATIAL_SURFACE:
        rows, cols = int(params['rows']), int(params['cols'])
        if rows * cols != spec.n_units:
            raise InvalidSpec(f"spatial-surface needs n_units == rows * cols ({rows * cols}), got {spec.n_units}")


def _trajectory(spec: SynthSpec, params: Mapping[str, float], index: int,
                surface: np.ndarray) -> np.ndarray:
    rng = unit_stream(spec.seed, index)
    t = np.arange(1, spec.T + 1, dtype=np.float64)
    kind = spec.kind

    if kind is SynthKind.SINUSOID:
        y = params['level'] + params['amplitude'] * np.cos(2 * np.pi * params['frequency'] * t + params['phase'])
        y += gaussian(rng, spec.T, params['noise_sd'])
    elif kind is SynthKind.COUPLED_TRIAD:
        phi1, phi2 = rng.uniform(0.0, 2 * np.pi, size=2)
        wa, wb = 2 * np.pi * params['freq_a'], 2 * np.pi * params['freq_b']
        y = (np.cos(wa * t + phi1) + np.cos(wb * t + phi2)
             + np.cos((wa + wb) * t + phi1 + phi2) + params['level'])
        y += gaussian(rng, spec.T, params['noise_sd'])
    elif kind is SynthKind.PIECEWISE_LINEAR:
        tau = int(params['tau'])
        y = np.where(
            t <= tau,
            params['intercept'] + params['beta1'] * t,
            params['intercept'] + params['beta1'] * tau + params['beta2'] * (t - tau),
        )
        y = y + gaussian(rng, spec.T, params['noise_sd'])
    elif kind is SynthKind.GAUSSIAN_NOISE:
        y = params['mean'] + gaussian(rng, spec.T, params['sd'])
    elif kind is SynthKind.TREND_PLUS_NOISE:
        slope = params['slope_mean'] + gaussian(rng, 1, params['slope_sd'])[0]
        y = params['intercept'] + slope * t + gaussian(rng, spec.T, params['noise_sd'])
    else:
        slope = params['slope_mean'] + params['slope_sd'] * surface[index]
        y = params['intercept'] + slope * t + gaussian(rng, spec.T, params['noise_sd'])

    # Rates are non-negative; lift the whole trajectory when it dips below zero
    if y.min() < 0:
        y = y - y.min()
    return y


def generate_panel(spec: SynthSpec) -> Panel:
    """Generate a balanced panel of spec.n_units units"""
    params = spec.resolved
    _validate(spec, params)

    surface = np.zeros(spec.n_units)
    if spec.kind is SynthKind.SPATIAL_SURFACE:
        _, values = spatial_surface(int(params['rows']), int(params['cols']), params['smoothness'], spec.seed)
        surface = np.array([values[unit_fips(i)] for i in range(spec.n_units)])

    years = tuple(range(spec.start_year, spec.start_year + spec.T))
    series = []
    for i in range(spec.n_units):
        fips = unit_fips(i)
        series.append(CountySeries(fips=fips, name=f"Unit {fips}", years=years,
                                   rates=_trajectory(spec, params, i, surface)))

    logger.debug("Generated %s panel: %d units x %d years (seed %d)",
                 spec.kind.value, spec.n_units, spec.T, spec.seed)
    return Panel(series=tuple(series), start_year=spec.start_year, n_years=spec.T)


def generate(spec: SynthSpec) -> Union[Panel, CountySeries]:
    """A single CountySeries when n_units == 1, otherwise a Panel"""
    panel = generate_panel(spec)
    if spec.n_units == 1:
        return panel.series[0]
    return panel


def grid_polygons(rows: int, cols: int) -> Dict[str, Polygon]:
    """Unit squares; cell (r, c) gets fips index r * cols + c"""
    return {unit_fips(r * cols + c): box(c, r, c + 1, r + 1) for r in range(rows) for c in range(cols)}


def spatial_surface(rows: int, cols: int, smoothness: float, seed: int) -> Tuple[Dict[str, Polygon], Dict[str, float]]:
    """
    Grid polygons plus a smoothed Gaussian field over the cells

    The field is a moving average of iid noise over a round(smoothness) square
    window; a window of 0 or 1 leaves the values iid.
    """
    if rows < 2 or cols < 2:
        raise InvalidGrid(f"Grid must be at least 2 x 2, got {rows} x {cols}")
    if not math.isfinite(smoothness) or smoothness < 0:
        raise InvalidGrid(f"smoothness must be a non-negative number, got {smoothness}")

    window = max(1, int(round(smoothness)))
    rng = unit_stream(seed, 0)
    noise = gaussian(rng, (rows + window - 1, cols + window - 1))
    field_values = sliding_window_view(noise, (window, window)).mean(axis=(-2, -1))

    values = {unit_fips(r * cols + c): float(field_values[r, c]) for r in range(rows) for c in range(cols)}
    return grid_polygons(rows, cols), values


def write_panel_csv(panel: Panel, path: Union[str, Path]) -> Path:
    """Long-format CSV in the layout load_panel reads"""
    path = Path(path)
    rows = [
        {'name': unit.name, 'fips': unit.fips, 'year': year, 'rate': rate}
        for unit in panel
        for year, rate in zip(unit.years, unit.rates)
    ]
    pd.DataFrame(rows, columns=['name', 'fips', 'year', 'rate']).to_csv(path, index=False, float_format='%.17g')
    return path
