#!/usr/bin/env python3
"""
Tests for the synthetic panel generators
"""
import numpy as np
import pytest

from breakpoints import find_breakpoint
from errors import InvalidGrid, InvalidSpec
from panel_ingest import CountySeries, Panel, demean, load_panel
from spatial_stats import morans_i, queen_contiguity
from spectral import dft, raw_periodogram
from synthetic import (
    SynthKind,
    SynthSpec,
    generate,
    generate_panel,
    grid_polygons,
    spatial_surface,
    unit_fips,
    write_panel_csv,
)


@pytest.mark.parametrize("kind", [k for k in SynthKind if k is not SynthKind.SPATIAL_SURFACE])
def test_same_seed_same_panel(kind):
    spec = SynthSpec(kind=kind, seed=42, n_units=5, parameters={})
    np.testing.assert_array_equal(generate_panel(spec).rate_matrix(), generate_panel(spec).rate_matrix())


def test_units_do_not_depend_on_panel_size():
    small = generate_panel(SynthSpec(kind=SynthKind.TREND_PLUS_NOISE, seed=3, n_units=3))
    large = generate_panel(SynthSpec(kind=SynthKind.TREND_PLUS_NOISE, seed=3, n_units=10))
    np.testing.assert_array_equal(small.rate_matrix(), large.rate_matrix()[:3])


def test_different_seeds_differ():
    a = generate(SynthSpec(kind=SynthKind.GAUSSIAN_NOISE, seed=1))
    b = generate(SynthSpec(kind=SynthKind.GAUSSIAN_NOISE, seed=2))
    assert not np.array_equal(a.rates, b.rates)


def test_generate_returns_single_series_or_panel():
    assert isinstance(generate(SynthSpec(kind=SynthKind.SINUSOID)), CountySeries)
    panel = generate(SynthSpec(kind=SynthKind.SINUSOID, n_units=4))
    assert isinstance(panel, Panel)
    assert panel.fips_codes == ["00001", "00002", "00003", "00004"]
    assert panel.years == tuple(range(2003, 2022))


def test_rates_are_non_negative():
    panel = generate_panel(SynthSpec(kind=SynthKind.GAUSSIAN_NOISE, parameters={'mean': 0.0, 'sd': 3.0},
                                     n_units=20, seed=8))
    assert panel.rate_matrix().min() >= 0.0


def test_sinusoid_peaks_at_its_frequency():
    unit = generate(SynthSpec(kind=SynthKind.SINUSOID, parameters={'amplitude': 2.0, 'level': 5.0}))
    periodogram = raw_periodogram(dft(demean(unit)))
    assert int(np.argmax(periodogram)) + 1 == 4
    assert periodogram[3] == pytest.approx(19.0, rel=1e-9), "Amplitude 2 gives I = T * A^2 / 4"


def test_piecewise_round_trip():
    params = {'intercept': 10.0, 'beta1': 0.5, 'beta2': -0.25, 'tau': 8}
    fit = find_breakpoint(generate(SynthSpec(kind=SynthKind.PIECEWISE_LINEAR, parameters=params)))
    assert fit.tau_index == 8
    assert fit.beta1 == pytest.approx(0.5)
    assert fit.beta2 == pytest.approx(-0.25)


def test_surface_without_smoothing_has_null_moran_on_average(grid_10x10):
    weights = queen_contiguity(grid_10x10)
    values = [morans_i(spatial_surface(10, 10, 0, seed)[1], weights) for seed in range(500)]
    assert np.mean(values) == pytest.approx(-1 / 99, abs=0.02)


def test_smoothed_surface_is_clustered(grid_10x10):
    weights = queen_contiguity(grid_10x10)
    clustered = sum(morans_i(spatial_surface(10, 10, 5, seed)[1], weights) > 0.5 for seed in range(100))
    assert clustered >= 95, f"Only {clustered}/100 window-5 surfaces exceeded I = 0.5"


def test_surface_polygons_match_grid():
    polygons, values = spatial_surface(3, 4, 2, seed=0)
    assert set(polygons) == set(values) == set(grid_polygons(3, 4))
    assert polygons[unit_fips(4)].bounds == (0.0, 1.0, 1.0, 2.0), "Cell (1, 0) sits in the second row"


def test_spatial_surface_panel_follows_surface():
    spec = SynthSpec(kind=SynthKind.SPATIAL_SURFACE, parameters={'rows': 4, 'cols': 5, 'noise_sd': 0.0},
                     n_units=20, seed=6)
    panel = generate_panel(spec)
    _, surface = spatial_surface(4, 5, 3, seed=6)
    slopes = {unit.fips: unit.rates[1] - unit.rates[0] for unit in panel}
    order = sorted(surface, key=surface.get)
    assert [slopes[u] for u in order] == sorted(slopes.values())


@pytest.mark.parametrize("rows,cols,smoothness", [(1, 5, 1), (5, 1, 1), (3, 3, -1), (3, 3, float('nan'))])
def test_invalid_grid(rows, cols, smoothness):
    with pytest.raises(InvalidGrid):
        spatial_surface(rows, cols, smoothness, seed=0)


@pytest.mark.parametrize("kwargs", [
    {'kind': 'wavelet'},
    {'kind': SynthKind.SINUSOID, 'parameters': {'period': 4}},
    {'kind': SynthKind.SINUSOID, 'T': 3},
    {'kind': SynthKind.SINUSOID, 'n_units': 0},
])
def test_invalid_spec(kwargs):
    with pytest.raises(InvalidSpec):
        SynthSpec(**kwargs)


@pytest.mark.parametrize("kind,parameters", [
    (SynthKind.SINUSOID, {'frequency': 0.7}),
    (SynthKind.COUPLED_TRIAD, {'freq_a': 0.3, 'freq_b': 0.3}),
    (SynthKind.PIECEWISE_LINEAR, {'tau': 19}),
    (SynthKind.PIECEWISE_LINEAR, {'tau': 4.5}),
    (SynthKind.GAUSSIAN_NOISE, {'sd': -1.0}),
])
def test_invalid_parameters(kind, parameters):
    with pytest.raises(InvalidSpec):
        generate_panel(SynthSpec(kind=kind, parameters=parameters))


def test_spatial_surface_needs_matching_unit_count():
    with pytest.raises(InvalidSpec):
        generate_panel(SynthSpec(kind=SynthKind.SPATIAL_SURFACE, n_units=50))


def test_written_panel_loads_back_exactly(tmp_path):
    panel = generate_panel(SynthSpec(kind=SynthKind.TREND_PLUS_NOISE, seed=4, n_units=6))
    loaded = load_panel(write_panel_csv(panel, tmp_path / "panel.csv"))
    assert loaded.fips_codes == panel.fips_codes
    np.testing.assert_array_equal(loaded.rate_matrix(), panel.rate_matrix())
