#!/usr/bin/env python3
"""
Tests for the bispectral engine and random-phase surrogates
"""
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from conftest import make_series
from errors import EmptyDomain, SeriesTooShort
from bispectral import (
    BispectrumSummary,
    bispectral_domain,
    bispectral_intensity,
    bispectrum_direct,
    phase_coupling_index,
    random_phase_surrogate,
    summarize_series,
    surrogate_test,
)
from panel_ingest import demean
from spectral import dft, inverse_dft
from synthetic import SynthKind, SynthSpec, generate


def test_domain_size_at_nineteen_years():
    domain = bispectral_domain(19)
    assert len(domain) == 153, f"Expected 153 index pairs, got {len(domain)}"
    assert np.all(domain >= 1)
    assert np.all(domain.sum(axis=1) <= 18)
    assert tuple(domain[0]) == (1, 1) and tuple(domain[-1]) == (17, 1), "Pairs are ordered by k then l"


def test_zero_series_has_zero_intensity():
    summary = summarize_series(np.zeros(19))
    assert summary.intensity == 0.0
    assert not summary.has_log10, "log10 is undefined for zero intensity"


def test_too_short_series():
    with pytest.raises(SeriesTooShort):
        bispectrum_direct(dft(np.array([1.0, -1.0, 0.5])))


def test_empty_domain():
    with pytest.raises(EmptyDomain):
        bispectral_intensity(BispectrumSummary(pairs=np.empty((0, 2)), magnitudes_sq=np.empty(0), domain_size=0))


def test_single_triple_value():
    """A triad with zero phases has B(2, 3) = (T/2)^3 and every triple is real"""
    t = np.arange(1, 20)
    x = sum(np.cos(2 * np.pi * k * t / 19) for k in (2, 3, 5))
    summary = bispectrum_direct(dft(x))
    assert summary.as_dict()[(2, 3)] == pytest.approx((9.5 ** 3) ** 2, rel=1e-9)
    assert summary.as_dict()[(1, 1)] == pytest.approx(0.0, abs=1e-12)


@settings(max_examples=50, deadline=None)
@given(
    arrays(np.float64, 19, elements=st.floats(-10, 10, allow_nan=False)),
    st.floats(0.1, 10),
)
def test_intensity_is_homogeneous_of_degree_six(x, c):
    base = summarize_series(x).intensity
    scaled = summarize_series(c * x).intensity
    assert scaled == pytest.approx(c ** 6 * base, rel=1e-8, abs=1e-12)


def test_intensity_unchanged_by_phase_randomization():
    unit = generate(SynthSpec(kind=SynthKind.COUPLED_TRIAD, seed=5))
    result = surrogate_test(demean(unit), n_surrogates=50, seed=11, statistic="intensity")
    np.testing.assert_allclose(result.surrogates, result.observed, rtol=1e-9)


def test_surrogate_keeps_amplitudes_and_real_output():
    coeffs = dft(demean(generate(SynthSpec(kind=SynthKind.GAUSSIAN_NOISE, seed=2))))
    surrogate = random_phase_surrogate(coeffs, seed=4)
    np.testing.assert_allclose(np.abs(surrogate.values), np.abs(coeffs.values), rtol=1e-12)
    np.testing.assert_allclose(surrogate.values[1:], np.conj(surrogate.values[1:][::-1]), atol=1e-12)


def test_coupled_triad_beats_surrogates():
    unit = generate(SynthSpec(kind=SynthKind.COUPLED_TRIAD, seed=9))
    result = surrogate_test(demean(unit), n_surrogates=199, seed=3)

    assert result.statistic == "phase_coupling"
    assert result.observed == pytest.approx(1.0, abs=1e-9), "Coupled phases give a coupling index of 1"
    assert result.observed > result.median
    assert result.p_value < 0.05


def test_phase_coupling_of_zero_spectrum():
    assert phase_coupling_index(dft(np.zeros(10))) == 0.0


def test_surrogates_are_deterministic():
    x = demean(generate(SynthSpec(kind=SynthKind.GAUSSIAN_NOISE, seed=8)))
    first = surrogate_test(x, n_surrogates=20, seed=1)
    second = surrogate_test(x, n_surrogates=20, seed=1)
    np.testing.assert_array_equal(first.surrogates, second.surrogates)


def test_unknown_statistic():
    with pytest.raises(ValueError):
        surrogate_test(np.arange(10.0), statistic="kurtosis")


def test_log10_matches_intensity():
    summary = summarize_series(demean(generate(SynthSpec(kind=SynthKind.GAUSSIAN_NOISE, seed=6))))
    assert summary.log10_intensity == pytest.approx(math.log10(summary.intensity))
    assert len(list(summary.triples())) == summary.domain_size


def test_pairs_are_symmetric():
    summary = summarize_series(demean(generate(SynthSpec(kind=SynthKind.GAUSSIAN_NOISE, seed=12))))
    grid = summary.as_dict()
    assert all(grid[(k, l)] == grid[(l, k)] for k, l in grid)


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, 19, elements=st.floats(0, 20, allow_nan=False)), st.floats(0, 100))
def test_intensity_ignores_reversal_and_level(x, shift):
    base = summarize_series(demean(make_series(x))).intensity
    assert summarize_series(demean(make_series(x[::-1].copy()))).intensity == pytest.approx(base, rel=1e-8, abs=1e-9)
    assert summarize_series(demean(make_series(x + shift))).intensity == pytest.approx(base, rel=1e-8, abs=1e-9)


def test_surrogate_inverse_is_real():
    coeffs = dft(demean(generate(SynthSpec(kind=SynthKind.TREND_PLUS_NOISE, seed=3))))
    for seed in range(5):
        series = inverse_dft(random_phase_surrogate(coeffs, seed=seed))
        assert np.max(np.abs(series.imag)) <= 1e-9


def test_coupled_triads_beat_surrogates_across_trials():
    wins = 0
    for trial in range(100):
        unit = generate(SynthSpec(kind=SynthKind.COUPLED_TRIAD, seed=trial))
        result = surrogate_test(demean(unit), n_surrogates=199, seed=1000 + trial)
        wins += result.observed > result.median
    assert wins >= 95, f"Coupling beat the surrogate median in only {wins}/100 trials"


def test_white_noise_log_intensity_is_stable_across_seeds():
    values = [summarize_series(demean(generate(SynthSpec(kind=SynthKind.GAUSSIAN_NOISE, seed=seed)))).log10_intensity
              for seed in range(200)]
    medians = [np.median(values[i:i + 50]) for i in range(0, 200, 50)]
    assert max(medians) - min(medians) < 0.5, f"Batch medians drift: {medians}"
