"""
Spectral engine for panelspectra

Direct DFT, raw periodogram, split cosine bell taper, modified Daniell
smoothing, band power summaries and band definition sensitivity checks.
"""
import logging
from dataclasses import dataclass
from itertools import combinations
from typing import Dict, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy import ndimage

from errors import InvalidPartition, InvalidProportion, InvalidSpan, MismatchedUnitSets, SeriesTooShort
from panel_ingest import DemeanedSeries

logger = logging.getLogger(__name__)

SeriesLike = Union[DemeanedSeries, np.ndarray, Sequence[float]]

DEFAULT_TAPER = 0.1
DEFAULT_SPANS = (3,)


def _values(series: SeriesLike) -> np.ndarray:
    if isinstance(series, DemeanedSeries):
        return np.asarray(series.values, dtype=np.float64)
    return np.asarray(series, dtype=np.float64)


@dataclass(frozen=True, eq=False)
class FourierCoefficients:
    """X(k) for k = 0..T-1"""

    values: np.ndarray
    T: int

    @property
    def magnitudes(self) -> np.ndarray:
        return np.abs(self.values)


@dataclass(frozen=True, eq=False)
class SpectrumEstimate:
    """Smoothed spectral density on the Fourier grid k = 1..floor(T/2)"""

    freqs: np.ndarray
    raw: np.ndarray
    smoothed: np.ndarray
    taper_proportion: float
    smoothing_spans: Tuple[int, ...]

    @property
    def total_power(self) -> float:
        return float(np.sum(self.smoothed))


@dataclass(frozen=True)
class BandPartition:
    """Upper cutoffs of the low and mid bands on the normalized frequency axis"""

    low_upper: float = 0.15
    mid_upper: float = 0.30

    def __post_init__(self):
        if not 0 < self.low_upper < self.mid_upper < 0.5:
            raise InvalidPartition(
                f"Band cutoffs must satisfy 0 < low ({self.low_upper}) < mid ({self.mid_upper}) < 0.5")

    @property
    def label(self) -> str:
        return f"{self.low_upper:g}/{self.mid_upper:g}"

    @classmethod
    def parse(cls, text: str) -> 'BandPartition':
        """Parse 'low/mid' such as '0.12/0.28'"""
        try:
            low, mid = (float(part) for part in text.split('/'))
        except ValueError:
            raise InvalidPartition(f"Partition must look like 0.15/0.30, got '{text}'")
        return cls(low, mid)


@dataclass(frozen=True)
class BandPower:
    p_low: float
    p_mid: float
    p_high: float

    @property
    def total(self) -> float:
        return self.p_low + self.p_mid + self.p_high


def fourier_frequencies(T: int) -> np.ndarray:
    """Normalized frequencies k/T for k = 1..floor(T/2)"""
    return np.arange(1, T // 2 + 1) / T


def dft(series: SeriesLike) -> FourierCoefficients:
    """X(k) = sum_{t=1..T} x(t) exp(-2 pi i t k / T), evaluated as a direct sum"""
    x = _values(series)
    T = len(x)
    if T < 2:
        raise SeriesTooShort(T, 2)

    t = np.arange(1, T + 1)
    k = np.arange(T)
    kernel = np.exp(-2j * np.pi * np.outer(k, t) / T)
    values = kernel @ x

    # Conjugate symmetry for real input
    assert np.allclose(values[1:], np.conj(values[1:][::-1]), rtol=0, atol=1e-9 * max(1.0, np.abs(x).sum()))
    return FourierCoefficients(values=values, T=T)


def inverse_dft(coeffs: FourierCoefficients) -> np.ndarray:
    """Inverse of dft under the same t = 1..T convention (complex output)"""
    T = coeffs.T
    t = np.arange(1, T + 1)
    k = np.arange(T)
    kernel = np.exp(2j * np.pi * np.outer(t, k) / T)
    return kernel @ coeffs.values / T


def raw_periodogram(coeffs: FourierCoefficients) -> np.ndarray:
    """I(w_k) = |X(k)|^2 / T for k = 1..floor(T/2)"""
    n = coeffs.T // 2
    return np.abs(coeffs.values[1:n + 1]) ** 2 / coeffs.T


def taper(series: SeriesLike, proportion: float = DEFAULT_TAPER) -> np.ndarray:
    """
    Apply a split cosine bell to the first and last floor(proportion * T) points

    Weight j (1-based) of an m-point edge is 0.5 * (1 - cos(pi * (j - 0.5) / m)).
    """
    if not 0 <= proportion <= 0.5:
        raise InvalidProportion(f"Taper proportion must be in [0, 0.5], got {proportion}")

    x = _values(series).copy()
    m = int(np.floor(proportion * len(x)))
    if m == 0:
        return x

    j = np.arange(1, m + 1)
    weights = 0.5 * (1 - np.cos(np.pi * (j - 0.5) / m))
    x[:m] *= weights
    x[-m:] *= weights[::-1]
    return x


def modified_daniell(span: int) -> np.ndarray:
    """Modified Daniell weights for an odd span; end weights are halved"""
    m = span // 2
    if m == 0:
        return np.ones(1)
    weights = np.full(2 * m + 1, 1.0 / (2 * m))
    weights[0] = weights[-1] = 1.0 / (4 * m)
    return weights


def smooth_periodogram(raw: Sequence[float], spans: Sequence[int] = DEFAULT_SPANS) -> np.ndarray:
    """
    Sequentially convolve periodogram ordinates with modified Daniell kernels

    The frequency axis is extended by mirror reflection at both ends, which keeps
    the total mass of the ordinates unchanged.
    """
    smoothed = np.asarray(raw, dtype=np.float64).copy()
    n = len(smoothed)
    for span in spans:
        if span < 1 or span % 2 == 0 or span > max(1, 2 * n - 1):
            raise InvalidSpan(f"Span {span} must be odd and between 1 and {2 * n - 1}")
        if span == 1:
            continue
        smoothed = ndimage.convolve1d(smoothed, modified_daniell(span), mode='reflect')
    return smoothed


def estimate_spectrum(series: SeriesLike, taper_proportion: float = DEFAULT_TAPER,
                      spans: Sequence[int] = DEFAULT_SPANS) -> SpectrumEstimate:
    """Taper, transform and smooth one demeaned series"""
    x = _values(series)
    tapered = taper(x, taper_proportion)
    raw = raw_periodogram(dft(tapered))
    smoothed = smooth_periodogram(raw, spans)
    return SpectrumEstimate(
        freqs=fourier_frequencies(len(x)),
        raw=raw,
        smoothed=smoothed,
        taper_proportion=taper_proportion,
        smoothing_spans=tuple(int(s) for s in spans),
    )


def band_masks(freqs: np.ndarray, partition: BandPartition) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    low = (freqs > 0) & (freqs <= partition.low_upper)
    mid = (freqs > partition.low_upper) & (freqs <= partition.mid_upper)
    high = freqs > partition.mid_upper
    return low, mid, high


def band_power(spec: SpectrumEstimate, partition: BandPartition = BandPartition()) -> BandPower:
    """Sum the smoothed density over closed-upper low, mid and high bands"""
    low, mid, high = band_masks(spec.freqs, partition)
    return BandPower(
        p_low=float(np.sum(spec.smoothed[low])),
        p_mid=float(np.sum(spec.smoothed[mid])),
        p_high=float(np.sum(spec.smoothed[high])),
    )


@dataclass(frozen=True, eq=False)
class BandSensitivityReport:
    """Spearman agreement of per-unit rankings across band partitions"""

    labels: Tuple[str, ...]
    table: pd.DataFrame

    @property
    def rho(self) -> float:
        """Agreement between the reference partition and the first alternative"""
        return float(self.table.iloc[0, 1])

    @property
    def min_rho(self) -> float:
        values = self.table.to_numpy()
        return float(values[~np.eye(len(values), dtype=bool)].min())

    def pairs(self):
        for a, b in combinations(self.labels, 2):
            yield a, b, float(self.table.loc[a, b])


def band_sensitivity(reference: Mapping[str, float], alternative: Mapping[str, float],
                     extra: Optional[Mapping[str, Mapping[str, float]]] = None,
                     reference_label: str = "reference",
                     alternative_label: str = "alternative") -> BandSensitivityReport:
    """
    Compare per-unit p_low rankings between band partitions

    Args:
        reference: fips -> p_low under the reference partition
        alternative: fips -> p_low under the alternative partition
        extra: further label -> (fips -> p_low) mappings for the pairwise table

    Returns:
        Report whose `rho` is the reference/alternative Spearman correlation and
        whose `table` holds every pairwise correlation
    """
    from inference import spearman

    rankings: Dict[str, Mapping[str, float]] = {reference_label: reference, alternative_label: alternative}
    if extra:
        rankings.update(extra)

    units = set(reference)
    for label, values in rankings.items():
        if set(values) != units:
            raise MismatchedUnitSets(f"Partition '{label}' covers a different unit set than '{reference_label}'")

    order = sorted(units)
    labels = tuple(rankings)
    table = pd.DataFrame(np.eye(len(labels)), index=labels, columns=labels)
    for a, b in combinations(labels, 2):
        rho = spearman([rankings[a][u] for u in order], [rankings[b][u] for u in order])
        table.loc[a, b] = table.loc[b, a] = rho

    return BandSensitivityReport(labels=labels, table=table)


def span_sensitivity(series: Mapping[str, SeriesLike], span_sets: Sequence[Sequence[int]],
                     taper_proportion: float = DEFAULT_TAPER,
                     partition: BandPartition = BandPartition()) -> pd.DataFrame:
    """
    Pearson correlation of each band's per-unit power across smoothing choices

    Returns one row per (band, spans_a, spans_b) pair.
    """
    order = sorted(series)
    powers = {}
    for spans in span_sets:
        label = "-".join(str(s) for s in spans)
        bands = [band_power(estimate_spectrum(series[u], taper_proportion, spans), partition) for u in order]
        powers[label] = {
            'p_low': np.array([b.p_low for b in bands]),
            'p_mid': np.array([b.p_mid for b in bands]),
            'p_high': np.array([b.p_high for b in bands]),
        }

    rows = []
    for a, b in combinations(powers, 2):
        for band in ('p_low', 'p_mid', 'p_high'):
            x, y = powers[a][band], powers[b][band]
            r = float(np.corrcoef(x, y)[0, 1]) if np.std(x) > 0 and np.std(y) > 0 else float('nan')
            rows.append({'band': band, 'spans_a': a, 'spans_b': b, 'pearson_r': r})
    return pd.DataFrame(rows, columns=['band', 'spans_a', 'spans_b', 'pearson_r'])
