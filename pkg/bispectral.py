"""
Bispectral engine for panelspectra

Direct bispectrum estimator B(k, l) = X(k) X(l) X*(k + l) over the index
domain {k >= 1, l >= 1, k + l <= T - 1}, its integrated intensity, and
random-phase surrogates for checking quadratic phase coupling.

The squared magnitude |B(k, l)|^2 factors into |X(k)|^2 |X(l)|^2 |X(k+l)|^2,
so the intensity is a function of the amplitude spectrum alone. Phase
information is summarized separately by phase_coupling_index.
"""
import logging
import math
from dataclasses import dataclass
from typing import Dict, Iterator, Optional, Sequence, Tuple

import numpy as np

from errors import EmptyDomain, SeriesTooShort
from spectral import FourierCoefficients, SeriesLike, dft

logger = logging.getLogger(__name__)


@dataclass(eq=False)
class BispectrumSummary:
    """Squared bispectrum magnitudes over the index domain plus their mean"""

    pairs: np.ndarray
    magnitudes_sq: np.ndarray
    domain_size: int
    intensity: Optional[float] = None
    log10_intensity: float = math.nan

    @property
    def has_log10(self) -> bool:
        return not math.isnan(self.log10_intensity)

    def as_dict(self) -> Dict[Tuple[int, int], float]:
        return {(int(k), int(l)): float(v) for (k, l), v in zip(self.pairs, self.magnitudes_sq)}

    def triples(self) -> Iterator[Tuple[int, int, float]]:
        for (k, l), value in zip(self.pairs, self.magnitudes_sq):
            yield int(k), int(l), float(value)


def bispectral_domain(T: int) -> np.ndarray:
    """All (k, l) with k >= 1, l >= 1 and k + l <= T - 1, ordered by k then l"""
    k, l = np.meshgrid(np.arange(1, T), np.arange(1, T), indexing='ij')
    mask = (k + l) <= T - 1
    return np.column_stack([k[mask], l[mask]])


def _triple_products(coeffs: FourierCoefficients) -> Tuple[np.ndarray, np.ndarray]:
    if coeffs.T < 4:
        raise SeriesTooShort(coeffs.T, 4)
    pairs = bispectral_domain(coeffs.T)
    X = coeffs.values
    k, l = pairs[:, 0], pairs[:, 1]
    return pairs, X[k] * X[l] * np.conj(X[k + l])


def bispectrum_direct(coeffs: FourierCoefficients) -> BispectrumSummary:
    """Squared magnitudes of the direct estimator; intensity is left unset"""
    pairs, products = _triple_products(coeffs)
    magnitudes_sq = products.real ** 2 + products.imag ** 2
    return BispectrumSummary(pairs=pairs, magnitudes_sq=magnitudes_sq, domain_size=len(pairs))


def bispectral_intensity(summary: BispectrumSummary) -> float:
    """Mean squared magnitude over the domain; also stores intensity and log10 on the summary"""
    if summary.domain_size == 0:
        raise EmptyDomain("Bispectral domain is empty")

    intensity = math.fsum(summary.magnitudes_sq) / summary.domain_size
    summary.intensity = intensity
    summary.log10_intensity = math.log10(intensity) if intensity > 0 else math.nan
    return intensity


def summarize_series(series: SeriesLike) -> BispectrumSummary:
    """dft -> bispectrum_direct -> bispectral_intensity for one series"""
    summary = bispectrum_direct(dft(series))
    bispectral_intensity(summary)
    return summary


def phase_coupling_index(coeffs: FourierCoefficients) -> float:
    """
    Magnitude-weighted mean cosine of the biphase over the domain

    Equals 1 when every non-zero triple has phase(k) + phase(l) = phase(k + l),
    and 0 for an all-zero spectrum.
    """
    _, products = _triple_products(coeffs)
    weight = np.sum(np.abs(products))
    if weight == 0:
        return 0.0
    return float(np.sum(products.real) / weight)


def random_phase_surrogate(coeffs: FourierCoefficients, seed: int) -> FourierCoefficients:
    """
    Keep |X(k)|, draw phases uniformly, and restore conjugate symmetry

    X(0) and, for even T, the Nyquist term keep their original values so the
    inverse transform stays real.
    """
    T = coeffs.T
    rng = np.random.default_rng(seed)
    values = coeffs.values.copy()

    half = (T - 1) // 2
    phases = rng.uniform(0.0, 2 * np.pi, size=half)
    k = np.arange(1, half + 1)
    values[k] = np.abs(coeffs.values[k]) * np.exp(1j * phases)
    values[T - k] = np.conj(values[k])
    return FourierCoefficients(values=values, T=T)


@dataclass(frozen=True, eq=False)
class SurrogateTest:
    observed: float
    surrogates: np.ndarray
    statistic: str

    @property
    def median(self) -> float:
        return float(np.median(self.surrogates))

    @property
    def p_value(self) -> float:
        """One-sided rank p-value (count of surrogates >= observed, plus one, over n + 1)"""
        return float((np.sum(self.surrogates >= self.observed) + 1) / (len(self.surrogates) + 1))


def surrogate_test(series: SeriesLike, n_surrogates: int = 199, seed: int = 0,
                   statistic: str = "phase_coupling") -> SurrogateTest:
    """
    Compare a statistic of the series with random-phase surrogates

    Args:
        statistic: "phase_coupling" (phase_coupling_index) or "intensity"
    """
    coeffs = dft(series)
    if statistic == "phase_coupling":
        measure = phase_coupling_index
    elif statistic == "intensity":
        measure = lambda c: bispectral_intensity(bispectrum_direct(c))
    else:
        raise ValueError(f"Unknown surrogate statistic '{statistic}'")

    children = np.random.SeedSequence(seed).spawn(n_surrogates)
    values = np.array([
        measure(random_phase_surrogate(coeffs, int(child.generate_state(1)[0])))
        for child in children
    ])
    return SurrogateTest(observed=measure(coeffs), surrogates=values, statistic=statistic)
