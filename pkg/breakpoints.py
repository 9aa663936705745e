"""
Breakpoint detector for panelspectra

Single-break piecewise linear fits found by exhaustive least squares search
over admissible break indices, plus per-cluster summaries.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from errors import DegenerateInterval, SeriesTooShortForBreak, UnassignedUnit
from panel_ingest import CountySeries, Panel

logger = logging.getLogger(__name__)

DEFAULT_MIN_SEGMENT = 5
# Candidates whose RSS lies within this fraction of the total sum of squares
# of the minimum are treated as ties and resolved to the earliest index.
TIE_TOLERANCE = 1e-10


@dataclass(frozen=True)
class BreakFit:
    fips: str
    tau_index: int
    break_year: int
    alpha1: float
    beta1: float
    alpha2: float
    beta2: float
    delta_beta: float
    rss: float
    candidate_rss: Dict[int, float] = field(default_factory=dict)


@dataclass(frozen=True)
class ClusterBreakSummary:
    cluster: int
    detection_proportion: float
    median_break_year: Optional[int]
    mean_delta_beta: float
    delta_beta_values: Tuple[float, ...]
    n_eligible: int
    n_fitted: int


def fit_segment(y: Sequence[float], t_range: Tuple[int, int]) -> Tuple[float, float, float]:
    """
    OLS of y on the integer index t over an inclusive 1-based interval

    Returns:
        (alpha, beta, rss)
    """
    start, end = t_range
    if end - start + 1 < 2:
        raise DegenerateInterval(f"Interval [{start}, {end}] has fewer than 2 points")
    values = np.asarray(y, dtype=np.float64)
    if start < 1 or end > len(values):
        raise DegenerateInterval(f"Interval [{start}, {end}] lies outside 1..{len(values)}")

    t = np.arange(start, end + 1, dtype=np.float64)
    segment = values[start - 1:end]
    t_mean = t.mean()
    y_mean = segment.mean()
    dt = t - t_mean
    beta = float(dt @ (segment - y_mean) / (dt @ dt))
    alpha = float(y_mean - beta * t_mean)
    residuals = segment - (alpha + beta * t)
    return alpha, beta, float(residuals @ residuals)


def overall_slope(series: CountySeries) -> float:
    """Full-sample OLS slope of rates on calendar year"""
    _, beta, _ = fit_segment(series.rates, (1, len(series)))
    return beta


def find_breakpoint(series: CountySeries, h: int = DEFAULT_MIN_SEGMENT) -> BreakFit:
    """
    Exhaustive single-break search over tau in {h, ..., T - h}

    Segments are [1..tau] and [tau+1..T]. Ties go to the earliest tau and the
    break year is the last pre-break calendar year.
    """
    if h < 2:
        raise ValueError(f"Minimum segment length must be at least 2, got {h}")
    y = series.rates
    T = len(y)
    if T < 2 * h:
        raise SeriesTooShortForBreak(T, h, series.fips)

    fits = {}
    for tau in range(h, T - h + 1):
        pre = fit_segment(y, (1, tau))
        post = fit_segment(y, (tau + 1, T))
        fits[tau] = (pre, post, pre[2] + post[2])

    candidate_rss = {tau: fit[2] for tau, fit in fits.items()}
    minimum = min(candidate_rss.values())
    tss = float(np.sum((y - y.mean()) ** 2))
    tolerance = TIE_TOLERANCE * max(tss, 1.0)
    tau = min(t for t, rss in candidate_rss.items() if rss <= minimum + tolerance)

    (alpha1, beta1, _), (alpha2, beta2, _), rss = fits[tau]
    return BreakFit(
        fips=series.fips,
        tau_index=tau,
        break_year=series.start_year + tau - 1,
        alpha1=alpha1,
        beta1=beta1,
        alpha2=alpha2,
        beta2=beta2,
        delta_beta=beta2 - beta1,
        rss=rss,
        candidate_rss=candidate_rss,
    )


def fit_panel(panel: Panel, h: int = DEFAULT_MIN_SEGMENT) -> Tuple[List[BreakFit], List[str]]:
    """Fit every unit; units with T < 2h go to the exclusion list"""
    fits = []
    excluded = []
    for unit in panel:
        try:
            fits.append(find_breakpoint(unit, h))
        except SeriesTooShortForBreak as e:
            logger.warning("Excluded from break fitting: %s", e)
            excluded.append(unit.fips)
    return fits, excluded


def summarize_breaks(fits: Sequence[BreakFit], assignments: Mapping[str, int]) -> List[ClusterBreakSummary]:
    """
    Per-cluster detection proportion, lower-median break year and slope changes

    Every unit in `assignments` counts as eligible; detection is the share of
    eligible units that received a fit.
    """
    missing = [fit.fips for fit in fits if fit.fips not in assignments]
    if missing:
        raise UnassignedUnit(f"Fitted units without a cluster: {', '.join(missing)}")

    by_cluster: Dict[int, List[BreakFit]] = {label: [] for label in sorted(set(assignments.values()))}
    for fit in fits:
        by_cluster[assignments[fit.fips]].append(fit)

    eligible = {label: 0 for label in by_cluster}
    for label in assignments.values():
        eligible[label] += 1

    summaries = []
    for label, members in by_cluster.items():
        years = sorted(fit.break_year for fit in members)
        deltas = tuple(fit.delta_beta for fit in members)
        summaries.append(ClusterBreakSummary(
            cluster=label,
            detection_proportion=len(members) / eligible[label],
            median_break_year=years[(len(years) - 1) // 2] if years else None,
            mean_delta_beta=math.fsum(deltas) / len(deltas) if deltas else math.nan,
            delta_beta_values=deltas,
            n_eligible=eligible[label],
            n_fitted=len(members),
        ))
    return summaries
