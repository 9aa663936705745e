"""
Inference statistics for panelspectra
Multiple OLS, nested-model F tests and Spearman rank correlation
"""
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy import linalg, special, stats

from errors import (
    ConstantInput,
    LengthMismatch,
    NotNested,
    RankDeficientDesign,
    TooFewObservations,
)

logger = logging.getLogger(__name__)

INTERCEPT = "(Intercept)"
P_VALUE_FLOOR = 1e-300
PIVOT_TOLERANCE = 1e-10
# Full-model RSS at or below this fraction of the reduced RSS counts as an exact fit
EXACT_FIT_TOLERANCE = 1e-12


@dataclass(frozen=True, eq=False)
class OlsFit:
    coefficients: Dict[str, float]
    rss: float
    df_residual: int
    n: int
    r_squared: float
    residuals: np.ndarray
    response: np.ndarray
    name: str = ""

    @property
    def columns(self) -> Tuple[str, ...]:
        return tuple(self.coefficients)


@dataclass(frozen=True)
class NestedFResult:
    f_statistic: float
    df1: int
    df2: int
    p_value: float
    below_floor: bool = False

    @property
    def p_display(self) -> str:
        if self.below_floor:
            return f"< {P_VALUE_FLOOR:.0e}"
        return f"{self.p_value:.6g}"


def _design_frame(design: Union[pd.DataFrame, Mapping[str, Sequence[float]]], add_intercept: bool) -> pd.DataFrame:
    frame = pd.DataFrame(design).astype(np.float64)
    if add_intercept and INTERCEPT not in frame.columns:
        frame.insert(0, INTERCEPT, 1.0)
    return frame


def ols(y: Sequence[float], design: Union[pd.DataFrame, Mapping[str, Sequence[float]]],
        add_intercept: bool = True, name: str = "") -> OlsFit:
    """
    Least squares fit of y on named design columns

    Coefficients come from the normal equations. A column whose pivot falls
    below PIVOT_TOLERANCE times the largest diagonal of X'X is rejected as
    rank deficient.
    """
    frame = _design_frame(design, add_intercept)
    X = frame.to_numpy()
    response = np.asarray(y, dtype=np.float64)
    n, p = X.shape
    if len(response) != n:
        raise LengthMismatch(f"Response has {len(response)} values but design has {n} rows")
    if n <= p:
        raise TooFewObservations(f"{n} observations for {p} coefficients")

    xtx = X.T @ X
    _, r, _ = linalg.qr(X, mode='economic', pivoting=True)
    pivots = np.abs(np.diag(r)) ** 2
    if pivots.min() <= PIVOT_TOLERANCE * np.max(np.diag(xtx)):
        raise RankDeficientDesign(f"Design columns {list(frame.columns)} are not of full column rank")

    beta = linalg.solve(xtx, X.T @ response, assume_a='pos')
    residuals = response - X @ beta
    rss = float(residuals @ residuals)

    centered = response - response.mean() if INTERCEPT in frame.columns else response
    tss = float(centered @ centered)
    r_squared = 1.0 - rss / tss if tss > 0 else 0.0

    return OlsFit(
        coefficients=dict(zip(frame.columns, (float(b) for b in beta))),
        rss=rss,
        df_residual=n - p,
        n=n,
        r_squared=min(1.0, max(0.0, r_squared)),
        residuals=residuals,
        response=response,
        name=name,
    )


def f_upper_tail(x: float, df1: int, df2: int) -> float:
    """P(F > x) via the regularized incomplete beta function"""
    if x <= 0:
        return 1.0
    if np.isinf(x):
        return 0.0
    return float(special.betainc(df2 / 2.0, df1 / 2.0, df2 / (df2 + df1 * x)))


def nested_f_test(reduced: OlsFit, full: OlsFit) -> NestedFResult:
    """
    ANOVA F test of a reduced model against a full model that nests it

    A full model with zero residual (rss at most EXACT_FIT_TOLERANCE times the
    reduced rss) is not raised as an error: it returns F = inf and
    p = P_VALUE_FLOOR with below_floor set, so a report can show "< 1e-300".
    """
    if reduced.n != full.n or not np.array_equal(reduced.response, full.response):
        raise NotNested("Models were fit to different responses")
    if not set(reduced.columns) <= set(full.columns):
        raise NotNested(f"Columns {sorted(set(reduced.columns) - set(full.columns))} are missing from the full model")

    df1 = reduced.df_residual - full.df_residual
    df2 = full.df_residual
    if df1 < 1:
        raise NotNested("Full model adds no columns")

    tolerance = 1e-9 * max(reduced.rss, 1e-300)
    if full.rss > reduced.rss + tolerance:
        raise NotNested(f"Full model RSS {full.rss} exceeds reduced RSS {reduced.rss}")

    improvement = max(reduced.rss - full.rss, 0.0)
    if improvement == 0.0:
        return NestedFResult(f_statistic=0.0, df1=df1, df2=df2, p_value=1.0)

    if full.rss <= EXACT_FIT_TOLERANCE * reduced.rss:
        logger.warning("Full model fits exactly; p-value reported below %.0e", P_VALUE_FLOOR)
        return NestedFResult(f_statistic=float('inf'), df1=df1, df2=df2, p_value=P_VALUE_FLOOR, below_floor=True)

    f_statistic = (improvement / df1) / (full.rss / df2)
    p_value = f_upper_tail(f_statistic, df1, df2)
    if p_value < P_VALUE_FLOOR:
        return NestedFResult(f_statistic=f_statistic, df1=df1, df2=df2, p_value=P_VALUE_FLOOR, below_floor=True)
    return NestedFResult(f_statistic=f_statistic, df1=df1, df2=df2, p_value=p_value)


def spearman(x: Sequence[float], y: Sequence[float]) -> float:
    """Pearson correlation of mid-ranks"""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if len(x) != len(y):
        raise LengthMismatch(f"Lengths differ: {len(x)} vs {len(y)}")
    if len(x) < 3:
        raise TooFewObservations(f"Spearman correlation needs at least 3 pairs, got {len(x)}")

    rx = stats.rankdata(x, method='average')
    ry = stats.rankdata(y, method='average')
    if np.ptp(rx) == 0 or np.ptp(ry) == 0:
        raise ConstantInput("Spearman correlation is undefined for constant input")

    rx = rx - rx.mean()
    ry = ry - ry.mean()
    rho = float(rx @ ry / np.sqrt((rx @ rx) * (ry @ ry)))
    return max(-1.0, min(1.0, rho))


@dataclass(frozen=True)
class NestedComparison:
    """One reduced-vs-full comparison as reported by the associations stage"""

    label: str
    response: str
    reduced_terms: Tuple[str, ...]
    added_terms: Tuple[str, ...]
    n: int
    rss_reduced: float
    rss_full: float
    df_reduced: int
    df_full: int
    test: NestedFResult

    def as_row(self) -> Dict[str, object]:
        return {
            'comparison': self.label,
            'response': self.response,
            'reduced_model': " + ".join(self.reduced_terms),
            'full_model': " + ".join(self.reduced_terms + self.added_terms),
            'n': self.n,
            'rss_reduced': self.rss_reduced,
            'rss_full': self.rss_full,
            'df_reduced': self.df_reduced,
            'df_full': self.df_full,
            'f_statistic': self.test.f_statistic,
            'df1': self.test.df1,
            'df2': self.test.df2,
            'p_value': self.test.p_value,
            'p_below_floor': self.test.below_floor,
        }


def compare_nested(frame: pd.DataFrame, response: str, reduced_terms: Sequence[str],
                   added_terms: Sequence[str], label: str = "") -> NestedComparison:
    """
    Fit response ~ reduced and response ~ reduced + added on complete rows and test

    Rows with a missing or non-finite value in any used column are dropped.
    """
    columns = [response, *reduced_terms, *added_terms]
    used = frame[columns].replace([np.inf, -np.inf], np.nan).dropna()
    dropped = len(frame) - len(used)
    if dropped:
        logger.info("%s: dropped %d rows with missing values", label or response, dropped)

    reduced = ols(used[response], used[list(reduced_terms)], name=label + " reduced")
    full = ols(used[response], used[list(reduced_terms) + list(added_terms)], name=label + " full")
    return NestedComparison(
        label=label,
        response=response,
        reduced_terms=tuple(reduced_terms),
        added_terms=tuple(added_terms),
        n=len(used),
        rss_reduced=reduced.rss,
        rss_full=full.rss,
        df_reduced=reduced.df_residual,
        df_full=full.df_residual,
        test=nested_f_test(reduced, full),
    )
