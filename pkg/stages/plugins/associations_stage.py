"""
Associations stage: does bispectral intensity explain slope change beyond trend measures?
"""
import logging
from typing import List, Tuple

import pandas as pd

from inference import NestedComparison, compare_nested
from stages.base_stage import BaseStage, StageContext
from stages.stage_system import StageMetadata

logger = logging.getLogger(__name__)

RESPONSE = "delta_beta"
INTENSITY_TERM = "log10_intensity"
BASE_COMPARISONS: List[Tuple[str, Tuple[str, ...], Tuple[str, ...]]] = [
    ("low_frequency_plus_intensity", ("p_low",), (INTENSITY_TERM,)),
    ("slope_plus_intensity", ("overall_slope",), (INTENSITY_TERM,)),
]


def format_association_report(comparisons: List[NestedComparison]) -> str:
    lines = ["Nested model comparisons (ANOVA F test)", ""]
    for c in comparisons:
        row = c.as_row()
        lines.append(f"{c.label}")
        lines.append(f"  reduced: {c.response} ~ {row['reduced_model']}  rss={c.rss_reduced:.6g} df={c.df_reduced}")
        lines.append(f"  full:    {c.response} ~ {row['full_model']}  rss={c.rss_full:.6g} df={c.df_full}")
        lines.append(f"  F({c.test.df1}, {c.test.df2}) = {c.test.f_statistic:.6g}, p {c.test.p_display}")
        lines.append(f"  n = {c.n}")
        lines.append("")
    return "\n".join(lines)


class AssociationsStage(BaseStage):
    """Nested OLS comparisons of slope change on spectral features."""

    @property
    def metadata(self) -> StageMetadata:
        return StageMetadata(
            name="associations",
            description="Nested F tests: delta_beta on trend measures with and without intensity",
            order=60,
            dependencies=["spectral", "bispectral", "breaks"],
            artifacts=["associations.csv", "associations_report.txt"],
        )

    def comparisons(self) -> List[Tuple[str, Tuple[str, ...], Tuple[str, ...]]]:
        specs = list(BASE_COMPARISONS)
        for term in self.config.association_extra_terms:
            specs.append((f"low_frequency_intensity_plus_{term}", ("p_low", INTENSITY_TERM), (term,)))
        return specs

    def run(self, context: StageContext) -> None:
        frame = context.unit_frame()
        results = []
        for label, reduced, added in self.comparisons():
            comparison = compare_nested(frame, RESPONSE, reduced, added, label=label)
            logger.info("%s: F=%.4g p=%s", label, comparison.test.f_statistic, comparison.test.p_display)
            results.append(comparison)

        context.results['associations'] = results
        context.write_csv("associations.csv", pd.DataFrame([c.as_row() for c in results]))
        context.write_text("associations_report.txt", format_association_report(results))
