"""
Breaks stage: single-break piecewise linear fits and per-cluster summaries
"""
import logging

import pandas as pd

from breakpoints import fit_panel, overall_slope, summarize_breaks
from stages.base_stage import BaseStage, StageContext
from stages.stage_system import StageMetadata

logger = logging.getLogger(__name__)

BREAK_COLUMNS = ['fips', 'tau_index', 'break_year', 'alpha1', 'beta1', 'alpha2', 'beta2',
                 'delta_beta', 'rss', 'overall_slope']


class BreaksStage(BaseStage):
    """Structural break fits."""

    @property
    def metadata(self) -> StageMetadata:
        return StageMetadata(
            name="breaks",
            description="Exhaustive single-break search per unit and cluster summaries",
            order=40,
            dependencies=["ingest", "cluster"],
            artifacts=["breaks.csv", "break_exclusions.csv", "cluster_break_summary.csv"],
        )

    def run(self, context: StageContext) -> None:
        panel = context.panel
        fits, excluded = fit_panel(panel, self.config.h)
        if excluded:
            logger.warning("%d unit(s) excluded from break fitting (T < 2h)", len(excluded))

        rows = []
        for fit in fits:
            rows.append({
                'fips': fit.fips,
                'tau_index': fit.tau_index,
                'break_year': fit.break_year,
                'alpha1': fit.alpha1,
                'beta1': fit.beta1,
                'alpha2': fit.alpha2,
                'beta2': fit.beta2,
                'delta_beta': fit.delta_beta,
                'rss': fit.rss,
                'overall_slope': overall_slope(panel.get(fit.fips)),
            })
        breaks = pd.DataFrame(rows, columns=BREAK_COLUMNS)
        context.results['break_fits'] = fits
        context.results['breaks'] = breaks
        context.write_csv("breaks.csv", breaks)
        context.write_csv("break_exclusions.csv", pd.DataFrame({'fips': excluded}, columns=['fips']))

        model = context.require('cluster_model')
        clustered = [fit for fit in fits if fit.fips in model.assignments]
        if len(clustered) < len(fits):
            logger.info("%d fitted unit(s) have no cluster and are left out of cluster summaries",
                        len(fits) - len(clustered))
        summaries = summarize_breaks(clustered, model.assignments)
        context.results['break_summary'] = summaries
        context.write_csv("cluster_break_summary.csv", pd.DataFrame([
            {
                'cluster': s.cluster,
                'n_eligible': s.n_eligible,
                'n_fitted': s.n_fitted,
                'detection_proportion': s.detection_proportion,
                'median_break_year': s.median_break_year,
                'mean_delta_beta': s.mean_delta_beta,
            }
            for s in summaries
        ]))
