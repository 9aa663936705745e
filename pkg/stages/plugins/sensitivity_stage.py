"""
Sensitivity stage: stability of rankings and associations across band partitions and smoothing spans
"""
import logging

import numpy as np
import pandas as pd

from inference import compare_nested
from spectral import band_power, band_sensitivity, span_sensitivity
from stages.base_stage import BaseStage, StageContext
from stages.plugins.associations_stage import INTENSITY_TERM, RESPONSE
from stages.stage_system import StageMetadata

logger = logging.getLogger(__name__)

SENSITIVITY_COLUMNS = ['check', 'partition_a', 'partition_b', 'statistic', 'value', 'df1', 'df2']


class SensitivityStage(BaseStage):
    """Band partition and smoothing span sensitivity."""

    @property
    def metadata(self) -> StageMetadata:
        return StageMetadata(
            name="sensitivity",
            description="Spearman agreement, collinearity and nested F tests per band partition",
            order=70,
            dependencies=["spectral", "bispectral", "breaks"],
            artifacts=["sensitivity.csv", "span_sensitivity.csv"],
        )

    def run(self, context: StageContext) -> None:
        spectra = context.require('spectra')
        partitions = self.config.partitions
        frame = context.unit_frame()
        rows = []

        p_low = {}
        for partition in partitions:
            bands = {fips: band_power(spec, partition) for fips, spec in spectra.items()}
            p_low[partition.label] = {fips: b.p_low for fips, b in bands.items()}

            low = np.array([b.p_low for b in bands.values()])
            high = np.array([b.p_high for b in bands.values()])
            r = float(np.corrcoef(low, high)[0, 1]) if low.std() > 0 and high.std() > 0 else float('nan')
            rows.append({'check': 'collinearity', 'partition_a': partition.label, 'partition_b': '',
                         'statistic': 'pearson_r_low_high', 'value': r})

            scoped = frame.drop(columns=['p_low']).assign(p_low=frame['fips'].map(p_low[partition.label]))
            comparison = compare_nested(scoped, RESPONSE, ('p_low',), (INTENSITY_TERM,), label=partition.label)
            rows.append({'check': 'association', 'partition_a': partition.label, 'partition_b': '',
                         'statistic': 'f_statistic', 'value': comparison.test.f_statistic,
                         'df1': comparison.test.df1, 'df2': comparison.test.df2})
            rows.append({'check': 'association', 'partition_a': partition.label, 'partition_b': '',
                         'statistic': 'p_value', 'value': comparison.test.p_value,
                         'df1': comparison.test.df1, 'df2': comparison.test.df2})

        if len(partitions) >= 2:
            labels = [p.label for p in partitions]
            report = band_sensitivity(
                p_low[labels[0]], p_low[labels[1]],
                extra={label: p_low[label] for label in labels[2:]},
                reference_label=labels[0], alternative_label=labels[1],
            )
            logger.info("p_low ranking agreement across partitions: min rho=%.4f", report.min_rho)
            for a, b, rho in report.pairs():
                rows.append({'check': 'spearman_p_low', 'partition_a': a, 'partition_b': b,
                             'statistic': 'rho', 'value': rho})

        context.write_csv("sensitivity.csv", pd.DataFrame(rows, columns=SENSITIVITY_COLUMNS))

        spans = span_sensitivity(context.require('demeaned'), self.config.smoothing_span_alternatives,
                                 self.config.taper_proportion, self.config.partition)
        context.write_csv("span_sensitivity.csv", spans)
