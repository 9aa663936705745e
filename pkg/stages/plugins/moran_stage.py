"""
Moran stage: global spatial autocorrelation of per-unit features
"""
import logging

import numpy as np
import pandas as pd

from geo_output import polygons_from_geojson
from spatial_stats import contiguity, format_moran_report, moran_permutation, subset_weights
from stages.base_stage import BaseStage, StageContext
from stages.stage_system import StageMetadata

logger = logging.getLogger(__name__)


class MoranStage(BaseStage):
    """Moran's I with permutation p-values."""

    @property
    def metadata(self) -> StageMetadata:
        return StageMetadata(
            name="moran",
            description="Contiguity weights and global Moran's I per feature",
            order=50,
            dependencies=["spectral", "bispectral", "breaks"],
            artifacts=["moran_report.txt", "moran.csv"],
            needs_polygons=True,
        )

    def run(self, context: StageContext) -> None:
        polygons = polygons_from_geojson(context.polygons)
        weights = contiguity(polygons, self.config.contiguity, style=self.config.weight_style)

        frame = context.unit_frame()
        shared = sorted(set(frame['fips']) & set(weights.unit_ids))
        weights = subset_weights(weights, shared)
        context.results['weights'] = weights

        results = []
        for feature in self.config.moran_features:
            if feature not in frame.columns:
                raise KeyError(f"Moran feature '{feature}' is not a unit column")
            values = {
                fips: float(value)
                for fips, value in zip(frame['fips'], frame[feature])
                if fips in weights.neighbors and pd.notna(value) and np.isfinite(value)
            }
            result = moran_permutation(values, weights, self.config.n_permutations,
                                       self.config.moran_seed, feature=feature)
            logger.info("Moran's I for %s: I=%.4f p=%.4g (n=%d)",
                        feature, result.observed_i, result.p_value, result.n_used)
            results.append(result)

        context.results['moran'] = results
        context.write_text("moran_report.txt", format_moran_report(results, weights))
        context.write_csv("moran.csv", pd.DataFrame([
            {
                'feature': r.feature,
                'observed_i': r.observed_i,
                'expected_i': r.expected_i,
                'p_value': r.p_value,
                'z_score': r.z_score,
                'n_used': r.n_used,
                'n_permutations': r.n_permutations,
                'seed': r.seed,
                'islands_dropped': ";".join(r.islands_dropped),
            }
            for r in results
        ]))
