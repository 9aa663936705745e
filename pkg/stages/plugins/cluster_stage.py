"""
Cluster stage: spectral phenotypes via k-means plus elbow and silhouette diagnostics
"""
import logging

import numpy as np
import pandas as pd

from clustering import (
    FeatureMatrix,
    cluster_profiles,
    elbow_curve,
    kmeans,
    representatives,
    silhouette,
    standardize,
)
from errors import KExceedsUnits
from stages.base_stage import BaseStage, StageContext
from stages.stage_system import StageMetadata

logger = logging.getLogger(__name__)


class ClusterStage(BaseStage):
    """k-means phenotypes on standardized spectral features."""

    @property
    def metadata(self) -> StageMetadata:
        return StageMetadata(
            name="cluster",
            description="Standardize features and partition units with k-means",
            order=30,
            dependencies=["spectral", "bispectral"],
            artifacts=["clusters.csv", "cluster_exclusions.csv", "cluster_profiles.csv", "elbow.csv",
                       "silhouette.csv"],
        )

    def run(self, context: StageContext) -> None:
        config = self.config
        columns = config.clustering_features
        frame = context.unit_frame()

        values = frame[list(columns)].to_numpy(dtype=np.float64)
        finite = np.isfinite(values)
        usable = finite.all(axis=1)
        exclusions = pd.DataFrame({
            'fips': frame.loc[~usable, 'fips'].tolist(),
            'reason': ["undefined " + ", ".join(c for c, ok in zip(columns, row) if not ok) for row in finite[~usable]],
        }, columns=['fips', 'reason'])
        if len(exclusions):
            logger.warning("Excluded %d unit(s) with undefined features from clustering: %s",
                           len(exclusions), ", ".join(exclusions['fips']))
        context.results['cluster_exclusions'] = exclusions
        context.write_csv("cluster_exclusions.csv", exclusions)

        raw = FeatureMatrix.from_frame(frame.loc[usable], columns)
        if config.k > raw.n_units:
            raise KExceedsUnits(config.k, raw.n_units)

        features = standardize(raw)
        model = kmeans(features, config.k, config.restarts, config.cluster_seed, config.worker_count)
        logger.info("k-means: k=%d, wss=%.6g, sizes=%s", model.k, model.wss, model.sizes())

        context.results['features_raw'] = raw
        context.results['features'] = features
        context.results['cluster_model'] = model
        context.results['representatives'] = representatives(features, model)

        clusters = pd.DataFrame({'fips': list(features.unit_ids),
                                 'cluster': [model.assignments[u] for u in features.unit_ids]})
        context.results['clusters'] = clusters
        context.write_csv("clusters.csv", clusters)

        profiles = cluster_profiles(raw, model)
        if model.k >= 2:
            widths = silhouette(features, model)
            logger.info("Mean silhouette width: %.4f", widths.mean)
            clusters_sil = clusters.assign(silhouette=[widths.widths[u] for u in clusters['fips']])
            profiles = profiles.merge(
                clusters_sil.groupby('cluster')['silhouette'].mean().rename('mean_silhouette').reset_index(),
                on='cluster',
            )
            context.write_csv("silhouette.csv", clusters_sil)
        context.write_csv("cluster_profiles.csv", profiles)

        k_values = list(range(1, min(config.elbow_k_max, raw.n_units) + 1))
        elbow = elbow_curve(features, k_values, config.restarts, config.cluster_seed, config.worker_count)
        context.write_csv("elbow.csv", pd.DataFrame(elbow, columns=['k', 'wss']))
