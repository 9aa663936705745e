"""
Outputs stage: unit feature table, rankings, GeoJSON join and SVG figures
"""
import logging
import math
from typing import Any, List, Optional

import pandas as pd

from geo_output import (
    UnitFeatureRecord,
    join_geo,
    render_boxplot,
    render_choropleth,
    render_trajectories,
)
from stages.base_stage import BaseStage, StageContext
from stages.stage_system import StageMetadata

logger = logging.getLogger(__name__)

CHOROPLETHS = [
    ("p_low", "Low-frequency power", False),
    ("p_high", "High-frequency power", False),
    ("log10_intensity", "log10 bispectral intensity", False),
    ("cluster", "Spectral phenotype", True),
]
RANKED_MEASURES = ("p_low", "intensity")
RANK_DEPTH = 5


def _float(value: Any) -> Optional[float]:
    if value is None or pd.isna(value):
        return None
    value = float(value)
    return value if math.isfinite(value) else None


def _int(value: Any) -> Optional[int]:
    if value is None or pd.isna(value):
        return None
    return int(value)


def build_records(frame: pd.DataFrame) -> List[UnitFeatureRecord]:
    """One record per unit; columns a run did not produce stay None"""
    records = []
    for row in frame.to_dict('records'):
        records.append(UnitFeatureRecord(
            fips=row['fips'],
            name=row['name'],
            p_low=_float(row.get('p_low')),
            p_mid=_float(row.get('p_mid')),
            p_high=_float(row.get('p_high')),
            intensity=_float(row.get('intensity')),
            log10_intensity=_float(row.get('log10_intensity')),
            cluster=_int(row.get('cluster')),
            break_year=_int(row.get('break_year')),
            beta1=_float(row.get('beta1')),
            beta2=_float(row.get('beta2')),
            delta_beta=_float(row.get('delta_beta')),
        ))
    return records


def rankings(frame: pd.DataFrame, measures=RANKED_MEASURES, depth: int = RANK_DEPTH) -> pd.DataFrame:
    """Top and bottom units per measure; ties broken by fips"""
    rows = []
    for measure in measures:
        ranked = frame[['fips', 'name', measure]].dropna().sort_values([measure, 'fips'], ascending=[False, True])
        for direction, part in (('top', ranked.head(depth)), ('bottom', ranked.iloc[::-1].head(depth))):
            for rank, row in enumerate(part.itertuples(index=False), start=1):
                rows.append({'measure': measure, 'direction': direction, 'rank': rank,
                             'fips': row.fips, 'name': row.name, 'value': getattr(row, measure)})
    return pd.DataFrame(rows, columns=['measure', 'direction', 'rank', 'fips', 'name', 'value'])


class OutputsStage(BaseStage):
    """Final tables, GeoJSON and figures."""

    @property
    def metadata(self) -> StageMetadata:
        return StageMetadata(
            name="outputs",
            description="features.csv, rankings, joined GeoJSON, choropleths and cluster figures",
            order=80,
            dependencies=["spectral", "bispectral", "cluster", "breaks"],
            artifacts=["features.csv", "rankings.csv", "joined.geojson", "trajectories.svg",
                       "boxplot_delta_beta.svg", "boxplot_break_year.svg"]
                      + [f"choropleth_{prop}.svg" for prop, _, _ in CHOROPLETHS],
        )

    def run(self, context: StageContext) -> None:
        frame = context.unit_frame()
        records = build_records(frame)
        features = pd.DataFrame([r.as_properties() for r in records], columns=UnitFeatureRecord.field_names())
        assert len(features) == len(context.panel), "features.csv must hold one row per panel unit"
        context.write_csv("features.csv", features)
        context.write_csv("rankings.csv", rankings(frame))

        fitted = frame.dropna(subset=['cluster'])
        for column, ylabel in (('delta_beta', 'slope change (delta beta)'), ('break_year', 'break year')):
            by_cluster = {int(c): group[column].dropna().tolist() for c, group in fitted.groupby('cluster')}
            context.write_bytes(f"boxplot_{column}.svg", render_boxplot(by_cluster, ylabel))

        if 'representatives' in context.results:
            context.write_bytes("trajectories.svg",
                                render_trajectories(context.panel, context.results['representatives']))

        if context.polygons is None:
            logger.warning("No polygons configured; skipping GeoJSON join and choropleths")
            return

        joined = join_geo(records, context.polygons)
        context.write_geojson("joined.geojson", joined)
        for prop, title, categorical in CHOROPLETHS:
            svg = render_choropleth(joined, prop, palette=self.config.palette, title=title, categorical=categorical)
            context.write_bytes(f"choropleth_{prop}.svg", svg)
