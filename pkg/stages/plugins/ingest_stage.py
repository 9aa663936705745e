"""
Ingest stage: load and validate the panel, harmonize names, read polygons
"""
import logging

from geo_output import load_geojson
from panel_ingest import CsvSchema, demean, harmonize_names, load_canonical_names, load_panel
from stages.base_stage import BaseStage, StageContext
from stages.stage_system import StageMetadata

logger = logging.getLogger(__name__)


class IngestStage(BaseStage):
    """Panel and polygon loading."""

    @property
    def metadata(self) -> StageMetadata:
        return StageMetadata(
            name="ingest",
            description="Load the balanced panel and unit polygons",
            order=0,
        )

    def validate(self, context: StageContext) -> list[str]:
        if not self.config.panel_csv:
            return ["panel_csv is required"]
        return []

    def run(self, context: StageContext) -> None:
        schema = CsvSchema(start_year=self.config.start_year, end_year=self.config.end_year)
        panel = load_panel(self.config.panel_csv, schema)

        if self.config.canonical_names:
            panel = harmonize_names(panel, load_canonical_names(self.config.canonical_names))

        context.panel = panel
        context.results['demeaned'] = {unit.fips: demean(unit) for unit in panel}

        if self.config.polygons:
            context.polygons = load_geojson(self.config.polygons)
            logger.info("Loaded %d polygon features", len(context.polygons['features']))
