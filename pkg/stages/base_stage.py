"""
Base stage class for panelspectra
Provides the shared run context and the interface every pipeline stage implements
"""
import logging
from abc import ABC, abstractmethod
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import TYPE_CHECKING, Any, Callable, Dict, Iterable, List, Optional, TypeVar

import pandas as pd

from config import PipelineConfig
from geo_output import GeoJSON, write_geojson
from panel_ingest import Panel

if TYPE_CHECKING:
    from stages.stage_system import StageMetadata

logger = logging.getLogger(__name__)

T = TypeVar('T')
R = TypeVar('R')

CSV_FLOAT_FORMAT = '%.17g'


@dataclass
class StageContext:
    """State shared by the stages of one run"""

    config: PipelineConfig
    out_dir: Path
    panel: Optional[Panel] = None
    polygons: Optional[GeoJSON] = None
    results: Dict[str, Any] = field(default_factory=dict)
    artifacts: Dict[str, List[Path]] = field(default_factory=dict)
    current_stage: str = ""

    def require(self, key: str) -> Any:
        if key not in self.results:
            raise KeyError(f"Stage '{self.current_stage}' needs '{key}', which no earlier stage produced")
        return self.results[key]

    def _record(self, path: Path) -> Path:
        self.artifacts.setdefault(self.current_stage, []).append(path)
        logger.debug("Wrote %s", path)
        return path

    def write_csv(self, name: str, frame: pd.DataFrame) -> Path:
        path = self.out_dir / name
        frame.to_csv(path, index=False, float_format=CSV_FLOAT_FORMAT, lineterminator='\n')
        return self._record(path)

    def write_text(self, name: str, text: str) -> Path:
        path = self.out_dir / name
        path.write_text(text if text.endswith('\n') else text + '\n', encoding='utf-8')
        return self._record(path)

    def write_bytes(self, name: str, data: bytes) -> Path:
        path = self.out_dir / name
        path.write_bytes(data)
        return self._record(path)

    def write_geojson(self, name: str, collection: GeoJSON) -> Path:
        return self._record(write_geojson(collection, self.out_dir / name))

    def unit_frame(self) -> pd.DataFrame:
        """One row per panel unit with every per-unit result produced so far"""
        frame = pd.DataFrame({'fips': self.panel.fips_codes, 'name': [u.name for u in self.panel]})
        for key in ('bands', 'bispectra', 'clusters', 'breaks'):
            if key in self.results:
                extra = self.results[key].drop(columns=['name'], errors='ignore')
                frame = frame.merge(extra, on='fips', how='left', validate='one_to_one')
        return frame

    def map_units(self, func: Callable[[T], R], items: Iterable[T]) -> List[R]:
        """Apply func per unit, fanning out to worker threads; result order follows input order"""
        items = list(items)
        workers = self.config.worker_count
        if workers <= 1 or len(items) <= 1:
            return [func(item) for item in items]
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(func, items))


class BaseStage(ABC):
    """Base class for all pipeline stages"""

    def __init__(self, config: PipelineConfig):
        self.config = config

    @property
    @abstractmethod
    def metadata(self) -> 'StageMetadata':
        """Return metadata for this stage."""

    @property
    def name(self) -> str:
        return self.metadata.name

    @abstractmethod
    def run(self, context: StageContext) -> None:
        """
        Execute the stage

        Args:
            context: Run context; stages read earlier results from it, store
                their own under context.results and write artifacts through it
        """

    def validate(self, context: StageContext) -> list[str]:
        """
        Check stage preconditions before running

        Returns:
            List of validation error messages (empty if valid)
        """
        if self.metadata.needs_polygons and not self.config.polygons:
            return [f"polygons are required for the {self.name} stage"]
        return []

    def __str__(self) -> str:
        return f"{self.__class__.__name__}(name={self.name})"

