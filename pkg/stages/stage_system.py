"""
Stage registry for panelspectra.

This module discovers the pipeline stages shipped in stages/plugins,
records their metadata and resolves the dependency closure of a requested
stage so single-stage commands run everything they need first.
"""
import importlib
import inspect
import logging
import pkgutil
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Type

from config import PipelineConfig
from stages.base_stage import BaseStage

logger = logging.getLogger(__name__)


@dataclass
class StageMetadata:
    """Metadata for a pipeline stage."""
    name: str
    description: str
    order: int
    dependencies: List[str] = field(default_factory=list)
    artifacts: List[str] = field(default_factory=list)
    needs_polygons: bool = False


class StageManager:
    """Manages discovery and registration of pipeline stages."""

    def __init__(self):
        self.stage_classes: Dict[str, Type[BaseStage]] = {}
        self.metadata: Dict[str, StageMetadata] = {}

    def register_stage(self, stage_class: Type[BaseStage]) -> bool:
        """Register a stage class; returns False when the name is already taken."""
        metadata = stage_class(PipelineConfig()).metadata
        if metadata.name in self.stage_classes:
            return self.stage_classes[metadata.name] is stage_class
        self.stage_classes[metadata.name] = stage_class
        self.metadata[metadata.name] = metadata
        return True

    def unregister_stage(self, name: str):
        self.stage_classes.pop(name, None)
        self.metadata.pop(name, None)

    def load_stages_from_package(self, package_name: str = 'stages.plugins'):
        """Import every module of a package and register the BaseStage subclasses it defines."""
        package = importlib.import_module(package_name)
        for module_info in pkgutil.iter_modules(package.__path__):
            module = importlib.import_module(f"{package_name}.{module_info.name}")
            for _, obj in inspect.getmembers(module, inspect.isclass):
                if (issubclass(obj, BaseStage) and obj is not BaseStage
                        and not inspect.isabstract(obj) and obj.__module__ == module.__name__):
                    self.register_stage(obj)

    def list_stages(self) -> List[StageMetadata]:
        """All registered stages in pipeline order."""
        return sorted(self.metadata.values(), key=lambda m: (m.order, m.name))

    def get_stage_class(self, name: str) -> Optional[Type[BaseStage]]:
        return self.stage_classes.get(name)

    def create_stage(self, name: str, config: PipelineConfig) -> BaseStage:
        stage_class = self.get_stage_class(name)
        if stage_class is None:
            raise KeyError(f"Unknown stage '{name}'")
        return stage_class(config)

    def resolve(self, target: Optional[str] = None) -> List[str]:
        """
        Stage names to run, in pipeline order

        Args:
            target: A stage name; None selects every registered stage

        Returns:
            The target plus its transitive dependencies
        """
        if target is None:
            return [m.name for m in self.list_stages()]

        needed = set()
        pending = [target]
        while pending:
            name = pending.pop()
            if name in needed:
                continue
            if name not in self.metadata:
                raise KeyError(f"Unknown stage '{name}'")
            needed.add(name)
            pending.extend(self.metadata[name].dependencies)
        return [m.name for m in self.list_stages() if m.name in needed]


# Global stage manager instance
_stage_manager = None


def get_stage_manager() -> StageManager:
    """Get the global stage manager instance."""
    global _stage_manager
    if _stage_manager is None:
        _stage_manager = StageManager()
        _stage_manager.load_stages_from_package()
    return _stage_manager


def register_stage(stage_class: Type[BaseStage]) -> bool:
    """Convenience function to register a stage class."""
    return get_stage_manager().register_stage(stage_class)
