"""
Pipeline runner for panelspectra
Resolves stage order, clears earlier outputs, runs stages, removes a failed stage's files and writes the manifest
"""
import hashlib
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional

from config import PipelineConfig
from errors import StageError
from stages import StageContext, get_stage_manager

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"


def sha256_of(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, 'rb') as f:
        for chunk in iter(lambda: f.read(1 << 16), b''):
            digest.update(chunk)
    return digest.hexdigest()


@dataclass
class PipelineResult:
    """Outcome of one run"""

    status: int
    stages_run: List[str] = field(default_factory=list)
    manifest: Dict[str, str] = field(default_factory=dict)
    error: Optional[StageError] = None
    config_errors: List[str] = field(default_factory=list)
    context: Optional[StageContext] = None

    @property
    def ok(self) -> bool:
        return self.status == 0


class Pipeline:
    """Runs an ordered list of stages against one configuration"""

    def __init__(self, config: PipelineConfig, target: Optional[str] = None):
        self.config = config
        self.manager = get_stage_manager()
        self.stage_names = self.manager.resolve(target)
        self.stages = [self.manager.create_stage(name, config) for name in self.stage_names]

    def validate(self, context: StageContext) -> List[str]:
        errors = self.config.validate()
        for stage in self.stages:
            errors.extend(f"[{stage.name}] {message}" for message in stage.validate(context))
        return errors

    def _discard(self, context: StageContext, stage_name: str) -> None:
        for path in context.artifacts.pop(stage_name, []):
            try:
                path.unlink()
            except FileNotFoundError:
                pass
            logger.debug("Removed partial output %s", path)

    def clear_previous_outputs(self, out_dir: Path) -> None:
        """Remove every known stage artifact and the manifest left by an earlier run"""
        names = [MANIFEST_NAME] + [name for meta in self.manager.list_stages() for name in meta.artifacts]
        for name in names:
            path = out_dir / name
            if path.is_file():
                path.unlink()
                logger.debug("Removed previous output %s", path)

    def write_manifest(self, context: StageContext) -> Dict[str, str]:
        """sha256 per artifact, keyed by file name in stage order"""
        hashes = {}
        entries = []
        for stage_name in self.stage_names:
            for path in context.artifacts.get(stage_name, []):
                digest = sha256_of(path)
                hashes[path.name] = digest
                entries.append({'file': path.name, 'stage': stage_name, 'bytes': path.stat().st_size,
                                'sha256': digest})
        manifest = {'stages': self.stage_names, 'artifacts': entries}
        (context.out_dir / MANIFEST_NAME).write_text(json.dumps(manifest, indent=2) + "\n", encoding='utf-8')
        return hashes

    def run(self) -> PipelineResult:
        out_dir = Path(self.config.out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        context = StageContext(config=self.config, out_dir=out_dir)

        errors = self.validate(context)
        if errors:
            return PipelineResult(status=1, context=context, config_errors=errors)

        self.clear_previous_outputs(out_dir)

        completed = []
        for stage in self.stages:
            context.current_stage = stage.name
            logger.info("Running stage '%s'", stage.name)
            try:
                stage.run(context)
            except Exception as e:
                self._discard(context, stage.name)
                error = e if isinstance(e, StageError) else StageError(stage.name, e)
                logger.error("%s", error)
                return PipelineResult(status=1, stages_run=completed, error=error, context=context)
            completed.append(stage.name)

        manifest = self.write_manifest(context)
        logger.info("Wrote %d artifacts to %s", len(manifest), out_dir)
        return PipelineResult(status=0, stages_run=completed, manifest=manifest, context=context)


def run_pipeline(config: PipelineConfig, target: Optional[str] = None) -> PipelineResult:
    """Run the full pipeline, or one stage and its dependencies"""
    return Pipeline(config, target).run()
