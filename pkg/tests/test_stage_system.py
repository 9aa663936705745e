#!/usr/bin/env python3
"""
Test script for the panelspectra stage system
"""
import sys

import pytest

from config import PipelineConfig
from stages import BaseStage, StageContext, StageManager, StageMetadata, get_stage_manager

PIPELINE_ORDER = ["ingest", "spectral", "bispectral", "cluster", "breaks", "moran",
                  "associations", "sensitivity", "outputs"]


class _EchoStage(BaseStage):
    @property
    def metadata(self) -> StageMetadata:
        return StageMetadata(name="echo", description="Test stage", order=5, dependencies=["ingest"])

    def run(self, context: StageContext) -> None:
        context.results['echo'] = True


def test_stage_discovery():
    """Every shipped stage is discovered from stages.plugins"""
    manager = get_stage_manager()
    names = [meta.name for meta in manager.list_stages()]
    assert names == PIPELINE_ORDER, f"Unexpected stage order: {names}"

    for meta in manager.list_stages():
        stage = manager.create_stage(meta.name, PipelineConfig())
        assert stage.name == meta.name
        assert str(stage).endswith(f"(name={meta.name})")


def test_dependencies_are_registered_and_earlier():
    manager = get_stage_manager()
    order = {meta.name: meta.order for meta in manager.list_stages()}
    for meta in manager.list_stages():
        for dependency in meta.dependencies:
            assert dependency in order, f"{meta.name} depends on unknown stage {dependency}"
            assert order[dependency] < meta.order, f"{meta.name} runs before its dependency {dependency}"


@pytest.mark.parametrize("target,expected", [
    (None, PIPELINE_ORDER),
    ("ingest", ["ingest"]),
    ("spectral", ["ingest", "spectral"]),
    ("bispectral", ["ingest", "bispectral"]),
    ("cluster", ["ingest", "spectral", "bispectral", "cluster"]),
    ("breaks", ["ingest", "spectral", "bispectral", "cluster", "breaks"]),
    ("moran", ["ingest", "spectral", "bispectral", "cluster", "breaks", "moran"]),
])
def test_resolve_dependency_closure(target, expected):
    assert get_stage_manager().resolve(target) == expected


def test_unknown_stage():
    manager = get_stage_manager()
    with pytest.raises(KeyError):
        manager.resolve("plotting")
    with pytest.raises(KeyError):
        manager.create_stage("plotting", PipelineConfig())


def test_manual_registration():
    manager = StageManager()
    manager.load_stages_from_package()
    assert manager.register_stage(_EchoStage)
    assert manager.register_stage(_EchoStage), "Registering the same class twice is harmless"
    assert manager.resolve("echo") == ["ingest", "echo"]

    manager.unregister_stage("echo")
    assert manager.get_stage_class("echo") is None


def test_context_requires_earlier_results(tmp_path):
    context = StageContext(config=PipelineConfig(), out_dir=tmp_path, current_stage="cluster")
    with pytest.raises(KeyError, match="cluster"):
        context.require('bands')


def test_context_records_artifacts_per_stage(tmp_path):
    context = StageContext(config=PipelineConfig(), out_dir=tmp_path, current_stage="spectral")
    context.write_text("a.txt", "alpha")
    context.current_stage = "moran"
    context.write_bytes("b.svg", b"<svg/>")

    assert [p.name for p in context.artifacts["spectral"]] == ["a.txt"]
    assert [p.name for p in context.artifacts["moran"]] == ["b.svg"]
    assert (tmp_path / "a.txt").read_text() == "alpha\n"


def test_polygon_stages_validate_their_input(tmp_path):
    context = StageContext(config=PipelineConfig(), out_dir=tmp_path)
    manager = get_stage_manager()
    moran = manager.create_stage("moran", PipelineConfig())
    assert moran.metadata.needs_polygons
    assert moran.validate(context) == ["polygons are required for the moran stage"]
    assert manager.create_stage("moran", PipelineConfig(polygons="grid.geojson")).validate(context) == []
    assert manager.create_stage("spectral", PipelineConfig()).validate(context) == []


def test_map_units_keeps_input_order(tmp_path):
    context = StageContext(config=PipelineConfig(workers=4), out_dir=tmp_path)
    assert context.map_units(lambda x: x * x, range(20)) == [x * x for x in range(20)]


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v"]))
