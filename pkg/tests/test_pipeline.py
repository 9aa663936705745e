#!/usr/bin/env python3
"""
End-to-end tests for the pipeline runner and the command line entry point
"""
import json

import numpy as np
import pandas as pd
import pytest

from conftest import write_panel
from bispectral import phase_coupling_index, summarize_series
from config import PipelineConfig
from errors import KExceedsUnits, StageError
from geo_output import polygons_to_geojson, write_geojson
from main import main
from pipeline import MANIFEST_NAME, run_pipeline
from spectral import dft
from stages.plugins.spectral_stage import SpectralStage
from synthetic import SynthKind, SynthSpec, generate_panel, grid_polygons, write_panel_csv

FULL_RUN_ARTIFACTS = {
    "band_power.csv", "bispectral.csv", "clusters.csv", "cluster_exclusions.csv", "silhouette.csv",
    "cluster_profiles.csv", "elbow.csv",
    "breaks.csv", "break_exclusions.csv", "cluster_break_summary.csv", "moran_report.txt", "moran.csv",
    "associations.csv", "associations_report.txt", "sensitivity.csv", "span_sensitivity.csv",
    "features.csv", "rankings.csv", "boxplot_delta_beta.svg", "boxplot_break_year.svg", "trajectories.svg",
    "joined.geojson", "choropleth_p_low.svg", "choropleth_p_high.svg", "choropleth_log10_intensity.svg",
    "choropleth_cluster.svg",
}


@pytest.fixture(scope="module")
def synthetic_inputs(tmp_path_factory):
    """100-unit trend panel on a 10 x 10 grid"""
    root = tmp_path_factory.mktemp("inputs")
    panel = generate_panel(SynthSpec(kind=SynthKind.TREND_PLUS_NOISE, seed=17, n_units=100))
    panel_csv = write_panel_csv(panel, root / "panel.csv")
    polygons = write_geojson(polygons_to_geojson(grid_polygons(10, 10)), root / "polygons.geojson")
    return str(panel_csv), str(polygons)


def _config(inputs, out_dir, **overrides):
    panel_csv, polygons = inputs
    settings = dict(panel_csv=panel_csv, polygons=polygons, out_dir=str(out_dir), restarts=5,
                    n_permutations=99, elbow_k_max=4)
    settings.update(overrides)
    return PipelineConfig(**settings)


def test_full_run_writes_every_artifact(synthetic_inputs, tmp_path):
    result = run_pipeline(_config(synthetic_inputs, tmp_path / "out"))

    assert result.ok, f"Pipeline failed: {result.error or result.config_errors}"
    assert result.stages_run[0] == "ingest" and result.stages_run[-1] == "outputs"
    assert set(result.manifest) == FULL_RUN_ARTIFACTS
    for name in FULL_RUN_ARTIFACTS:
        assert (tmp_path / "out" / name).exists(), f"Missing artifact {name}"

    manifest = json.loads((tmp_path / "out" / MANIFEST_NAME).read_text())
    assert {entry['file'] for entry in manifest['artifacts']} == FULL_RUN_ARTIFACTS
    assert all(len(entry['sha256']) == 64 for entry in manifest['artifacts'])


def test_feature_table_covers_every_unit(synthetic_inputs, tmp_path):
    run_pipeline(_config(synthetic_inputs, tmp_path))
    features = pd.read_csv(tmp_path / "features.csv", dtype={'fips': str})

    assert len(features) == 100
    assert features['fips'].is_unique
    assert features['cluster'].between(1, 4).all()
    assert features['break_year'].between(2007, 2017).all(), "Breaks stay h years away from either end"

    joined = json.loads((tmp_path / "joined.geojson").read_text())
    assert len(joined['features']) == 100


def test_runs_are_byte_identical(synthetic_inputs, tmp_path):
    first = run_pipeline(_config(synthetic_inputs, tmp_path / "a"))
    second = run_pipeline(_config(synthetic_inputs, tmp_path / "b", workers=4))
    assert first.ok and second.ok
    assert first.manifest == second.manifest, "Identical inputs and seeds must give identical artifacts"


def test_single_stage_runs_its_dependencies_only(synthetic_inputs, tmp_path):
    result = run_pipeline(_config(synthetic_inputs, tmp_path, polygons=None), target="cluster")
    assert result.ok
    assert result.stages_run == ["ingest", "spectral", "bispectral", "cluster"]
    assert not (tmp_path / "breaks.csv").exists()


def test_k_larger_than_panel_fails_in_cluster_stage(small_panel_csv, tmp_path):
    config = PipelineConfig(panel_csv=small_panel_csv, out_dir=str(tmp_path), k=5, restarts=2)
    result = run_pipeline(config, target="cluster")

    assert result.status == 1
    assert isinstance(result.error, StageError)
    assert result.error.stage == "cluster"
    assert isinstance(result.error.cause, KExceedsUnits)
    assert str(result.error).startswith("[cluster] KExceedsUnits")
    assert result.stages_run == ["ingest", "spectral", "bispectral"]

    assert (tmp_path / "band_power.csv").exists(), "Earlier stages keep their outputs"
    assert (tmp_path / "bispectral.csv").exists()
    assert not (tmp_path / "clusters.csv").exists()
    assert not (tmp_path / MANIFEST_NAME).exists()


def test_failed_rerun_leaves_no_stale_outputs(synthetic_inputs, tmp_path):
    assert run_pipeline(_config(synthetic_inputs, tmp_path)).ok
    result = run_pipeline(_config(synthetic_inputs, tmp_path, k=99))

    assert result.error.stage == "cluster"
    left = {path.name for path in tmp_path.iterdir()}
    assert left == {"band_power.csv", "bispectral.csv"}, f"Files from the earlier run survived: {sorted(left)}"


def test_unexpected_errors_are_attributed_and_cleaned_up(small_panel_csv, tmp_path, monkeypatch):
    def broken_run(self, context):
        context.write_text("partial.txt", "half written")
        raise TypeError("unsupported operand")

    monkeypatch.setattr(SpectralStage, "run", broken_run)
    result = run_pipeline(PipelineConfig(panel_csv=small_panel_csv, out_dir=str(tmp_path)), target="spectral")

    assert result.status == 1
    assert str(result.error) == "[spectral] TypeError: unsupported operand"
    assert not (tmp_path / "partial.txt").exists()


def test_units_without_log10_intensity_are_left_unclustered(tmp_path):
    rng = np.random.default_rng(21)
    rows = []
    for i in range(12):
        fips = f"{i + 1:05d}"
        rates = np.full(19, 7.0) if i == 0 else 20.0 + rng.normal(0.0, 2.0, 19) + 0.3 * i * np.arange(19)
        rows.extend((f"Unit {i + 1}", fips, 2003 + t, rate) for t, rate in enumerate(rates))
    panel_csv = write_panel(tmp_path / "panel.csv", rows)
    out = tmp_path / "out"

    config = PipelineConfig(panel_csv=panel_csv, out_dir=str(out), k=2, restarts=3, elbow_k_max=3,
                            intensity_transform="log10")
    result = run_pipeline(config, target="outputs")
    assert result.ok, f"Pipeline failed: {result.error}"

    exclusions = pd.read_csv(out / "cluster_exclusions.csv", dtype={'fips': str})
    assert list(exclusions['fips']) == ["00001"]
    assert "log10_intensity" in exclusions.loc[0, 'reason']

    clusters = pd.read_csv(out / "clusters.csv", dtype={'fips': str})
    assert "00001" not in set(clusters['fips']) and len(clusters) == 11

    features = pd.read_csv(out / "features.csv", dtype={'fips': str}).set_index('fips')
    assert pd.isna(features.loc["00001", 'cluster'])
    assert features.drop(index="00001")['cluster'].notna().all()
    assert pd.notna(features.loc["00001", 'break_year']), "Excluded units still get a break fit"


def test_bispectral_table_matches_per_series_summary(small_panel_csv, tmp_path):
    result = run_pipeline(PipelineConfig(panel_csv=small_panel_csv, out_dir=str(tmp_path)), target="bispectral")
    assert result.ok

    table = result.context.results['bispectra'].set_index('fips')
    for fips, series in result.context.results['demeaned'].items():
        summary = summarize_series(series)
        assert table.loc[fips, 'intensity'] == summary.intensity
        assert table.loc[fips, 'phase_coupling'] == phase_coupling_index(dft(series))
        assert table.loc[fips, 'domain_size'] == summary.domain_size


def test_missing_inputs_are_configuration_errors(tmp_path):
    result = run_pipeline(PipelineConfig(out_dir=str(tmp_path)))
    assert result.status == 1
    assert any("panel_csv" in error for error in result.config_errors)
    assert any("polygons" in error for error in result.config_errors)
    assert result.stages_run == []


def test_cli_synth_then_run(tmp_path, capsys):
    data = tmp_path / "data"
    status = main(["synth", "--kind", "trend-plus-noise", "--n-units", "16", "--rows", "4", "--cols", "4",
                   "--seed", "3", "--out", str(data)])
    assert status == 0
    assert (data / "panel.csv").exists() and (data / "polygons.geojson").exists()

    out = tmp_path / "results"
    status = main(["run", "--panel", str(data / "panel.csv"), "--polygons", str(data / "polygons.geojson"),
                   "--out", str(out), "--k", "3", "--permutations", "99"])
    captured = capsys.readouterr().out
    assert status == 0, captured
    assert "SUCCESS" in captured
    assert (out / MANIFEST_NAME).exists()


def test_cli_reports_stage_failure(small_panel_csv, tmp_path, capsys):
    status = main(["cluster", "--panel", small_panel_csv, "--out", str(tmp_path), "--k", "9"])
    captured = capsys.readouterr().out
    assert status == 1
    assert "ERROR: [cluster] KExceedsUnits" in captured


def test_cli_saves_config(tmp_path):
    path = tmp_path / "saved.ini"
    assert main(["run", "--k", "6", "--save-config", str(path)]) == 0
    assert PipelineConfig.from_file(path).k == 6


def test_cli_rejects_bad_synth_parameters(tmp_path, capsys):
    status = main(["synth", "--kind", "sinusoid", "--param", "frequency=0.9", "--out", str(tmp_path)])
    assert status == 1
    assert "ERROR: [synth]" in capsys.readouterr().out
