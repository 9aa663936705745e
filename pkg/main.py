"""
Main application for panelspectra - spectral and spatial analysis of annual rate panels
"""
import logging
import sys
from pathlib import Path
from typing import List, Optional

from config import SUBCOMMAND_STAGES, PipelineConfig, create_argument_parser
from errors import AnalysisError
from geo_output import polygons_to_geojson, write_geojson
from pipeline import run_pipeline
from synthetic import SynthKind, SynthSpec, generate_panel, grid_polygons, write_panel_csv


def load_config(args) -> Optional[PipelineConfig]:
    """Load configuration from various sources"""
    # Priority: CLI args > environment > config file > defaults
    config = PipelineConfig()

    if args.config:
        try:
            config = PipelineConfig.from_file(args.config)
            print(f"CONFIG: Loaded config from {args.config}")
        except Exception as e:
            print(f"ERROR: Failed to load config file: {e}")
            return None

    try:
        config = PipelineConfig.from_env(config)
    except ValueError as e:
        print(f"ERROR: Invalid environment override: {e}")
        return None

    try:
        return PipelineConfig.from_args(args, config)
    except ValueError as e:
        print(f"ERROR: {e}")
        return None


def _parse_params(pairs: List[str]) -> dict:
    params = {}
    for pair in pairs:
        name, sep, value = pair.partition('=')
        if not sep:
            raise ValueError(f"Parameter must look like NAME=VALUE, got '{pair}'")
        params[name.strip()] = float(value)
    return params


def run_synth(args, config: PipelineConfig) -> int:
    """Write a synthetic panel CSV and, for a grid, matching polygons"""
    try:
        params = _parse_params(args.param)
        kind = SynthKind(args.kind)
        n_units = args.n_units
        rows, cols = args.rows, args.cols
        if kind is SynthKind.SPATIAL_SURFACE:
            rows = rows or int(params.get('rows', 10))
            cols = cols or int(params.get('cols', 10))
            params.update(rows=rows, cols=cols)
            n_units = rows * cols
        spec = SynthSpec(kind=kind, parameters=params, seed=args.seed if args.seed is not None else 0,
                         T=args.years, n_units=n_units, start_year=args.start_year)
        panel = generate_panel(spec)
    except (AnalysisError, ValueError) as e:
        print(f"ERROR: [synth] {e}")
        return 1

    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    panel_path = write_panel_csv(panel, out_dir / "panel.csv")
    print(f"SUCCESS: Wrote {len(panel)} units x {panel.n_years} years to {panel_path}")

    if rows and cols:
        if rows * cols < len(panel):
            print(f"ERROR: [synth] grid {rows} x {cols} has fewer cells than units ({len(panel)})")
            return 1
        polygons = {fips: geom for fips, geom in grid_polygons(rows, cols).items() if fips in set(panel.fips_codes)}
        polygons_path = write_geojson(polygons_to_geojson(polygons), out_dir / "polygons.geojson")
        print(f"SUCCESS: Wrote {len(polygons)} grid polygons to {polygons_path}")
    return 0


def main(argv: Optional[List[str]] = None) -> int:
    """Main entry point"""
    parser = create_argument_parser()
    args = parser.parse_args(argv)

    config = load_config(args)
    if not config:
        return 1

    logging.basicConfig(
        level=logging.DEBUG if config.debug else logging.INFO,
        format='%(asctime)s %(levelname)s %(name)s: %(message)s',
    )

    if args.command == 'synth':
        return run_synth(args, config)

    if getattr(args, 'save_config', None):
        try:
            config.to_file(args.save_config)
            print(f"SAVED: Configuration saved to {args.save_config}")
            return 0
        except Exception as e:
            print(f"ERROR: Failed to save config: {e}")
            return 1

    result = run_pipeline(config, SUBCOMMAND_STAGES[args.command])
    if result.config_errors:
        print("ERROR: Configuration errors:")
        for error in result.config_errors:
            print(f"  - {error}")
        return 1
    if not result.ok:
        print(f"ERROR: {result.error}")
        return result.status

    print(f"SUCCESS: Ran {', '.join(result.stages_run)}; {len(result.manifest)} artifacts in {config.out_dir}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
