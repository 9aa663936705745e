"""
Configuration management for panelspectra
"""
import argparse
import configparser
import os
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import psutil

from spectral import BandPartition
from synthetic import SynthKind

ENV_PREFIX = "PANELSPECTRA_"
WEIGHT_STYLES = ("binary", "row")
INTENSITY_TRANSFORMS = ("raw", "log10")
CRITERIA = ("queen", "rook")


# Config keys without a dedicated flag; each gets --key-name taking INI value syntax
CLI_OVERRIDES = {
    'canonical_names': 'Text file of canonical unit names',
    'start_year': 'First year of the analysis window',
    'end_year': 'Last year of the analysis window',
    'taper_proportion': 'Split cosine taper proportion (default: 0.1)',
    'smoothing_spans': 'Daniell spans, comma separated (default: 3)',
    'band_low': 'Upper edge of the low band (default: 0.15)',
    'band_mid': 'Upper edge of the mid band (default: 0.30)',
    'alternative_partitions': 'Alternative LOW/MID partitions, comma separated',
    'smoothing_span_alternatives': 'Span sets for span sensitivity, e.g. "1; 3; 5; 3,3"',
    'export_bispectrum_grid': 'Write bispectrum_grid.csv (true/false)',
    'restarts': 'k-means restarts (default: 50)',
    'cluster_seed': 'Seed for k-means restarts',
    'include_mid_band': 'Cluster on p_mid as well (true/false)',
    'intensity_transform': 'Intensity feature for clustering: raw or log10',
    'elbow_k_max': 'Largest k in elbow.csv (default: 8)',
    'moran_seed': 'Seed for Moran permutations',
    'weight_style': 'Spatial weights: binary or row',
    'contiguity': 'Neighbor criterion: queen or rook',
    'moran_features': 'Features tested with Moran\'s I, comma separated',
    'association_extra_terms': 'Extra regressors for the association models, comma separated',
    'palette': 'Matplotlib colormap for choropleths (default: viridis)',
}


def _parse_ints(text: str) -> Tuple[int, ...]:
    return tuple(int(part) for part in text.replace(' ', '').split(',') if part)


def _parse_strings(text: str) -> Tuple[str, ...]:
    return tuple(part.strip() for part in text.split(',') if part.strip())


def _parse_span_sets(text: str) -> Tuple[Tuple[int, ...], ...]:
    """'1; 3; 5; 3,3' -> ((1,), (3,), (5,), (3, 3))"""
    return tuple(_parse_ints(part) for part in text.split(';') if part.strip())


def _format_span_sets(span_sets: Sequence[Sequence[int]]) -> str:
    return "; ".join(",".join(str(s) for s in spans) for spans in span_sets)


def _parse_bool(text: str) -> bool:
    return str(text).strip().lower() in ('1', 'true', 'yes', 'on')


@dataclass
class PipelineConfig:
    """Configuration class for a panelspectra run"""

    # Inputs
    panel_csv: Optional[str] = None
    polygons: Optional[str] = None
    canonical_names: Optional[str] = None
    start_year: Optional[int] = None
    end_year: Optional[int] = None

    # Spectral settings
    taper_proportion: float = 0.1
    smoothing_spans: Tuple[int, ...] = (3,)
    band_low: float = 0.15
    band_mid: float = 0.30
    alternative_partitions: Tuple[str, ...] = ("0.12/0.28", "0.18/0.32")
    smoothing_span_alternatives: Tuple[Tuple[int, ...], ...] = ((1,), (3,), (5,), (3, 3))

    # Bispectral settings
    export_bispectrum_grid: bool = False

    # Clustering settings
    k: int = 4
    restarts: int = 50
    cluster_seed: int = 20031
    include_mid_band: bool = False
    intensity_transform: str = "raw"  # "raw" or "log10"
    elbow_k_max: int = 8

    # Breakpoint settings
    h: int = 5

    # Spatial settings
    n_permutations: int = 999
    moran_seed: int = 20031
    weight_style: str = "binary"  # "binary" or "row"
    contiguity: str = "queen"
    moran_features: Tuple[str, ...] = ("p_low", "log10_intensity", "delta_beta")

    # Associations
    association_extra_terms: Tuple[str, ...] = ()

    # Output settings
    out_dir: str = "output"
    palette: str = "viridis"
    workers: int = 1  # 0 = one per physical core

    # Advanced settings
    debug: bool = False

    # INI section per field
    SECTIONS = {
        'inputs': ('panel_csv', 'polygons', 'canonical_names', 'start_year', 'end_year'),
        'spectral': ('taper_proportion', 'smoothing_spans', 'band_low', 'band_mid',
                     'alternative_partitions', 'smoothing_span_alternatives'),
        'bispectral': ('export_bispectrum_grid',),
        'clustering': ('k', 'restarts', 'cluster_seed', 'include_mid_band', 'intensity_transform', 'elbow_k_max'),
        'breaks': ('h',),
        'spatial': ('n_permutations', 'moran_seed', 'weight_style', 'contiguity', 'moran_features'),
        'associations': ('association_extra_terms',),
        'output': ('out_dir', 'palette', 'workers', 'debug'),
    }

    @property
    def partition(self) -> BandPartition:
        return BandPartition(self.band_low, self.band_mid)

    @property
    def partitions(self) -> List[BandPartition]:
        """Reference partition followed by the alternatives"""
        return [self.partition] + [BandPartition.parse(text) for text in self.alternative_partitions]

    @property
    def clustering_features(self) -> Tuple[str, ...]:
        intensity = "log10_intensity" if self.intensity_transform == "log10" else "intensity"
        if self.include_mid_band:
            return ("p_low", "p_mid", "p_high", intensity)
        return ("p_low", "p_high", intensity)

    @property
    def worker_count(self) -> int:
        if self.workers > 0:
            return self.workers
        return psutil.cpu_count(logical=False) or 1

    def _set_from_text(self, key: str, text: str) -> None:
        current = {f.name: f for f in fields(self)}[key]
        if key in ('smoothing_spans',):
            value: Any = _parse_ints(text)
        elif key == 'smoothing_span_alternatives':
            value = _parse_span_sets(text)
        elif key in ('alternative_partitions', 'moran_features', 'association_extra_terms'):
            value = _parse_strings(text)
        elif current.type in (bool, 'bool'):
            value = _parse_bool(text)
        elif key in ('start_year', 'end_year'):
            value = int(text) if text.strip() else None
        elif current.type in (int, 'int'):
            value = int(text)
        elif current.type in (float, 'float'):
            value = float(text)
        elif key in ('panel_csv', 'polygons', 'canonical_names'):
            value = text.strip() or None
        else:
            value = text.strip()
        setattr(self, key, value)

    @classmethod
    def from_file(cls, filepath: str, base: Optional['PipelineConfig'] = None) -> 'PipelineConfig':
        """Load config from an INI file; relative input paths resolve against the file's directory"""
        path = Path(filepath)
        if not path.exists():
            raise FileNotFoundError(f"Config file not found: {filepath}")

        parser = configparser.ConfigParser()
        try:
            parser.read(path, encoding='utf-8')
        except configparser.Error as e:
            raise ValueError(f"Invalid config file: {e}")

        config = replace(base) if base else cls()
        known = {key: section for section, keys in cls.SECTIONS.items() for key in keys}
        for section in parser.sections():
            if section not in cls.SECTIONS:
                raise ValueError(f"Unknown config section [{section}]")
            for key, text in parser.items(section):
                if known.get(key) != section:
                    raise ValueError(f"Unknown key '{key}' in section [{section}]")
                try:
                    config._set_from_text(key, text)
                except ValueError as e:
                    raise ValueError(f"Invalid value for {section}.{key}: {e}")

        for key in ('panel_csv', 'polygons', 'canonical_names'):
            value = getattr(config, key)
            if value and not Path(value).is_absolute():
                setattr(config, key, str(path.parent / value))
        return config

    @classmethod
    def from_env(cls, base: Optional['PipelineConfig'] = None) -> 'PipelineConfig':
        """Apply PANELSPECTRA_* environment overrides"""
        config = replace(base) if base else cls()

        seed_env = os.getenv(ENV_PREFIX + 'SEED')
        if seed_env:
            config.cluster_seed = config.moran_seed = int(seed_env)

        out_env = os.getenv(ENV_PREFIX + 'OUT')
        if out_env:
            config.out_dir = out_env

        k_env = os.getenv(ENV_PREFIX + 'K')
        if k_env:
            config.k = int(k_env)

        h_env = os.getenv(ENV_PREFIX + 'H')
        if h_env:
            config.h = int(h_env)

        permutations_env = os.getenv(ENV_PREFIX + 'PERMUTATIONS')
        if permutations_env:
            config.n_permutations = int(permutations_env)

        workers_env = os.getenv(ENV_PREFIX + 'WORKERS')
        if workers_env:
            config.workers = int(workers_env)

        debug_env = os.getenv(ENV_PREFIX + 'DEBUG')
        if debug_env:
            config.debug = _parse_bool(debug_env)

        return config

    @classmethod
    def from_args(cls, args: argparse.Namespace, base: Optional['PipelineConfig'] = None) -> 'PipelineConfig':
        """Apply command line overrides"""
        config = replace(base) if base else cls()

        if getattr(args, 'panel', None):
            config.panel_csv = args.panel
        if getattr(args, 'polygons', None):
            config.polygons = args.polygons
        if getattr(args, 'out', None):
            config.out_dir = args.out
        if getattr(args, 'seed', None) is not None:
            config.cluster_seed = config.moran_seed = args.seed
        if getattr(args, 'k', None) is not None:
            config.k = args.k
        if getattr(args, 'h', None) is not None:
            config.h = args.h
        if getattr(args, 'permutations', None) is not None:
            config.n_permutations = args.permutations
        if getattr(args, 'workers', None) is not None:
            config.workers = args.workers
        if getattr(args, 'debug', False):
            config.debug = True

        for key in CLI_OVERRIDES:
            text = getattr(args, f"set_{key}", None)
            if text is None:
                continue
            try:
                config._set_from_text(key, text)
            except ValueError as e:
                raise ValueError(f"Invalid value for --{key.replace('_', '-')}: {e}")

        return config

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    def to_file(self, filepath: str) -> None:
        """Save config as an INI file"""
        parser = configparser.ConfigParser()
        for section, keys in self.SECTIONS.items():
            parser[section] = {}
            for key in keys:
                value = getattr(self, key)
                if value is None:
                    text = ""
                elif key == 'smoothing_span_alternatives':
                    text = _format_span_sets(value)
                elif isinstance(value, tuple):
                    text = ",".join(str(v) for v in value)
                else:
                    text = str(value)
                parser[section][key] = text

        with open(filepath, 'w', encoding='utf-8') as f:
            parser.write(f)

    def validate(self, require: Sequence[str] = ()) -> list[str]:
        """Validate configuration and return list of errors"""
        errors = []

        for key in require:
            if not getattr(self, key):
                errors.append(f"{key} is required")
        for key in ('panel_csv', 'polygons', 'canonical_names'):
            value = getattr(self, key)
            if value and not Path(value).exists():
                errors.append(f"{key} file not found: {value}")

        if self.start_year is not None and self.end_year is not None and self.start_year > self.end_year:
            errors.append("start_year must not be after end_year")

        if not 0 <= self.taper_proportion <= 0.5:
            errors.append("taper_proportion must be between 0 and 0.5")

        span_sets = (self.smoothing_spans,) + tuple(self.smoothing_span_alternatives)
        if any(s < 1 or s % 2 == 0 for spans in span_sets for s in spans):
            errors.append("smoothing spans must be odd positive integers")

        try:
            self.partitions
        except ValueError as e:
            errors.append(f"band partition: {e}")

        if self.k < 1:
            errors.append("k must be at least 1")
        if self.restarts < 1:
            errors.append("restarts must be at least 1")
        if self.elbow_k_max < 1:
            errors.append("elbow_k_max must be at least 1")
        if self.intensity_transform not in INTENSITY_TRANSFORMS:
            errors.append(f"intensity_transform must be one of {', '.join(INTENSITY_TRANSFORMS)}")

        if self.h < 2:
            errors.append("h must be at least 2")

        if self.n_permutations < 99:
            errors.append("n_permutations must be at least 99")
        if self.weight_style not in WEIGHT_STYLES:
            errors.append(f"weight_style must be one of {', '.join(WEIGHT_STYLES)}")
        if self.contiguity not in CRITERIA:
            errors.append(f"contiguity must be one of {', '.join(CRITERIA)}")

        if self.workers < 0:
            errors.append("workers must be 0 (auto) or positive")

        return errors


SUBCOMMAND_STAGES = {
    'run': None,
    'spectral': 'spectral',
    'bispec': 'bispectral',
    'cluster': 'cluster',
    'breaks': 'breaks',
    'moran': 'moran',
}


def _add_common_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument('--config', help='Path to INI configuration file')
    parser.add_argument('--out', help='Output directory (default: output)')
    parser.add_argument('--seed', type=int, help='Seed for clustering restarts and Moran permutations')
    parser.add_argument('--debug', action='store_true', help='Enable debug output')


def create_argument_parser() -> argparse.ArgumentParser:
    """Create command line argument parser"""
    parser = argparse.ArgumentParser(
        description='panelspectra - spectral, bispectral and spatial analysis of annual rate panels',
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  python main.py run --config analysis.ini --out results
  python main.py synth --kind trend-plus-noise --n-units 100 --rows 10 --cols 10 --out data
  python main.py moran --panel data/panel.csv --polygons data/polygons.geojson --permutations 999
        """
    )
    subparsers = parser.add_subparsers(dest='command', required=True)

    for command in SUBCOMMAND_STAGES:
        sub = subparsers.add_parser(command, help=f"{'Full pipeline' if command == 'run' else command + ' stage'}")
        _add_common_options(sub)
        sub.add_argument('--panel', help='Panel CSV (name, fips, year, rate)')
        sub.add_argument('--polygons', help='GeoJSON FeatureCollection with a fips property')
        sub.add_argument('--k', type=int, help='Number of clusters (default: 4)')
        sub.add_argument('--h', type=int, help='Minimum segment length for break fitting (default: 5)')
        sub.add_argument('--permutations', type=int, help='Moran permutations (default: 999)')
        sub.add_argument('--workers', type=int, help='Worker threads for per-unit work (0 = physical cores)')
        sub.add_argument('--save-config', help='Save the effective settings to an INI file and exit')
        for key, help_text in CLI_OVERRIDES.items():
            sub.add_argument(f"--{key.replace('_', '-')}", dest=f"set_{key}", metavar='VALUE', help=help_text)

    synth = subparsers.add_parser('synth', help='Generate a synthetic panel and grid polygons')
    _add_common_options(synth)
    synth.add_argument('--kind', choices=[kind.value for kind in SynthKind], default='trend-plus-noise',
                       help='Generator (default: trend-plus-noise)')
    synth.add_argument('--n-units', type=int, default=100, help='Number of units (default: 100)')
    synth.add_argument('--years', type=int, default=19, help='Series length T (default: 19)')
    synth.add_argument('--start-year', type=int, default=2003, help='First calendar year (default: 2003)')
    synth.add_argument('--rows', type=int, help='Grid rows for polygons')
    synth.add_argument('--cols', type=int, help='Grid columns for polygons')
    synth.add_argument('--param', action='append', default=[], metavar='NAME=VALUE',
                       help='Generator parameter, repeatable (e.g. noise_sd=0.5)')

    return parser
