"""
Geographic output for panelspectra

GeoJSON loading and attribute joins, quantile choropleths and per-cluster
figures rendered to deterministic SVG bytes.
"""
import io
import json
import logging
import math
import numbers
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import matplotlib
matplotlib.use('Agg')
import matplotlib.pyplot as plt
import numpy as np
from matplotlib.figure import Figure
from matplotlib.patches import Patch, PathPatch
from matplotlib.path import Path as MplPath
from shapely.geometry import MultiPolygon, Polygon, mapping, shape
from shapely.geometry.polygon import orient

from errors import InvalidGeometry, NoMatchingUnits, NonNumericProperty
from panel_ingest import Panel

logger = logging.getLogger(__name__)

N_QUANTILE_CLASSES = 5
MISSING_COLOR = "#d9d9d9"
EDGE_COLOR = "#4d4d4d"
SVG_PARAMS = {'svg.hashsalt': 'panelspectra', 'svg.fonttype': 'none'}

GeoJSON = Dict[str, Any]


@dataclass(frozen=True)
class UnitFeatureRecord:
    """Everything the pipeline knows about one unit; None marks a missing value"""

    fips: str
    name: str
    p_low: Optional[float] = None
    p_mid: Optional[float] = None
    p_high: Optional[float] = None
    intensity: Optional[float] = None
    log10_intensity: Optional[float] = None
    cluster: Optional[int] = None
    break_year: Optional[int] = None
    beta1: Optional[float] = None
    beta2: Optional[float] = None
    delta_beta: Optional[float] = None

    @classmethod
    def field_names(cls) -> List[str]:
        return [f.name for f in fields(cls)]

    def as_properties(self) -> Dict[str, Any]:
        properties = asdict(self)
        for key, value in properties.items():
            if isinstance(value, float) and not math.isfinite(value):
                properties[key] = None
        return properties


def _fips_of(properties: Mapping[str, Any], id_property: str) -> Optional[str]:
    value = properties.get(id_property)
    if value is None:
        return None
    return str(value).strip().zfill(5)


def load_geojson(path: Union[str, Path]) -> GeoJSON:
    with open(path, 'r', encoding='utf-8') as f:
        collection = json.load(f)
    if collection.get('type') != 'FeatureCollection':
        raise ValueError(f"{path} is not a GeoJSON FeatureCollection")
    return collection


def polygons_from_geojson(collection: GeoJSON, id_property: str = "fips") -> Dict[str, Union[Polygon, MultiPolygon]]:
    """fips -> shapely geometry for every polygon feature"""
    polygons = {}
    for index, feature in enumerate(collection['features']):
        fips = _fips_of(feature.get('properties') or {}, id_property)
        if fips is None:
            raise InvalidGeometry(f"feature {index}", f"missing '{id_property}' property")
        try:
            geometry = shape(feature['geometry'])
        except (ValueError, TypeError, KeyError) as e:
            raise InvalidGeometry(fips, str(e))
        if not isinstance(geometry, (Polygon, MultiPolygon)):
            raise InvalidGeometry(fips, f"expected a polygon, got {geometry.geom_type}")
        polygons[fips] = geometry
    return polygons


def load_polygons(path: Union[str, Path], id_property: str = "fips") -> Dict[str, Union[Polygon, MultiPolygon]]:
    return polygons_from_geojson(load_geojson(path), id_property)


def polygons_to_geojson(polygons: Mapping[str, Polygon],
                        properties: Optional[Mapping[str, Mapping[str, Any]]] = None) -> GeoJSON:
    features = []
    for fips in sorted(polygons):
        props = {'fips': fips}
        if properties and fips in properties:
            props.update(properties[fips])
        features.append({'type': 'Feature', 'properties': props, 'geometry': mapping(polygons[fips])})
    return {'type': 'FeatureCollection', 'features': features}


def dumps_geojson(collection: GeoJSON) -> str:
    """Serialize with shortest round-trip float repr so values parse back exactly"""
    return json.dumps(collection, indent=1, allow_nan=False)


def write_geojson(collection: GeoJSON, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.write_text(dumps_geojson(collection), encoding='utf-8')
    return path


def join_geo(features: Sequence[UnitFeatureRecord], polygons: GeoJSON, id_property: str = "fips") -> GeoJSON:
    """
    Attach feature records to polygon features by fips

    Geometry is copied unchanged. A polygon without a record keeps its place
    with every record field set to null.
    """
    records = {record.fips: record for record in features}
    empty = {name: None for name in UnitFeatureRecord.field_names()}

    joined = []
    matched = set()
    unmatched_polygons = []
    for feature in polygons['features']:
        fips = _fips_of(feature.get('properties') or {}, id_property)
        record = records.get(fips)
        if record is None:
            unmatched_polygons.append(str(fips))
            properties = {**empty, 'fips': fips}
        else:
            matched.add(fips)
            properties = record.as_properties()
        joined.append({'type': 'Feature', 'properties': properties, 'geometry': feature['geometry']})

    if not matched:
        raise NoMatchingUnits("No polygon matches a feature record by fips")
    if unmatched_polygons:
        logger.warning("Polygons without a feature record: %s", ", ".join(unmatched_polygons))
    missing = sorted(set(records) - matched)
    if missing:
        logger.warning("Feature records without a polygon: %s", ", ".join(missing))

    return {'type': 'FeatureCollection', 'features': joined}


def quantile_classes(values: Sequence[float], n_classes: int = N_QUANTILE_CLASSES) -> Tuple[np.ndarray, np.ndarray]:
    """
    Class index per value and the distinct quantile edges

    Duplicate edges collapse, so constant input yields a single class.
    """
    v = np.asarray(values, dtype=np.float64)
    edges = np.unique(np.quantile(v, np.linspace(0, 1, n_classes + 1)))
    if len(edges) == 1:
        return np.zeros(len(v), dtype=int), edges
    return np.searchsorted(edges[1:-1], v, side='left'), edges


def _numeric(value: Any, fips: str, prop: str) -> Optional[float]:
    if value is None:
        return None
    if isinstance(value, bool) or not isinstance(value, numbers.Real):
        raise NonNumericProperty(f"Property '{prop}' of unit {fips} is not numeric: {value!r}")
    value = float(value)
    return value if math.isfinite(value) else None


def _rings_path(geometry) -> MplPath:
    polygons = geometry.geoms if isinstance(geometry, MultiPolygon) else [geometry]
    paths = []
    for polygon in polygons:
        polygon = orient(polygon, sign=1.0)
        for ring in [polygon.exterior, *polygon.interiors]:
            paths.append(MplPath(np.asarray(ring.coords), closed=True))
    return MplPath.make_compound_path(*paths)


def _svg_bytes(fig: Figure) -> bytes:
    buffer = io.BytesIO()
    with matplotlib.rc_context(SVG_PARAMS):
        fig.savefig(buffer, format='svg', metadata={'Date': None})
    plt.close(fig)
    return buffer.getvalue()


def render_choropleth(geojson: GeoJSON, property: str, palette: str = "viridis",
                      title: Optional[str] = None, categorical: bool = False) -> bytes:
    """
    Quantile-binned (5 classes) choropleth as SVG bytes

    With categorical=True each distinct value gets its own class, which suits
    cluster labels. Features with a null value are drawn grey.
    """
    geometries = []
    values: List[Optional[float]] = []
    for feature in geojson['features']:
        props = feature.get('properties') or {}
        fips = str(props.get('fips'))
        geometries.append(shape(feature['geometry']))
        values.append(_numeric(props.get(property), fips, property))

    present = np.array([v for v in values if v is not None], dtype=np.float64)
    if present.size == 0:
        raise NonNumericProperty(f"Property '{property}' has no numeric value on any feature")

    if categorical:
        edges = np.unique(present)
        classes = np.searchsorted(edges, present)
        labels = [f"{e:g}" for e in edges]
    else:
        classes, edges = quantile_classes(present)
        if len(edges) == 1:
            labels = [f"{edges[0]:.4g}"]
        else:
            labels = [f"{lo:.4g} - {hi:.4g}" for lo, hi in zip(edges[:-1], edges[1:])]

    n_classes = len(labels)
    cmap = matplotlib.colormaps[palette].resampled(max(n_classes, 1))
    colors = [cmap(i / max(n_classes - 1, 1)) for i in range(n_classes)]

    fig, ax = plt.subplots(figsize=(6, 6))
    class_iter = iter(classes)
    has_missing = False
    for geometry, value in zip(geometries, values):
        if value is None:
            face = MISSING_COLOR
            has_missing = True
        else:
            face = colors[next(class_iter)]
        ax.add_patch(PathPatch(_rings_path(geometry), facecolor=face, edgecolor=EDGE_COLOR, linewidth=0.4))

    minx = min(g.bounds[0] for g in geometries)
    miny = min(g.bounds[1] for g in geometries)
    maxx = max(g.bounds[2] for g in geometries)
    maxy = max(g.bounds[3] for g in geometries)
    ax.set_xlim(minx, maxx)
    ax.set_ylim(miny, maxy)
    ax.set_aspect('equal')
    ax.set_axis_off()

    handles = [Patch(facecolor=c, edgecolor=EDGE_COLOR, label=l) for c, l in zip(colors, labels)]
    if has_missing:
        handles.append(Patch(facecolor=MISSING_COLOR, edgecolor=EDGE_COLOR, label="missing"))
    ax.legend(handles=handles, title=property, loc='center left', bbox_to_anchor=(1.0, 0.5), frameon=False)
    ax.set_title(title or property)
    return _svg_bytes(fig)


def render_boxplot(values_by_cluster: Mapping[int, Sequence[float]], ylabel: str,
                   title: Optional[str] = None) -> bytes:
    """One box per cluster, clusters in label order"""
    labels = sorted(values_by_cluster)
    data = []
    for label in labels:
        values = np.asarray(values_by_cluster[label], dtype=np.float64)
        data.append(values[np.isfinite(values)])

    fig, ax = plt.subplots(figsize=(6, 4))
    ax.boxplot(data)
    ax.set_xticks(range(1, len(labels) + 1), [str(label) for label in labels])
    ax.set_xlabel("cluster")
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title)
    return _svg_bytes(fig)


def render_trajectories(panel: Panel, representatives: Mapping[int, str]) -> bytes:
    """One panel per cluster showing its representative unit, shared vertical scale"""
    clusters = sorted(representatives)
    fig, axes = plt.subplots(1, len(clusters), figsize=(3 * len(clusters), 3), sharey=True, squeeze=False)
    for ax, cluster in zip(axes[0], clusters):
        unit = panel.get(representatives[cluster])
        ax.plot(unit.years, unit.rates, marker='o', markersize=2, linewidth=1)
        ax.set_title(f"cluster {cluster}: {unit.name}", fontsize=8)
        ax.set_xlabel("year")
    axes[0][0].set_ylabel("rate")
    fig.tight_layout()
    return _svg_bytes(fig)
