"""
Spatial statistics for panelspectra

Contiguity weights from unit polygons and global Moran's I with a
permutation p-value. Units without neighbors (islands) are excluded from
Moran computations and reported.
"""
import logging
from collections import defaultdict
from dataclasses import dataclass, field
from itertools import combinations
from typing import Dict, FrozenSet, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import shapely
from shapely.geometry import MultiPolygon, Polygon
from shapely.strtree import STRtree
from shapely.validation import explain_validity

from errors import ConstantValues, EmptyKeepSet, InvalidGeometry, TooFewUnits

logger = logging.getLogger(__name__)

SNAP_TOLERANCE = 1e-9
MIN_PERMUTATIONS = 99
WEIGHT_STYLES = ("binary", "row")
CRITERIA = ("queen", "rook")


@dataclass(frozen=True, eq=False)
class SpatialWeights:
    """Symmetric neighbor structure over an ordered set of units"""

    unit_ids: Tuple[str, ...]
    neighbors: Dict[str, FrozenSet[str]]
    style: str = "binary"

    def __post_init__(self):
        object.__setattr__(self, 'unit_ids', tuple(self.unit_ids))
        object.__setattr__(self, 'neighbors',
                           {u: frozenset(self.neighbors.get(u, ())) for u in self.unit_ids})
        if self.style not in WEIGHT_STYLES:
            raise ValueError(f"Unknown weight style '{self.style}', expected one of {WEIGHT_STYLES}")

        units = set(self.unit_ids)
        if len(units) != len(self.unit_ids):
            raise ValueError("Duplicate unit ids in weights")
        for unit, adjacent in self.neighbors.items():
            assert unit not in adjacent, f"Unit {unit} lists itself as a neighbor"
            assert adjacent <= units, f"Unit {unit} has neighbors outside the unit set"
            for other in adjacent:
                assert unit in self.neighbors[other], f"Neighbor link {unit}-{other} is not symmetric"

    @classmethod
    def from_neighbors(cls, neighbors: Mapping[str, Iterable[str]], style: str = "binary",
                       unit_ids: Optional[Sequence[str]] = None) -> 'SpatialWeights':
        """Build weights from an adjacency mapping, adding reverse links"""
        ids = list(unit_ids) if unit_ids is not None else sorted(neighbors)
        links: Dict[str, set] = {u: set() for u in ids}
        for unit, adjacent in neighbors.items():
            for other in adjacent:
                links[unit].add(other)
                links[other].add(unit)
        return cls(unit_ids=tuple(ids), neighbors=links, style=style)

    @property
    def islands(self) -> Tuple[str, ...]:
        return tuple(u for u in self.unit_ids if not self.neighbors[u])

    @property
    def n_links(self) -> int:
        """Directed neighbor links"""
        return sum(len(adjacent) for adjacent in self.neighbors.values())

    @property
    def s0(self) -> float:
        """Sum of all weights"""
        if self.style == "row":
            return float(len(self.unit_ids) - len(self.islands))
        return float(self.n_links)

    def cardinalities(self) -> Dict[str, int]:
        return {u: len(self.neighbors[u]) for u in self.unit_ids}

    def with_style(self, style: str) -> 'SpatialWeights':
        return SpatialWeights(unit_ids=self.unit_ids, neighbors=self.neighbors, style=style)

    def to_dense(self, order: Optional[Sequence[str]] = None) -> np.ndarray:
        """Weight matrix in the given unit order (unit_ids order by default)"""
        order = list(order) if order is not None else list(self.unit_ids)
        index = {u: i for i, u in enumerate(order)}
        W = np.zeros((len(order), len(order)))
        for unit in order:
            for other in self.neighbors[unit]:
                if other in index:
                    W[index[unit], index[other]] = 1.0
        if self.style == "row":
            sums = W.sum(axis=1, keepdims=True)
            W = np.divide(W, sums, out=np.zeros_like(W), where=sums > 0)
        return W


def as_polygon(unit: str, geometry) -> Polygon:
    """
    Validate a polygon geometry or a ring of (x, y) coordinates

    Raises InvalidGeometry for rings with fewer than 3 distinct vertices,
    non-finite coordinates and self-intersections.
    """
    if isinstance(geometry, (Polygon, MultiPolygon)):
        polygon = geometry
    else:
        coords = [tuple(map(float, point)) for point in geometry]
        if len(coords) > 1 and coords[0] == coords[-1]:
            coords = coords[:-1]
        if len(coords) < 3:
            raise InvalidGeometry(unit, f"ring has {len(coords)} vertices, at least 3 are required")
        polygon = Polygon(coords)

    rings = polygon.geoms if isinstance(polygon, MultiPolygon) else [polygon]
    for ring in rings:
        if len(set(ring.exterior.coords)) < 3:
            raise InvalidGeometry(unit, "ring has fewer than 3 distinct vertices")
    if not np.all(np.isfinite(shapely.get_coordinates(polygon))):
        raise InvalidGeometry(unit, "non-finite coordinates")
    if not polygon.is_valid:
        raise InvalidGeometry(unit, explain_validity(polygon))
    return polygon


def _vertex_keys(polygon, tolerance: float) -> set:
    coords = shapely.get_coordinates(polygon)
    return {tuple(key) for key in np.round(coords / tolerance).astype(np.int64)}


def contiguity(polygons: Mapping[str, object], criterion: str = "queen",
               tolerance: float = SNAP_TOLERANCE, style: str = "binary") -> SpatialWeights:
    """
    First-order contiguity weights

    queen: boundaries share at least one point. Shared vertices are matched by
    hashing snapped coordinates; remaining candidate pairs from an STR-tree
    bounding box query are tested by boundary distance.
    rook: boundaries share a segment of positive length.
    """
    if criterion not in CRITERIA:
        raise ValueError(f"Unknown contiguity criterion '{criterion}', expected one of {CRITERIA}")

    ids = sorted(polygons)
    geoms = [as_polygon(unit, polygons[unit]) for unit in ids]
    links: Dict[str, set] = {u: set() for u in ids}

    if criterion == "queen":
        owners = defaultdict(set)
        for i, geom in enumerate(geoms):
            for key in _vertex_keys(geom, tolerance):
                owners[key].add(i)
        for members in owners.values():
            for i, j in combinations(sorted(members), 2):
                links[ids[i]].add(ids[j])
                links[ids[j]].add(ids[i])

    tree = STRtree(geoms)
    boundaries = [geom.boundary for geom in geoms]
    for i, geom in enumerate(geoms):
        minx, miny, maxx, maxy = geom.bounds
        envelope = shapely.box(minx - tolerance, miny - tolerance, maxx + tolerance, maxy + tolerance)
        for j in tree.query(envelope):
            j = int(j)
            if j <= i or ids[j] in links[ids[i]]:
                continue
            if criterion == "queen":
                touching = boundaries[i].distance(boundaries[j]) <= tolerance
            else:
                shared = boundaries[i].intersection(boundaries[j].buffer(tolerance))
                touching = shared.length > 2 * tolerance
            if touching:
                links[ids[i]].add(ids[j])
                links[ids[j]].add(ids[i])

    weights = SpatialWeights(unit_ids=tuple(ids), neighbors=links, style=style)
    logger.debug("%s contiguity: %d units, %d links, %d islands",
                 criterion, len(ids), weights.n_links, len(weights.islands))
    return weights


def queen_contiguity(polygons: Mapping[str, object], tolerance: float = SNAP_TOLERANCE,
                     style: str = "binary") -> SpatialWeights:
    return contiguity(polygons, "queen", tolerance, style)


def rook_contiguity(polygons: Mapping[str, object], tolerance: float = SNAP_TOLERANCE,
                    style: str = "binary") -> SpatialWeights:
    return contiguity(polygons, "rook", tolerance, style)


def subset_weights(weights: SpatialWeights, keep: Iterable[str]) -> SpatialWeights:
    """Induced subgraph on `keep`; units left without neighbors become islands"""
    keep = set(keep)
    if not keep:
        raise EmptyKeepSet("Cannot subset weights to an empty unit set")
    unknown = keep - set(weights.unit_ids)
    if unknown:
        raise ValueError(f"Units not present in weights: {', '.join(sorted(unknown))}")

    ids = tuple(u for u in weights.unit_ids if u in keep)
    neighbors = {u: weights.neighbors[u] & keep for u in ids}
    return SpatialWeights(unit_ids=ids, neighbors=neighbors, style=weights.style)


@dataclass(frozen=True)
class MoranResult:
    observed_i: float
    expected_i: float
    p_value: float
    n_used: int
    n_permutations: int
    seed: int
    islands_dropped: Tuple[str, ...] = ()
    feature: str = ""
    permutation_mean: float = float('nan')
    permutation_sd: float = float('nan')

    @property
    def z_score(self) -> float:
        if not self.permutation_sd > 0:
            return float('nan')
        return (self.observed_i - self.permutation_mean) / self.permutation_sd


@dataclass(frozen=True, eq=False)
class _MoranInputs:
    unit_ids: Tuple[str, ...]
    z: np.ndarray
    W: np.ndarray
    s0: float
    islands: Tuple[str, ...]


def _prepare(values: Mapping[str, float], weights: SpatialWeights) -> _MoranInputs:
    valued = {u for u in weights.unit_ids if u in values and np.isfinite(values[u])}
    if len(valued) < 3:
        raise TooFewUnits(f"Moran's I needs at least 3 units with values, got {len(valued)}")
    if len(valued) < len(weights.unit_ids):
        logger.info("Moran's I: %d of %d units have values", len(valued), len(weights.unit_ids))
        weights = subset_weights(weights, valued)

    islands = weights.islands
    if islands:
        logger.warning("Moran's I: dropped %d island unit(s): %s", len(islands), ", ".join(islands))
        connected = set(weights.unit_ids) - set(islands)
        if not connected:
            raise TooFewUnits("No unit has a neighbor")
        weights = subset_weights(weights, connected)

    ids = tuple(sorted(weights.unit_ids))
    if len(ids) < 3:
        raise TooFewUnits(f"Moran's I needs at least 3 connected units, got {len(ids)}")
    s0 = weights.s0
    if s0 <= 0:
        raise TooFewUnits("Weights have no links (S0 = 0)")

    x = np.array([values[u] for u in ids], dtype=np.float64)
    if np.ptp(x) == 0:
        raise ConstantValues("Moran's I is undefined for constant values")
    return _MoranInputs(unit_ids=ids, z=x - x.mean(), W=weights.to_dense(ids), s0=s0, islands=tuple(islands))


def _statistic(z: np.ndarray, W: np.ndarray, s0: float) -> np.ndarray:
    """I for one vector or for each row of a matrix of permuted vectors"""
    z = np.atleast_2d(z)
    cross = np.einsum('pi,ij,pj->p', z, W, z)
    return len(W) / s0 * cross / np.einsum('pi,pi->p', z, z)


def morans_i(values: Mapping[str, float], weights: SpatialWeights) -> float:
    """I = (n / S0) * sum_ij w_ij z_i z_j / sum_i z_i^2 with z centered"""
    inputs = _prepare(values, weights)
    return float(_statistic(inputs.z, inputs.W, inputs.s0)[0])


def moran_permutation(values: Mapping[str, float], weights: SpatialWeights,
                      n_permutations: int = 999, seed: int = 20031, feature: str = "") -> MoranResult:
    """
    Observed I and a one-sided (greater) p-value from random relabeling

    p = (#{I_perm >= I_obs} + 1) / (n_permutations + 1)
    """
    if n_permutations < MIN_PERMUTATIONS:
        raise ValueError(f"n_permutations must be at least {MIN_PERMUTATIONS}, got {n_permutations}")

    inputs = _prepare(values, weights)
    observed = float(_statistic(inputs.z, inputs.W, inputs.s0)[0])

    rng = np.random.default_rng(seed)
    shuffled = rng.permuted(np.tile(inputs.z, (n_permutations, 1)), axis=1)
    permuted = _statistic(shuffled, inputs.W, inputs.s0)

    slack = 1e-12 * max(1.0, abs(observed))
    extreme = int(np.sum(permuted >= observed - slack))
    n = len(inputs.unit_ids)
    return MoranResult(
        observed_i=observed,
        expected_i=-1.0 / (n - 1),
        p_value=(extreme + 1) / (n_permutations + 1),
        n_used=n,
        n_permutations=n_permutations,
        seed=seed,
        islands_dropped=inputs.islands,
        feature=feature,
        permutation_mean=float(permuted.mean()),
        permutation_sd=float(permuted.std(ddof=1)),
    )


def format_moran_report(results: Sequence[MoranResult], weights: Optional[SpatialWeights] = None) -> str:
    """Plain-text report, one block per feature"""
    lines = ["Global Moran's I (one-sided, greater)", ""]
    if weights is not None:
        lines.append(f"weights: style={weights.style} units={len(weights.unit_ids)} "
                     f"links={weights.n_links} s0={weights.s0:g}")
        lines.append("")
    for result in results:
        lines.append(f"feature: {result.feature}")
        lines.append(f"  I = {result.observed_i:.6f}")
        lines.append(f"  E[I] = {result.expected_i:.6f}")
        lines.append(f"  p = {result.p_value:.6g} ({result.n_permutations} permutations, seed {result.seed})")
        lines.append(f"  z (permutation) = {result.z_score:.4f}")
        lines.append(f"  n_used = {result.n_used}")
        lines.append(f"  islands = {', '.join(result.islands_dropped) if result.islands_dropped else 'none'}")
        lines.append("")
    return "\n".join(lines)
