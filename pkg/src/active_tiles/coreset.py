"""Core-set selection by greedy k-center and robust k-center.

Points are tile descriptors in feature space; already labelled tiles act as
fixed centers. All distances are Euclidean and computed in double precision.
Ties are broken by ascending ``tile_id``, which is the row order of a
:py:class:`PointSet`.
"""

from __future__ import annotations

import itertools
import logging
import math
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field

import numpy as np
import xarray as xr
from scipy.spatial.distance import cdist, pdist

from active_tiles.array_store import SelectionManifest
from active_tiles.errors import BudgetError, DimensionError, ValidationError
from active_tiles.options import OPTIONS
from active_tiles.types import Strategy

__all__ = [
    'CoresetResult',
    'PointSet',
    'coreset_selection',
    'kcenter_cost',
    'kcenter_greedy',
    'l2_distance',
    'robust_kcenter',
]

logger = logging.getLogger(__name__)

# Rows per cdist call when reducing over large point sets.
_CHUNK = 4096

# Largest number of center subsets searched exhaustively.
_EXHAUSTIVE_LIMIT = 10_000

# Largest k x candidates x points product for the swap search.
_SWAP_WORK = 2_000_000


@dataclass(frozen=True, eq=False)
class PointSet:
    """Candidate descriptors plus the already labelled tiles.

    Rows are stored in canonical ``tile_id`` order whatever order they are
    given in.

    Attributes
    ----------
    tile_ids : tuple of str
        Unique tile identifiers, sorted.
    vectors : np.ndarray
        ``N x C`` float64 matrix, one row per tile.
    labelled : frozenset of str
        Tiles that are already labelled. They seed the center set and are
        never selected.
    """

    tile_ids: tuple[str, ...]
    vectors: np.ndarray
    labelled: frozenset[str] = field(default_factory=frozenset)

    def __post_init__(self) -> None:
        vectors = np.array(self.vectors, dtype=np.float64)
        if vectors.ndim != 2 or vectors.shape[0] != len(self.tile_ids):
            raise DimensionError(
                f'vectors of shape {vectors.shape} do not match '
                f'{len(self.tile_ids)} tile(s)'
            )
        if len(set(self.tile_ids)) != len(self.tile_ids):
            raise ValidationError('tile_ids must be unique')
        if not np.isfinite(vectors).all():
            raise ValidationError('vectors must be finite')
        labelled = frozenset(self.labelled)
        unknown = labelled - set(self.tile_ids)
        if unknown:
            raise ValidationError(
                f'labelled tiles not in the point set: {sorted(unknown)!r}'
            )
        order = np.argsort(
            np.array(self.tile_ids, dtype=object), kind='stable'
        )
        vectors = vectors[order]
        vectors.flags.writeable = False
        object.__setattr__(
            self, 'tile_ids', tuple(self.tile_ids[i] for i in order)
        )
        object.__setattr__(self, 'vectors', vectors)
        object.__setattr__(self, 'labelled', labelled)
        object.__setattr__(
            self, '_positions', {t: i for i, t in enumerate(self.tile_ids)}
        )

    @classmethod
    def from_matrix(
        cls,
        tile_ids: Sequence[str],
        vectors: np.ndarray | Sequence[Sequence[float]],
        labelled: Iterable[str] = (),
    ) -> PointSet:
        """Build a point set from an ``N x C`` matrix."""
        return cls(tuple(tile_ids), np.asarray(vectors), frozenset(labelled))

    @classmethod
    def from_dataarray(
        cls, features: xr.DataArray, labelled: Iterable[str] = ()
    ) -> PointSet:
        """Build a point set from a ``(tile, feature)`` DataArray."""
        return cls.from_matrix(
            [str(t) for t in features['tile'].values],
            features.transpose('tile', ...).values,
            labelled,
        )

    def __len__(self) -> int:
        return len(self.tile_ids)

    @property
    def dims(self) -> int:
        return int(self.vectors.shape[1])

    @property
    def labelled_mask(self) -> np.ndarray:
        """Boolean mask of labelled rows."""
        return np.array(
            [t in self.labelled for t in self.tile_ids], dtype=bool
        )

    def index(self, tile_id: str) -> int:
        """Row index of ``tile_id``."""
        try:
            return self._positions[tile_id]
        except KeyError:
            raise ValidationError(f'unknown tile_id {tile_id!r}') from None


@dataclass(frozen=True)
class CoresetResult:
    """The outcome of a k-center selection.

    Attributes
    ----------
    selected : tuple of str
        New centers in selection order.
    covering_radius : float
        Largest distance from a non-outlier point to its nearest center
        (labelled tiles included).
    outliers : tuple of str
        Points ignored by the covering radius (robust mode only).
    scores : tuple of float or None
        Distance of each selected tile to the centers chosen before it;
        None for a first center chosen without any labelled tile.
    radius_trace : tuple of float
        Covering radius after each greedy pick (greedy mode only).
    """

    selected: tuple[str, ...]
    covering_radius: float
    outliers: tuple[str, ...] = ()
    scores: tuple[float | None, ...] = ()
    radius_trace: tuple[float, ...] = ()


def l2_distance(a: Sequence[float], b: Sequence[float]) -> float:
    """Return the Euclidean distance between two vectors.

    Raises
    ------
    DimensionError
        If the vectors have different lengths.
    """
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise DimensionError(
            f'vectors have different lengths: {a.size} and {b.size}'
        )
    return float(np.sqrt(np.sum((a - b) ** 2)))


def _distances_to(vectors: np.ndarray, index: int) -> np.ndarray:
    return cdist(vectors, vectors[index : index + 1])[:, 0]


def _nearest_distance(
    vectors: np.ndarray, centers: Sequence[int] | np.ndarray
) -> np.ndarray:
    """Distance of every row to its nearest center row (inf if no centers)."""
    centers = np.asarray(centers, dtype=np.intp)
    nearest = np.full(len(vectors), np.inf)
    if centers.size == 0:
        return nearest
    for start in range(0, centers.size, _CHUNK):
        block = cdist(vectors, vectors[centers[start : start + _CHUNK]])
        np.minimum(nearest, block.min(axis=1), out=nearest)
    return nearest


def _selection_scores(
    vectors: np.ndarray, seeds: np.ndarray, order: Sequence[int]
) -> tuple[float | None, ...]:
    """Distance of each pick to the seeds and earlier picks."""
    scores: list[float | None] = []
    for i, index in enumerate(order):
        centers = np.concatenate([seeds, np.asarray(order[:i], dtype=np.intp)])
        if centers.size == 0:
            scores.append(None)
        else:
            nearest = cdist(vectors[[index]], vectors[centers]).min()
            scores.append(float(nearest))
    return tuple(scores)


def _check_budget(points: PointSet, k: int) -> np.ndarray:
    if len(points) == 0:
        raise ValidationError('the point set is empty')
    unlabelled = ~points.labelled_mask
    if k < 1 or k > int(unlabelled.sum()):
        raise BudgetError(
            f'cannot select {k} center(s) from '
            f'{int(unlabelled.sum())} unlabelled point(s)'
        )
    return unlabelled


def kcenter_greedy(points: PointSet, k: int) -> CoresetResult:
    """Select ``k`` centers by greedy farthest-first traversal.

    Each step adds the unlabelled point farthest from the current centers
    (labelled points plus earlier picks). Without labelled points the first
    center is the point closest to the centroid. The result costs at most
    twice the optimal k-center radius.

    Parameters
    ----------
    points : PointSet
        Candidates and labelled seeds.
    k : int
        Number of new centers.

    Returns
    -------
    CoresetResult

    Raises
    ------
    ValidationError
        If the point set is empty.
    BudgetError
        If ``k`` exceeds the number of unlabelled points.
    """
    available = _check_budget(points, k).copy()
    vectors = points.vectors
    seeds = np.flatnonzero(points.labelled_mask)

    nearest = _nearest_distance(vectors, seeds)
    selected: list[int] = []
    scores: list[float | None] = []
    trace: list[float] = []

    if seeds.size == 0:
        centroid = vectors.mean(axis=0, keepdims=True)
        first = int(np.argmin(cdist(vectors, centroid)[:, 0]))
        selected.append(first)
        scores.append(None)
        available[first] = False
        nearest = _distances_to(vectors, first)
        trace.append(float(nearest.max()))

    while len(selected) < k:
        index = int(np.argmax(np.where(available, nearest, -np.inf)))
        scores.append(float(nearest[index]))
        selected.append(index)
        available[index] = False
        np.minimum(nearest, _distances_to(vectors, index), out=nearest)
        trace.append(float(nearest.max()))

    radius = float(nearest.max())
    logger.debug('greedy k-center: k=%d radius=%g', k, radius)
    return CoresetResult(
        selected=tuple(points.tile_ids[i] for i in selected),
        covering_radius=radius,
        scores=tuple(scores),
        radius_trace=tuple(trace),
    )


def kcenter_cost(points: PointSet, centers: Iterable[str]) -> float:
    """Return the k-center objective: the largest distance to a center.

    Raises
    ------
    ValidationError
        If ``centers`` is empty or names an unknown tile.
    """
    indices = [points.index(tile_id) for tile_id in centers]
    if not indices:
        raise ValidationError('centers must not be empty')
    return float(_nearest_distance(points.vectors, indices).max())


def _robust_radius(
    nearest: np.ndarray, outlier_budget: int
) -> tuple[float, np.ndarray]:
    """Covering radius after dropping the farthest points, and the outliers."""
    order = np.lexsort((np.arange(nearest.size), -nearest))
    kept = order[outlier_budget:]
    radius = float(nearest[kept].max()) if kept.size else 0.0
    dropped = order[:outlier_budget]
    return radius, np.sort(dropped[nearest[dropped] > radius])


def _fill_farthest(
    vectors: np.ndarray,
    available: np.ndarray,
    nearest: np.ndarray,
    order: list[int],
    k: int,
) -> None:
    """Extend ``order`` to ``k`` picks by farthest-first traversal."""
    while len(order) < k:
        index = int(np.argmax(np.where(available, nearest, -np.inf)))
        order.append(index)
        available[index] = False
        np.minimum(nearest, _distances_to(vectors, index), out=nearest)


def _enumerate_centers(
    distances: np.ndarray,
    candidates: np.ndarray,
    seed_distance: np.ndarray,
    outlier_budget: int,
    order: list[int],
    radius: float,
) -> list[int]:
    """Return the best center set of all ``k``-subsets of the candidates."""
    kth = distances.shape[1] - 1 - outlier_budget
    for combo in itertools.combinations(range(candidates.size), len(order)):
        closest = distances[list(combo)].min(axis=0)
        nearest = np.minimum(seed_distance, closest)
        cost = float(np.partition(nearest, kth)[kth])
        if cost < radius:
            radius, order = cost, [int(candidates[c]) for c in combo]
    return order


def _swap_centers(
    vectors: np.ndarray,
    distances: np.ndarray,
    candidates: np.ndarray,
    seed_distance: np.ndarray,
    outlier_budget: int,
    order: list[int],
    radius: float,
) -> list[int]:
    """Replace single centers while the robust radius decreases."""
    order = list(order)
    kth = distances.shape[1] - 1 - outlier_budget
    improved = True
    while improved:
        improved = False
        for position in range(len(order)):
            others = order[:position] + order[position + 1 :]
            base = np.minimum(
                seed_distance, _nearest_distance(vectors, others)
            )
            costs = np.partition(np.minimum(base, distances), kth, axis=1)
            costs = costs[:, kth]
            costs[np.isin(candidates, order)] = np.inf
            best = int(np.argmin(costs))
            if costs[best] < radius:
                radius = float(costs[best])
                order[position] = int(candidates[best])
                improved = True
    return order


def robust_kcenter(
    points: PointSet, k: int, outlier_budget: int | None = None
) -> CoresetResult:
    """Select ``k`` centers tolerating up to ``outlier_budget`` outliers.

    Candidate radii are the distances between points and the greedy
    solution's centers, or all pairwise distances when the point set has at
    most ``pairwise_limit`` points. A binary search over the sorted radii
    runs a greedy covering check at each radius ``r``: seeds cover their
    ``r``-balls; ``k`` times, the candidate whose ``r``-ball holds the most
    uncovered points becomes a center and its ``3r``-ball is covered. The
    check passes when at most ``outlier_budget`` points stay uncovered.

    The best selection among the passing checks and the plain greedy
    solution is then refined. When the candidates have at most 10,000
    subsets of size ``k`` every subset is scored and the optimum is kept;
    otherwise single centers are swapped for candidates while that lowers
    the radius. Radii are always the actual covering radius after discarding
    the ``outlier_budget`` farthest points.

    Parameters
    ----------
    points : PointSet
        Candidates and labelled seeds.
    k : int
        Number of new centers.
    outlier_budget : int, optional
        Number of points that may be ignored. Defaults to the
        ``outlier_budget`` option (0).

    Returns
    -------
    CoresetResult

    Raises
    ------
    ValidationError
        If ``k + outlier_budget`` exceeds the number of points, ``k``
        exceeds the unlabelled points, or ``outlier_budget`` is negative.
    """
    z = OPTIONS['outlier_budget'] if outlier_budget is None else outlier_budget
    if z < 0:
        raise ValidationError(
            f'outlier_budget must be non-negative, got {outlier_budget}'
        )
    if k + z > len(points):
        raise ValidationError(
            f'k + outlier_budget = {k + z} exceeds the {len(points)} point(s)'
        )
    try:
        unlabelled = _check_budget(points, k)
    except BudgetError as error:
        raise ValidationError(str(error)) from error

    vectors = points.vectors
    n = len(points)
    seeds = np.flatnonzero(points.labelled_mask)
    seed_distance = _nearest_distance(vectors, seeds)
    limit = OPTIONS['pairwise_limit']

    greedy = kcenter_greedy(points, k)
    greedy_centers = np.array([points.index(t) for t in greedy.selected])
    if n <= limit:
        candidates = np.flatnonzero(unlabelled)
        radii = np.concatenate([[0.0], pdist(vectors)])
    else:
        traversal = kcenter_greedy(
            points, min(int(unlabelled.sum()), max(limit, k))
        )
        candidates = np.sort([points.index(t) for t in traversal.selected])
        radii = np.concatenate(
            [
                [0.0],
                cdist(vectors[greedy_centers], vectors).ravel(),
                seed_distance[np.isfinite(seed_distance)],
            ]
        )
    radii = np.unique(radii)
    distances = cdist(vectors[candidates], vectors)

    def cover(radius: float) -> tuple[bool, list[int]]:
        covered = seed_distance <= radius
        ball = distances <= radius
        counts = (ball & ~covered).sum(axis=1)
        available = np.ones(candidates.size, dtype=bool)
        chosen: list[int] = []
        for _ in range(k):
            weights = np.where(available, counts, -1)
            best = int(np.argmax(weights))
            if weights[best] <= 0:
                break
            chosen.append(best)
            available[best] = False
            newly = (distances[best] <= 3 * radius) & ~covered
            counts -= ball[:, newly].sum(axis=1)
            covered |= newly
        uncovered = n - int(covered.sum())
        return uncovered <= z, [int(candidates[c]) for c in chosen]

    def complete(order: list[int]) -> tuple[list[int], np.ndarray]:
        available = unlabelled.copy()
        available[order] = False
        nearest = np.minimum(seed_distance, _nearest_distance(vectors, order))
        _fill_farthest(vectors, available, nearest, order, k)
        return order, nearest

    greedy_nearest = np.minimum(
        seed_distance, _nearest_distance(vectors, greedy_centers)
    )
    best_radius, _ = _robust_radius(greedy_nearest, z)
    best_order = [int(i) for i in greedy_centers]
    found_feasible = False

    low, high = 0, radii.size - 1
    while low <= high:
        middle = (low + high) // 2
        feasible, chosen = cover(float(radii[middle]))
        logger.debug(
            'robust k-center: r=%g feasible=%s', radii[middle], feasible
        )
        if not feasible:
            low = middle + 1
            continue
        high = middle - 1
        order, nearest = complete(chosen)
        radius, _ = _robust_radius(nearest, z)
        if radius < best_radius or (
            radius == best_radius and not found_feasible
        ):
            best_radius, best_order = radius, order
            found_feasible = True

    if math.comb(candidates.size, k) <= _EXHAUSTIVE_LIMIT:
        best_order = _enumerate_centers(
            distances, candidates, seed_distance, z, best_order, best_radius
        )
    elif k * candidates.size * n <= _SWAP_WORK:
        best_order = _swap_centers(
            vectors,
            distances,
            candidates,
            seed_distance,
            z,
            best_order,
            best_radius,
        )
    nearest = np.minimum(seed_distance, _nearest_distance(vectors, best_order))
    best_radius, best_outliers = _robust_radius(nearest, z)

    return CoresetResult(
        selected=tuple(points.tile_ids[i] for i in best_order),
        covering_radius=best_radius,
        outliers=tuple(points.tile_ids[i] for i in best_outliers),
        scores=_selection_scores(vectors, seeds, best_order),
    )


def coreset_selection(
    result: CoresetResult, budget: int | None = None
) -> SelectionManifest:
    """Return the selection manifest of a core-set result.

    The score of each entry is its distance to the centers at selection time.
    """
    budget = len(result.selected) if budget is None else budget
    return SelectionManifest.from_ranked(
        Strategy.CORESET,
        budget,
        zip(result.selected, result.scores or [None] * len(result.selected)),
    )
