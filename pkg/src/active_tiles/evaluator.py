"""Object-level detection metrics for segmentation outputs.

A probability map is binarized, split into 8-connected components and
matched against ground-truth instances:

- a ground-truth instance is a true positive if at least one of its pixels
  is predicted positive, otherwise a false negative;
- a predicted component that overlaps no ground-truth pixel is a false
  positive.

Counts are summed over tiles before precision, recall and F1 are computed.
"""

from __future__ import annotations

import json
import logging
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np
import pandas as pd
import xarray as xr
from scipy import ndimage

from active_tiles._helpers import map_ordered, validate_threshold
from active_tiles.array_store import ArrayContainer, PoolManifest, load_array
from active_tiles.errors import DimensionError, StorageError, ValidationError
from active_tiles.options import OPTIONS
from active_tiles.types import ArtifactRole

__all__ = [
    'EvalReport',
    'MatchCounts',
    'PRPoint',
    'binarize',
    'connected_components',
    'evaluate_pool',
    'match_detections',
    'pr_curve',
    'precision_recall_f1',
    'read_report',
    'threshold_grid',
    'tile_counts',
    'write_curve_csv',
    'write_report',
]

logger = logging.getLogger(__name__)

# 8-connectivity: diagonal neighbours belong to the same component.
_STRUCTURE = np.ones((3, 3), dtype=int)

_METRICS = ('precision', 'recall', 'f1')
_COUNTS = ('tp', 'fn', 'fp')


@dataclass(frozen=True)
class MatchCounts:
    """Detection counts of one or several tiles."""

    tp: int = 0
    fn: int = 0
    fp: int = 0

    def __post_init__(self) -> None:
        if min(self.tp, self.fn, self.fp) < 0:
            raise ValidationError(f'counts must be non-negative: {self}')

    def __add__(self, other: MatchCounts) -> MatchCounts:
        return MatchCounts(
            self.tp + other.tp, self.fn + other.fn, self.fp + other.fp
        )

    @property
    def instances(self) -> int:
        """Number of ground-truth instances."""
        return self.tp + self.fn


@dataclass(frozen=True)
class PRPoint:
    """Metrics at one binarization threshold."""

    threshold: float
    precision: float
    recall: float
    f1: float
    counts: MatchCounts

    @classmethod
    def from_counts(cls, threshold: float, counts: MatchCounts) -> PRPoint:
        return cls(threshold, *precision_recall_f1(counts), counts)

    def to_dict(self) -> dict[str, Any]:
        return {
            'threshold': self.threshold,
            'precision': self.precision,
            'recall': self.recall,
            'f1': self.f1,
            'tp': self.counts.tp,
            'fn': self.counts.fn,
            'fp': self.counts.fp,
        }


@dataclass(frozen=True)
class EvalReport:
    """A precision-recall curve and its best-F1 operating point.

    Attributes
    ----------
    curve : tuple of PRPoint
        Points ordered by strictly ascending threshold.
    operating : PRPoint
        The curve point with the highest F1, the lowest threshold on ties.
    tile_ids : tuple of str
        The evaluated tiles, sorted.
    """

    curve: tuple[PRPoint, ...]
    operating: PRPoint
    tile_ids: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, 'curve', tuple(self.curve))
        object.__setattr__(self, 'tile_ids', tuple(sorted(self.tile_ids)))
        if not self.curve:
            raise ValidationError('a report needs at least one threshold')
        thresholds = [point.threshold for point in self.curve]
        if any(a >= b for a, b in zip(thresholds, thresholds[1:])):
            raise ValidationError('thresholds must be strictly ascending')
        if self.operating not in self.curve:
            raise ValidationError('the operating point is not on the curve')
        if self.operating.f1 < max(point.f1 for point in self.curve):
            raise ValidationError('the operating point is not the best F1')

    @classmethod
    def from_curve(
        cls, curve: Sequence[PRPoint], tile_ids: Iterable[str] = ()
    ) -> EvalReport:
        """Build a report, picking the best-F1 point as operating point."""
        if not curve:
            raise ValidationError('a report needs at least one threshold')
        # max keeps the first maximum, i.e. the lowest threshold.
        operating = max(curve, key=lambda point: point.f1)
        return cls(tuple(curve), operating, tuple(tile_ids))

    @property
    def thresholds(self) -> list[float]:
        return [point.threshold for point in self.curve]

    def to_frame(self) -> pd.DataFrame:
        """Return the curve as a DataFrame, one row per threshold."""
        return pd.DataFrame(
            [point.to_dict() for point in self.curve],
            columns=['threshold', *_METRICS, *_COUNTS],
        )

    def to_dataset(self) -> xr.Dataset:
        """Return the curve as a Dataset along a ``threshold`` dimension."""
        frame = self.to_frame().set_index('threshold')
        dataset = xr.Dataset.from_dataframe(frame)
        dataset.attrs['operating_threshold'] = self.operating.threshold
        dataset.attrs['tiles'] = len(self.tile_ids)
        return dataset

    def to_dict(self) -> dict[str, Any]:
        return {
            'kind': 'eval_report',
            'operating_threshold': self.operating.threshold,
            'tile_ids': list(self.tile_ids),
            'curve': [point.to_dict() for point in self.curve],
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> EvalReport:
        try:
            curve = tuple(
                PRPoint(
                    float(raw['threshold']),
                    float(raw['precision']),
                    float(raw['recall']),
                    float(raw['f1']),
                    MatchCounts(
                        int(raw['tp']), int(raw['fn']), int(raw['fp'])
                    ),
                )
                for raw in data['curve']
            )
            operating = float(data['operating_threshold'])
            tile_ids = tuple(str(t) for t in data.get('tile_ids', ()))
        except (KeyError, TypeError, ValueError) as error:
            raise ValidationError(f'malformed report: {error}') from error
        for point in curve:
            if point.threshold == operating:
                return cls(curve, point, tile_ids)
        raise ValidationError(
            f'operating threshold {operating!r} is not on the curve'
        )


def threshold_grid(steps: int | None = None) -> np.ndarray:
    """Return ``steps`` evenly spaced thresholds strictly inside ``(0, 1)``.

    The default 99 steps give ``0.01, 0.02, ..., 0.99``.
    """
    steps = OPTIONS['threshold_steps'] if steps is None else steps
    if steps < 1:
        raise ValidationError(f'steps must be positive, got {steps}')
    return np.arange(1, steps + 1) / (steps + 1)


def binarize(map: ArrayContainer, threshold: float) -> np.ndarray:
    """Return the ``H x W`` mask of pixels whose value is at least ``threshold``.

    The comparison is made in single precision, the storage precision of
    the map, so that a stored value equal to the threshold is positive.

    Raises
    ------
    ValidationError
        If ``threshold`` is outside ``(0, 1)`` or the map is not a
        single-channel probability map.
    """
    threshold = validate_threshold(threshold)
    map.require_probability(channels=1)
    return map.data[:, :, 0] >= np.float32(threshold)


def connected_components(mask: np.ndarray) -> tuple[np.ndarray, int]:
    """Label the 8-connected components of a binary mask.

    Parameters
    ----------
    mask : np.ndarray
        A 2D boolean mask.

    Returns
    -------
    labels : np.ndarray
        Integer map with background 0 and components numbered ``1..n`` in
        the row-major order of their first pixel.
    count : int
        Number of components.
    """
    mask = np.asarray(mask, dtype=bool)
    if mask.ndim != 2:
        raise DimensionError(f'mask must be 2D, got {mask.ndim} dimensions')
    labels, count = ndimage.label(mask, structure=_STRUCTURE)
    if count == 0:
        return labels, 0
    ids, first = np.unique(labels, return_index=True)
    foreground = ids > 0
    ids, first = ids[foreground], first[foreground]
    mapping = np.zeros(count + 1, dtype=labels.dtype)
    mapping[ids[np.argsort(first, kind='stable')]] = np.arange(1, count + 1)
    return mapping[labels], int(count)


def _instance_values(gt: ArrayContainer | np.ndarray) -> np.ndarray:
    if isinstance(gt, ArrayContainer):
        return gt.require_instances().data[:, :, 0]
    values = np.asarray(gt)
    if values.ndim == 3 and values.shape[2] == 1:
        values = values[:, :, 0]
    return values


def match_detections(
    components: np.ndarray, gt: ArrayContainer | np.ndarray
) -> MatchCounts:
    """Match predicted components against ground-truth instances.

    Parameters
    ----------
    components : np.ndarray
        Component labels as returned by :py:func:`connected_components`.
    gt : ArrayContainer or np.ndarray
        Instance map, 0 for background.

    Returns
    -------
    MatchCounts
        A component may validate several instances; an instance touched by
        several components counts once.

    Raises
    ------
    DimensionError
        If the spatial sizes differ.
    """
    labels = np.asarray(components)
    instances = _instance_values(gt)
    if labels.shape != instances.shape:
        raise DimensionError(
            f'prediction {labels.shape} and ground truth '
            f'{instances.shape} differ in size'
        )
    predicted = labels > 0
    on_object = instances > 0
    overlap = predicted & on_object
    total = np.unique(instances[on_object]).size
    tp = np.unique(instances[overlap]).size
    components_total = np.unique(labels[predicted]).size
    validated = np.unique(labels[overlap]).size
    return MatchCounts(tp=tp, fn=total - tp, fp=components_total - validated)


def precision_recall_f1(counts: MatchCounts) -> tuple[float, float, float]:
    """Return precision, recall and F1 of detection counts.

    Precision is 1 when nothing is predicted and recall is 1 when there is
    nothing to find; F1 is 0 when both precision and recall are 0.
    """
    predicted = counts.tp + counts.fp
    precision = counts.tp / predicted if predicted else 1.0
    recall = counts.tp / counts.instances if counts.instances else 1.0
    total = precision + recall
    f1 = 2 * precision * recall / total if total else 0.0
    return precision, recall, f1


def _validated_thresholds(thresholds: Iterable[float] | None) -> list[float]:
    if thresholds is None:
        return threshold_grid().tolist()
    values = sorted({validate_threshold(t) for t in thresholds})
    if not values:
        raise ValidationError('thresholds must not be empty')
    return values


def tile_counts(
    map: ArrayContainer,
    gt: ArrayContainer,
    thresholds: Sequence[float],
) -> list[MatchCounts]:
    """Return the match counts of one tile at each threshold."""
    map.require_probability(channels=1)
    gt.require_instances()
    if map.shape[:2] != gt.shape[:2]:
        raise DimensionError(
            f'map {map.shape[:2]} and ground truth {gt.shape[:2]} differ '
            'in size'
        )
    counts = []
    for threshold in thresholds:
        labels, _ = connected_components(binarize(map, threshold))
        counts.append(match_detections(labels, gt))
    return counts


def _aggregate(
    tile_ids: Sequence[str],
    per_tile: Sequence[Sequence[MatchCounts]],
    thresholds: Sequence[float],
) -> EvalReport:
    curve = []
    for i, threshold in enumerate(thresholds):
        total = sum((counts[i] for counts in per_tile), MatchCounts())
        curve.append(PRPoint.from_counts(threshold, total))
    report = EvalReport.from_curve(curve, tile_ids)
    logger.info(
        'evaluated %d tiles: best f1 %.4f at threshold %g',
        len(tile_ids),
        report.operating.f1,
        report.operating.threshold,
    )
    return report


def pr_curve(
    prob_maps: Mapping[str, ArrayContainer],
    gt: Mapping[str, ArrayContainer],
    thresholds: Iterable[float] | None = None,
    *,
    workers: int | None = None,
) -> EvalReport:
    """Sweep binarization thresholds over a set of tiles.

    Parameters
    ----------
    prob_maps : mapping of str to ArrayContainer
        Single-channel probability maps keyed by ``tile_id``.
    gt : mapping of str to ArrayContainer
        Instance maps keyed by the same tile identifiers.
    thresholds : iterable of float, optional
        Thresholds in ``(0, 1)``. Defaults to :py:func:`threshold_grid`.
    workers : int, optional
        Number of worker threads. Defaults to the ``workers`` option.

    Returns
    -------
    EvalReport

    Raises
    ------
    ValidationError
        If the two mappings do not hold the same tiles.
    """
    if set(prob_maps) != set(gt):
        only_maps = sorted(set(prob_maps) - set(gt))
        only_gt = sorted(set(gt) - set(prob_maps))
        raise ValidationError(
            f'tile sets differ: without ground truth {only_maps!r}, '
            f'without prediction {only_gt!r}'
        )
    grid = _validated_thresholds(thresholds)
    tile_ids = sorted(prob_maps)
    per_tile = map_ordered(
        lambda tile_id: tile_counts(prob_maps[tile_id], gt[tile_id], grid),
        tile_ids,
        workers=workers,
        desc='evaluating',
    )
    return _aggregate(tile_ids, per_tile, grid)


def evaluate_pool(
    pool: PoolManifest,
    root: str | Path | None = None,
    thresholds: Iterable[float] | None = None,
    *,
    workers: int | None = None,
) -> EvalReport:
    """Evaluate the ``probmap`` artifacts of a pool against its ``gt``.

    Maps are loaded one tile at a time.

    Raises
    ------
    MissingArtifactsError
        Listing every tile without a probability map or ground truth.
    """
    roles = (str(ArtifactRole.PROBMAP), str(ArtifactRole.GT))
    paths = pool.require_artifacts(roles, root)
    grid = _validated_thresholds(thresholds)

    def evaluate(tile_id: str) -> list[MatchCounts]:
        probmap, gt = (load_array(paths[tile_id][role]) for role in roles)
        return tile_counts(probmap, gt, grid)

    per_tile = map_ordered(
        evaluate, pool.tile_ids, workers=workers, desc='evaluating'
    )
    return _aggregate(pool.tile_ids, per_tile, grid)


def write_report(report: EvalReport, path: str | Path) -> None:
    """Write a report as indented, key-sorted JSON."""
    text = json.dumps(report.to_dict(), indent=2, sort_keys=True)
    try:
        Path(path).write_text(text + '\n', encoding='utf-8')
    except OSError as error:
        raise StorageError(path, f'cannot write: {error.strerror}') from error


def read_report(path: str | Path) -> EvalReport:
    """Read a report written by :py:func:`write_report`."""
    try:
        text = Path(path).read_text(encoding='utf-8')
    except OSError as error:
        raise StorageError(path, f'cannot open: {error.strerror}') from error
    try:
        data = json.loads(text)
    except json.JSONDecodeError as error:
        raise ValidationError(f'{path}: invalid JSON: {error.msg}') from error
    if not isinstance(data, dict) or data.get('kind') != 'eval_report':
        raise ValidationError(f'{path}: not an evaluation report')
    return EvalReport.from_dict(data)


def write_curve_csv(report: EvalReport, path: str | Path) -> None:
    """Write the curve as CSV with one row per threshold."""
    try:
        report.to_frame().to_csv(path, index=False)
    except OSError as error:
        raise StorageError(path, f'cannot write: {error.strerror}') from error
