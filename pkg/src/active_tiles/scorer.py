"""Per-tile scores: mean response for pre-selection and MC-dropout variance.

Rankings are by descending score with ties broken by ascending ``tile_id``,
so that results do not depend on input order.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Callable, Iterable, Sequence
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np
import pandas as pd

from active_tiles._helpers import (
    iter_jsonl,
    map_ordered,
    require_field,
    validate_fraction,
    write_jsonl,
)
from active_tiles.array_store import (
    ArrayContainer,
    PoolManifest,
    SelectionManifest,
    load_array,
)
from active_tiles.errors import (
    BudgetError,
    ManifestError,
    ValidationError,
)
from active_tiles.options import OPTIONS
from active_tiles.types import ArtifactRole, Strategy

__all__ = [
    'DropoutStack',
    'ScoreRecord',
    'dropout_variance',
    'mean_response',
    'preselect',
    'rank_by_uncertainty',
    'rank_scores',
    'read_scores',
    'score_tiles',
    'scores_to_frame',
    'variance_scorer',
    'write_scores',
]

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ScoreRecord:
    """A tile and its score."""

    tile_id: str
    score: float

    def __post_init__(self) -> None:
        score = float(self.score)
        if not math.isfinite(score) or score < 0:
            raise ValidationError(
                f'score of {self.tile_id!r} must be finite and '
                f'non-negative, got {self.score!r}'
            )
        object.__setattr__(self, 'score', score)


@dataclass(frozen=True)
class DropoutStack:
    """``K`` stochastic predictions of one tile, one per channel."""

    tile_id: str
    maps: ArrayContainer

    def __post_init__(self) -> None:
        if self.maps.channels < 2:
            raise ValidationError(
                f'dropout stack of {self.tile_id!r} needs at least 2 '
                f'predictions, got {self.maps.channels}'
            )
        self.maps.require_probability()

    @property
    def passes(self) -> int:
        return self.maps.channels


def mean_response(map: ArrayContainer) -> float:
    """Return the average intensity of a single-channel probability map.

    Parameters
    ----------
    map : ArrayContainer
        An F32 map with one channel and values in ``[0, 1]``.

    Returns
    -------
    float
        The arithmetic mean over all pixels, in ``[0, 1]``.

    Raises
    ------
    ValidationError
        If the map is not a single-channel F32 map in ``[0, 1]``.
    """
    map.require_probability(channels=1)
    return float(map.data.mean(dtype=np.float64))


def dropout_variance(stack: DropoutStack | ArrayContainer) -> float:
    """Return the mean per-pixel variance of ``K`` dropout predictions.

    The variance is the population variance (divided by ``K``) across the
    channels of each pixel; the tile score is its average over pixels and
    lies in ``[0, 0.25]``.

    Parameters
    ----------
    stack : DropoutStack or ArrayContainer
        The stacked predictions.

    Returns
    -------
    float

    Raises
    ------
    ValidationError
        If fewer than two predictions are stacked or values leave ``[0, 1]``.
    """
    if isinstance(stack, ArrayContainer):
        stack = DropoutStack('<array>', stack)
    values = stack.maps.data.astype(np.float64)
    per_pixel = values.var(axis=-1)
    return float(per_pixel.mean())


def variance_scorer(
    passes: int | None = None,
) -> Callable[[ArrayContainer], float]:
    """Return a :py:func:`dropout_variance` scorer that checks the pass count.

    Parameters
    ----------
    passes : int, optional
        Expected number of stacked predictions. Defaults to the
        ``dropout_passes`` option (10).
    """
    passes = OPTIONS['dropout_passes'] if passes is None else passes

    def score(stack: ArrayContainer) -> float:
        if stack.channels != passes:
            raise ValidationError(
                f'expected {passes} dropout predictions, got '
                f'{stack.channels}'
            )
        return dropout_variance(stack)

    return score


def scores_to_frame(scores: Iterable[ScoreRecord]) -> pd.DataFrame:
    """Return scores as a DataFrame with ``tile_id`` and ``score`` columns."""
    frame = pd.DataFrame(
        [(s.tile_id, s.score) for s in scores], columns=['tile_id', 'score']
    )
    return frame.astype({'tile_id': object, 'score': np.float64})


def rank_scores(scores: Sequence[ScoreRecord]) -> pd.DataFrame:
    """Sort scores by descending score, then ascending ``tile_id``.

    Raises
    ------
    ValidationError
        If ``scores`` is empty or holds a ``tile_id`` twice.
    """
    frame = scores_to_frame(scores)
    if frame.empty:
        raise ValidationError('scores must not be empty')
    duplicated = frame['tile_id'].duplicated()
    if duplicated.any():
        raise ValidationError(
            'duplicate tile_id in scores: '
            f'{sorted(frame.loc[duplicated, "tile_id"])!r}'
        )
    return frame.sort_values(
        ['score', 'tile_id'], ascending=[False, True], kind='mergesort'
    ).reset_index(drop=True)


def preselect(
    scores: Sequence[ScoreRecord], fraction: float | None = None
) -> list[str]:
    """Keep the top fraction of tiles by mean response.

    Parameters
    ----------
    scores : sequence of ScoreRecord
        Non-empty scores with unique tile identifiers.
    fraction : float, optional
        Fraction in ``(0, 1]`` of tiles to keep. Defaults to the
        ``preselect_fraction`` option (5 %).

    Returns
    -------
    list of str
        The ``max(1, floor(fraction * n))`` best tile identifiers, sorted by
        descending score then ascending ``tile_id``.
    """
    fraction = validate_fraction(
        OPTIONS['preselect_fraction'] if fraction is None else fraction
    )
    ranked = rank_scores(scores)
    count = max(1, math.floor(Fraction(str(fraction)) * len(ranked)))
    logger.info('pre-selected %d of %d tiles', count, len(ranked))
    return ranked['tile_id'].iloc[:count].tolist()


def rank_by_uncertainty(
    scores: Sequence[ScoreRecord], budget: int
) -> SelectionManifest:
    """Select the ``budget`` most uncertain tiles.

    Parameters
    ----------
    scores : sequence of ScoreRecord
        Uncertainty scores.
    budget : int
        Number of tiles to select.

    Returns
    -------
    SelectionManifest
        ``budget`` entries ranked by descending score, ties by ascending
        ``tile_id``.

    Raises
    ------
    BudgetError
        If ``budget`` exceeds the number of scores or is not positive.
    """
    if budget < 1 or budget > len(scores):
        raise BudgetError(
            f'budget {budget} cannot be met by {len(scores)} scored tile(s)'
        )
    top = rank_scores(scores).iloc[:budget]
    return SelectionManifest.from_ranked(
        Strategy.UNCERTAINTY, budget, zip(top['tile_id'], top['score'])
    )


def score_tiles(
    pool: PoolManifest,
    role: ArtifactRole | str,
    func: Callable[[ArrayContainer], float],
    root: str | Path | None = None,
    *,
    workers: int | None = None,
) -> list[ScoreRecord]:
    """Score every tile of ``pool`` from its ``role`` artifact.

    Raises
    ------
    MissingArtifactsError
        Listing every tile whose artifact is undeclared or absent.
    """
    role = str(role)
    paths = pool.require_artifacts([role], root)

    def score(tile_id: str) -> ScoreRecord:
        return ScoreRecord(tile_id, func(load_array(paths[tile_id][role])))

    return map_ordered(
        score, pool.tile_ids, workers=workers, desc=f'scoring {role}'
    )


def write_scores(scores: Iterable[ScoreRecord], path: str | Path) -> None:
    """Write ``{"tile_id", "score"}`` records in canonical tile order."""
    ordered = sorted(scores, key=lambda s: s.tile_id)
    write_jsonl(
        path, ({'tile_id': s.tile_id, 'score': s.score} for s in ordered)
    )


def read_scores(path: str | Path) -> list[ScoreRecord]:
    """Read score records written by :py:func:`write_scores`."""
    records = []
    for line, raw in iter_jsonl(path):
        tile_id = require_field(raw, 'tile_id', str, path=path, line=line)
        score = require_field(raw, 'score', (int, float), path=path, line=line)
        try:
            records.append(ScoreRecord(tile_id, score))
        except ValidationError as error:
            raise ManifestError(path, line, str(error)) from error
    return records
