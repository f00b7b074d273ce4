"""Selection pipeline: pre-selection, strategy, budget and rounds.

A run scores every candidate by mean response, keeps the top fraction and
applies one strategy to the survivors:

- ``random`` draws a uniform sample with a seeded generator;
- ``uncertainty`` ranks by MC-dropout variance;
- ``coreset`` solves k-center on pooled decoder features;
- ``unlimited`` is the baseline that takes every positive tile plus a share
  of negatives, without pre-selection.

Seeded sampling uses numpy's :py:class:`~numpy.random.PCG64` bit generator
seeded with the 64-bit run seed. Uniform integers in ``[0, n)`` are drawn
from raw 64-bit outputs by rejection, and samples are taken by a partial
Fisher-Yates shuffle of the canonical candidate order. Round ``i`` uses the
stream ``PCG64(seed).jumped(i)``.
"""

from __future__ import annotations

import dataclasses
import json
import logging
import math
import os
import tomllib
import warnings
from collections.abc import Iterable, Iterator, Mapping, Sequence
from contextlib import contextmanager
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any

import numpy as np
import pandas as pd

from active_tiles._helpers import (
    iter_jsonl,
    require_field,
    validate_fraction,
    write_jsonl,
)
from active_tiles.array_store import (
    PoolManifest,
    SelectionEntry,
    SelectionManifest,
    write_feature_matrix,
    write_selection,
)
from active_tiles.coreset import (
    PointSet,
    coreset_selection,
    kcenter_greedy,
    robust_kcenter,
)
from active_tiles.errors import (
    BudgetError,
    ManifestError,
    MissingArtifactsError,
    PoolExhaustedError,
    RunLockedError,
    StorageError,
    ValidationError,
)
from active_tiles.evaluator import EvalReport
from active_tiles.options import OPTIONS
from active_tiles.pooler import pool_tiles, stack_features
from active_tiles.scorer import (
    mean_response,
    preselect,
    rank_by_uncertainty,
    score_tiles,
    variance_scorer,
    write_scores,
)
from active_tiles.types import ArtifactRole, Strategy

__all__ = [
    'LOCK_NAME',
    'RoundRecord',
    'RunConfig',
    'build_training_mix',
    'compare_reports',
    'load_rounds',
    'run_lock',
    'run_pipeline',
    'run_round',
    'select_random',
]

logger = logging.getLogger(__name__)

LOCK_NAME = '.alctl.lock'
ROUNDS_NAME = 'rounds.jsonl'
RUN_NAME = 'run.json'

_MAX_SEED = 2**64


def _option(key: str) -> Any:
    return field(default_factory=lambda: OPTIONS[key])


def _is_int(value: Any) -> bool:
    return isinstance(value, int) and not isinstance(value, bool)


@dataclass(frozen=True)
class RunConfig:
    """Parameters of one selection run.

    Defaults are read from :py:data:`~active_tiles.options.OPTIONS` when the
    config is created.

    Attributes
    ----------
    strategy : Strategy
        ``random``, ``uncertainty``, ``coreset`` or ``unlimited``.
    budget : int
        Number of tiles to select.
    seed : int, optional
        Unsigned 64-bit seed. Required by ``random``, and by ``unlimited``
        when negatives are sampled.
    preselect_fraction : float
        Fraction of tiles kept by mean response (5 %).
    dropout_passes : int
        Expected number of stochastic predictions per stack (10).
    pool_grid : int
        Pooling grid size (8).
    tile_size : int
        Tile size in pixels (512).
    outlier_budget : int
        Outliers tolerated by core-set selection (0).
    positive_ratio : float
        Share of positive tiles in the ``unlimited`` mix (0.9).
    """

    strategy: Strategy
    budget: int
    seed: int | None = None
    preselect_fraction: float = _option('preselect_fraction')
    dropout_passes: int = _option('dropout_passes')
    pool_grid: int = _option('pool_grid')
    tile_size: int = _option('tile_size')
    outlier_budget: int = _option('outlier_budget')
    positive_ratio: float = _option('positive_ratio')

    def __post_init__(self) -> None:
        try:
            object.__setattr__(self, 'strategy', Strategy(self.strategy))
        except ValueError:
            raise ValidationError(
                f'unknown strategy {self.strategy!r}; expected one of '
                f'{[s.value for s in Strategy]}'
            ) from None
        if not _is_int(self.budget) or self.budget < 1:
            raise ValidationError(
                f'budget must be a positive integer, got {self.budget!r}'
            )
        if self.seed is not None and not (
            _is_int(self.seed) and 0 <= self.seed < _MAX_SEED
        ):
            raise ValidationError(
                f'seed must be an unsigned 64-bit integer, got {self.seed!r}'
            )
        validate_fraction(self.preselect_fraction, 'preselect_fraction')
        validate_fraction(self.positive_ratio, 'positive_ratio')
        if self.seed is None and (
            self.strategy is Strategy.RANDOM
            or (
                self.strategy is Strategy.UNLIMITED
                and self.positive_ratio < 1
            )
        ):
            raise ValidationError(
                f'strategy {self.strategy.value!r} requires a seed'
            )
        for name in ('pool_grid', 'tile_size'):
            value = getattr(self, name)
            if not _is_int(value) or value < 1:
                raise ValidationError(
                    f'{name} must be a positive integer, got {value!r}'
                )
        if not _is_int(self.dropout_passes) or self.dropout_passes < 2:
            raise ValidationError(
                f'dropout_passes must be at least 2, got '
                f'{self.dropout_passes!r}'
            )
        if not _is_int(self.outlier_budget) or self.outlier_budget < 0:
            raise ValidationError(
                f'outlier_budget must be non-negative, got '
                f'{self.outlier_budget!r}'
            )

    @classmethod
    def from_mapping(cls, values: Mapping[str, Any]) -> RunConfig:
        """Build a config from a flat mapping; None values are ignored."""
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(values) - names)
        if unknown:
            raise ValidationError(f'unknown configuration keys {unknown!r}')
        missing = sorted(
            key
            for key in ('strategy', 'budget')
            if values.get(key) is None
        )
        if missing:
            raise ValidationError(f'missing configuration keys {missing!r}')
        return cls(**{k: v for k, v in values.items() if v is not None})

    @classmethod
    def from_toml(
        cls, path: str | Path, **overrides: Any
    ) -> RunConfig:
        """Read a TOML file of ``key = value`` pairs.

        Keys of ``overrides`` that are not None take precedence over the
        file.
        """
        try:
            with open(path, 'rb') as handle:
                values = tomllib.load(handle)
        except OSError as error:
            raise StorageError(
                path, f'cannot open: {error.strerror}'
            ) from error
        except tomllib.TOMLDecodeError as error:
            raise ValidationError(f'{path}: invalid TOML: {error}') from error
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls.from_mapping(values)

    def replace(self, **changes: Any) -> RunConfig:
        """Return a copy with the non-None ``changes`` applied."""
        return dataclasses.replace(
            self, **{k: v for k, v in changes.items() if v is not None}
        )

    def to_dict(self) -> dict[str, Any]:
        values = dataclasses.asdict(self)
        values['strategy'] = self.strategy.value
        return values


# ------------------------------------------------------------ seeded sampling
def _bit_generator(seed: int, stream: int = 0) -> np.random.PCG64:
    if not (_is_int(seed) and 0 <= seed < _MAX_SEED):
        raise ValidationError(
            f'seed must be an unsigned 64-bit integer, got {seed!r}'
        )
    generator = np.random.PCG64(seed)
    return generator.jumped(stream) if stream else generator


def _uniform_below(generator: np.random.PCG64, bound: int) -> int:
    """Uniform integer in ``[0, bound)`` by rejection over raw outputs."""
    limit = _MAX_SEED - _MAX_SEED % bound
    while True:
        value = int(generator.random_raw())
        if value < limit:
            return value % bound


def _sample(
    items: Sequence[str], count: int, generator: np.random.PCG64
) -> list[str]:
    """First ``count`` items of a partial Fisher-Yates shuffle."""
    items = list(items)
    for i in range(count):
        j = i + _uniform_below(generator, len(items) - i)
        items[i], items[j] = items[j], items[i]
    return items[:count]


def select_random(
    pool: PoolManifest, budget: int, seed: int, *, stream: int = 0
) -> SelectionManifest:
    """Draw ``budget`` tiles uniformly without replacement.

    Parameters
    ----------
    pool : PoolManifest
        The candidates, usually the pre-selected tiles.
    budget : int
        Sample size.
    seed : int
        Unsigned 64-bit seed.
    stream : int, optional
        Index of an independent stream, e.g. the round index.

    Returns
    -------
    SelectionManifest
        Entries in draw order without score. The same seed and pool give
        the same selection.

    Raises
    ------
    BudgetError
        If ``budget`` is not positive or exceeds the pool size.
    """
    if budget < 1 or budget > len(pool):
        raise BudgetError(
            f'budget {budget} cannot be met by {len(pool)} candidate(s)'
        )
    drawn = _sample(pool.tile_ids, budget, _bit_generator(seed, stream))
    return SelectionManifest.from_ranked(
        Strategy.RANDOM, budget, ((tile_id, None) for tile_id in drawn)
    )


def build_training_mix(
    positives: Iterable[str],
    negatives: Iterable[str],
    positive_ratio: float | None = None,
    seed: int = 0,
    *,
    stream: int = 0,
) -> list[str]:
    """Mix every positive tile with a seeded sample of negatives.

    Parameters
    ----------
    positives : iterable of str
        Tiles containing objects.
    negatives : iterable of str
        Tiles without objects.
    positive_ratio : float, optional
        Share of positives in ``(0, 1]`` in the mix. Defaults to the
        ``positive_ratio`` option (0.9).
    seed : int, optional
        Unsigned 64-bit seed of the negative sample.
    stream : int, optional
        Index of an independent stream.

    Returns
    -------
    list of str
        The positives plus ``round(len(positives) * (1 - r) / r)``
        negatives, sorted. If there are fewer negatives, all are taken and
        a warning is issued.

    Raises
    ------
    ValidationError
        If there are no positives.
    """
    if positive_ratio is None:
        positive_ratio = OPTIONS['positive_ratio']
    ratio = validate_fraction(positive_ratio, 'positive_ratio')
    positives = sorted(set(positives))
    if not positives:
        raise ValidationError('the training mix needs at least one positive')
    taken = set(positives)
    negatives = sorted(set(negatives) - taken)
    exact = Fraction(str(ratio))
    wanted = math.floor(
        len(positives) * (1 - exact) / exact + Fraction(1, 2)
    )
    if wanted > len(negatives):
        warnings.warn(
            f'{wanted} negatives requested but only {len(negatives)} '
            'available; taking all of them',
            stacklevel=2,
        )
        wanted = len(negatives)
    sampled = _sample(negatives, wanted, _bit_generator(seed, stream))
    logger.info(
        'training mix: %d positives, %d negatives', len(positives), wanted
    )
    return sorted(taken.union(sampled))


# ------------------------------------------------------------------ runs
def _require_artifacts(
    requests: Iterable[tuple[PoolManifest, Sequence[str]]],
    root: str | Path | None,
) -> None:
    """Check several pools at once so every missing artifact is listed."""
    missing: list[tuple[str, str]] = []
    for pool, roles in requests:
        try:
            pool.require_artifacts(roles, root)
        except MissingArtifactsError as error:
            missing.extend(error.missing)
    if missing:
        raise MissingArtifactsError(missing)


def _select_unlimited(
    config: RunConfig, pool: PoolManifest, stream: int
) -> SelectionManifest:
    unlabelled = [r.tile_id for r in pool if r.positive is None]
    if unlabelled:
        raise ValidationError(
            'the unlimited baseline needs the positive flag of every tile; '
            f'missing for {unlabelled[:10]!r}'
        )
    mix = build_training_mix(
        [r.tile_id for r in pool if r.positive],
        [r.tile_id for r in pool if not r.positive],
        config.positive_ratio,
        0 if config.seed is None else config.seed,
        stream=stream,
    )
    return SelectionManifest.from_ranked(
        Strategy.UNLIMITED, config.budget, ((t, None) for t in mix)
    )


def _write_run_metadata(
    run_dir: Path, config: RunConfig, summary: Mapping[str, Any]
) -> None:
    metadata = {'config': config.to_dict(), **summary}
    path = run_dir / RUN_NAME
    try:
        path.write_text(
            json.dumps(metadata, indent=2, sort_keys=True) + '\n',
            encoding='utf-8',
        )
    except OSError as error:
        raise StorageError(path, f'cannot write: {error.strerror}') from error


def run_pipeline(
    config: RunConfig,
    pool: PoolManifest,
    artifact_root: str | Path | None = None,
    run_dir: str | Path | None = None,
    *,
    labelled: Iterable[str] = (),
    round_index: int = 0,
    workers: int | None = None,
) -> SelectionManifest:
    """Run one selection: pre-select, apply the strategy, meet the budget.

    Parameters
    ----------
    config : RunConfig
        The run parameters.
    pool : PoolManifest
        All tiles. Tiles in ``labelled`` are not candidates.
    artifact_root : str or Path, optional
        Directory against which relative artifact paths are resolved.
    run_dir : str or Path, optional
        If given, intermediate scores, the selection and ``run.json`` are
        written there.
    labelled : iterable of str, optional
        Already labelled tiles. Core-set selection uses them as seeds.
    round_index : int, optional
        Stream index of the random generator.
    workers : int, optional
        Number of worker threads for per-tile work.

    Returns
    -------
    SelectionManifest
        Exactly ``config.budget`` entries, except for the ``unlimited``
        baseline.

    Raises
    ------
    MissingArtifactsError
        Listing every missing artifact of the run.
    BudgetError
        If fewer tiles survive pre-selection than the budget.
    """
    labelled = sorted(set(labelled))
    unknown = [t for t in labelled if t not in pool]
    if unknown:
        raise ValidationError(f'labelled tiles not in the pool: {unknown!r}')
    candidates = pool.exclude(labelled)
    if not len(candidates):
        raise ValidationError('the pool holds no candidate tiles')
    run_dir = None if run_dir is None else Path(run_dir)
    files: list[str] = []
    summary: dict[str, Any] = {
        'round_index': round_index,
        'pool_size': len(pool),
        'candidates': len(candidates),
        'labelled': len(labelled),
    }
    logger.info(
        'run %s: %d candidates, %d labelled, budget %d',
        config.strategy.value,
        len(candidates),
        len(labelled),
        config.budget,
    )

    if config.strategy is Strategy.UNLIMITED:
        selection = _select_unlimited(config, candidates, round_index)
    else:
        roles = [str(ArtifactRole.PROBMAP)]
        if config.strategy is Strategy.UNCERTAINTY:
            roles.append(str(ArtifactRole.DROPOUT_STACK))
        elif config.strategy is Strategy.CORESET:
            roles.append(str(ArtifactRole.FEATURES))
        requests = [(candidates, roles)]
        if config.strategy is Strategy.CORESET and labelled:
            requests.append(
                (pool.subset(labelled), [str(ArtifactRole.FEATURES)])
            )
        _require_artifacts(requests, artifact_root)

        prescores = score_tiles(
            candidates,
            ArtifactRole.PROBMAP,
            mean_response,
            artifact_root,
            workers=workers,
        )
        kept = preselect(prescores, config.preselect_fraction)
        summary['preselected'] = len(kept)
        if run_dir is not None:
            write_scores(prescores, run_dir / 'prescore.jsonl')
            files.append('prescore.jsonl')
        if config.budget > len(kept):
            raise BudgetError(
                f'budget {config.budget} exceeds the {len(kept)} '
                'pre-selected candidate(s)'
            )
        shortlist = candidates.subset(kept)

        if config.strategy is Strategy.RANDOM:
            assert config.seed is not None
            selection = select_random(
                shortlist, config.budget, config.seed, stream=round_index
            )
        elif config.strategy is Strategy.UNCERTAINTY:
            scores = score_tiles(
                shortlist,
                ArtifactRole.DROPOUT_STACK,
                variance_scorer(config.dropout_passes),
                artifact_root,
                workers=workers,
            )
            if run_dir is not None:
                write_scores(scores, run_dir / 'uncertainty.jsonl')
                files.append('uncertainty.jsonl')
            selection = rank_by_uncertainty(scores, config.budget)
        else:
            vectors = pool_tiles(
                pool.subset([*kept, *labelled]),
                artifact_root,
                config.pool_grid,
                workers=workers,
            )
            features = stack_features(vectors)
            if run_dir is not None:
                write_feature_matrix(
                    features.values,
                    features['tile'].values.tolist(),
                    run_dir / 'features.alf',
                )
                files.extend(['features.alf', 'features.rows.jsonl'])
            points = PointSet.from_dataarray(features, labelled)
            if config.outlier_budget:
                result = robust_kcenter(
                    points, config.budget, config.outlier_budget
                )
                summary['outliers'] = list(result.outliers)
            else:
                result = kcenter_greedy(points, config.budget)
            summary['covering_radius'] = result.covering_radius
            selection = coreset_selection(result, config.budget)

    summary['selected'] = len(selection)
    logger.info('selected %d tiles', len(selection))
    if run_dir is not None:
        write_selection(selection, run_dir / 'selection.jsonl')
        files.append('selection.jsonl')
        summary['files'] = files
        _write_run_metadata(run_dir, config, summary)
    return selection


# ------------------------------------------------------------------ rounds
@dataclass(frozen=True)
class RoundRecord:
    """Bookkeeping of one active-learning round.

    Attributes
    ----------
    round_index : int
        Zero-based index of the round.
    selection : SelectionManifest
        The tiles selected in this round.
    cumulative_labelled : tuple of str
        Every tile labelled so far, this round's selection last.
    eval_report : str, optional
        Path of the evaluation report of the model trained after this round.
    """

    round_index: int
    selection: SelectionManifest
    cumulative_labelled: tuple[str, ...]
    eval_report: str | None = None

    def __post_init__(self) -> None:
        object.__setattr__(
            self, 'cumulative_labelled', tuple(self.cumulative_labelled)
        )
        if self.round_index < 0:
            raise ValidationError(
                f'round_index must be non-negative, got {self.round_index}'
            )
        if len(set(self.cumulative_labelled)) != len(self.cumulative_labelled):
            raise ValidationError('a tile is labelled twice across rounds')
        if not set(self.selection.tile_ids) <= set(self.cumulative_labelled):
            raise ValidationError(
                'the selection is not part of the labelled tiles'
            )

    def to_dict(self) -> dict[str, Any]:
        return {
            'round_index': self.round_index,
            'strategy': self.selection.strategy.value,
            'budget': self.selection.budget,
            'selection': [
                {'rank': e.rank, 'tile_id': e.tile_id, 'score': e.score}
                for e in self.selection.entries
            ],
            'cumulative_labelled': list(self.cumulative_labelled),
            'eval_report': self.eval_report,
        }

    @classmethod
    def from_dict(
        cls, raw: Mapping[str, Any], *, path: str | Path | None, line: int
    ) -> RoundRecord:
        index = require_field(raw, 'round_index', int, path=path, line=line)
        strategy = require_field(raw, 'strategy', str, path=path, line=line)
        budget = require_field(raw, 'budget', int, path=path, line=line)
        entries = require_field(raw, 'selection', list, path=path, line=line)
        labelled = require_field(
            raw, 'cumulative_labelled', list, path=path, line=line
        )
        report = raw.get('eval_report')
        try:
            selection = SelectionManifest(
                Strategy(strategy),
                budget,
                tuple(
                    SelectionEntry(e['rank'], e['tile_id'], e.get('score'))
                    for e in entries
                ),
            )
            return cls(index, selection, tuple(labelled), report)
        except (KeyError, TypeError, ValueError) as error:
            raise ManifestError(path, line, str(error)) from error


def load_rounds(run_dir: str | Path) -> list[RoundRecord]:
    """Read the round history of a run directory (empty if none)."""
    path = Path(run_dir) / ROUNDS_NAME
    if not path.exists():
        return []
    rounds = [
        RoundRecord.from_dict(raw, path=path, line=line)
        for line, raw in iter_jsonl(path)
    ]
    for expected, record in enumerate(rounds):
        if record.round_index != expected:
            raise ManifestError(
                path, expected + 1, f'expected round {expected}'
            )
    return rounds


def run_round(
    state: Sequence[RoundRecord],
    config: RunConfig,
    pool: PoolManifest,
    artifact_root: str | Path | None = None,
    run_dir: str | Path | None = None,
    *,
    initial_labelled: Iterable[str] = (),
    eval_report: str | Path | None = None,
    workers: int | None = None,
) -> RoundRecord:
    """Run the next active-learning round.

    Tiles labelled in earlier rounds are removed from the candidates and
    seed core-set selection. With ``run_dir``, the round's files go to
    ``round_<index>/`` and the history is rewritten to ``rounds.jsonl``.

    Parameters
    ----------
    state : sequence of RoundRecord
        The previous rounds, in order.
    config : RunConfig
        The run parameters.
    pool : PoolManifest
        All tiles.
    artifact_root : str or Path, optional
        Directory against which relative artifact paths are resolved.
    run_dir : str or Path, optional
        Run directory.
    initial_labelled : iterable of str, optional
        Tiles labelled before the first round.
    eval_report : str or Path, optional
        Evaluation report to attach to the new round.
    workers : int, optional
        Number of worker threads for per-tile work.

    Returns
    -------
    RoundRecord

    Raises
    ------
    PoolExhaustedError
        If fewer unlabelled tiles remain than the budget.
    """
    if config.strategy is Strategy.UNLIMITED:
        raise ValidationError('the unlimited baseline does not run in rounds')
    round_index = len(state)
    labelled = (
        list(state[-1].cumulative_labelled)
        if state
        else sorted(set(initial_labelled))
    )
    remaining = len(pool) - sum(1 for t in labelled if t in pool)
    if remaining < config.budget:
        raise PoolExhaustedError(
            f'round {round_index}: {remaining} unlabelled tile(s) left for '
            f'a budget of {config.budget}'
        )
    round_dir = None
    if run_dir is not None:
        round_dir = Path(run_dir) / f'round_{round_index:03d}'
        round_dir.mkdir(parents=True, exist_ok=True)
    selection = run_pipeline(
        config,
        pool,
        artifact_root,
        round_dir,
        labelled=labelled,
        round_index=round_index,
        workers=workers,
    )
    record = RoundRecord(
        round_index,
        selection,
        (*labelled, *selection.tile_ids),
        None if eval_report is None else str(eval_report),
    )
    if run_dir is not None:
        write_jsonl(
            Path(run_dir) / ROUNDS_NAME,
            [r.to_dict() for r in [*state, record]],
        )
    logger.info(
        'round %d: %d tiles labelled in total',
        round_index,
        len(record.cumulative_labelled),
    )
    return record


@contextmanager
def run_lock(run_dir: str | Path) -> Iterator[Path]:
    """Hold the single-writer lock of a run directory.

    Raises
    ------
    RunLockedError
        If the lock file already exists.
    """
    path = Path(run_dir) / LOCK_NAME
    try:
        fd = os.open(path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError:
        raise RunLockedError(
            f'{run_dir} is locked by another run; remove {path} if stale'
        ) from None
    except OSError as error:
        raise StorageError(path, f'cannot lock: {error.strerror}') from error
    try:
        os.write(fd, f'{os.getpid()}\n'.encode())
        os.close(fd)
        yield path
    finally:
        path.unlink(missing_ok=True)


# ------------------------------------------------------------------ reports
def _gain(delta: float) -> str:
    return f'{delta * 100:+.1f}%'


def compare_reports(
    baseline: EvalReport, candidate: EvalReport
) -> tuple[pd.DataFrame, pd.DataFrame]:
    """Compare two evaluations at their own operating points.

    Returns
    -------
    table : pd.DataFrame
        Rows ``precision``, ``recall`` and ``f1``; columns ``baseline``,
        ``candidate``, ``delta`` and ``gain`` (e.g. ``'+8.0%'``).
    curves : pd.DataFrame
        Both PR curves merged on ``threshold``.

    Raises
    ------
    ValidationError
        If the reports were computed on different tiles.
    """
    if baseline.tile_ids != candidate.tile_ids:
        raise ValidationError('the reports cover different test tiles')
    rows = {}
    for metric in ('precision', 'recall', 'f1'):
        before = getattr(baseline.operating, metric)
        after = getattr(candidate.operating, metric)
        rows[metric] = {
            'baseline': before,
            'candidate': after,
            'delta': after - before,
            'gain': _gain(after - before),
        }
    table = pd.DataFrame.from_dict(rows, orient='index')
    table.index.name = 'metric'
    curves = baseline.to_frame().merge(
        candidate.to_frame(),
        on='threshold',
        how='outer',
        suffixes=('_baseline', '_candidate'),
    )
    return table, curves
