"""The ``alctl`` command line.

Exit codes: 0 success, 2 invalid input, 3 missing artifacts, 4 budget or
pool exhausted, 1 any other failure.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from collections.abc import Sequence
from pathlib import Path
from typing import Any

from active_tiles._version import version as __version__
from active_tiles.array_store import (
    read_manifest,
    read_selection,
    write_feature_matrix,
    write_manifest,
)
from active_tiles.errors import (
    ActiveTilesError,
    BudgetError,
    MissingArtifactsError,
    ValidationError,
)
from active_tiles.evaluator import (
    evaluate_pool,
    read_report,
    threshold_grid,
    write_curve_csv,
    write_report,
)
from active_tiles.options import set_options
from active_tiles.pipeline import (
    RunConfig,
    compare_reports,
    load_rounds,
    run_lock,
    run_pipeline,
    run_round,
)
from active_tiles.pooler import pool_tiles, stack_features
from active_tiles.scorer import (
    mean_response,
    score_tiles,
    variance_scorer,
    write_scores,
)
from active_tiles.tiler import (
    DEFAULT_ARTIFACT_TEMPLATE,
    build_tile_grid,
    grid_to_manifest,
    read_rasters,
)
from active_tiles.types import ArtifactRole, Strategy

__all__ = ['ARTIFACT_ROOT_ENV', 'configure_logging', 'main']

logger = logging.getLogger(__name__)

ARTIFACT_ROOT_ENV = 'ACTIVE_TILES_ARTIFACT_ROOT'

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_INVALID = 2
EXIT_MISSING = 3
EXIT_BUDGET = 4

# RunConfig fields that can be set from the command line.
_CONFIG_FLAGS = (
    'strategy',
    'budget',
    'seed',
    'preselect_fraction',
    'dropout_passes',
    'pool_grid',
    'tile_size',
    'outlier_budget',
    'positive_ratio',
)


def configure_logging(verbosity: int) -> None:
    """Configure the root logger: WARNING, INFO with -v, DEBUG with -vv."""
    level = logging.WARNING
    if verbosity == 1:
        level = logging.INFO
    elif verbosity >= 2:
        level = logging.DEBUG
    logging.basicConfig(
        level=level,
        format='%(asctime)s - %(levelname)s - %(name)s - %(message)s',
        datefmt='%H:%M:%S',
    )


def _artifact_root(args: argparse.Namespace) -> Path:
    """``--artifact-root``, else the environment, else the pool's folder."""
    if args.artifact_root is not None:
        return args.artifact_root
    env = os.environ.get(ARTIFACT_ROOT_ENV)
    if env:
        return Path(env)
    return args.pool.resolve().parent


def _run_config(args: argparse.Namespace) -> RunConfig:
    flags = {name: getattr(args, name) for name in _CONFIG_FLAGS}
    if args.config is not None:
        return RunConfig.from_toml(args.config, **flags)
    return RunConfig.from_mapping(flags)


def _labelled(paths: Sequence[Path]) -> list[str]:
    tile_ids: list[str] = []
    for path in paths:
        tile_ids.extend(read_selection(path).tile_ids)
    return tile_ids


# ------------------------------------------------------------------ commands
def _tile_command(args: argparse.Namespace) -> int:
    grids = [
        build_tile_grid(raster, args.tile_size)
        for raster in read_rasters(args.rasters)
    ]
    pool = grid_to_manifest(grids, args.template)
    write_manifest(pool, args.out)
    logger.info('wrote %d tiles to %s', len(pool), args.out)
    return EXIT_OK


def _prescore_command(args: argparse.Namespace) -> int:
    pool = read_manifest(args.pool)
    scores = score_tiles(
        pool, ArtifactRole.PROBMAP, mean_response, _artifact_root(args)
    )
    write_scores(scores, args.out)
    logger.info('wrote %d scores to %s', len(scores), args.out)
    return EXIT_OK


def _score_uncertainty_command(args: argparse.Namespace) -> int:
    pool = read_manifest(args.pool)
    scores = score_tiles(
        pool,
        ArtifactRole.DROPOUT_STACK,
        variance_scorer(args.dropout_passes),
        _artifact_root(args),
    )
    write_scores(scores, args.out)
    logger.info('wrote %d scores to %s', len(scores), args.out)
    return EXIT_OK


def _pool_features_command(args: argparse.Namespace) -> int:
    pool = read_manifest(args.pool)
    features = stack_features(
        pool_tiles(pool, _artifact_root(args), args.pool_grid)
    )
    rows = write_feature_matrix(
        features.values, features['tile'].values.tolist(), args.out
    )
    logger.info('wrote %s and %s', args.out, rows)
    return EXIT_OK


def _select_command(args: argparse.Namespace) -> int:
    config = _run_config(args)
    pool = read_manifest(args.pool)
    args.run_dir.mkdir(parents=True, exist_ok=True)
    with run_lock(args.run_dir):
        selection = run_pipeline(
            config,
            pool,
            _artifact_root(args),
            args.run_dir,
            labelled=_labelled(args.labelled),
        )
    print(f'selected {len(selection)} tiles into {args.run_dir}')
    return EXIT_OK


def _round_command(args: argparse.Namespace) -> int:
    config = _run_config(args)
    pool = read_manifest(args.pool)
    args.run_dir.mkdir(parents=True, exist_ok=True)
    with run_lock(args.run_dir):
        state = load_rounds(args.run_dir)
        record = run_round(
            state,
            config,
            pool,
            _artifact_root(args),
            args.run_dir,
            initial_labelled=_labelled(args.labelled),
            eval_report=args.eval_report,
        )
    print(
        f'round {record.round_index}: selected {len(record.selection)}, '
        f'{len(record.cumulative_labelled)} labelled in total'
    )
    return EXIT_OK


def _evaluate_command(args: argparse.Namespace) -> int:
    pool = read_manifest(args.pool)
    report = evaluate_pool(
        pool, _artifact_root(args), threshold_grid(args.threshold_steps)
    )
    write_report(report, args.out)
    if args.csv is not None:
        write_curve_csv(report, args.csv)
    point = report.operating
    print(
        f'threshold {point.threshold:g}: precision {point.precision:.4f}, '
        f'recall {point.recall:.4f}, f1 {point.f1:.4f}'
    )
    return EXIT_OK


def _report_command(args: argparse.Namespace) -> int:
    table, curves = compare_reports(
        read_report(args.baseline), read_report(args.candidate)
    )
    print(table.to_string())
    if args.csv is not None:
        curves.to_csv(args.csv, index=False)
    return EXIT_OK


# ------------------------------------------------------------------ parser
def _add_pool_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        '--pool', type=Path, required=True, help='Pool manifest (JSONL)'
    )
    parser.add_argument(
        '--artifact-root',
        type=Path,
        default=None,
        help=(
            'Root of relative artifact paths (default: '
            f'${ARTIFACT_ROOT_ENV}, else the folder of the pool manifest)'
        ),
    )


def _add_config_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        '--config', type=Path, default=None, help='TOML run configuration'
    )
    parser.add_argument(
        '--strategy', choices=[s.value for s in Strategy], default=None
    )
    parser.add_argument('--budget', type=int, default=None)
    parser.add_argument('--seed', type=int, default=None)
    parser.add_argument('--preselect-fraction', type=float, default=None)
    parser.add_argument('--dropout-passes', type=int, default=None)
    parser.add_argument('--pool-grid', type=int, default=None)
    parser.add_argument('--tile-size', type=int, default=None)
    parser.add_argument('--outlier-budget', type=int, default=None)
    parser.add_argument('--positive-ratio', type=float, default=None)
    parser.add_argument(
        '--run-dir', type=Path, required=True, help='Output run directory'
    )
    parser.add_argument(
        '--labelled',
        type=Path,
        action='append',
        default=[],
        help='Selection file of already labelled tiles (repeatable)',
    )


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog='alctl', description='Active-learning tile selection'
    )
    parser.add_argument(
        '--version', action='version', version=f'%(prog)s {__version__}'
    )
    parser.add_argument(
        '-v',
        '--verbose',
        action='count',
        default=0,
        help='Increase verbosity (-v info, -vv debug)',
    )
    parser.add_argument(
        '--workers', type=int, default=None, help='Worker threads per stage'
    )
    parser.add_argument(
        '--progress', action='store_true', help='Show progress bars'
    )
    subparsers = parser.add_subparsers(dest='command', required=True)

    tile = subparsers.add_parser('tile', help='Tile rasters into a pool')
    tile.add_argument(
        '--rasters', type=Path, required=True, help='RasterMeta JSONL file'
    )
    tile.add_argument('--out', type=Path, required=True)
    tile.add_argument('--tile-size', type=int, default=None)
    tile.add_argument(
        '--template',
        default=DEFAULT_ARTIFACT_TEMPLATE,
        help='Artifact path template with {role}, {tile_id}, {image_id}',
    )
    tile.set_defaults(func=_tile_command)

    prescore = subparsers.add_parser(
        'prescore', help='Score tiles by mean response'
    )
    _add_pool_arguments(prescore)
    prescore.add_argument('--out', type=Path, required=True)
    prescore.set_defaults(func=_prescore_command)

    uncertainty = subparsers.add_parser(
        'score-uncertainty', help='Score tiles by MC-dropout variance'
    )
    _add_pool_arguments(uncertainty)
    uncertainty.add_argument('--out', type=Path, required=True)
    uncertainty.add_argument('--dropout-passes', type=int, default=None)
    uncertainty.set_defaults(func=_score_uncertainty_command)

    features = subparsers.add_parser(
        'pool-features', help='Pool feature maps into a feature matrix'
    )
    _add_pool_arguments(features)
    features.add_argument(
        '--out', type=Path, required=True, help='Feature matrix (ALF1)'
    )
    features.add_argument('--pool-grid', type=int, default=None)
    features.set_defaults(func=_pool_features_command)

    select = subparsers.add_parser('select', help='Run one selection')
    _add_pool_arguments(select)
    _add_config_arguments(select)
    select.set_defaults(func=_select_command)

    round_ = subparsers.add_parser(
        'round', help='Run the next active-learning round'
    )
    _add_pool_arguments(round_)
    _add_config_arguments(round_)
    round_.add_argument(
        '--eval-report',
        type=Path,
        default=None,
        help='Evaluation report to attach to the round',
    )
    round_.set_defaults(func=_round_command)

    evaluate = subparsers.add_parser(
        'evaluate', help='Sweep thresholds against ground truth'
    )
    _add_pool_arguments(evaluate)
    evaluate.add_argument(
        '--out', type=Path, required=True, help='Report (JSON)'
    )
    evaluate.add_argument(
        '--csv', type=Path, default=None, help='PR curve (CSV)'
    )
    evaluate.add_argument('--threshold-steps', type=int, default=None)
    evaluate.set_defaults(func=_evaluate_command)

    report = subparsers.add_parser('report', help='Compare two reports')
    report.add_argument('baseline', type=Path)
    report.add_argument('candidate', type=Path)
    report.add_argument(
        '--csv', type=Path, default=None, help='Merged PR curves (CSV)'
    )
    report.set_defaults(func=_report_command)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    configure_logging(args.verbose)
    options: dict[str, Any] = {'progress': args.progress}
    if args.workers is not None:
        options['workers'] = args.workers
    try:
        with set_options(**options):
            return args.func(args)
    except MissingArtifactsError as error:
        logger.error('%s', error)
        return EXIT_MISSING
    except BudgetError as error:
        logger.error('%s', error)
        return EXIT_BUDGET
    except ValidationError as error:
        logger.error('%s', error)
        return EXIT_INVALID
    except ActiveTilesError as error:
        logger.error('%s', error)
        return EXIT_FAILURE
    except ValueError as error:
        # set_options rejects invalid --workers values
        logger.error('%s', error)
        return EXIT_INVALID


if __name__ == '__main__':
    sys.exit(main())
