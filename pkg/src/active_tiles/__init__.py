"""
This package selects which tiles of a large raster pool to label next. Tiles
are pre-selected by the mean response of a segmentation model, then a
budget is spent by random sampling, MC-dropout uncertainty or core-set
(k-center) coverage of decoder features. Selections are evaluated with
connected-component detection metrics over a threshold sweep.

The model itself is external: it writes per-tile artifacts (probability
maps, dropout stacks, feature maps) in the ALF1 array format, and this
package reads them through JSONL pool manifests.
"""

from active_tiles import datasets
from active_tiles._version import version as __version__
from active_tiles.accessors import DataArrayTileAccessor
from active_tiles.array_store import (
    ArrayContainer,
    PoolManifest,
    PoolRecord,
    SelectionEntry,
    SelectionManifest,
    load_array,
    read_feature_matrix,
    read_manifest,
    read_selection,
    store_array,
    write_feature_matrix,
    write_manifest,
    write_selection,
)
from active_tiles.coreset import (
    CoresetResult,
    PointSet,
    coreset_selection,
    kcenter_cost,
    kcenter_greedy,
    l2_distance,
    robust_kcenter,
)
from active_tiles.evaluator import (
    EvalReport,
    MatchCounts,
    PRPoint,
    binarize,
    connected_components,
    evaluate_pool,
    match_detections,
    pr_curve,
    precision_recall_f1,
    read_report,
    threshold_grid,
    write_curve_csv,
    write_report,
)
from active_tiles.options import set_options
from active_tiles.pipeline import (
    RoundRecord,
    RunConfig,
    build_training_mix,
    compare_reports,
    load_rounds,
    run_lock,
    run_pipeline,
    run_round,
    select_random,
)
from active_tiles.pooler import (
    FeatureVector,
    cell_maxima,
    pool_features,
    pool_tiles,
    stack_features,
)
from active_tiles.scorer import (
    DropoutStack,
    ScoreRecord,
    dropout_variance,
    mean_response,
    preselect,
    rank_by_uncertainty,
    read_scores,
    score_tiles,
    write_scores,
)
from active_tiles.tiler import (
    RasterMeta,
    TileGrid,
    TileRef,
    build_tile_grid,
    grid_to_manifest,
    read_rasters,
)
from active_tiles.types import ArtifactRole, DType, Strategy

__all__ = [
    '__version__',
    'ArrayContainer',
    'ArtifactRole',
    'binarize',
    'build_tile_grid',
    'build_training_mix',
    'cell_maxima',
    'compare_reports',
    'connected_components',
    'CoresetResult',
    'coreset_selection',
    'DataArrayTileAccessor',
    'datasets',
    'dropout_variance',
    'DropoutStack',
    'DType',
    'EvalReport',
    'evaluate_pool',
    'FeatureVector',
    'grid_to_manifest',
    'kcenter_cost',
    'kcenter_greedy',
    'l2_distance',
    'load_array',
    'load_rounds',
    'match_detections',
    'MatchCounts',
    'mean_response',
    'PointSet',
    'pool_features',
    'pool_tiles',
    'PoolManifest',
    'PoolRecord',
    'pr_curve',
    'precision_recall_f1',
    'preselect',
    'PRPoint',
    'rank_by_uncertainty',
    'RasterMeta',
    'read_feature_matrix',
    'read_manifest',
    'read_rasters',
    'read_report',
    'read_scores',
    'read_selection',
    'robust_kcenter',
    'RoundRecord',
    'run_lock',
    'run_pipeline',
    'run_round',
    'RunConfig',
    'score_tiles',
    'ScoreRecord',
    'select_random',
    'SelectionEntry',
    'SelectionManifest',
    'set_options',
    'stack_features',
    'store_array',
    'Strategy',
    'threshold_grid',
    'TileGrid',
    'TileRef',
    'write_curve_csv',
    'write_feature_matrix',
    'write_manifest',
    'write_report',
    'write_scores',
    'write_selection',
]
