import json
from collections import Counter

import hypothesis as hp
import hypothesis.strategies as st
import numpy as np
import pytest as pt

import active_tiles
from active_tiles import datasets
from active_tiles.array_store import (
    ArrayContainer,
    PoolManifest,
    PoolRecord,
    SelectionManifest,
    read_feature_matrix,
    read_manifest,
    store_array,
)
from active_tiles.coreset import PointSet, kcenter_cost
from active_tiles.errors import (
    BudgetError,
    MissingArtifactsError,
    PoolExhaustedError,
    RunLockedError,
    StorageError,
    ValidationError,
)
from active_tiles.evaluator import EvalReport, MatchCounts, PRPoint
from active_tiles.pipeline import (
    LOCK_NAME,
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
from active_tiles.types import Strategy
from tests.constants import (
    BUDGETS,
    DROPOUT_PASSES,
    POOL_GRID,
    POSITIVE_RATIO,
    PRESELECT_FRACTION,
    TILE_SIZE,
    UNLIMITED_POSITIVES,
    UNLIMITED_TILES,
)


def _pool(n: int, prefix: str = 't') -> PoolManifest:
    return PoolManifest(
        tuple(PoolRecord(f'{prefix}{i:04d}', 'img') for i in range(n))
    )


def _cluster(tile_id: str, n_clusters: int = 3) -> int:
    return int(tile_id.rsplit('_', 1)[1]) % n_clusters


@pt.fixture
def synthetic(tmp_path):
    """A 30-tile pool with every artifact, in three feature clusters."""
    root = tmp_path / 'artifacts'
    return root, datasets.write_synthetic_pool(root, 30)


class TestRunConfig:
    def test_defaults_follow_options(self):
        """Should default to the method constants."""
        config = RunConfig('uncertainty', 10)
        assert config.preselect_fraction == PRESELECT_FRACTION
        assert config.dropout_passes == DROPOUT_PASSES
        assert config.pool_grid == POOL_GRID
        assert config.tile_size == TILE_SIZE
        assert config.positive_ratio == POSITIVE_RATIO
        assert config.outlier_budget == 0

    def test_defaults_read_at_creation(self):
        """Should read defaults from the options when created."""
        with active_tiles.set_options(pool_grid=4):
            assert RunConfig('coreset', 1).pool_grid == 4
        assert RunConfig('coreset', 1).pool_grid == POOL_GRID

    def test_random_requires_seed(self):
        """Should refuse a random run without a seed."""
        with pt.raises(ValidationError, match='seed'):
            RunConfig('random', 10)

    @pt.mark.parametrize(
        'changes',
        [
            {'strategy': 'entropy'},
            {'budget': 0},
            {'budget': True},
            {'seed': -1},
            {'seed': 2**64},
            {'preselect_fraction': 0.0},
            {'positive_ratio': 1.5},
            {'dropout_passes': 1},
            {'pool_grid': 0},
            {'outlier_budget': -1},
        ],
    )
    def test_invalid_values(self, changes):
        """Should reject invalid parameters."""
        values = {'strategy': 'coreset', 'budget': 5, 'seed': 1, **changes}
        with pt.raises(ValidationError):
            RunConfig.from_mapping(values)

    def test_from_mapping_rejects_unknown_keys(self):
        """Should reject keys that are not run parameters."""
        with pt.raises(ValidationError, match='colour'):
            RunConfig.from_mapping(
                {'strategy': 'coreset', 'budget': 1, 'colour': 'red'}
            )

    def test_from_mapping_requires_budget(self):
        """Should reject a mapping without a budget."""
        with pt.raises(ValidationError, match='budget'):
            RunConfig.from_mapping({'strategy': 'coreset'})

    def test_from_toml_with_overrides(self, tmp_path):
        """Should let non-None overrides win over the file."""
        path = tmp_path / 'run.toml'
        path.write_text(
            'strategy = "random"\nbudget = 1000\nseed = 42\n'
            'preselect_fraction = 0.1\n'
        )
        config = RunConfig.from_toml(path, budget=5000, seed=None)
        assert config.strategy is Strategy.RANDOM
        assert config.budget == 5000
        assert config.seed == 42
        assert config.preselect_fraction == 0.1

    def test_from_toml_errors(self, tmp_path):
        """Should report unreadable or invalid files."""
        with pt.raises(StorageError):
            RunConfig.from_toml(tmp_path / 'missing.toml')
        path = tmp_path / 'bad.toml'
        path.write_text('strategy = \n')
        with pt.raises(ValidationError):
            RunConfig.from_toml(path)

    def test_to_dict(self):
        """Should serialize the strategy by value."""
        values = RunConfig('random', 3, seed=7).to_dict()
        assert values['strategy'] == 'random'
        assert values['seed'] == 7
        assert json.loads(json.dumps(values)) == values


class TestSelectRandom:
    def test_whole_pool(self):
        """Should select every tile when the budget equals the pool."""
        pool = _pool(12)
        selection = select_random(pool, 12, 3)
        assert sorted(selection.tile_ids) == pool.tile_ids
        assert all(entry.score is None for entry in selection.entries)

    @hp.given(seed=st.integers(min_value=0, max_value=2**64 - 1))
    def test_deterministic(self, seed: int):
        """Should repeat a selection for the same seed."""
        pool = _pool(50)
        assert select_random(pool, 7, seed) == select_random(pool, 7, seed)

    def test_streams_differ(self):
        """Should draw independent samples on different streams."""
        pool = _pool(1000)
        first = select_random(pool, 20, 42, stream=0)
        second = select_random(pool, 20, 42, stream=1)
        assert first.tile_ids != second.tile_ids

    @pt.mark.parametrize('budget', [0, 11])
    def test_invalid_budget(self, budget: int):
        """Should raise a BudgetError for a budget the pool cannot meet."""
        with pt.raises(BudgetError):
            select_random(_pool(10), budget, 0)

    def test_invalid_seed(self):
        """Should reject seeds outside the unsigned 64-bit range."""
        with pt.raises(ValidationError):
            select_random(_pool(10), 1, -5)

    def test_uniform_frequencies(self):
        """Should select every tile with frequency 0.1 within 5 sigma."""
        pool = _pool(100)
        counts = Counter()
        trials = 10_000
        for seed in range(trials):
            counts.update(select_random(pool, 10, seed).tile_ids)
        sigma = (trials * 0.1 * 0.9) ** 0.5
        assert set(counts) == set(pool.tile_ids)
        for tile_id in pool.tile_ids:
            assert abs(counts[tile_id] - trials * 0.1) <= 5 * sigma


class TestBuildTrainingMix:
    def test_ratio(self):
        """Should add one negative per nine positives at ratio 0.9."""
        positives = [f'p{i:02d}' for i in range(90)]
        negatives = [f'n{i:03d}' for i in range(500)]
        mix = build_training_mix(positives, negatives, 0.9, seed=1)
        assert len(mix) == 100
        assert set(positives) <= set(mix)
        assert mix == sorted(mix)

    def test_positives_only(self):
        """Should take no negatives at ratio 1."""
        assert build_training_mix(['b', 'a'], ['c'], 1.0) == ['a', 'b']

    def test_unlimited_scale(self):
        """Should build the full-size unlimited training set."""
        positives = [f'p{i:05d}' for i in range(UNLIMITED_POSITIVES)]
        negatives = [f'n{i:05d}' for i in range(2000)]
        mix = build_training_mix(positives, negatives, POSITIVE_RATIO, seed=0)
        assert len(mix) == UNLIMITED_TILES

    def test_too_few_negatives(self):
        """Should warn and take every negative when there are too few."""
        positives = [f'p{i}' for i in range(90)]
        with pt.warns(UserWarning, match='negatives'):
            mix = build_training_mix(positives, ['n0', 'n1'], 0.9, seed=0)
        assert len(mix) == 92

    def test_no_positives(self):
        """Should reject an empty positive set."""
        with pt.raises(ValidationError):
            build_training_mix([], ['n0'], 0.9)

    def test_deterministic(self):
        """Should sample the same negatives for the same seed."""
        positives = ['p0', 'p1', 'p2', 'p3']
        negatives = [f'n{i}' for i in range(50)]
        assert build_training_mix(
            positives, negatives, 0.5, seed=9
        ) == build_training_mix(positives, negatives[::-1], 0.5, seed=9)


class TestRunPipeline:
    def test_default_run_metadata(self, synthetic, tmp_path):
        """Should record the default method constants in run.json."""
        root, pool = synthetic
        run_dir = tmp_path / 'run'
        run_dir.mkdir()
        config = RunConfig('random', 1, seed=0)
        selection = run_pipeline(config, pool, root, run_dir)
        assert len(selection) == 1
        metadata = json.loads((run_dir / 'run.json').read_text())
        config = metadata['config']
        assert config['preselect_fraction'] == PRESELECT_FRACTION
        assert config['dropout_passes'] == DROPOUT_PASSES
        assert config['pool_grid'] == POOL_GRID
        assert config['tile_size'] == TILE_SIZE
        assert metadata['preselected'] == 1
        assert metadata['files'] == ['prescore.jsonl', 'selection.jsonl']

    def test_preselection_applies_to_random(self, synthetic):
        """Should sample only among the pre-selected tiles."""
        root, pool = synthetic
        config = RunConfig('random', 3, seed=5, preselect_fraction=0.2)
        selection = run_pipeline(config, pool, root)
        prescores = active_tiles.score_tiles(
            pool, 'probmap', active_tiles.mean_response, root
        )
        kept = active_tiles.preselect(prescores, 0.2)
        assert len(kept) == 6
        assert set(selection.tile_ids) <= set(kept)

    def test_zero_variance_ties(self, synthetic):
        """Should select the first tiles by id when every variance is 0."""
        root, pool = synthetic
        for record in pool:
            stack = np.full((16, 16, DROPOUT_PASSES), 0.5, dtype=np.float32)
            store_array(
                ArrayContainer(stack),
                record.artifact_path('dropout_stack', root),
            )
        config = RunConfig('uncertainty', 4, preselect_fraction=1.0)
        selection = run_pipeline(config, pool, root)
        assert selection.tile_ids == pool.tile_ids[:4]
        assert [entry.score for entry in selection.entries] == [0.0] * 4

    def test_coreset_one_per_cluster(self, synthetic, tmp_path):
        """Should pick one tile in each of three separated clusters."""
        root, pool = synthetic
        run_dir = tmp_path / 'run'
        run_dir.mkdir()
        config = RunConfig('coreset', 3, preselect_fraction=1.0, pool_grid=4)
        selection = run_pipeline(config, pool, root, run_dir)
        assert sorted(_cluster(t) for t in selection.tile_ids) == [0, 1, 2]
        tile_ids, matrix = read_feature_matrix(run_dir / 'features.alf')
        assert tile_ids == pool.tile_ids
        assert matrix.shape == (30, 8)
        metadata = json.loads((run_dir / 'run.json').read_text())
        assert metadata['covering_radius'] > 0

    def test_robust_coreset(self, synthetic):
        """Should use robust k-center when outliers are allowed."""
        root, pool = synthetic
        config = RunConfig(
            'coreset', 3, preselect_fraction=1.0, pool_grid=4, outlier_budget=2
        )
        selection = run_pipeline(config, pool, root)
        assert len(selection) == 3
        assert selection.strategy is Strategy.CORESET

    def test_coreset_seeds(self, synthetic):
        """Should never re-select labelled tiles."""
        root, pool = synthetic
        labelled = ['tile_00000', 'tile_00001']
        config = RunConfig('coreset', 2, preselect_fraction=1.0, pool_grid=4)
        selection = run_pipeline(config, pool, root, labelled=labelled)
        assert not set(selection.tile_ids) & set(labelled)
        assert _cluster(selection.tile_ids[0]) == 2

    def test_lists_every_missing_artifact(self, synthetic):
        """Should fail the whole run, naming every incomplete tile."""
        root, pool = synthetic
        for tile_id in ('tile_00004', 'tile_00017'):
            (root / 'features' / f'{tile_id}.alf').unlink()
        (root / 'probmap' / 'tile_00020.alf').unlink()
        config = RunConfig('coreset', 3, preselect_fraction=1.0)
        with pt.raises(MissingArtifactsError) as info:
            run_pipeline(config, pool, root)
        assert info.value.tile_ids == [
            'tile_00004',
            'tile_00017',
            'tile_00020',
        ]

    def test_budget_exceeds_preselection(self, synthetic):
        """Should raise a BudgetError when too few tiles survive."""
        root, pool = synthetic
        with pt.raises(BudgetError):
            run_pipeline(RunConfig('random', 2, seed=0), pool, root)

    def test_unknown_labelled(self, synthetic):
        """Should reject labelled tiles outside the pool."""
        root, pool = synthetic
        config = RunConfig('random', 1, seed=0)
        with pt.raises(ValidationError):
            run_pipeline(config, pool, root, labelled=['elsewhere'])

    def test_unlimited(self, synthetic):
        """Should take every positive tile plus sampled negatives."""
        root, pool = synthetic
        config = RunConfig('unlimited', 1, seed=3, positive_ratio=0.5)
        selection = run_pipeline(config, pool, root)
        positives = {r.tile_id for r in pool if r.positive}
        negatives = {r.tile_id for r in pool if not r.positive}
        wanted = min(len(positives), len(negatives))
        assert positives <= set(selection.tile_ids)
        assert len(selection) == len(positives) + wanted

    def test_unlimited_needs_labels(self):
        """Should refuse the unlimited baseline without positive flags."""
        config = RunConfig('unlimited', 1, positive_ratio=1.0)
        with pt.raises(ValidationError, match='positive'):
            run_pipeline(config, _pool(3))

    def test_byte_identical_runs(self, synthetic, tmp_path):
        """Should write identical files whatever the manifest line order."""
        root, pool = synthetic
        shuffled = tmp_path / 'shuffled.jsonl'
        lines = (root / 'pool.jsonl').read_text().splitlines()
        order = np.random.default_rng(0).permutation(len(lines))
        shuffled.write_text('\n'.join(lines[i] for i in order) + '\n')
        config = RunConfig('random', 5, seed=11, preselect_fraction=0.5)
        names = ('prescore.jsonl', 'selection.jsonl', 'run.json')
        outputs = []
        for index, manifest in enumerate([root / 'pool.jsonl', shuffled]):
            run_dir = tmp_path / f'run{index}'
            run_dir.mkdir()
            run_pipeline(config, read_manifest(manifest), root, run_dir)
            outputs.append({n: (run_dir / n).read_bytes() for n in names})
        assert outputs[0] == outputs[1]


class TestRounds:
    def test_rounds_are_disjoint(self, synthetic, tmp_path):
        """Should grow the labelled set without repeating tiles."""
        root, pool = synthetic
        run_dir = tmp_path / 'run'
        config = RunConfig('random', 4, seed=1, preselect_fraction=1.0)
        state: list[RoundRecord] = []
        for _ in range(2):
            state.append(run_round(state, config, pool, root, run_dir))
        first, second = state
        assert len(second.cumulative_labelled) == 8
        assert not set(first.selection.tile_ids) & set(
            second.selection.tile_ids
        )
        assert (run_dir / 'round_001' / 'selection.jsonl').is_file()
        assert load_rounds(run_dir) == state

    def test_coreset_radius_shrinks(self, synthetic):
        """Should never increase the covering radius across rounds."""
        root, pool = synthetic
        config = RunConfig('coreset', 2, preselect_fraction=1.0, pool_grid=4)
        features = active_tiles.stack_features(
            active_tiles.pool_tiles(pool, root, 4)
        )
        points = PointSet.from_dataarray(features)
        state: list[RoundRecord] = []
        radii = []
        for _ in range(3):
            state.append(run_round(state, config, pool, root))
            radii.append(kcenter_cost(points, state[-1].cumulative_labelled))
        assert all(a >= b for a, b in zip(radii, radii[1:]))
        assert len(set(state[-1].cumulative_labelled)) == 6

    def test_pool_exhausted(self, synthetic):
        """Should raise when fewer tiles remain than the budget."""
        root, pool = synthetic
        config = RunConfig('random', 20, seed=1, preselect_fraction=1.0)
        state = [run_round([], config, pool, root)]
        with pt.raises(PoolExhaustedError):
            run_round(state, config, pool, root)

    def test_unlimited_not_a_round(self, synthetic):
        """Should refuse to run the unlimited baseline in rounds."""
        root, pool = synthetic
        with pt.raises(ValidationError):
            run_round([], RunConfig('unlimited', 1, seed=0), pool, root)

    def test_initial_labelled(self, synthetic):
        """Should exclude tiles labelled before the first round."""
        root, pool = synthetic
        config = RunConfig('random', 25, seed=2, preselect_fraction=1.0)
        record = run_round(
            [], config, pool, root, initial_labelled=pool.tile_ids[:5]
        )
        assert set(record.selection.tile_ids) == set(pool.tile_ids[5:])

    def test_record_rejects_repeats(self):
        """Should refuse a history that labels a tile twice."""
        selection = SelectionManifest.from_ranked('random', 1, [('a', None)])
        with pt.raises(ValidationError):
            RoundRecord(0, selection, ('a', 'a'))


class TestRunLock:
    def test_single_writer(self, tmp_path):
        """Should refuse a second writer and release on exit."""
        with run_lock(tmp_path) as path:
            assert path == tmp_path / LOCK_NAME
            with pt.raises(RunLockedError):
                with run_lock(tmp_path):
                    pass
        assert not (tmp_path / LOCK_NAME).exists()


def _report(f1: float, tiles=('a', 'b')) -> EvalReport:
    point = PRPoint(0.5, 0.75, 0.8, f1, MatchCounts(8, 2, 3))
    return EvalReport.from_curve([point], tiles)


class TestCompareReports:
    def test_identical(self):
        """Should report zero deltas for identical reports."""
        table, _ = compare_reports(_report(0.7), _report(0.7))
        assert (table['delta'] == 0).all()
        assert table.loc['f1', 'gain'] == '+0.0%'

    def test_gain(self):
        """Should format the F1 gain in percentage points."""
        table, curves = compare_reports(_report(0.70), _report(0.78))
        assert table.index.tolist() == ['precision', 'recall', 'f1']
        assert table.loc['f1', 'gain'] == '+8.0%'
        assert table.loc['f1', 'delta'] == pt.approx(0.08)
        assert 'f1_baseline' in curves.columns
        assert 'f1_candidate' in curves.columns

    def test_mismatched_tiles(self):
        """Should refuse reports on different test tiles."""
        with pt.raises(ValidationError):
            compare_reports(_report(0.7), _report(0.7, tiles=('a',)))


class TestCoverageExperiment:
    def test_coreset_covers_clusters_random_does_not(self, tmp_path):
        """Should cover all ten clusters where random selection misses."""
        covered, missed = 0, 0
        for trial in range(20):
            root = tmp_path / f'trial{trial:02d}'
            features = datasets.make_clustered_features(
                5000, 10, 16, seed=trial
            )
            pool = datasets.write_feature_pool(root, features, seed=trial)
            clusters = features['cluster'].to_series()
            coreset = run_pipeline(
                RunConfig('coreset', 10, pool_grid=1), pool, root
            )
            config = RunConfig('random', 10, seed=trial)
            drawn = run_pipeline(config, pool, root)
            covered += clusters[list(coreset.tile_ids)].nunique() == 10
            missed += clusters[list(drawn.tile_ids)].nunique() < 10
        assert covered == 20
        assert missed >= 5


@pt.mark.slow
def test_random_after_preselection_scale():
    """Should keep 20,000 of 400,000 tiles and draw 1000 of them."""
    scores = np.random.default_rng(0).random(400_000)
    records = [
        active_tiles.ScoreRecord(f't{i:06d}', float(s))
        for i, s in enumerate(scores)
    ]
    kept = active_tiles.preselect(records, PRESELECT_FRACTION)
    assert len(kept) == 20_000
    pool = PoolManifest(tuple(PoolRecord(t, 'img') for t in kept))
    selection = select_random(pool, BUDGETS[0], 42)
    assert len(set(selection.tile_ids)) == 1000
