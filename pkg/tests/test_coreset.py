import itertools

import hypothesis as hp
import hypothesis.strategies as st
import numpy as np
import pytest as pt

import active_tiles
from active_tiles import coreset, datasets
from active_tiles.coreset import (
    CoresetResult,
    PointSet,
    coreset_selection,
    kcenter_cost,
    kcenter_greedy,
    l2_distance,
    robust_kcenter,
)
from active_tiles.errors import BudgetError, DimensionError, ValidationError
from active_tiles.types import Strategy


def _line(*values: float, labelled=()) -> PointSet:
    """1-D points named p0, p1, ... in the order given."""
    return PointSet.from_matrix(
        [f'p{i}' for i in range(len(values))],
        [[v] for v in values],
        labelled,
    )


def _random_points(seed: int, n: int, dims: int) -> PointSet:
    vectors = np.random.default_rng(seed).normal(size=(n, dims))
    return PointSet.from_matrix([f't{i:02d}' for i in range(n)], vectors)


def _pairwise(vectors: np.ndarray) -> np.ndarray:
    diff = vectors[:, np.newaxis, :] - vectors[np.newaxis, :, :]
    return np.sqrt((diff**2).sum(axis=-1))


def _nearest(vectors: np.ndarray, centers) -> np.ndarray:
    return _pairwise(vectors)[:, list(centers)].min(axis=1)


def _robust_cost(nearest: np.ndarray, outlier_budget: int) -> float:
    kept = np.sort(nearest)[: nearest.size - outlier_budget]
    return float(kept.max()) if kept.size else 0.0


def _brute_force(points: PointSet, k: int, outlier_budget: int = 0) -> float:
    distances = _pairwise(points.vectors)
    return min(
        _robust_cost(distances[:, list(centers)].min(axis=1), outlier_budget)
        for centers in itertools.combinations(range(len(points)), k)
    )


class TestPointSet:
    def test_canonical_order(self):
        """Should sort rows by tile_id."""
        points = PointSet.from_matrix(['b', 'a'], [[1.0], [2.0]])
        assert points.tile_ids == ('a', 'b')
        np.testing.assert_array_equal(points.vectors, [[2.0], [1.0]])
        assert points.index('b') == 1

    def test_rejects_mismatched_rows(self):
        """Should reject a matrix that does not match the tiles."""
        with pt.raises(DimensionError):
            PointSet.from_matrix(['a'], [[1.0], [2.0]])

    def test_rejects_duplicates(self):
        """Should reject duplicate tile ids."""
        with pt.raises(ValidationError):
            PointSet.from_matrix(['a', 'a'], [[1.0], [2.0]])

    def test_rejects_unknown_labelled(self):
        """Should reject labelled tiles outside the set."""
        with pt.raises(ValidationError):
            _line(0.0, 1.0, labelled=['zz'])

    def test_unknown_index(self):
        """Should raise a ValidationError for an unknown tile."""
        with pt.raises(ValidationError):
            _line(0.0).index('zz')

    def test_from_dataarray(self):
        """Should read tiles and vectors from a DataArray."""
        features = datasets.make_clustered_features(12, 3, 4)
        points = PointSet.from_dataarray(features, labelled=['tile_00003'])
        assert len(points) == 12
        assert points.dims == 4
        assert points.labelled_mask.sum() == 1


class TestL2Distance:
    @pt.mark.parametrize(
        'a, b, expected',
        [
            ([1.0, 2.0], [1.0, 2.0], 0.0),
            ([0, 0], [3, 4], 5.0),
            ([1], [-1], 2.0),
        ],
    )
    def test_values(self, a, b, expected: float):
        """Should return the Euclidean distance."""
        assert l2_distance(a, b) == expected

    def test_length_mismatch(self):
        """Should raise a DimensionError for vectors of different lengths."""
        with pt.raises(DimensionError):
            l2_distance([1.0], [1.0, 2.0])

    @hp.given(
        a=st.lists(st.floats(-1e3, 1e3), min_size=3, max_size=3),
        b=st.lists(st.floats(-1e3, 1e3), min_size=3, max_size=3),
    )
    def test_symmetric(self, a, b):
        """Should not depend on argument order."""
        assert l2_distance(a, b) == l2_distance(b, a)


class TestKCenterCost:
    def test_all_centers(self):
        """Should be 0 when every point is a center."""
        points = _line(0, 1, 2)
        assert kcenter_cost(points, points.tile_ids) == 0.0

    def test_values(self):
        """Should return the largest distance to the nearest center."""
        assert kcenter_cost(_line(0, 10), ['p0']) == 10.0
        assert kcenter_cost(_line(0, 1, 2, 9, 10), ['p1', 'p3']) == 1.0

    def test_invalid_centers(self):
        """Should reject empty or unknown centers."""
        with pt.raises(ValidationError):
            kcenter_cost(_line(0, 1), [])
        with pt.raises(ValidationError):
            kcenter_cost(_line(0, 1), ['zz'])


class TestKCenterGreedy:
    def test_total_selection(self):
        """Should select every point with a zero radius."""
        result = kcenter_greedy(_line(0, 3, 7), 3)
        assert sorted(result.selected) == ['p0', 'p1', 'p2']
        assert result.covering_radius == 0.0

    def test_farthest_from_seed(self):
        """Should pick the point farthest from the labelled seed."""
        result = kcenter_greedy(_line(0.0, 0.1, 10.0, labelled=['p0']), 1)
        assert result.selected == ('p2',)
        assert result.scores == (10.0,)
        assert result.covering_radius == pt.approx(0.1)

    def test_first_center_nearest_centroid(self):
        """Should start from the point nearest the centroid."""
        points = _line(0, 1, 2, 9, 10)
        result = kcenter_greedy(points, 2)
        assert result.selected == ('p2', 'p4')
        assert result.scores == (None, 8.0)
        assert result.covering_radius == 2.0
        assert result.covering_radius <= 2 * _brute_force(points, 2)

    def test_ties_broken_by_tile_id(self):
        """Should pick the smallest tile_id among equally far points."""
        result = kcenter_greedy(_line(-1, 0, 1, labelled=['p1']), 1)
        assert result.selected == ('p0',)

    def test_budget_errors(self):
        """Should raise for a budget the unlabelled points cannot meet."""
        with pt.raises(BudgetError):
            kcenter_greedy(_line(0, 1, labelled=['p0']), 2)
        with pt.raises(BudgetError):
            kcenter_greedy(_line(0, 1), 0)

    def test_empty(self):
        """Should raise a ValidationError for an empty point set."""
        empty = PointSet.from_matrix([], np.empty((0, 2)))
        with pt.raises(ValidationError):
            kcenter_greedy(empty, 1)

    @hp.settings(max_examples=200, deadline=None)
    @hp.given(
        seed=st.integers(min_value=0, max_value=2**32 - 1),
        n=st.integers(min_value=1, max_value=12),
        k=st.integers(min_value=1, max_value=4),
        dims=st.integers(min_value=1, max_value=4),
    )
    def test_two_approximation(self, seed: int, n: int, k: int, dims: int):
        """Should cost at most twice the brute-force optimum."""
        hp.assume(k <= n)
        points = _random_points(seed, n, dims)
        result = kcenter_greedy(points, k)
        assert len(result.selected) == k
        assert result.covering_radius <= 2 * _brute_force(points, k) + 1e-9
        assert result.covering_radius == pt.approx(
            kcenter_cost(points, result.selected)
        )

    @hp.given(seed=st.integers(min_value=0, max_value=2**32 - 1))
    def test_radius_non_increasing(self, seed: int):
        """Should never increase the covering radius while selecting."""
        trace = kcenter_greedy(_random_points(seed, 40, 3), 10).radius_trace
        assert len(trace) == 10
        assert all(a >= b for a, b in zip(trace, trace[1:]))

    @hp.given(seed=st.integers(min_value=0, max_value=2**32 - 1))
    def test_translation_invariant(self, seed: int):
        """Should select the same tiles after a translation."""
        points = _random_points(seed, 30, 3)
        moved = PointSet.from_matrix(
            points.tile_ids, points.vectors + np.array([10.0, -4.0, 2.5])
        )
        assert (
            kcenter_greedy(points, 6).selected
            == kcenter_greedy(moved, 6).selected
        )

    @hp.given(
        seed=st.integers(min_value=0, max_value=2**32 - 1),
        alpha=st.sampled_from([0.25, 0.5, 2.0, 8.0]),
    )
    def test_scale_equivariant(self, seed: int, alpha: float):
        """Should scale the radius and keep the selection when scaled."""
        points = _random_points(seed, 30, 3)
        scaled = PointSet.from_matrix(points.tile_ids, points.vectors * alpha)
        base, result = kcenter_greedy(points, 6), kcenter_greedy(scaled, 6)
        assert result.selected == base.selected
        expected = alpha * base.covering_radius
        assert result.covering_radius == pt.approx(expected)

    def test_deterministic(self):
        """Should return identical results on identical inputs."""
        points = _random_points(7, 50, 5)
        assert kcenter_greedy(points, 8) == kcenter_greedy(points, 8)

    def test_seeds_never_selected(self):
        """Should complement, never repeat, the labelled tiles."""
        features = datasets.make_clustered_features(30, 3, 3)
        labelled = ['tile_00000', 'tile_00001']
        points = PointSet.from_dataarray(features, labelled)
        result = kcenter_greedy(points, 5)
        assert not set(result.selected) & set(labelled)
        clusters = features['cluster'].to_series()
        assert clusters[result.selected[0]] == 2

    def test_covers_clusters(self):
        """Should put one center in each well-separated cluster."""
        features = datasets.make_clustered_features(300, 10, 16, seed=3)
        result = kcenter_greedy(PointSet.from_dataarray(features), 10)
        clusters = features['cluster'].to_series()[list(result.selected)]
        assert sorted(clusters) == list(range(10))


class TestRobustKCenter:
    def test_drops_outlier(self):
        """Should ignore a far point when one outlier is allowed."""
        result = robust_kcenter(_line(0, 1, 2, 100), 1, 1)
        assert result.selected == ('p1',)
        assert result.outliers == ('p3',)
        assert result.covering_radius == 1.0

    def test_no_outliers_not_worse_than_greedy(self):
        """Should never be worse than greedy without outliers."""
        points = _line(0, 1, 2, 9, 10)
        result = robust_kcenter(points, 2, 0)
        greedy = kcenter_greedy(points, 2)
        assert result.covering_radius <= greedy.covering_radius
        assert result.outliers == ()

    @pt.mark.parametrize('k', [1, 2, 3])
    def test_identical_points(self, k: int):
        """Should report a zero radius for identical points."""
        points = PointSet.from_matrix(
            [f't{i}' for i in range(5)], np.ones((5, 2))
        )
        assert robust_kcenter(points, k, 1).covering_radius == 0.0

    def test_default_outlier_budget(self):
        """Should read the outlier budget from the options."""
        points = _line(0, 1, 2, 100)
        with active_tiles.set_options(outlier_budget=1):
            assert robust_kcenter(points, 1).outliers == ('p3',)
        assert robust_kcenter(points, 1).outliers == ()

    @pt.mark.parametrize('k, z', [(3, 2), (2, -1), (0, 0)])
    def test_infeasible_parameters(self, k: int, z: int):
        """Should raise a ValidationError for infeasible parameters."""
        with pt.raises(ValidationError):
            robust_kcenter(_line(0, 1, 2, 3), k, z)

    @hp.settings(max_examples=100, deadline=None)
    @hp.given(
        seed=st.integers(min_value=0, max_value=2**32 - 1),
        n=st.integers(min_value=2, max_value=10),
        k=st.integers(min_value=1, max_value=3),
        z=st.integers(min_value=0, max_value=2),
        dims=st.integers(min_value=1, max_value=3),
    )
    def test_brute_force_oracle(self, seed: int, n: int, k: int, z: int, dims):
        """Should stay within twice the optimal robust radius."""
        hp.assume(k + z <= n)
        points = _random_points(seed, n, dims)
        result = robust_kcenter(points, k, z)
        assert len(result.selected) == len(set(result.selected)) == k
        assert result.covering_radius <= 2 * _brute_force(points, k, z) + 1e-9
        nearest = _nearest(
            points.vectors, [points.index(t) for t in result.selected]
        )
        assert result.covering_radius == pt.approx(_robust_cost(nearest, z))
        assert len(result.outliers) <= z
        if z == 0:
            greedy = kcenter_greedy(points, k)
            assert result.covering_radius <= greedy.covering_radius

    def test_seeds_cover_and_are_excluded(self):
        """Should treat labelled tiles as fixed centers."""
        points = _line(0, 1, 10, 11, 50, labelled=['p0'])
        result = robust_kcenter(points, 1, 1)
        assert 'p0' not in result.selected
        assert result.selected in {('p2',), ('p3',)}
        assert result.outliers == ('p4',)
        assert result.covering_radius == 1.0

    def test_optimal_on_small_instances(self):
        """Should find the optimal robust radius when subsets are few."""
        rng = np.random.default_rng(2295)
        for seed in range(100):
            n = int(rng.integers(4, 11))
            k = int(rng.integers(1, 4))
            z = int(rng.integers(0, min(2, n - k) + 1))
            points = _random_points(seed, n, int(rng.integers(1, 4)))
            result = robust_kcenter(points, k, z)
            optimum = _brute_force(points, k, z)
            assert result.covering_radius == pt.approx(optimum, abs=1e-12)

    def test_swap_search(self, monkeypatch: pt.MonkeyPatch):
        """Should improve on greedy by swapping centers on large instances."""
        monkeypatch.setattr(coreset, '_EXHAUSTIVE_LIMIT', 0)
        points = _random_points(7, 30, 2)
        result = robust_kcenter(points, 3, 2)
        assert len(set(result.selected)) == 3
        assert len(result.outliers) <= 2
        nearest = _nearest(
            points.vectors, [points.index(t) for t in result.selected]
        )
        assert result.covering_radius == pt.approx(_robust_cost(nearest, 2))
        greedy = kcenter_greedy(points, 3)
        greedy_nearest = _nearest(
            points.vectors, [points.index(t) for t in greedy.selected]
        )
        assert result.covering_radius <= _robust_cost(greedy_nearest, 2)

    def test_candidate_radii_from_greedy_centers(self):
        """Should use greedy-center radii above the pairwise limit."""
        points = _random_points(11, 40, 3)
        with active_tiles.set_options(pairwise_limit=10):
            result = robust_kcenter(points, 4, 0)
        assert len(result.selected) == 4
        assert (
            result.covering_radius
            <= kcenter_greedy(points, 4).covering_radius
        )


class TestCoresetSelection:
    def test_manifest(self):
        """Should rank picks in selection order with their distances."""
        result = kcenter_greedy(_line(0.0, 0.1, 10.0, labelled=['p0']), 2)
        selection = coreset_selection(result)
        assert selection.strategy is Strategy.CORESET
        assert selection.budget == 2
        assert selection.tile_ids == ['p2', 'p1']
        assert selection.entries[0].score == 10.0

    def test_without_scores(self):
        """Should leave scores empty when the result has none."""
        selection = coreset_selection(CoresetResult(('a', 'b'), 1.0), 3)
        assert [e.score for e in selection.entries] == [None, None]
