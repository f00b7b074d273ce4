"""Synthetic pools, scenes and feature sets for examples and tests.

Everything here is generated from a seed with
:py:func:`numpy.random.default_rng`; the outputs are fixtures, not part of
the reproducible selection path.
"""

from __future__ import annotations

from collections.abc import Sequence
from pathlib import Path

import numpy as np
import xarray as xr

from active_tiles.array_store import (
    ArrayContainer,
    PoolManifest,
    PoolRecord,
    store_array,
    write_manifest,
)
from active_tiles.tiler import DEFAULT_ARTIFACT_TEMPLATE
from active_tiles.types import ArtifactRole

__all__ = [
    'make_clustered_features',
    'make_scene',
    'write_feature_pool',
    'write_synthetic_pool',
]


def make_clustered_features(
    n_points: int,
    n_clusters: int,
    dims: int,
    *,
    separation: float = 100.0,
    noise: float = 1.0,
    seed: int = 0,
) -> xr.DataArray:
    """Gaussian blobs around well-separated centers.

    Cluster ``i`` is centered on ``separation`` times the ``i``-th unit
    vector when ``n_clusters <= dims``, else on a random point scaled by
    ``separation``. Point ``j`` belongs to cluster ``j % n_clusters``.

    Returns
    -------
    xr.DataArray
        ``(tile, feature)`` matrix with tile ids ``'tile_00000'``, ... and a
        ``cluster`` coordinate along ``tile``.
    """
    rng = np.random.default_rng(seed)
    if n_clusters <= dims:
        centers = separation * np.eye(n_clusters, dims)
    else:
        centers = separation * rng.normal(size=(n_clusters, dims))
    cluster = np.arange(n_points) % n_clusters
    values = centers[cluster] + noise * rng.normal(size=(n_points, dims))
    width = max(5, len(str(n_points - 1)))
    return xr.DataArray(
        values,
        dims=('tile', 'feature'),
        coords={
            'tile': [f'tile_{i:0{width}d}' for i in range(n_points)],
            'cluster': ('tile', cluster),
        },
        name='features',
    )


def make_scene(
    size: int = 32,
    n_instances: int = 3,
    *,
    n_false: int = 1,
    max_extent: int = 6,
    seed: int = 0,
) -> tuple[ArrayContainer, ArrayContainer]:
    """A probability map and its ground-truth instance map.

    Instances are random rectangles numbered from 1; later rectangles
    overwrite earlier ones where they overlap. The probability map is low
    on the background, higher inside instances and high on ``n_false``
    spurious rectangles.

    Returns
    -------
    probmap : ArrayContainer
        ``size x size x 1`` F32 map.
    gt : ArrayContainer
        ``size x size x 1`` U32 instance map.
    """
    rng = np.random.default_rng(seed)
    gt = np.zeros((size, size), dtype=np.uint32)
    prob = rng.uniform(0.0, 0.3, size=(size, size))

    def rectangle() -> tuple[slice, slice]:
        h, w = rng.integers(1, min(max_extent, size) + 1, size=2)
        y = rng.integers(0, size - h + 1)
        x = rng.integers(0, size - w + 1)
        return slice(y, y + h), slice(x, x + w)

    for instance in range(1, n_instances + 1):
        window = rectangle()
        gt[window] = instance
        prob[window] = rng.uniform(0.2, 1.0, size=prob[window].shape)
    for _ in range(n_false):
        window = rectangle()
        prob[window] = np.maximum(
            prob[window], rng.uniform(0.5, 1.0, size=prob[window].shape)
        )
    return (
        ArrayContainer.from_numpy(prob.astype(np.float32)),
        ArrayContainer.from_numpy(gt),
    )


def write_synthetic_pool(
    root: str | Path,
    n_tiles: int,
    *,
    size: int = 16,
    passes: int = 10,
    channels: int = 8,
    n_clusters: int = 3,
    seed: int = 0,
) -> PoolManifest:
    """Write a complete artifact tree and pool manifest under ``root``.

    Every tile gets a ``probmap``, ``dropout_stack``, ``features`` and
    ``gt`` artifact at ``{role}/{tile_id}.alf``. Feature maps of a tile
    are constant per channel around the center of its cluster, so pooled
    descriptors form ``n_clusters`` well-separated groups. Tiles with at
    least one ground-truth instance are flagged positive.

    Returns
    -------
    PoolManifest
        The manifest, also written to ``root/pool.jsonl``.
    """
    root = Path(root)
    for role in ArtifactRole:
        (root / role.value).mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    features = make_clustered_features(
        n_tiles, n_clusters, channels, seed=seed
    )
    offset = features.values.min()
    records = []
    for index, tile_id in enumerate(features['tile'].values.tolist()):
        probmap, gt = make_scene(
            size, int(rng.integers(0, 3)), n_false=0, seed=seed + index
        )
        base = probmap.data[:, :, :1]
        spread = rng.uniform(0.0, 0.5, size=(1, 1, passes)) * (1 - base)
        stack = np.clip(base + spread, 0.0, 1.0).astype(np.float32)
        feature_map = np.broadcast_to(
            (features.values[index] - offset).astype(np.float32),
            (size, size, channels),
        )
        artifacts = {
            ArtifactRole.PROBMAP: probmap,
            ArtifactRole.DROPOUT_STACK: ArrayContainer(stack),
            ArtifactRole.FEATURES: ArrayContainer(feature_map),
            ArtifactRole.GT: gt,
        }
        paths = {}
        for role, array in artifacts.items():
            relative = DEFAULT_ARTIFACT_TEMPLATE.format(
                role=role.value, tile_id=tile_id
            )
            store_array(array, root / relative)
            paths[role.value] = relative
        positive = bool(gt.data.any())
        records.append(PoolRecord(tile_id, 'synthetic', paths, positive))
    pool = PoolManifest(tuple(records))
    write_manifest(pool, root / 'pool.jsonl')
    return pool


def write_feature_pool(
    root: str | Path,
    features: xr.DataArray,
    responses: Sequence[float] | np.ndarray | None = None,
    *,
    seed: int = 0,
) -> PoolManifest:
    """Write a pool whose tiles carry a descriptor and a mean response.

    Every tile of ``features`` gets a ``1 x 1 x 1`` ``probmap`` holding its
    response and a ``1 x 1 x C`` ``features`` map holding its row, so that
    pooling with a grid of 1 returns the row unchanged.

    Parameters
    ----------
    root : str or Path
        Directory of the artifacts and of ``pool.jsonl``.
    features : xr.DataArray
        ``(tile, feature)`` matrix, e.g. from
        :py:func:`make_clustered_features`.
    responses : sequence of float, optional
        Mean responses in ``[0, 1]``, one per tile. Drawn uniformly from
        ``seed`` when omitted.
    seed : int, optional
        Seed of the drawn responses.

    Returns
    -------
    PoolManifest
        The manifest, also written to ``root/pool.jsonl``.
    """
    root = Path(root)
    tile_ids = [str(t) for t in features['tile'].values]
    if responses is None:
        responses = np.random.default_rng(seed).random(len(tile_ids))
    roles = (ArtifactRole.PROBMAP, ArtifactRole.FEATURES)
    for role in roles:
        (root / role.value).mkdir(parents=True, exist_ok=True)
    vectors = features.transpose('tile', ...).values.astype(np.float32)
    records = []
    for tile_id, vector, response in zip(
        tile_ids, vectors, responses, strict=True
    ):
        arrays = (
            np.full((1, 1, 1), response, dtype=np.float32),
            vector.reshape(1, 1, -1),
        )
        paths = {}
        for role, array in zip(roles, arrays):
            relative = DEFAULT_ARTIFACT_TEMPLATE.format(
                role=role.value, tile_id=tile_id
            )
            store_array(ArrayContainer(array), root / relative)
            paths[role.value] = relative
        records.append(PoolRecord(tile_id, 'synthetic', paths))
    pool = PoolManifest(tuple(records))
    write_manifest(pool, root / 'pool.jsonl')
    return pool
