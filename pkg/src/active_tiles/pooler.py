"""Compress decoder feature maps into fixed-length descriptors.

Each channel is max-pooled over a ``G x G`` grid of cells and the ``G**2``
maxima are averaged, turning an ``H x W x C`` map into a ``C``-vector.
"""

from __future__ import annotations

import logging
from collections.abc import Sequence
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import xarray as xr

from active_tiles._helpers import map_ordered
from active_tiles.array_store import ArrayContainer, PoolManifest, load_array
from active_tiles.errors import GeometryError, ValidationError
from active_tiles.options import OPTIONS
from active_tiles.types import ArtifactRole, DType

__all__ = [
    'FeatureVector',
    'cell_bounds',
    'cell_maxima',
    'pool_features',
    'pool_tiles',
    'stack_features',
]

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class FeatureVector:
    """The pooled descriptor of one tile."""

    tile_id: str
    values: np.ndarray

    def __post_init__(self) -> None:
        values = np.array(self.values, dtype=np.float64)
        if values.ndim != 1:
            raise ValidationError('feature values must be 1-dimensional')
        if not np.isfinite(values).all():
            raise ValidationError(
                f'features of {self.tile_id!r} contain non-finite values'
            )
        values.flags.writeable = False
        object.__setattr__(self, 'values', values)

    def __len__(self) -> int:
        return int(self.values.size)


def cell_bounds(extent: int, grid: int) -> np.ndarray:
    """Return the ``grid + 1`` band boundaries ``floor(i * extent / grid)``."""
    return (np.arange(grid + 1) * extent) // grid


def cell_maxima(map: ArrayContainer, grid: int | None = None) -> np.ndarray:
    """Max-pool a feature map over a ``grid x grid`` partition.

    Parameters
    ----------
    map : ArrayContainer
        An F32 ``H x W x C`` feature map.
    grid : int, optional
        Number of bands per axis. Defaults to the ``pool_grid`` option (8).

    Returns
    -------
    np.ndarray
        The ``grid x grid x C`` cell maxima.

    Raises
    ------
    GeometryError
        If ``H`` or ``W`` is smaller than ``grid``.
    """
    grid = OPTIONS['pool_grid'] if grid is None else grid
    if grid < 1:
        raise ValidationError(f'grid must be positive, got {grid}')
    if map.dtype is not DType.F32:
        raise ValidationError(
            f'feature maps must be F32, got {map.dtype.name}'
        )
    if map.height < grid or map.width < grid:
        raise GeometryError(
            f'a {map.height}x{map.width} map cannot be split into a '
            f'{grid}x{grid} grid'
        )
    rows = cell_bounds(map.height, grid)[:-1]
    cols = cell_bounds(map.width, grid)[:-1]
    # Bands are never empty because H >= G and W >= G.
    maxima = np.maximum.reduceat(map.data, rows, axis=0)
    return np.maximum.reduceat(maxima, cols, axis=1)


def pool_features(
    map: ArrayContainer, grid: int | None = None, tile_id: str = ''
) -> FeatureVector:
    """Return the max-then-average pooled descriptor of a feature map.

    Parameters
    ----------
    map : ArrayContainer
        An F32 ``H x W x C`` feature map, e.g. the ``128 x 128 x 128`` decoder
        output of a U-Net.
    grid : int, optional
        Number of bands per axis. Defaults to the ``pool_grid`` option (8).
    tile_id : str, optional
        Identifier attached to the result.

    Returns
    -------
    FeatureVector
        ``C`` values, each the mean of the ``grid**2`` cell maxima of a
        channel.

    See Also
    --------
    cell_maxima : The intermediate ``grid x grid x C`` matrix.
    """
    maxima = cell_maxima(map, grid)
    values = maxima.astype(np.float64).mean(axis=(0, 1))
    return FeatureVector(tile_id=tile_id, values=values)


def stack_features(vectors: Sequence[FeatureVector]) -> xr.DataArray:
    """Stack descriptors into an ``N x C`` matrix with a ``tile`` coordinate.

    Rows follow the canonical order of ``tile_id``.
    """
    if not vectors:
        raise ValidationError('no feature vectors to stack')
    lengths = {len(vector) for vector in vectors}
    if len(lengths) != 1:
        raise ValidationError(
            f'feature vectors have different lengths: {sorted(lengths)}'
        )
    ordered = sorted(vectors, key=lambda vector: vector.tile_id)
    return xr.DataArray(
        data=np.stack([vector.values for vector in ordered]),
        dims=('tile', 'feature'),
        coords={'tile': [vector.tile_id for vector in ordered]},
        name='features',
    )


def pool_tiles(
    pool: PoolManifest,
    root: str | Path | None = None,
    grid: int | None = None,
    *,
    workers: int | None = None,
) -> list[FeatureVector]:
    """Pool the ``features`` artifact of every tile of ``pool``.

    Raises
    ------
    MissingArtifactsError
        Listing every tile without a feature map.
    """
    role = str(ArtifactRole.FEATURES)
    paths = pool.require_artifacts([role], root)

    def pool_one(tile_id: str) -> FeatureVector:
        return pool_features(load_array(paths[tile_id][role]), grid, tile_id)

    vectors = map_ordered(
        pool_one, pool.tile_ids, workers=workers, desc='pooling features'
    )
    logger.info('pooled %d feature maps', len(vectors))
    return vectors
