from __future__ import annotations

import numpy as np
import xarray as xr

from active_tiles.array_store import ArrayContainer
from active_tiles.evaluator import binarize, connected_components
from active_tiles.pooler import pool_features
from active_tiles.scorer import dropout_variance, mean_response

__all__ = ['DataArrayTileAccessor', 'DatasetTileAccessor']


TILE_ACCESSOR_NAME = 'tile'


@xr.register_dataarray_accessor(TILE_ACCESSOR_NAME)
class DataArrayTileAccessor:
    """Xarray accessor for per-tile maps.

    The DataArray must have ``y`` and ``x`` dimensions and optionally a
    ``channel`` dimension, as returned by
    :py:meth:`ArrayContainer.to_dataarray`.
    """

    def __init__(self, obj: xr.DataArray) -> None:
        self._obj = obj

    def _check_dims(self) -> None:
        missing = {'y', 'x'} - set(self._obj.dims)
        extra = set(self._obj.dims) - {'y', 'x', 'channel'}
        if missing or extra:
            raise ValueError(
                'expected dims (y, x[, channel]), got '
                f'{tuple(self._obj.dims)!r}'
            )

    def to_container(self) -> ArrayContainer:
        """Return the values as an :py:class:`ArrayContainer`."""
        self._check_dims()
        obj = self._obj
        if 'channel' not in obj.dims:
            obj = obj.expand_dims('channel', axis=-1)
        return ArrayContainer.from_numpy(
            obj.transpose('y', 'x', 'channel').values
        )

    def mean_response(self) -> float:
        """Average intensity of a single-channel probability map."""
        return mean_response(self.to_container())

    def dropout_variance(self) -> float:
        """Mean per-pixel variance across the ``channel`` dimension."""
        return dropout_variance(self.to_container())

    def pool(self, grid: int | None = None) -> xr.DataArray:
        """Max-then-average pooled descriptor along a ``feature`` dim."""
        vector = pool_features(self.to_container(), grid)
        return xr.DataArray(
            vector.values, dims=('feature',), name=self._obj.name
        )

    def binarize(self, threshold: float) -> xr.DataArray:
        """Boolean ``(y, x)`` mask of values at or above ``threshold``."""
        mask = binarize(self.to_container(), threshold)
        return self._spatial(mask, 'mask')

    def components(self, threshold: float | None = None) -> xr.DataArray:
        """Label 8-connected components.

        The array is binarized at ``threshold`` first; without a threshold,
        every non-zero pixel is foreground. The number of components is
        stored in the ``count`` attribute.
        """
        if threshold is None:
            self._check_dims()
            values = self._obj
            if 'channel' in values.dims:
                values = values.squeeze('channel', drop=True)
            mask = values.transpose('y', 'x').values != 0
        else:
            mask = self.binarize(threshold).values
        labels, count = connected_components(mask)
        result = self._spatial(labels, 'components')
        result.attrs['count'] = count
        return result

    def _spatial(self, values: np.ndarray, name: str) -> xr.DataArray:
        coords = {
            dim: self._obj.coords[dim]
            for dim in ('y', 'x')
            if dim in self._obj.coords
        }
        return xr.DataArray(values, dims=('y', 'x'), coords=coords, name=name)


@xr.register_dataset_accessor(TILE_ACCESSOR_NAME)
class DatasetTileAccessor:
    def __init__(self, obj: xr.Dataset) -> None:
        raise AttributeError(
            f'{obj.__class__.__name__!r} '
            f'object has no attribute {TILE_ACCESSOR_NAME!r}. '
            'Select a DataArray of the Dataset to use it.'
        )
