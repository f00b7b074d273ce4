"""Split large rasters into fixed-size tile windows.

Offsets along each axis are ``0, s, 2s, ...``; the last window is shifted
inward so that it ends on the raster edge instead of being padded.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Iterable
from dataclasses import dataclass
from pathlib import Path

from active_tiles._helpers import iter_jsonl, require_field
from active_tiles.array_store import PoolManifest, PoolRecord
from active_tiles.errors import GeometryError, ManifestError, ValidationError
from active_tiles.options import OPTIONS
from active_tiles.types import ArtifactRole

__all__ = [
    'DEFAULT_ARTIFACT_TEMPLATE',
    'RasterMeta',
    'TileGrid',
    'TileRef',
    'axis_offsets',
    'build_tile_grid',
    'grid_to_manifest',
    'read_rasters',
]

logger = logging.getLogger(__name__)

DEFAULT_ARTIFACT_TEMPLATE = '{role}/{tile_id}.alf'


@dataclass(frozen=True)
class RasterMeta:
    """Extent of a large raster image, in pixels."""

    image_id: str
    height: int
    width: int

    def __post_init__(self) -> None:
        if self.height < 1 or self.width < 1:
            raise GeometryError(
                f'raster {self.image_id!r} must be at least 1x1, got '
                f'{self.height}x{self.width}'
            )


@dataclass(frozen=True)
class TileRef:
    """A square window of a raster."""

    tile_id: str
    image_id: str
    x: int
    y: int
    size: int


@dataclass(frozen=True)
class TileGrid:
    """All tile windows of one raster, ordered by ``(y, x)``."""

    raster: RasterMeta
    tile_size: int
    tiles: tuple[TileRef, ...]

    def __len__(self) -> int:
        return len(self.tiles)

    @property
    def shape(self) -> tuple[int, int]:
        """Number of tile rows and columns."""
        rows = len({tile.y for tile in self.tiles})
        return rows, len(self.tiles) // rows


def axis_offsets(extent: int, size: int) -> list[int]:
    """Return the window offsets covering ``extent`` pixels.

    There are ``ceil(extent / size)`` offsets; the last one is clamped to
    ``extent - size``.
    """
    if size > extent:
        raise GeometryError(f'tile size {size} exceeds extent {extent}')
    count = math.ceil(extent / size)
    return [min(i * size, extent - size) for i in range(count)]


def build_tile_grid(
    raster: RasterMeta, tile_size: int | None = None
) -> TileGrid:
    """Tile a raster into ``tile_size`` square windows.

    Parameters
    ----------
    raster : RasterMeta
        The raster to split.
    tile_size : int, optional
        Window size in pixels. Defaults to the ``tile_size`` option (512).

    Returns
    -------
    TileGrid
        Tiles in strictly increasing ``(y, x)`` order with identifiers
        ``f'{image_id}_{y}_{x}'``. Every pixel is covered by at least one
        tile and no tile extends past the raster.

    Raises
    ------
    GeometryError
        If the raster is smaller than one tile along either axis.
    """
    tile_size = OPTIONS['tile_size'] if tile_size is None else tile_size
    if tile_size < 1:
        raise ValidationError(f'tile_size must be positive, got {tile_size}')
    if raster.height < tile_size or raster.width < tile_size:
        raise GeometryError(
            f'raster {raster.image_id!r} ({raster.height}x{raster.width}) '
            f'is smaller than the tile size {tile_size}'
        )
    tiles = tuple(
        TileRef(
            tile_id=f'{raster.image_id}_{y}_{x}',
            image_id=raster.image_id,
            x=x,
            y=y,
            size=tile_size,
        )
        for y in axis_offsets(raster.height, tile_size)
        for x in axis_offsets(raster.width, tile_size)
    )
    logger.debug(
        '%s: %d tiles of %d px', raster.image_id, len(tiles), tile_size
    )
    return TileGrid(raster=raster, tile_size=tile_size, tiles=tiles)


def read_rasters(path: str | Path) -> list[RasterMeta]:
    """Read ``{"image_id", "height", "width"}`` records from a JSONL file."""
    rasters = []
    for line, raw in iter_jsonl(path):
        image_id = require_field(raw, 'image_id', str, path=path, line=line)
        height = require_field(raw, 'height', int, path=path, line=line)
        width = require_field(raw, 'width', int, path=path, line=line)
        try:
            rasters.append(RasterMeta(image_id, height, width))
        except GeometryError as error:
            raise ManifestError(path, line, str(error)) from error
    return rasters


def grid_to_manifest(
    grids: Iterable[TileGrid],
    template: str | None = DEFAULT_ARTIFACT_TEMPLATE,
    roles: Iterable[ArtifactRole | str] = tuple(ArtifactRole),
) -> PoolManifest:
    """List the tiles of several grids as a pool manifest.

    Parameters
    ----------
    grids : iterable of TileGrid
        The grids to list.
    template : str, optional
        Format string for artifact paths with the fields ``role``,
        ``tile_id`` and ``image_id``. If None, no paths are declared.
    roles : iterable of str
        Roles for which a path is declared.

    Returns
    -------
    PoolManifest
    """
    roles = [str(role) for role in roles]
    records = []
    for grid in grids:
        for tile in grid.tiles:
            paths = (
                {}
                if template is None
                else {
                    role: template.format(
                        role=role, tile_id=tile.tile_id, image_id=tile.image_id
                    )
                    for role in roles
                }
            )
            records.append(PoolRecord(tile.tile_id, tile.image_id, paths))
    return PoolManifest(tuple(records))
