import hypothesis as hp
import hypothesis.strategies as st
import numpy as np
import pytest as pt

from active_tiles.errors import GeometryError, ManifestError
from active_tiles.options import OPTIONS
from active_tiles.tiler import (
    DEFAULT_ARTIFACT_TEMPLATE,
    RasterMeta,
    axis_offsets,
    build_tile_grid,
    grid_to_manifest,
    read_rasters,
)
from tests.constants import ROLES, TILE_SIZE


class TestAxisOffsets:
    def test_exact_division(self):
        """Should step by the tile size when it divides the extent."""
        assert axis_offsets(1024, 512) == [0, 512]

    def test_clamps_last_offset(self):
        """Should shift the last window inward to end on the edge."""
        assert axis_offsets(1300, 512) == [0, 512, 788]
        assert axis_offsets(700, 512) == [0, 188]

    def test_raises_when_too_small(self):
        """Should raise a GeometryError when the tile exceeds the extent."""
        with pt.raises(GeometryError):
            axis_offsets(100, 512)


class TestBuildTileGrid:
    def test_default_tile_size(self):
        """Should default to the tile_size option."""
        grid = build_tile_grid(RasterMeta('img', 1024, 1024))
        assert grid.tile_size == OPTIONS['tile_size'] == TILE_SIZE
        assert [(t.y, t.x) for t in grid.tiles] == [
            (0, 0),
            (0, 512),
            (512, 0),
            (512, 512),
        ]

    def test_single_tile(self):
        """Should return one tile when the raster equals the tile size."""
        grid = build_tile_grid(RasterMeta('img', 512, 512), 512)
        assert len(grid) == 1
        assert grid.tiles[0].tile_id == 'img_0_0'

    def test_non_divisible_raster(self):
        """Should clamp edge tiles of a 700x1300 raster inward."""
        grid = build_tile_grid(RasterMeta('img', 700, 1300), 512)
        assert grid.shape == (2, 3)
        assert [t.tile_id for t in grid.tiles] == [
            'img_0_0',
            'img_0_512',
            'img_0_788',
            'img_188_0',
            'img_188_512',
            'img_188_788',
        ]

    def test_raises_for_small_raster(self):
        """Should raise a GeometryError for a raster smaller than a tile."""
        with pt.raises(GeometryError):
            build_tile_grid(RasterMeta('img', 511, 1024), 512)

    def test_raster_must_be_positive(self):
        """Should refuse empty rasters."""
        with pt.raises(GeometryError):
            RasterMeta('img', 0, 10)

    @hp.given(
        size=st.integers(min_value=1, max_value=20),
        extra_h=st.integers(min_value=0, max_value=30),
        extra_w=st.integers(min_value=0, max_value=30),
    )
    def test_covers_every_pixel(self, size: int, extra_h: int, extra_w: int):
        """Should cover every pixel without leaving the raster."""
        height, width = size + extra_h, size + extra_w
        grid = build_tile_grid(RasterMeta('img', height, width), size)
        covered = np.zeros((height, width), dtype=int)
        for tile in grid.tiles:
            assert tile.x + tile.size <= width
            assert tile.y + tile.size <= height
            covered[tile.y : tile.y + size, tile.x : tile.x + size] += 1
        assert (covered >= 1).all()
        assert grid.shape == (-(-height // size), -(-width // size))

    @hp.given(
        height=st.integers(min_value=8, max_value=64),
        width=st.integers(min_value=8, max_value=64),
    )
    def test_offsets_strictly_increase(self, height: int, width: int):
        """Should order tiles by strictly increasing (y, x)."""
        grid = build_tile_grid(RasterMeta('img', height, width), 8)
        keys = [(t.y, t.x) for t in grid.tiles]
        assert all(a < b for a, b in zip(keys, keys[1:]))


class TestManifest:
    def test_grid_to_manifest(self):
        """Should declare one artifact path per role and tile."""
        grids = [
            build_tile_grid(RasterMeta('b', 16, 16), 8),
            build_tile_grid(RasterMeta('a', 8, 8), 8),
        ]
        pool = grid_to_manifest(grids)
        assert pool.tile_ids[0] == 'a_0_0'
        assert len(pool) == 5
        record = pool['b_8_0']
        assert record.source_image_id == 'b'
        assert sorted(record.artifact_paths) == sorted(ROLES)
        assert record.artifact_paths['gt'] == DEFAULT_ARTIFACT_TEMPLATE.format(
            role='gt', tile_id='b_8_0'
        )

    def test_without_template(self):
        """Should declare no paths when the template is None."""
        grid = build_tile_grid(RasterMeta('a', 8, 8), 8)
        record = grid_to_manifest([grid], None)['a_0_0']
        assert dict(record.artifact_paths) == {}

    def test_read_rasters(self, tmp_path):
        """Should read raster extents from JSONL."""
        path = tmp_path / 'rasters.jsonl'
        path.write_text('{"image_id":"a","height":700,"width":1300}\n')
        assert read_rasters(path) == [RasterMeta('a', 700, 1300)]

    def test_read_rasters_rejects_empty(self, tmp_path):
        """Should report an empty raster with its line number."""
        path = tmp_path / 'rasters.jsonl'
        path.write_text('{"image_id":"a","height":0,"width":1300}\n')
        with pt.raises(ManifestError) as info:
            read_rasters(path)
        assert info.value.line == 1
