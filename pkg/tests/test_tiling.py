import numpy as np
import pytest

from colormapgan import (
    InputTooSmallError,
    InvalidConfigError,
    ShapeMismatchError,
    StitchConflictError,
    TileGrid,
    cmapfig,
    stitch_image,
    stitch_scores,
    tile,
)
from colormapgan.tiling import axis_origins


class TestGrid:
    def test_origins(self):
        assert axis_origins(512, 256, 32) == [0, 224, 256]
        grid = TileGrid(512, 512, 256, 32)
        assert len(grid) == 9
        assert grid.origins[:3] == [(0, 0), (0, 224), (0, 256)]
        assert grid.stride == 224

    def test_single_patch(self):
        grid = TileGrid(256, 256, 256, 32)
        assert grid.origins == [(0, 0)]

    def test_divisible_extent(self):
        assert axis_origins(12, 4, 0) == [0, 4, 8]

    def test_last_patch_touches_edge(self):
        for extent in range(40, 80):
            origins = axis_origins(extent, 32, 8)
            assert origins[-1] + 32 == extent
            assert all(a < b for a, b in zip(origins, origins[1:]))

    def test_defaults_from_config(self):
        cmapfig.PATCH_SIZE = 16
        cmapfig.OVERLAP = 0
        assert len(TileGrid(32, 48)) == 6

    def test_overlap_too_large(self):
        with pytest.raises(InvalidConfigError):
            TileGrid(512, 512, 256, 256)
        with pytest.raises(InvalidConfigError):
            TileGrid(512, 512, 256, -1)

    def test_raster_too_small(self):
        with pytest.raises(InputTooSmallError) as excinfo:
            TileGrid(200, 512, 256, 32)
        assert excinfo.value.minimum == 256

    def test_cut_shape_mismatch(self):
        with pytest.raises(ShapeMismatchError):
            TileGrid(64, 64, 32, 0).cut(np.zeros((64, 32)))


class TestStitchImage:
    def test_round_trip(self):
        image = np.random.default_rng(0).integers(0, 256, (300, 420, 3), dtype=np.uint8)
        grid, patches = tile(image, 128, 16)
        assert np.array_equal(stitch_image(grid, patches), image)

    def test_masks(self):
        mask = np.random.default_rng(1).integers(0, 4, (70, 90), dtype=np.uint8)
        grid, patches = tile(mask, 32, 8)
        assert np.array_equal(stitch_image(grid, patches), mask)

    def test_conflict(self):
        image = np.zeros((512, 512, 3), dtype=np.uint8)
        grid, patches = tile(image, 256, 32)
        patches[1][0, 0] = (1, 0, 0)
        with pytest.raises(StitchConflictError) as excinfo:
            stitch_image(grid, patches)
        assert excinfo.value.coordinate == (0, 224)

    def test_wrong_count(self):
        grid, patches = tile(np.zeros((64, 64), dtype=np.uint8), 32, 0)
        with pytest.raises(ShapeMismatchError):
            stitch_image(grid, patches[:-1])


class TestStitchScores:
    def test_concatenation(self):
        grid = TileGrid(4, 8, 4, 0)
        scores = stitch_scores(grid, [np.zeros((4, 4, 2)), np.ones((4, 4, 2))])
        assert np.all(scores[:, :4] == 0.0)
        assert np.all(scores[:, 4:] == 1.0)

    def test_average(self):
        grid = TileGrid(4, 6, 4, 2)
        scores = stitch_scores(grid, [np.zeros((4, 4)), np.ones((4, 4))])
        assert scores[0].tolist() == [0.0, 0.0, 0.5, 0.5, 1.0, 1.0]

    def test_constant(self):
        grid = TileGrid(100, 100, 32, 8)
        scores = stitch_scores(grid, [np.full((32, 32, 4), 0.25)] * len(grid))
        assert np.allclose(scores, 0.25)
