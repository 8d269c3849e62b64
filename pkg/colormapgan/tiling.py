"""Decomposition of rasters into overlapping square patches and the way back."""

from typing import Sequence

import numpy as np

from .config import cmapfig
from .exceptions import InputTooSmallError, InvalidConfigError, ShapeMismatchError, StitchConflictError


def axis_origins(extent: int, size: int, overlap: int) -> list[int]:
    """Patch origins along one axis: 0, stride, 2·stride, ... with the last one clamped
    to `extent - size`, duplicates collapsed."""
    stride = size - overlap
    origins = list(range(0, extent - size + 1, stride))
    if origins[-1] != extent - size:
        origins.append(extent - size)
    return origins


class TileGrid:
    """Origins of the fixed-size patches covering a `height` × `width` raster.

    Origins are listed row by row, each as `(row, col)` of the patch's top-left pixel.
    """

    __slots__ = ("size", "overlap", "height", "width", "origins")

    def __init__(self, height: int, width: int, size: int | None = None, overlap: int | None = None):
        size = cmapfig.PATCH_SIZE if size is None else size
        overlap = cmapfig.OVERLAP if overlap is None else overlap
        if size < 1:
            raise InvalidConfigError(f"Patch size must be positive, got {size}", "size")
        if not 0 <= overlap < size:
            raise InvalidConfigError(f"Overlap must lie in [0, {size}), got {overlap}", "overlap")
        if height < size or width < size:
            raise InputTooSmallError(
                f"Raster of {height}×{width} is smaller than one {size}×{size} patch", size
            )
        self.size = size
        self.overlap = overlap
        self.height = height
        self.width = width
        self.origins = [
            (row, col)
            for row in axis_origins(height, size, overlap)
            for col in axis_origins(width, size, overlap)
        ]

    def __len__(self) -> int:
        return len(self.origins)

    def __repr__(self):
        return (
            f"TileGrid({self.height}×{self.width}, size={self.size}, "
            f"overlap={self.overlap}, {len(self)} patches)"
        )

    @property
    def stride(self) -> int:
        return self.size - self.overlap

    def cut(self, raster: np.ndarray) -> list[np.ndarray]:
        if raster.shape[:2] != (self.height, self.width):
            raise ShapeMismatchError(
                f"Raster {raster.shape} does not match grid of {self.height}×{self.width}"
            )
        s = self.size
        return [raster[row:row + s, col:col + s].copy() for row, col in self.origins]

    def _check_patches(self, patches: Sequence[np.ndarray]):
        if len(patches) != len(self):
            raise ShapeMismatchError(f"Grid has {len(self)} patches, got {len(patches)}")
        trailing = patches[0].shape[2:]
        for n, patch in enumerate(patches):
            if patch.shape[:2] != (self.size, self.size) or patch.shape[2:] != trailing:
                raise ShapeMismatchError(
                    f"Patch {n} has shape {patch.shape}, expected "
                    f"{(self.size, self.size, *trailing)}"
                )


def tile(image: np.ndarray, size: int | None = None, overlap: int | None = None) -> tuple[TileGrid, list[np.ndarray]]:
    """Cut an image or mask into the patches of its tile grid."""
    grid = TileGrid(image.shape[0], image.shape[1], size, overlap)
    return grid, grid.cut(image)


def stitch_image(grid: TileGrid, patches: Sequence[np.ndarray]) -> np.ndarray:
    """Reassemble patches whose overlapping pixels agree exactly.

    Raises `StitchConflictError` naming the first (row, col) where two patches
    disagree.
    """
    grid._check_patches(patches)
    s = grid.size
    out = np.zeros((grid.height, grid.width, *patches[0].shape[2:]), dtype=patches[0].dtype)
    filled = np.zeros((grid.height, grid.width), dtype=bool)
    for (row, col), patch in zip(grid.origins, patches):
        region = out[row:row + s, col:col + s]
        seen = filled[row:row + s, col:col + s]
        differs = region != patch
        if differs.ndim == 3:
            differs = differs.any(axis=2)
        conflicts = np.argwhere(seen & differs)
        if conflicts.size:
            r, c = conflicts[0]
            coordinate = (row + int(r), col + int(c))
            raise StitchConflictError(f"Overlapping patches disagree at pixel {coordinate}", coordinate)
        region[~seen] = patch[~seen]
        seen[...] = True
    return out


def stitch_scores(grid: TileGrid, patches: Sequence[np.ndarray]) -> np.ndarray:
    """Reassemble real-valued patches, averaging every pixel over the patches covering it."""
    grid._check_patches(patches)
    s = grid.size
    total = np.zeros((grid.height, grid.width, *patches[0].shape[2:]))
    count = np.zeros((grid.height, grid.width))
    for (row, col), patch in zip(grid.origins, patches):
        total[row:row + s, col:col + s] += patch
        count[row:row + s, col:col + s] += 1
    return total / count.reshape(count.shape + (1,) * (total.ndim - 2))
