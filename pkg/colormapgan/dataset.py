"""Domain datasets on disk, patch extraction and dataset statistics.

Target-domain masks are ground truth for evaluation only. `DomainLoader` refuses
to read them unless it is inside its `evaluation()` context, so nothing in training,
adaptation or fine-tuning can see them.
"""

from contextlib import contextmanager
import logging
from pathlib import Path
from typing import Sequence

import numpy as np

from .config import cmapfig
from .exceptions import EmptyDatasetError, ShapeMismatchError, UnsupervisedContractError
from .format import format_percentage, format_table
from .raster import CLASS_NAMES, N_CLASSES, check_mask, load_image, load_mask
from .tiling import TileGrid

logger = logging.getLogger(__name__)


class DatasetStats:
    """Per-class pixel frequency of a set of masks, with patch count and covered area."""

    __slots__ = ("counts", "patches", "area_km2")

    def __init__(self, counts: np.ndarray, patches: int, area_km2: float):
        self.counts = counts
        self.patches = patches
        self.area_km2 = area_km2

    @property
    def pixels(self) -> int:
        return int(self.counts.sum())

    @property
    def frequencies(self) -> dict[str, float]:
        """Percentage of pixels per class, background included."""
        return {name: 100 * int(n) / self.pixels for name, n in zip(CLASS_NAMES, self.counts)}

    def __repr__(self):
        return f"DatasetStats({self.pixels} pixels, {self.patches} patches, {self.area_km2} km²)"

    def __str__(self):
        rows = [
            [name, format_percentage(int(n) / self.pixels)] for name, n in zip(CLASS_NAMES, self.counts)
        ]
        table = format_table(["class", "freq (%)"], rows)
        return f"{table}\npatches: {self.patches}\narea (km²): {self.area_km2:.4f}"


def dataset_stats(
    masks: Sequence[np.ndarray],
    size: int | None = None,
    overlap: int | None = None,
    pixel_size: float | None = None,
) -> DatasetStats:
    """Class frequencies over all masks, the number of patches the tiling cuts them into,
    and their ground area given `pixel_size` metres per pixel.

    Masks smaller than one patch count as a single patch.
    """
    if len(masks) == 0:
        raise EmptyDatasetError("dataset_stats() needs at least one mask")
    pixel_size = cmapfig.PIXEL_SIZE if pixel_size is None else pixel_size
    size = cmapfig.PATCH_SIZE if size is None else size
    counts = np.zeros(N_CLASSES, dtype=np.int64)
    patches = 0
    for mask in masks:
        counts += np.bincount(check_mask(mask).ravel(), minlength=N_CLASSES)
        if min(mask.shape) >= size:
            patches += len(TileGrid(mask.shape[0], mask.shape[1], size, overlap))
        else:
            patches += 1
    area_km2 = int(counts.sum()) * pixel_size**2 / 1e6
    return DatasetStats(counts, patches, area_km2)


def cut_patches(rasters: Sequence[np.ndarray], size: int) -> list[np.ndarray]:
    """Non-overlapping (except at the far edges) patches of every raster, in order."""
    patches = []
    for raster in rasters:
        patches.extend(TileGrid(raster.shape[0], raster.shape[1], size, 0).cut(raster))
    return patches


class DomainLoader:
    """Reads the rasters listed by the `[config.paths]` options.

    Paths given as arguments override the configured ones.
    """

    def __init__(
        self,
        source_images: Sequence[str] | None = None,
        source_masks: Sequence[str] | None = None,
        target_images: Sequence[str] | None = None,
        target_masks: Sequence[str] | None = None,
    ):
        self.source_images = [Path(p) for p in (cmapfig.SOURCE_IMAGES if source_images is None else source_images)]
        self.source_masks = [Path(p) for p in (cmapfig.SOURCE_MASKS if source_masks is None else source_masks)]
        self.target_images = [Path(p) for p in (cmapfig.TARGET_IMAGES if target_images is None else target_images)]
        self.target_masks = [Path(p) for p in (cmapfig.TARGET_MASKS if target_masks is None else target_masks)]
        self._evaluating = False

    @contextmanager
    def evaluation(self):
        """Allow `load_target_masks()` for the duration of the block."""
        self._evaluating = True
        try:
            yield self
        finally:
            self._evaluating = False

    def load_source(self) -> list[tuple[np.ndarray, np.ndarray]]:
        if not self.source_images:
            raise EmptyDatasetError("No source images configured (SOURCE_IMAGES)")
        if len(self.source_images) != len(self.source_masks):
            raise ShapeMismatchError(
                f"{len(self.source_images)} source images but {len(self.source_masks)} source masks"
            )
        pairs = []
        for image_path, mask_path in zip(self.source_images, self.source_masks):
            image = load_image(image_path)
            pairs.append((image, check_mask(load_mask(mask_path), image)))
        logger.debug("Loaded %d source rasters", len(pairs))
        return pairs

    def load_target_images(self) -> list[np.ndarray]:
        if not self.target_images:
            raise EmptyDatasetError("No target images configured (TARGET_IMAGES)")
        return [load_image(path) for path in self.target_images]

    def load_target_masks(self) -> list[np.ndarray]:
        if not self._evaluating:
            raise UnsupervisedContractError(
                "Target-domain masks may only be read for evaluation"
            )
        if len(self.target_masks) != len(self.target_images):
            raise ShapeMismatchError(
                f"{len(self.target_images)} target images but {len(self.target_masks)} target masks"
            )
        return [load_mask(path) for path in self.target_masks]
