"""Colour alignment without learning: per-channel histogram matching and gray world."""

import logging
from typing import Sequence

import numpy as np

from .exceptions import ColorRangeError, EmptyDatasetError, ImageFormatError
from .rounding import to_uint8

logger = logging.getLogger(__name__)


def _check_images(images: Sequence[np.ndarray], name: str):
    if len(images) == 0:
        raise EmptyDatasetError(f"histogram_match() needs at least one {name} image")
    for n, image in enumerate(images):
        if image.dtype != np.uint8 or image.ndim != 3 or image.shape[2] != 3:
            raise ImageFormatError(f"{name} image {n} is not 8-bit RGB: {image.dtype} {image.shape}")


def channel_histograms(images: Sequence[np.ndarray]) -> np.ndarray:
    """Pixel counts per level, pooled over all images, shape (3, 256)."""
    counts = np.zeros((3, 256), dtype=np.int64)
    for image in images:
        for c in range(3):
            counts[c] += np.bincount(image[..., c].ravel(), minlength=256)
    return counts


def cdf(counts: np.ndarray) -> np.ndarray:
    """Cumulative distribution along the last axis; ends at 1 for non-empty counts."""
    cumulative = np.cumsum(counts, axis=-1)
    return cumulative / cumulative[..., -1:]


def apply_level_map(level_map: np.ndarray, image: np.ndarray) -> np.ndarray:
    """Replace every level of channel c by `level_map[c, level]`."""
    return np.stack([level_map[c][image[..., c]] for c in range(3)], axis=-1)


def histogram_match(
    source_images: Sequence[np.ndarray], target_images: Sequence[np.ndarray]
) -> tuple[np.ndarray, list[np.ndarray]]:
    """Match the pooled per-channel histograms of the source set to those of the target set.

    Each source level v of a channel maps to the smallest target level whose CDF is at
    least the source CDF at v. Returns the (3, 256) level map and the recoloured
    source images.
    """
    _check_images(source_images, "source")
    _check_images(target_images, "target")
    source_cum = np.cumsum(channel_histograms(source_images), axis=1)
    target_cum = np.cumsum(channel_histograms(target_images), axis=1)

    level_map = np.empty((3, 256), dtype=np.uint8)
    for c in range(3):
        # Compare CDFs by cross-multiplying the integer cumulative counts, no float ties
        source_total, target_total = source_cum[c, -1], target_cum[c, -1]
        level_map[c] = np.searchsorted(
            target_cum[c] * source_total, source_cum[c] * target_total, side="left"
        )
    logger.debug("Matched histograms of %d source to %d target images", len(source_images), len(target_images))
    return level_map, [apply_level_map(level_map, image) for image in source_images]


def ks_distance(images_a: Sequence[np.ndarray], images_b: Sequence[np.ndarray]) -> np.ndarray:
    """Per-channel Kolmogorov-Smirnov distance between the pooled level distributions."""
    return np.abs(cdf(channel_histograms(images_a)) - cdf(channel_histograms(images_b))).max(axis=1)


def format_level_map(level_map: np.ndarray) -> str:
    """Three comma-separated lines of 256 integers, one per channel."""
    return "\n".join(",".join(str(int(level)) for level in row) for row in level_map) + "\n"


def parse_level_map(text: str) -> np.ndarray:
    rows = [line for line in text.splitlines() if line.strip()]
    level_map = np.array([[int(cell) for cell in row.split(",")] for row in rows])
    if level_map.shape != (3, 256) or level_map.min() < 0 or level_map.max() > 255:
        raise ColorRangeError(f"A level map is 3 rows of 256 levels in [0, 255], got shape {level_map.shape}")
    return level_map.astype(np.uint8)


def gray_world(image: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Scale each channel so that its mean equals the mean of the three channel means.

    Returns the corrected image, rounded half to even and clamped to [0, 255], and the
    three gains.
    """
    if image.dtype != np.uint8 or image.ndim != 3 or image.shape[2] != 3:
        raise ImageFormatError(f"gray_world() needs an 8-bit RGB image, got {image.dtype} {image.shape}")
    if image.shape[0] * image.shape[1] == 0:
        raise ImageFormatError("gray_world() needs a non-empty image")
    means = image.reshape(-1, 3).mean(axis=0)
    if (means == 0).any():
        channel = "rgb"[int(np.argmax(means == 0))]
        raise ColorRangeError(f"Channel {channel} has mean 0, the gray-world gain is undefined")
    gains = means.mean() / means
    return to_uint8(image * gains), gains
