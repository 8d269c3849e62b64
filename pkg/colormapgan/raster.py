"""RGB rasters and label masks: validation and PNG input/output.

Images are `uint8` arrays of shape (H, W, 3). Masks are `uint8` arrays of shape
(H, W) holding a class id per pixel.
"""

from pathlib import Path

import numpy as np
from PIL import Image

from .exceptions import ImageFormatError, MaskFormatError, MissingArtifactError, ShapeMismatchError

BACKGROUND, BUILDING, ROAD, TREE = 0, 1, 2, 3
CLASS_NAMES = ("background", "building", "road", "tree")
FOREGROUND = (BUILDING, ROAD, TREE)
N_CLASSES = len(CLASS_NAMES)

# Rendering colours of the class ids, in id order
LEGEND = np.array(
    [
        [0, 0, 0],  # background
        [255, 0, 0],  # building
        [255, 255, 255],  # road
        [0, 255, 0],  # tree
    ],
    dtype=np.uint8,
)


def check_image(image: np.ndarray) -> np.ndarray:
    if not isinstance(image, np.ndarray) or image.dtype != np.uint8:
        raise ImageFormatError(f"Images must be uint8 arrays, got {getattr(image, 'dtype', type(image))}")
    if image.ndim != 3 or image.shape[2] != 3:
        raise ImageFormatError(f"Images must have shape (H, W, 3), got {image.shape}")
    if image.shape[0] < 1 or image.shape[1] < 1:
        raise ImageFormatError(f"Images need at least one pixel, got {image.shape}")
    return image


def check_mask(mask: np.ndarray, image: np.ndarray | None = None) -> np.ndarray:
    """Validate a mask, and its extent against `image` when one is given."""
    if not isinstance(mask, np.ndarray) or mask.ndim != 2:
        raise MaskFormatError(f"Masks must be 2-D arrays, got {getattr(mask, 'shape', type(mask))}")
    if not np.issubdtype(mask.dtype, np.integer):
        raise MaskFormatError(f"Masks must hold integer class ids, got {mask.dtype}")
    invalid = mask[(mask < 0) | (mask >= N_CLASSES)]
    if invalid.size:
        raise MaskFormatError(f"Mask holds class id {int(invalid[0])}, ids must lie in [0, {N_CLASSES - 1}]")
    if image is not None and mask.shape != image.shape[:2]:
        raise ShapeMismatchError(f"Mask {mask.shape} does not match image {image.shape}")
    return mask.astype(np.uint8, copy=False)


def _open(path: Path | str) -> Image.Image:
    path = Path(path)
    if not path.exists():
        raise MissingArtifactError(path)
    return Image.open(path)


def load_image(path: Path | str) -> np.ndarray:
    with _open(path) as img:
        if img.mode != "RGB":
            raise ImageFormatError(f"{path} is a {img.mode} image, expected 8-bit RGB")
        return np.array(img, dtype=np.uint8)


def save_image(image: np.ndarray, path: Path | str) -> None:
    check_image(image)
    Image.fromarray(image).save(Path(path), format="PNG")


def load_mask(path: Path | str) -> np.ndarray:
    with _open(path) as img:
        if img.mode != "L":
            raise MaskFormatError(f"{path} is a {img.mode} image, expected 8-bit grayscale")
        mask = np.array(img, dtype=np.uint8)
    return check_mask(mask)


def save_mask(mask: np.ndarray, path: Path | str) -> None:
    mask = check_mask(mask)
    Image.fromarray(np.ascontiguousarray(mask, dtype=np.uint8)).save(Path(path), format="PNG")


def colorize_mask(mask: np.ndarray) -> np.ndarray:
    """RGB rendering of a mask: red building, white road, green tree, black background."""
    return LEGEND[check_mask(mask)]
