"""Synthetic pairs of aerial-looking scenes that differ only in their colours.

Both domains share one geometry: straight roads, round tree crowns and rectangular
buildings painted over background, in that order. Every object gets a colour
jitter that both domains share. Domain d then renders a pixel of class c as

    clamp(round_half_even(scale_d ∘ (palette_d[c] + jitter) + offset_d + noise_d))

with integer noise drawn uniformly from [-amp_d, amp_d] independently per domain.
"""

import copy
import logging
from pathlib import Path
import tomllib

import numpy as np

from .config import cmapfig
from .exceptions import InvalidConfigError
from .raster import BUILDING, N_CLASSES, ROAD, TREE, save_image, save_mask
from .rounding import to_uint8

logger = logging.getLogger(__name__)

MANIFEST = "manifest.toml"


class SynthConfig:
    """Scene layout, per-domain colours and seed of a synthetic pair.

    Any argument left as `None` takes its value from the `[config.synth]` options of
    `cmapfig` (and `SEED` for the seed).
    """

    __slots__ = (
        "scene_size",
        "buildings",
        "building_size",
        "roads",
        "road_width",
        "trees",
        "tree_radius",
        "jitter",
        "palette_a",
        "palette_b",
        "scale_a",
        "offset_a",
        "scale_b",
        "offset_b",
        "noise_a",
        "noise_b",
        "seed",
    )

    def __init__(self, **fields):
        unknown = set(fields) - set(self.__slots__)
        if unknown:
            raise InvalidConfigError(f"Unknown synthetic scene fields: {sorted(unknown)}", sorted(unknown)[0])
        for name in self.__slots__:
            value = fields.get(name)
            if value is None:
                value = cmapfig.SEED if name == "seed" else getattr(cmapfig, name.upper())
            setattr(self, name, copy.deepcopy(value))
        self.validate()

    def __repr__(self):
        return f"SynthConfig(scene_size={self.scene_size}, seed={self.seed})"

    def to_dict(self) -> dict:
        out = {}
        for name in self.__slots__:
            value = getattr(self, name)
            out[name] = np.asarray(value).tolist() if isinstance(value, (list, tuple, np.ndarray)) else value
        return out

    def validate(self):
        if self.scene_size < 1:
            raise InvalidConfigError(f"scene_size must be positive, got {self.scene_size}", "scene_size")
        for name in ("buildings", "roads", "trees", "jitter", "noise_a", "noise_b"):
            if getattr(self, name) < 0:
                raise InvalidConfigError(f"{name} cannot be negative, got {getattr(self, name)}", name)
        for name in ("building_size", "road_width", "tree_radius"):
            low, high = getattr(self, name)
            if not 1 <= low <= high:
                raise InvalidConfigError(f"{name} must be a range [low, high] with 1 <= low <= high, got {[low, high]}", name)
        for domain in ("a", "b"):
            palette = np.asarray(getattr(self, f"palette_{domain}"), dtype=np.float64)
            if palette.shape != (N_CLASSES, 3):
                raise InvalidConfigError(
                    f"palette_{domain} needs one RGB colour per class, got shape {palette.shape}", f"palette_{domain}"
                )
            scale = np.asarray(getattr(self, f"scale_{domain}"), dtype=np.float64)
            offset = np.asarray(getattr(self, f"offset_{domain}"), dtype=np.float64)
            for name, vector in ((f"scale_{domain}", scale), (f"offset_{domain}", offset)):
                if vector.shape != (3,):
                    raise InvalidConfigError(f"{name} needs three values, got {vector.tolist()}", name)
            expected = palette * scale + offset
            if expected.min() < 0 or expected.max() > 255:
                raise InvalidConfigError(
                    f"scale_{domain}/offset_{domain} move class colours outside [0, 255]: "
                    f"{expected.min():.1f} to {expected.max():.1f}",
                    f"offset_{domain}",
                )


def _layout(cfg: SynthConfig, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Paint the shared geometry; returns the mask and the per-pixel colour jitter."""
    S = cfg.scene_size
    mask = np.zeros((S, S), dtype=np.uint8)
    jitter = np.zeros((S, S, 3))

    def object_jitter():
        return rng.integers(-cfg.jitter, cfg.jitter + 1, 3)

    for _ in range(cfg.roads):
        vertical = bool(rng.integers(2))
        centre = int(rng.integers(S))
        width = int(rng.integers(cfg.road_width[0], cfg.road_width[1] + 1))
        start, stop = max(0, centre - width // 2), min(S, centre - width // 2 + width)
        region = (slice(None), slice(start, stop)) if vertical else (slice(start, stop), slice(None))
        mask[region] = ROAD
        jitter[region] = object_jitter()

    rows, cols = np.ogrid[:S, :S]
    for _ in range(cfg.trees):
        r, c = int(rng.integers(S)), int(rng.integers(S))
        radius = int(rng.integers(cfg.tree_radius[0], cfg.tree_radius[1] + 1))
        crown = (rows - r) ** 2 + (cols - c) ** 2 <= radius**2
        mask[crown] = TREE
        jitter[crown] = object_jitter()

    for _ in range(cfg.buildings):
        height = int(rng.integers(cfg.building_size[0], cfg.building_size[1] + 1))
        width = int(rng.integers(cfg.building_size[0], cfg.building_size[1] + 1))
        r, c = int(rng.integers(S)), int(rng.integers(S))
        mask[r:r + height, c:c + width] = BUILDING
        jitter[r:r + height, c:c + width] = object_jitter()

    return mask, jitter


def _render(
    mask: np.ndarray,
    jitter: np.ndarray,
    palette,
    scale,
    offset,
    amplitude: int,
    rng: np.random.Generator,
) -> np.ndarray:
    base = np.asarray(palette, dtype=np.float64)[mask] + jitter
    values = base * np.asarray(scale, dtype=np.float64) + np.asarray(offset, dtype=np.float64)
    if amplitude:
        values = values + rng.integers(-amplitude, amplitude + 1, values.shape)
    return to_uint8(values)


def synth_generate(cfg: SynthConfig | None = None) -> tuple[tuple[np.ndarray, np.ndarray], tuple[np.ndarray, np.ndarray]]:
    """Generate the two domains as `((image_a, mask_a), (image_b, mask_b))`.

    The masks are identical; the whole output is a function of `cfg`.
    """
    cfg = SynthConfig() if cfg is None else cfg
    rng = np.random.default_rng(cfg.seed)
    mask, jitter = _layout(cfg, rng)
    image_a = _render(mask, jitter, cfg.palette_a, cfg.scale_a, cfg.offset_a, cfg.noise_a, rng)
    image_b = _render(mask, jitter, cfg.palette_b, cfg.scale_b, cfg.offset_b, cfg.noise_b, rng)
    return (image_a, mask.copy()), (image_b, mask.copy())


def write_dataset(out_dir: Path | str, cfg: SynthConfig | None = None) -> list[Path]:
    """Write imageA.png, maskA.png, imageB.png, maskB.png and a TOML manifest to `out_dir`.

    The directory is created if needed. Returns the written paths.
    """
    import tomli_w

    cfg = SynthConfig() if cfg is None else cfg
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (image_a, mask_a), (image_b, mask_b) = synth_generate(cfg)
    paths = [out_dir / name for name in ("imageA.png", "maskA.png", "imageB.png", "maskB.png", MANIFEST)]
    save_image(image_a, paths[0])
    save_mask(mask_a, paths[1])
    save_image(image_b, paths[2])
    save_mask(mask_b, paths[3])
    with open(paths[4], "wb") as f:
        tomli_w.dump({"synth": cfg.to_dict(), "seed": cfg.seed}, f)
    logger.info("Wrote synthetic pair of %d×%d scenes to %s", cfg.scene_size, cfg.scene_size, out_dir)
    return paths


def read_manifest(path: Path | str) -> SynthConfig:
    """Rebuild the `SynthConfig` a dataset directory (or its manifest) was written with."""
    path = Path(path)
    if path.is_dir():
        path = path / MANIFEST
    with open(path, "rb") as f:
        manifest = tomllib.load(f)
    return SynthConfig(**manifest["synth"])
