"""Encoder-decoder segmenter with skip connections, its training and tiled prediction.

The network has no batch normalisation and uses leaky ReLU activations. With depth
d and width w it is

    stem      3×3 conv, 3 → w
    level l   3×3 conv stride 2, then 3×3 conv, w·2^(l-1) → w·2^l      (l = 1..d)
    up l      upsample, concatenate the level l-1 features, 3×3 conv → w·2^(l-1)
    head      1×1 conv → one score per class

so input sides must be multiples of 2^d and the output has the input's extent.
"""

import copy
import logging
from typing import Sequence

import numpy as np

from .colormap import normalize
from .config import cmapfig
from .exceptions import EmptyDatasetError, InputTooSmallError, InvalidConfigError, ShapeMismatchError
from .functional import concat_channels, conv2d, leaky_relu, sigmoid, sigmoid_cross_entropy, upsample2x
from .optim import Adam
from .raster import BACKGROUND, FOREGROUND, N_CLASSES, check_image, check_mask
from .tensor import Parameter, Tensor, constant
from .tiling import TileGrid, stitch_scores

logger = logging.getLogger(__name__)

SLOPE = 0.2
# Foreground sigmoid a pixel's best class must exceed, otherwise it is background
DECISION_THRESHOLD = 0.5

FLIPS = ("none", "horizontal", "vertical")


def _conv(rng: np.random.Generator, out_channels: int, in_channels: int, kernel: int, name: str) -> tuple[Parameter, Parameter]:
    # He initialisation for leaky ReLU
    std = np.sqrt(2.0 / ((1 + SLOPE**2) * in_channels * kernel * kernel))
    weight = Parameter(rng.normal(0.0, std, (out_channels, in_channels, kernel, kernel)), f"{name}.weight")
    return weight, Parameter(np.zeros(out_channels), f"{name}.bias")


class SegNet:
    """Desk-scale U-shaped segmenter producing one score map per class."""

    __slots__ = ("depth", "width", "stem", "down", "up", "head")

    def __init__(self, depth: int | None = None, width: int | None = None, seed: int = 0):
        depth = cmapfig.SEG_DEPTH if depth is None else depth
        width = cmapfig.SEG_WIDTH if width is None else width
        if depth < 1 or width < 1:
            raise InvalidConfigError(f"SegNet depth and width must be positive, got {depth} and {width}", "depth")
        self.depth = depth
        self.width = width
        rng = np.random.default_rng(seed)
        channels = [width * 2**level for level in range(depth + 1)]
        self.stem = _conv(rng, channels[0], 3, 3, "stem")
        self.down = [
            (_conv(rng, channels[l], channels[l - 1], 3, f"down{l}.a"), _conv(rng, channels[l], channels[l], 3, f"down{l}.b"))
            for l in range(1, depth + 1)
        ]
        self.up = [
            _conv(rng, channels[l - 1], channels[l] + channels[l - 1], 3, f"up{l}")
            for l in range(1, depth + 1)
        ]
        self.head = _conv(rng, N_CLASSES, channels[0], 1, "head")

    def __repr__(self):
        return f"SegNet(depth={self.depth}, width={self.width})"

    @property
    def multiple(self) -> int:
        """Input sides must be multiples of this."""
        return 2**self.depth

    def parameters(self) -> list[Parameter]:
        params = [*self.stem]
        for a, b in self.down:
            params.extend([*a, *b])
        for conv in self.up:
            params.extend(conv)
        params.extend(self.head)
        return params

    def forward(self, x: Tensor) -> Tensor:
        """Scores of shape (N, classes, H, W) for a normalised (N, 3, H, W) batch."""
        H, W = x.shape[2:]
        if H % self.multiple or W % self.multiple:
            raise InputTooSmallError(
                f"SegNet of depth {self.depth} needs sides that are multiples of {self.multiple}, got {H}×{W}",
                self.multiple,
            )
        x = leaky_relu(conv2d(x, *self.stem, pad=1), SLOPE)
        skips = [x]
        for a, b in self.down:
            x = leaky_relu(conv2d(x, *a, stride=2, pad=1), SLOPE)
            x = leaky_relu(conv2d(x, *b, pad=1), SLOPE)
            skips.append(x)
        for level in range(self.depth, 0, -1):
            x = concat_channels(upsample2x(x), skips[level - 1])
            x = leaky_relu(conv2d(x, *self.up[level - 1], pad=1), SLOPE)
        return conv2d(x, *self.head)


def random_draw(rng: np.random.Generator) -> tuple[int, int]:
    """A flip (index into FLIPS) and a number of counter-clockwise quarter turns."""
    return int(rng.integers(len(FLIPS))), int(rng.integers(4))


def augment(patch: np.ndarray, mask: np.ndarray, draw: tuple[int, int]) -> tuple[np.ndarray, np.ndarray]:
    """Flip, then rotate counter-clockwise by 90° × quarter turns, image and mask alike."""
    if patch.shape[:2] != mask.shape:
        raise ShapeMismatchError(f"Patch {patch.shape} and mask {mask.shape} differ in extent")
    flip, turns = draw
    if FLIPS[flip] == "horizontal":
        patch, mask = patch[:, ::-1], mask[:, ::-1]
    elif FLIPS[flip] == "vertical":
        patch, mask = patch[::-1], mask[::-1]
    patch = np.rot90(patch, turns, axes=(0, 1))
    mask = np.rot90(mask, turns, axes=(0, 1))
    return np.ascontiguousarray(patch), np.ascontiguousarray(mask)


def seg_loss(scores: Tensor, masks: np.ndarray, background_mode: str | None = None) -> Tensor:
    """Sigmoid cross entropy of the foreground channels against one-hot targets.

    `scores` is (N, classes, H, W) and `masks` is (N, H, W). The sum runs over the three
    foreground channels and is divided by 3 × the pixel count. With the "IGNORE"
    background mode, background pixels contribute nothing; with "NEGATIVE" they count
    with all-zero targets. The background channel never enters the loss.
    """
    background_mode = cmapfig.BACKGROUND_MODE if background_mode is None else background_mode
    if background_mode not in ("IGNORE", "NEGATIVE"):
        raise InvalidConfigError(f"Unknown background mode {background_mode!r}", "background_mode")
    masks = np.asarray(masks)
    if masks.ndim == 2:
        masks = masks[None]
    N, C, H, W = scores.shape
    if C != N_CLASSES or masks.shape != (N, H, W):
        raise ShapeMismatchError(f"Scores {scores.shape} do not match masks {masks.shape}")
    targets = (masks[:, None] == np.arange(N_CLASSES)[None, :, None, None]).astype(np.float64)
    weights = np.zeros_like(targets)
    if background_mode == "IGNORE":
        weights[:, list(FOREGROUND)] = (masks != BACKGROUND)[:, None]
    else:
        weights[:, list(FOREGROUND)] = 1.0
    return sigmoid_cross_entropy(scores, targets, weights, denominator=N * H * W * len(FOREGROUND))


class SegTrainConfig:
    """Hyperparameters of one segmenter training or fine-tuning run.

    Any argument left as `None` takes its value from `cmapfig`; the default budget is
    `FINETUNE_ITERATIONS` when `finetune` is set and `TRAIN_ITERATIONS` otherwise.
    """

    __slots__ = ("lr", "betas", "batch_size", "iterations", "seed", "log_every", "background_mode")

    def __init__(
        self,
        lr: float | None = None,
        betas: tuple[float, float] | None = None,
        batch_size: int | None = None,
        iterations: int | None = None,
        seed: int | None = None,
        log_every: int | None = None,
        background_mode: str | None = None,
        finetune: bool = False,
    ):
        if iterations is None:
            iterations = cmapfig.FINETUNE_ITERATIONS if finetune else cmapfig.TRAIN_ITERATIONS
        self.lr = cmapfig.SEG_LR if lr is None else lr
        self.betas = tuple(cmapfig.SEG_BETAS if betas is None else betas)
        self.batch_size = cmapfig.BATCH_SIZE if batch_size is None else batch_size
        self.iterations = iterations
        self.seed = cmapfig.SEED if seed is None else seed
        self.log_every = cmapfig.LOG_EVERY if log_every is None else log_every
        self.background_mode = cmapfig.BACKGROUND_MODE if background_mode is None else background_mode
        self.validate()

    def __repr__(self):
        fields = ", ".join(f"{name}={getattr(self, name)!r}" for name in self.__slots__)
        return f"SegTrainConfig({fields})"

    def validate(self):
        if self.lr <= 0:
            raise InvalidConfigError(f"Learning rate must be positive, got {self.lr}", "lr")
        if len(self.betas) != 2 or not all(0 <= beta < 1 for beta in self.betas):
            raise InvalidConfigError(f"Adam betas must be two values in [0, 1), got {self.betas}", "betas")
        if self.batch_size < 1:
            raise InvalidConfigError(f"Batch size must be at least 1, got {self.batch_size}", "batch_size")
        if self.iterations < 1:
            raise InvalidConfigError(f"Iteration budget must be at least 1, got {self.iterations}", "iterations")
        if self.log_every < 1:
            raise InvalidConfigError(f"LOG_EVERY must be positive, got {self.log_every}", "log_every")
        if self.background_mode not in ("IGNORE", "NEGATIVE"):
            raise InvalidConfigError(f"Unknown background mode {self.background_mode!r}", "background_mode")


def to_batch(patches: Sequence[np.ndarray]) -> Tensor:
    """Stack 8-bit (H, W, 3) patches into a normalised (N, 3, H, W) constant."""
    return constant(normalize(np.stack(patches)).transpose(0, 3, 1, 2))


def _check_data(data: Sequence[tuple[np.ndarray, np.ndarray]]):
    if len(data) == 0:
        raise EmptyDatasetError("Segmenter training needs at least one (patch, mask) pair")
    shape = data[0][0].shape
    for n, (patch, mask) in enumerate(data):
        check_image(patch)
        check_mask(mask, patch)
        if patch.shape != shape:
            raise ShapeMismatchError(f"Training patch {n} has shape {patch.shape}, patch 0 has {shape}")


def train_segmenter(
    data: Sequence[tuple[np.ndarray, np.ndarray]],
    net: SegNet,
    cfg: SegTrainConfig | None = None,
) -> tuple[SegNet, list[float]]:
    """Minibatch Adam training of `net` in place; returns the net and the loss per iteration.

    Batches are drawn uniformly with replacement and every pair is augmented with its
    own random flip and rotation.
    """
    cfg = SegTrainConfig() if cfg is None else cfg
    _check_data(data)
    rng = np.random.default_rng(cfg.seed)
    optimizer = Adam(net.parameters(), cfg.lr, cfg.betas)
    history = []
    for iteration in range(1, cfg.iterations + 1):
        pairs = [augment(*data[int(i)], random_draw(rng)) for i in rng.integers(len(data), size=cfg.batch_size)]
        loss = seg_loss(
            net.forward(to_batch([p for p, _ in pairs])),
            np.stack([m for _, m in pairs]),
            cfg.background_mode,
        )
        loss.backward()
        optimizer.step()
        history.append(float(loss))
        if iteration % cfg.log_every == 0 or iteration == cfg.iterations:
            logger.info("iteration=%d loss=%.6f", iteration, float(loss))
    return net, history


def finetune(
    net: SegNet,
    fake_data: Sequence[tuple[np.ndarray, np.ndarray]],
    cfg: SegTrainConfig | None = None,
) -> SegNet:
    """Continue training a copy of `net` on recoloured patches with their original masks.

    `net` itself is left untouched.
    """
    cfg = SegTrainConfig(finetune=True) if cfg is None else cfg
    tuned, _ = train_segmenter(fake_data, copy.deepcopy(net), cfg)
    return tuned


def predict_scores(net: SegNet, image: np.ndarray, grid: TileGrid | None = None) -> np.ndarray:
    """Per-class sigmoid probabilities of shape (H, W, classes), averaged over overlaps."""
    check_image(image)
    if grid is None:
        grid = TileGrid(image.shape[0], image.shape[1])
    elif (grid.height, grid.width) != image.shape[:2]:
        raise ShapeMismatchError(f"Grid of {grid.height}×{grid.width} does not fit image {image.shape}")
    patches = grid.cut(image)
    probabilities = [
        sigmoid(net.forward(to_batch([patch])).data[0]).transpose(1, 2, 0) for patch in patches
    ]
    return stitch_scores(grid, probabilities)


def decide(probabilities: np.ndarray) -> np.ndarray:
    """The most probable foreground class where it exceeds the threshold, else background."""
    foreground = probabilities[..., list(FOREGROUND)]
    best = foreground.argmax(axis=-1)
    mask = np.asarray(FOREGROUND, dtype=np.uint8)[best]
    mask[foreground.max(axis=-1) <= DECISION_THRESHOLD] = BACKGROUND
    return mask


def predict(net: SegNet, image: np.ndarray, grid: TileGrid | None = None) -> np.ndarray:
    """Label mask of a whole image, predicted patch by patch over `grid`.

    The grid defaults to `PATCH_SIZE` patches overlapping by `OVERLAP` pixels.
    """
    return decide(predict_scores(net, image, grid))
