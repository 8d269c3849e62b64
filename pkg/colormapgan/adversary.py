"""Least-squares adversarial training of a colour map against a PatchGAN discriminator."""

import logging
import time
from typing import Sequence

import numpy as np

from .colormap import ColorMap, ColorMapOptimizer, apply, normalize
from .config import cmapfig
from .discriminator import Discriminator, discriminate
from .exceptions import EmptyDatasetError, InputTooSmallError, InvalidConfigError, ShapeMismatchError
from .optim import Adam
from .tensor import Tensor, constant

logger = logging.getLogger(__name__)


def _score_tensor(score) -> Tensor:
    return score if isinstance(score, Tensor) else constant(float(score))


def _mean_squared_to(scores: Sequence, label: float, what: str) -> Tensor:
    if len(scores) == 0:
        raise ValueError(f"{what} needs at least one score")
    total = None
    for score in scores:
        term = (_score_tensor(score) - label) ** 2
        # A score map contributes the mean over its cells
        if term.data.ndim:
            term = term.mean()
        total = term if total is None else total + term
    return total / len(scores)


def d_loss(scores_real: Sequence, scores_fake: Sequence) -> Tensor:
    """Discriminator objective: mean (s - 1)² over real scores plus mean s² over fake ones.

    "Real" scores come from target-domain patches, "fake" scores from recoloured source
    patches. Scores may be tensors or plain numbers.
    """
    return _mean_squared_to(scores_real, 1.0, "d_loss") + _mean_squared_to(scores_fake, 0.0, "d_loss")


def g_loss(scores_fake: Sequence) -> Tensor:
    """Generator objective: mean (s - 1)² over the scores of recoloured source patches."""
    return _mean_squared_to(scores_fake, 1.0, "g_loss")


class GanTrainConfig:
    """Hyperparameters of one adversarial training run.

    Any argument left as `None` takes its value from `cmapfig`.
    """

    __slots__ = (
        "generator_lr",
        "discriminator_lr",
        "iterations",
        "betas",
        "discriminator_width",
        "log_every",
        "seed",
    )

    # One source and one target patch per iteration
    patches_per_iteration = 1

    def __init__(
        self,
        generator_lr: float | None = None,
        discriminator_lr: float | None = None,
        iterations: int | None = None,
        betas: tuple[float, float] | None = None,
        discriminator_width: int | None = None,
        log_every: int | None = None,
        seed: int | None = None,
    ):
        self.generator_lr = cmapfig.GENERATOR_LR if generator_lr is None else generator_lr
        self.discriminator_lr = cmapfig.DISCRIMINATOR_LR if discriminator_lr is None else discriminator_lr
        self.iterations = cmapfig.GAN_ITERATIONS if iterations is None else iterations
        self.betas = tuple(cmapfig.GAN_BETAS if betas is None else betas)
        self.discriminator_width = (
            cmapfig.DISCRIMINATOR_WIDTH if discriminator_width is None else discriminator_width
        )
        self.log_every = cmapfig.LOG_EVERY if log_every is None else log_every
        self.seed = cmapfig.SEED if seed is None else seed
        self.validate()

    def __repr__(self):
        fields = ", ".join(f"{name}={getattr(self, name)!r}" for name in self.__slots__)
        return f"GanTrainConfig({fields})"

    def validate(self):
        if self.generator_lr <= 0:
            raise InvalidConfigError(f"Generator learning rate must be positive, got {self.generator_lr}", "generator_lr")
        if self.discriminator_lr <= 0:
            raise InvalidConfigError(
                f"Discriminator learning rate must be positive, got {self.discriminator_lr}", "discriminator_lr"
            )
        if self.iterations < 0:
            raise InvalidConfigError(f"Iteration count cannot be negative, got {self.iterations}", "iterations")
        if len(self.betas) != 2 or not all(0 <= beta < 1 for beta in self.betas):
            raise InvalidConfigError(f"Adam betas must be two values in [0, 1), got {self.betas}", "betas")
        if self.discriminator_width < 1:
            raise InvalidConfigError(
                f"Discriminator width must be positive, got {self.discriminator_width}", "discriminator_width"
            )
        if self.log_every < 1:
            raise InvalidConfigError(f"LOG_EVERY must be positive, got {self.log_every}", "log_every")


def _check_patches(patches: Sequence[np.ndarray], name: str, minimum: int):
    if len(patches) == 0:
        raise EmptyDatasetError(f"The {name} patch set is empty")
    for n, patch in enumerate(patches):
        if patch.dtype != np.uint8 or patch.ndim != 3 or patch.shape[2] != 3:
            raise ShapeMismatchError(f"{name} patch {n} is not an 8-bit (H, W, 3) array: {patch.dtype} {patch.shape}")
        if min(patch.shape[:2]) < minimum:
            raise InputTooSmallError(
                f"{name} patch {n} of {patch.shape[0]}×{patch.shape[1]} is below the "
                f"discriminator minimum of {minimum}",
                minimum,
            )


def train_colormapgan(
    source: Sequence[np.ndarray],
    target: Sequence[np.ndarray],
    cfg: GanTrainConfig | None = None,
    discriminator: Discriminator | None = None,
) -> tuple[ColorMap, dict[str, list]]:
    """Learn a colour map that makes source patches look like target patches.

    Each iteration draws one source and one target patch uniformly with replacement,
    updates the colour map entries of the colours in the source patch against the
    current discriminator, then updates the discriminator with the target patch as
    real and the recoloured source patch as fake.

    `discriminator` is trained in place when given, so that it can be checkpointed.
    Returns the map and a history with one value per iteration under the keys
    "d_loss", "g_loss" and "seconds".
    """
    cfg = GanTrainConfig() if cfg is None else cfg
    if discriminator is None:
        discriminator = Discriminator(cfg.discriminator_width, seed=cfg.seed)
    _check_patches(source, "source", discriminator.min_size)
    _check_patches(target, "target", discriminator.min_size)

    rng = np.random.default_rng(cfg.seed)
    cmap = ColorMap()
    generator_opt = ColorMapOptimizer(cmap, cfg.generator_lr, cfg.betas)
    discriminator_opt = Adam(discriminator.parameters(), cfg.discriminator_lr, cfg.betas)
    history = {"d_loss": [], "g_loss": [], "seconds": []}
    # Normalise each target patch once; they are only ever read
    target_normalized = {}

    for iteration in range(1, cfg.iterations + 1):
        start = time.perf_counter()
        i = int(rng.integers(len(source)))
        j = int(rng.integers(len(target)))

        # Generator step
        fake = apply(cmap, source[i])
        _, fake_score = discriminate(discriminator, fake)
        loss_g = g_loss([fake_score])
        loss_g.backward()
        discriminator_opt.zero_grad()
        generator_opt.step()

        # Discriminator step, on the recoloured patch as it was before the generator update
        if j not in target_normalized:
            target_normalized[j] = normalize(target[j])
        _, real_score = discriminate(discriminator, target_normalized[j])
        _, fake_score = discriminate(discriminator, constant(fake.data))
        loss_d = d_loss([real_score], [fake_score])
        loss_d.backward()
        discriminator_opt.step()

        history["d_loss"].append(float(loss_d))
        history["g_loss"].append(float(loss_g))
        history["seconds"].append(time.perf_counter() - start)
        if iteration % cfg.log_every == 0 or iteration == cfg.iterations:
            logger.info("iteration=%d d_loss=%.6f g_loss=%.6f", iteration, float(loss_d), float(loss_g))

    logger.debug("Colour map has %d entries after %d iterations", len(cmap), cfg.iterations)
    return cmap, history


def time_generator_update(cmap: ColorMap, image: np.ndarray, repeats: int = 5) -> float:
    """Median wall time in seconds of one generator update on `image`.

    An update is the forward and backward pass of `apply` under a fixed upstream
    gradient plus the sparse Adam step; the discriminator is not involved. `cmap`
    itself is left untouched.
    """
    if repeats < 1:
        raise ValueError(f"repeats must be at least 1, got {repeats}")
    upstream = np.full(image.shape, 1e-3)
    timings = []
    for _ in range(repeats):
        working = cmap.copy()
        optimizer = ColorMapOptimizer(working, cmapfig.GENERATOR_LR, tuple(cmapfig.GAN_BETAS))
        start = time.perf_counter()
        apply(working, image).backward(upstream)
        optimizer.step()
        timings.append(time.perf_counter() - start)
    return float(np.median(timings))
