"""PatchGAN discriminator judging local regions of a normalised patch.

The stack is kernel 4, pad 1 throughout:

    width   stride 2, leaky ReLU
    2·width stride 2, instance norm, leaky ReLU
    4·width stride 2, instance norm, leaky ReLU
    8·width stride 1, instance norm, leaky ReLU
    1       stride 1

so a 256×256 patch gives a 30×30 score map.
"""

import numpy as np

from .config import cmapfig
from .exceptions import InputTooSmallError, ShapeMismatchError
from .functional import conv2d, conv_output_size, instance_norm, leaky_relu
from .tensor import Parameter, Tensor, constant

KERNEL = 4
PAD = 1
SLOPE = 0.2
# (depth multiplier, stride, instance norm, activation); 0 marks the 1-channel projection
LAYERS = (
    (1, 2, False, True),
    (2, 2, True, True),
    (4, 2, True, True),
    (8, 1, True, True),
    (0, 1, False, False),
)


class Discriminator:
    """Ordered stack of convolution and instance-norm parameters.

    Weights are drawn from N(0, 0.02²), biases and offsets start at 0 and gains at 1.
    """

    __slots__ = ("width", "layers", "min_size")

    def __init__(self, width: int | None = None, seed: int = 0):
        width = cmapfig.DISCRIMINATOR_WIDTH if width is None else width
        if width < 1:
            raise ValueError(f"Discriminator width must be positive, got {width}")
        self.width = width
        rng = np.random.default_rng(seed)
        self.layers = []
        in_channels = 3
        for n, (multiplier, stride, norm, activation) in enumerate(LAYERS):
            out_channels = multiplier * width if multiplier else 1
            layer = {
                "stride": stride,
                "activation": activation,
                "weight": Parameter(
                    rng.normal(0.0, 0.02, (out_channels, in_channels, KERNEL, KERNEL)),
                    f"d{n}.weight",
                ),
                "bias": Parameter(np.zeros(out_channels), f"d{n}.bias"),
            }
            if norm:
                layer["gain"] = Parameter(np.ones(out_channels), f"d{n}.gain")
                layer["offset"] = Parameter(np.zeros(out_channels), f"d{n}.offset")
            self.layers.append(layer)
            in_channels = out_channels
        self.min_size = self._smallest_input()

    def __repr__(self):
        return f"Discriminator(width={self.width}, min_size={self.min_size})"

    @staticmethod
    def output_size(size: int) -> int:
        """Side length of the score map for a square input of side `size`."""
        for _, stride, _, _ in LAYERS:
            size = conv_output_size(size, KERNEL, stride, PAD)
        return size

    @staticmethod
    def _smallest_input() -> int:
        size = 1
        while True:
            extent = size
            for _, stride, _, _ in LAYERS:
                extent = conv_output_size(extent, KERNEL, stride, PAD)
                if extent < 1:
                    break
            else:
                return size
            size += 1

    def parameters(self) -> list[Parameter]:
        params = []
        for layer in self.layers:
            params.extend(value for value in layer.values() if isinstance(value, Parameter))
        return params

    def forward(self, x: Tensor) -> Tensor:
        """Run a (N, 3, H, W) batch through the stack, returning (N, 1, H', W') scores."""
        for layer in self.layers:
            x = conv2d(x, layer["weight"], layer["bias"], stride=layer["stride"], pad=PAD)
            if "gain" in layer:
                x = instance_norm(x, layer["gain"], layer["offset"])
            if layer["activation"]:
                x = leaky_relu(x, SLOPE)
        return x


def discriminate(d: Discriminator, patch: Tensor | np.ndarray) -> tuple[Tensor, Tensor]:
    """Score a normalised (H, W, 3) patch.

    Returns the (H', W') score map and its mean, both differentiable with respect to
    the patch and the discriminator's parameters.
    """
    if not isinstance(patch, Tensor):
        patch = constant(patch)
    if patch.data.ndim != 3 or patch.shape[2] != 3:
        raise ShapeMismatchError(f"discriminate() expects an (H, W, 3) patch, got {patch.shape}")
    H, W, _ = patch.shape
    if min(H, W) < d.min_size:
        raise InputTooSmallError(
            f"Patch of {H}×{W} is too small for the discriminator, needs at least "
            f"{d.min_size}×{d.min_size}",
            d.min_size,
        )
    x = patch.transpose(2, 0, 1).reshape(1, 3, H, W)
    scores = d.forward(x)
    score_map = scores.reshape(scores.shape[2], scores.shape[3])
    return score_map, score_map.mean()
