"""Differentiable operations on `Tensor` objects.

Every function computes its forward result with numpy and registers a closure that
returns the gradients with respect to its inputs.
"""

import numpy as np

from .exceptions import ShapeMismatchError
from .tensor import Parameter, Tensor

# Standard stabilizer for the variance in instance normalization
INSTANCE_NORM_EPS = 1e-5


def conv_output_size(size: int, kernel: int, stride: int, pad: int) -> int:
    return (size + 2 * pad - kernel) // stride + 1


def conv2d(x: Tensor, weight: Parameter, bias: Parameter, stride: int = 1, pad: int = 0) -> Tensor:
    """Cross-correlate a (N, C, H, W) input with (O, C, K, K) weights and add a (O,) bias.

    The kernel is applied offset by offset: for each of the K×K taps the strided view
    of the padded input is contracted with the tap's (O, C) weight matrix, so no
    im2col buffer of the whole input is ever materialised.
    """
    if x.data.ndim != 4 or weight.data.ndim != 4:
        raise ShapeMismatchError(
            f"conv2d expects 4-D input and weights, got input {x.shape} and weights {weight.shape}"
        )
    N, C, H, W = x.shape
    O, Ci, K, K2 = weight.shape
    if C != Ci or K != K2:
        raise ShapeMismatchError(
            f"conv2d input {x.shape} does not match weights {weight.shape}"
        )
    if bias.shape != (O,):
        raise ShapeMismatchError(f"conv2d bias {bias.shape} does not match weights {weight.shape}")
    if stride < 1 or pad < 0:
        raise ValueError(f"conv2d needs stride >= 1 and pad >= 0, got stride={stride}, pad={pad}")
    H_out = conv_output_size(H, K, stride, pad)
    W_out = conv_output_size(W, K, stride, pad)
    if H_out < 1 or W_out < 1:
        raise ShapeMismatchError(
            f"conv2d input {x.shape} too small for weights {weight.shape} "
            f"with stride {stride} and pad {pad}"
        )

    xp = np.pad(x.data, ((0, 0), (0, 0), (pad, pad), (pad, pad))) if pad else x.data
    w = weight.data
    h_span = stride * (H_out - 1) + 1
    w_span = stride * (W_out - 1) + 1

    def tap(array, kh, kw):
        return array[:, :, kh:kh + h_span:stride, kw:kw + w_span:stride]

    # Accumulate as (O, N, H_out, W_out), the natural result layout of tensordot
    out = np.zeros((O, N, H_out, W_out))
    for kh in range(K):
        for kw in range(K):
            out += np.tensordot(w[:, :, kh, kw], tap(xp, kh, kw), axes=([1], [1]))
    out += bias.data[:, None, None, None]
    out = np.ascontiguousarray(out.transpose(1, 0, 2, 3))

    def backward(g):
        gt = g.transpose(1, 0, 2, 3)
        grad_bias = gt.sum(axis=(1, 2, 3))
        grad_weight = np.empty_like(w)
        grad_xp = np.zeros_like(xp)
        for kh in range(K):
            for kw in range(K):
                grad_weight[:, :, kh, kw] = np.tensordot(gt, tap(xp, kh, kw), axes=([1, 2, 3], [0, 2, 3]))
                tap(grad_xp, kh, kw)[...] += np.tensordot(w[:, :, kh, kw], gt, axes=([0], [0])).transpose(1, 0, 2, 3)
        grad_x = grad_xp[:, :, pad:pad + H, pad:pad + W] if pad else grad_xp
        return grad_x, grad_weight, grad_bias

    return Tensor.from_op(out, (x, weight, bias), backward, "conv2d")


def leaky_relu(x: Tensor, slope: float = 0.2) -> Tensor:
    """Elementwise max(x, slope·x); the slope branch is taken at exactly zero."""
    if not 0 < slope < 1:
        raise ValueError(f"leaky_relu slope must lie in (0, 1), got {slope}")
    factor = np.where(x.data > 0, 1.0, slope)
    return Tensor.from_op(x.data * factor, (x,), lambda g: (g * factor,), "leaky_relu")


def instance_norm(x: Tensor, gain: Parameter, offset: Parameter, eps: float = INSTANCE_NORM_EPS) -> Tensor:
    """Standardise each (sample, channel) plane, then apply a per-channel gain and offset."""
    N, C, H, W = x.shape
    if gain.shape != (C,) or offset.shape != (C,):
        raise ShapeMismatchError(
            f"instance_norm input {x.shape} does not match gain {gain.shape} / offset {offset.shape}"
        )
    M = H * W
    mean = x.data.mean(axis=(2, 3), keepdims=True)
    centred = x.data - mean
    inv_std = 1.0 / np.sqrt((centred**2).mean(axis=(2, 3), keepdims=True) + eps)
    xhat = centred * inv_std
    g4 = gain.data[None, :, None, None]
    out = g4 * xhat + offset.data[None, :, None, None]

    def backward(g):
        grad_gain = (g * xhat).sum(axis=(0, 2, 3))
        grad_offset = g.sum(axis=(0, 2, 3))
        dxhat = g * g4
        grad_x = (inv_std / M) * (
            M * dxhat
            - dxhat.sum(axis=(2, 3), keepdims=True)
            - xhat * (dxhat * xhat).sum(axis=(2, 3), keepdims=True)
        )
        return grad_x, grad_gain, grad_offset

    return Tensor.from_op(out, (x, gain, offset), backward, "instance_norm")


def upsample2x(x: Tensor) -> Tensor:
    """Nearest-neighbour upsampling by a factor of two in both spatial axes."""
    N, C, H, W = x.shape
    out = x.data.repeat(2, axis=2).repeat(2, axis=3)
    return Tensor.from_op(
        out, (x,), lambda g: (g.reshape(N, C, H, 2, W, 2).sum(axis=(3, 5)),), "upsample2x"
    )


def concat_channels(a: Tensor, b: Tensor) -> Tensor:
    if a.shape[0] != b.shape[0] or a.shape[2:] != b.shape[2:]:
        raise ShapeMismatchError(f"Cannot concatenate {a.shape} and {b.shape} along channels")
    split = a.shape[1]
    out = np.concatenate([a.data, b.data], axis=1)
    return Tensor.from_op(out, (a, b), lambda g: (g[:, :split], g[:, split:]), "concat")


def sigmoid(x: np.ndarray) -> np.ndarray:
    # tanh form never overflows
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def sigmoid_cross_entropy(scores: Tensor, targets: np.ndarray, weights: np.ndarray, denominator: float) -> Tensor:
    """Weighted sum of elementwise sigmoid cross entropy divided by `denominator`.

    Elements with weight 0 contribute nothing, to the value or to the gradient.
    """
    if targets.shape != scores.shape or weights.shape != scores.shape:
        raise ShapeMismatchError(
            f"scores {scores.shape}, targets {targets.shape} and weights {weights.shape} must agree"
        )
    s = scores.data
    per_element = np.maximum(s, 0) - s * targets + np.log1p(np.exp(-np.abs(s)))
    loss = np.array((weights * per_element).sum() / denominator)

    def backward(g):
        return (float(g) * weights * (sigmoid(s) - targets) / denominator,)

    return Tensor.from_op(loss, (scores,), backward, "sigmoid_cross_entropy")
