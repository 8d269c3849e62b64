"""Plots of training histories and class colour histograms."""

import matplotlib.pyplot as plt
import numpy as np

CHANNEL_COLORS = ("red", "green", "blue")


def plot_history(history: dict[str, list] | list[float], ax=None, keys: tuple[str, ...] = ("d_loss", "g_loss", "loss")):
    """Draw the loss curves of a training history onto `ax` (a new figure if omitted)."""
    if ax is None:
        _, ax = plt.subplots()
    if not isinstance(history, dict):
        history = {"loss": list(history)}
    for key in keys:
        if key in history:
            ax.plot(np.arange(1, len(history[key]) + 1), history[key], label=key)
    ax.set_xlabel("iteration")
    ax.set_ylabel("loss")
    ax.legend()
    return ax


def plot_class_histograms(histograms: dict[str, np.ndarray], axes=None):
    """One panel per class with the normalised level distribution of each channel."""
    if axes is None:
        _, axes = plt.subplots(1, len(histograms), figsize=(4 * len(histograms), 3), squeeze=False)
        axes = axes[0]
    for ax, (name, counts) in zip(axes, histograms.items()):
        totals = counts.sum(axis=1, keepdims=True)
        shares = np.divide(counts, totals, out=np.zeros(counts.shape), where=totals > 0)
        for channel, color in enumerate(CHANNEL_COLORS):
            ax.plot(np.arange(256), shares[channel], color=color)
        ax.set_title(name)
        ax.set_xlim(0, 255)
    return axes
