import numpy as np

from .tensor import Parameter

ADAM_EPS = 1e-8


def adam_update(
    values: np.ndarray,
    grads: np.ndarray,
    m: np.ndarray,
    v: np.ndarray,
    t: np.ndarray | int,
    lr: float,
    beta1: float,
    beta2: float,
    eps: float = ADAM_EPS,
) -> None:
    """Apply one bias-corrected Adam update in place.

    `t` is the step number *after* incrementing, either a single int or an array that
    broadcasts against `values` (one counter per row for sparse tables).
    """
    m *= beta1
    m += (1 - beta1) * grads
    v *= beta2
    v += (1 - beta2) * grads**2
    m_hat = m / (1 - beta1**t)
    v_hat = v / (1 - beta2**t)
    values -= lr * m_hat / (np.sqrt(v_hat) + eps)


class AdamState:
    """First and second moment estimates of one parameter, plus its step counter."""

    __slots__ = ("m", "v", "t", "lr", "beta1", "beta2", "eps")

    def __init__(
        self,
        shape: tuple[int, ...],
        lr: float,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = ADAM_EPS,
    ):
        if lr <= 0:
            raise ValueError(f"Adam learning rate must be positive, got {lr}")
        if not (0 <= beta1 < 1 and 0 <= beta2 < 1):
            raise ValueError(f"Adam decay rates must lie in [0, 1), got {beta1}, {beta2}")
        self.m = np.zeros(shape)
        self.v = np.zeros(shape)
        self.t = 0
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps


def adam_step(param: Parameter, state: AdamState) -> tuple[Parameter, AdamState]:
    """Update `param` from its populated gradient, then reset the gradient to zero."""
    state.t += 1
    adam_update(
        param.data, param.grad, state.m, state.v, state.t,
        state.lr, state.beta1, state.beta2, state.eps,
    )
    param.zero_grad()
    return param, state


class Adam:
    """Adam over a fixed, ordered group of parameters sharing hyperparameters."""

    def __init__(self, params: list[Parameter], lr: float, betas: tuple[float, float] = (0.9, 0.999)):
        self.params = list(params)
        self.states = [AdamState(p.shape, lr, betas[0], betas[1]) for p in self.params]

    def step(self):
        for param, state in zip(self.params, self.states):
            adam_step(param, state)

    def zero_grad(self):
        for param in self.params:
            param.zero_grad()
