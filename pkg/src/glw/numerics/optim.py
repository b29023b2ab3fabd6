"""First-order optimizers over lists of leaf tensors."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from glw.errors import ConfigError, DimensionError, NonFiniteError
from glw.numerics.tensor import Tensor


@dataclass
class OptState:
    step: int = 0
    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)


def opt_step(params: Sequence[np.ndarray], grads: Sequence[np.ndarray], state: OptState,
             algo: str = "adam", lr: float = 1e-3, beta1: float = 0.9, beta2: float = 0.999,
             eps: float = 1e-8, names: Sequence[str] | None = None) -> OptState:
    """Update ``params`` in place from ``grads``.

    Raises ``NonFiniteError`` naming the offending parameter and the step index
    before touching anything, so a failed step leaves parameters intact.
    """
    if lr <= 0:
        raise ConfigError(f"learning rate must be positive, got {lr}")
    if len(params) != len(grads):
        raise DimensionError(f"{len(params)} parameters but {len(grads)} gradients")
    for k, (p, g) in enumerate(zip(params, grads)):
        if p.shape != g.shape:
            raise DimensionError(f"parameter {k} has shape {p.shape}, gradient {g.shape}")
        if not np.all(np.isfinite(g)):
            label = names[k] if names is not None else f"param[{k}]"
            raise NonFiniteError(f"non-finite gradient for {label} at step {state.step}",
                                 op=label, step=state.step)

    if algo == "sgd":
        for p, g in zip(params, grads):
            p -= lr * g
        state.step += 1
        return state
    if algo != "adam":
        raise ConfigError(f"unknown optimizer {algo!r}")

    if not state.m:
        state.m = [np.zeros_like(p) for p in params]
        state.v = [np.zeros_like(p) for p in params]
    state.step += 1
    t = state.step
    c1 = 1.0 - beta1 ** t
    c2 = 1.0 - beta2 ** t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * (g * g)
        p -= lr * (m / c1) / (np.sqrt(v / c2) + eps)
    return state


class Optimizer:
    """Binds ``opt_step`` to a fixed list of leaf tensors."""

    def __init__(self, params: Sequence[Tensor], algo: str = "adam", lr: float = 1e-3,
                 betas: tuple[float, float] = (0.9, 0.999), eps: float = 1e-8):
        self.params = list(params)
        self.algo = algo
        self.lr = lr
        self.betas = betas
        self.eps = eps
        self.state = OptState()

    def zero_grad(self) -> None:
        for p in self.params:
            p.grad = None

    def step(self) -> None:
        grads = [p.grad if p.grad is not None else np.zeros_like(p.data) for p in self.params]
        names = [p.name or f"param[{k}]" for k, p in enumerate(self.params)]
        opt_step([p.data for p in self.params], grads, self.state, self.algo, self.lr,
                 self.betas[0], self.betas[1], self.eps, names=names)


def Adam(params, lr=1e-3, betas=(0.9, 0.999), eps=1e-8) -> Optimizer:
    return Optimizer(params, "adam", lr, betas, eps)


def SGD(params, lr=1e-2) -> Optimizer:
    return Optimizer(params, "sgd", lr)
