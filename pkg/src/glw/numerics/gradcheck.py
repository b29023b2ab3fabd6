"""Central finite-difference check of tape gradients."""
from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from glw.numerics.tensor import Tensor, backward


def numeric_grad(fn: Callable[[], Tensor], param: Tensor, h: float = 1e-5) -> np.ndarray:
    out = np.zeros_like(param.data)
    flat = param.data.reshape(-1)
    gflat = out.reshape(-1)
    for k in range(flat.size):
        orig = flat[k]
        flat[k] = orig + h
        up = fn().item()
        flat[k] = orig - h
        down = fn().item()
        flat[k] = orig
        gflat[k] = (up - down) / (2.0 * h)
    return out


def max_relative_error(fn: Callable[[], Tensor], params: Sequence[Tensor], h: float = 1e-5,
                       floor: float = 1e-6) -> float:
    """Largest elementwise ``|analytic - numeric| / max(|analytic|, |numeric|, floor)``.

    ``fn`` must rebuild the graph from ``params`` on every call.
    """
    for p in params:
        p.grad = None
    backward(fn())
    worst = 0.0
    for p in params:
        analytic = p.grad if p.grad is not None else np.zeros_like(p.data)
        numeric = numeric_grad(fn, p, h)
        denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
        worst = max(worst, float(np.max(np.abs(analytic - numeric) / denom)))
    return worst
