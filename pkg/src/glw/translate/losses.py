"""Training objectives for the shared space.

Reconstruction-style losses are per-entry mean squared errors; the
distribution term is a plain sum of squared moment differences.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from typing import Mapping

import numpy as np

from glw.errors import CovarianceUndefinedError, EmptyBatchError
from glw.numerics import Tensor, loss_mse, sum_squares
from glw.translate.translator import GlwTranslator


@dataclass
class PairSet:
    """Latent pairs ``(v_i, v_j)`` known to render the same hidden sample."""

    i: str
    j: str
    vi: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))
    vj: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))

    def __post_init__(self):
        self.vi = np.asarray(self.vi, dtype=np.float64)
        self.vj = np.asarray(self.vj, dtype=np.float64)
        if self.vi.shape[0] != self.vj.shape[0]:
            raise ValueError(f"pair set {self.i}-{self.j}: {self.vi.shape[0]} vs {self.vj.shape[0]} rows")

    def __len__(self) -> int:
        return int(self.vi.shape[0])


def _as_batch(batch) -> Tensor:
    b = batch if isinstance(batch, Tensor) else Tensor(batch)
    if b.ndim != 2 or b.shape[0] == 0:
        raise EmptyBatchError(f"expected a non-empty (n, d) batch, got shape {b.shape}")
    return b


def cycle_loss(t: GlwTranslator, i: str, j: str, batch) -> Tensor:
    """Round trip ``i -> j -> i`` through the workspace, compared with the input.

    With ``i == j`` the trip is a single pass through the workspace, so the
    value coincides with the demi-cycle loss.
    """
    if i == j:
        return demi_cycle_loss(t, i, batch)
    v = _as_batch(batch)
    there = t.translate_graph(i, j, v)
    back = t.translate_graph(j, i, there)
    return loss_mse(back, v)


def demi_cycle_loss(t: GlwTranslator, i: str, batch) -> Tensor:
    v = _as_batch(batch)
    return loss_mse(t.decode_graph(i, t.encode_graph(i, v)), v)


def supervised_align_loss(t: GlwTranslator, pairs: PairSet) -> Tensor:
    if len(pairs) == 0:
        raise EmptyBatchError(f"pair set {pairs.i}-{pairs.j} is empty")
    return loss_mse(t.encode_graph(pairs.i, Tensor(pairs.vi)), t.encode_graph(pairs.j, Tensor(pairs.vj)))


def _moments(e: Tensor) -> tuple[Tensor, Tensor]:
    n = e.shape[0]
    if n < 2:
        raise CovarianceUndefinedError(f"covariance needs at least 2 samples, got {n}")
    mu = e.mean(axis=0)
    centered = e - mu
    return mu, (centered.T @ centered) * (1.0 / (n - 1))


def distribution_loss(t: GlwTranslator, batches: Mapping[str, object]) -> Tensor:
    """Sum over module pairs of squared mean gap plus squared Frobenius covariance gap,
    both measured on the encoded batches in the shared space."""
    if len(batches) < 2:
        raise EmptyBatchError("distribution matching needs batches from at least two modules")
    stats = {mid: _moments(t.encode_graph(mid, _as_batch(b))) for mid, b in batches.items()}
    total = None
    for a, b in combinations(list(batches), 2):
        (mu_a, c_a), (mu_b, c_b) = stats[a], stats[b]
        term = sum_squares(mu_a - mu_b) + sum_squares(c_a - c_b)
        total = term if total is None else total + term
    return total
