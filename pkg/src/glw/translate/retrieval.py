"""Top-1 nearest-neighbour retrieval between translated probes and a gallery."""
from __future__ import annotations

import numpy as np

from glw.errors import ConfigError, DimensionError, EmptyBatchError


def nearest(queries, gallery, metric: str = "euclidean", chunk: int = 256) -> np.ndarray:
    """Index of the closest gallery row for every query row; ties go to the lower index."""
    Q = np.atleast_2d(np.asarray(queries, dtype=np.float64))
    G = np.atleast_2d(np.asarray(gallery, dtype=np.float64))
    if G.shape[0] == 0:
        raise EmptyBatchError("retrieval gallery is empty")
    if Q.shape[1] != G.shape[1]:
        raise DimensionError(f"queries have width {Q.shape[1]}, gallery {G.shape[1]}")
    if metric == "cosine":
        Q = Q / np.maximum(np.linalg.norm(Q, axis=1, keepdims=True), 1e-300)
        G = G / np.maximum(np.linalg.norm(G, axis=1, keepdims=True), 1e-300)
    elif metric != "euclidean":
        raise ConfigError(f"unknown retrieval metric {metric!r}")
    out = np.empty(Q.shape[0], dtype=np.int64)
    for lo in range(0, Q.shape[0], chunk):
        block = Q[lo:lo + chunk]
        if metric == "cosine":
            score = -(block @ G.T)
        else:
            diff = block[:, None, :] - G[None, :, :]
            score = np.einsum("qgd,qgd->qg", diff, diff)
        out[lo:lo + chunk] = np.argmin(score, axis=1)
    return out


def retrieval_at_1(predicted, gallery, truth=None, metric: str = "euclidean") -> float:
    """Fraction of rows whose nearest gallery item is the true counterpart.

    ``truth`` defaults to the identity pairing (probe ``r`` matches gallery row ``r``).
    """
    idx = nearest(predicted, gallery, metric)
    truth = np.arange(len(idx)) if truth is None else np.asarray(truth)
    return float(np.mean(idx == truth)) if len(idx) else float("nan")


def retrieval_accuracy(t, i: str, j: str, probes, gallery, truth=None, metric: str = "euclidean") -> float:
    """Translate module-``i`` probes into module ``j`` and score top-1 retrieval."""
    return retrieval_at_1(t.translate(i, j, probes), gallery, truth, metric)
