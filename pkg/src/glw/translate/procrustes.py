from __future__ import annotations

import warnings

import numpy as np

from glw.errors import DimensionError


def procrustes_oracle(X, Y, rank_tol: float = 1e-10) -> np.ndarray:
    """Orthogonal ``W`` minimizing ``||X W - Y||_F`` via the SVD of ``X^T Y``."""
    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    if X.shape != Y.shape or X.ndim != 2:
        raise DimensionError(f"procrustes needs matched (n, k) arrays, got {X.shape} and {Y.shape}")
    n, k = X.shape
    if n < k:
        raise DimensionError(f"procrustes needs n >= k, got n={n}, k={k}")
    U, s, Vt = np.linalg.svd(X.T @ Y)
    if s[-1] <= rank_tol * max(s[0], 1e-300):
        warnings.warn("X^T Y is rank deficient; the orthogonal solution is not unique", RuntimeWarning,
                      stacklevel=2)
    return U @ Vt
