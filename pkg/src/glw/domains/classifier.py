"""Linear softmax readout used to probe what a latent code knows about cluster identity."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from glw.domains.world import derive_seed
from glw.errors import DegenerateLabelsError, DimensionError
from glw.numerics import Adam, Tensor, affine, backward, softmax_cross_entropy


@dataclass
class ClassifierHead:
    W: np.ndarray
    b: np.ndarray
    classes: np.ndarray
    mean: np.ndarray
    std: np.ndarray
    train_idx: np.ndarray
    test_idx: np.ndarray
    train_accuracy: float
    heldout_accuracy: float

    def predict(self, features) -> np.ndarray:
        f = np.asarray(features, dtype=np.float64)
        if f.ndim != 2 or f.shape[1] != self.W.shape[0]:
            raise DimensionError(f"classifier expects width {self.W.shape[0]}, got {f.shape}")
        logits = ((f - self.mean) / self.std) @ self.W + self.b
        return self.classes[np.argmax(logits, axis=1)]

    def accuracy(self, features, labels) -> float:
        labels = np.asarray(labels)
        if labels.size == 0:
            return float("nan")
        return float(np.mean(self.predict(features) == labels))


def fit_classifier(latents, labels, epochs: int = 300, seed: int = 0, lr: float = 0.05,
                   test_fraction: float = 0.2) -> ClassifierHead:
    """Cross-entropy softmax head on standardized features, 80/20 seeded split."""
    X = np.asarray(latents, dtype=np.float64)
    y = np.asarray(labels)
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise DimensionError(f"latents {X.shape} and labels {y.shape} disagree")
    classes = np.unique(y)
    if classes.size < 2:
        raise DegenerateLabelsError(f"need at least two classes, got {classes.tolist()}")
    target = np.searchsorted(classes, y)

    rng = np.random.default_rng(derive_seed(seed, "classifier-split"))
    order = rng.permutation(len(y))
    n_test = int(round(test_fraction * len(y)))
    test_idx, train_idx = np.sort(order[:n_test]), np.sort(order[n_test:])

    mean = X[train_idx].mean(axis=0)
    std = X[train_idx].std(axis=0)
    std = np.where(std > 1e-12, std, 1.0)
    Xs = Tensor((X[train_idx] - mean) / std)
    W = Tensor(np.zeros((X.shape[1], classes.size)), requires_grad=True, name="W")
    b = Tensor(np.zeros(classes.size), requires_grad=True, name="b")
    opt = Adam([W, b], lr=lr)
    for _ in range(epochs):
        opt.zero_grad()
        backward(softmax_cross_entropy(affine(Xs, W, b), target[train_idx]))
        opt.step()

    head = ClassifierHead(W=W.data.copy(), b=b.data.copy(), classes=classes, mean=mean, std=std,
                          train_idx=train_idx, test_idx=test_idx, train_accuracy=0.0, heldout_accuracy=0.0)
    head.train_accuracy = head.accuracy(X[train_idx], y[train_idx])
    head.heldout_accuracy = head.accuracy(X[test_idx], y[test_idx])
    return head
