"""Gradient training of the shared space on unpaired latents."""
from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field
from itertools import permutations
from typing import Mapping, Sequence

import numpy as np

from glw.domains.world import derive_seed
from glw.errors import ConfigError, NonFiniteError, TrainingFailureError
from glw.numerics import Adam, Tensor, backward
from glw.translate.losses import (
    PairSet, cycle_loss, demi_cycle_loss, distribution_loss, supervised_align_loss,
)
from glw.translate.structural import StructuralReport, structural_init
from glw.translate.translator import GlwTranslator, LossWeights

COMPONENTS = ("cycle", "demi", "dist", "sup")


@dataclass
class TrainSchedule:
    epochs: int = 100
    batch_size: int | None = None  # None: full batch
    lr: float = 1e-3
    weights: LossWeights = field(default_factory=LossWeights)
    seed: int = 0
    init: str = "structural"
    n_clusters: int = 10
    restarts: int = 6
    pair_weight: float = 0.1
    mass_weight: float = 1.0
    loss_tol: float = 1e-10

    def __post_init__(self):
        if isinstance(self.weights, Mapping):
            self.weights = LossWeights(**self.weights)
        if self.epochs < 0 or (self.batch_size is not None and self.batch_size < 2) or self.lr <= 0:
            raise ConfigError(f"invalid schedule: epochs={self.epochs}, batch_size={self.batch_size}, lr={self.lr}")
        if self.init not in ("structural", "random"):
            raise ConfigError(f"unknown translator init {self.init!r}")

    def digest(self) -> str:
        payload = asdict(self)
        return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()[:16]


@dataclass
class TrainingReport:
    epochs: list[dict[str, float]] = field(default_factory=list)
    structural: StructuralReport | None = None
    converged: bool = False

    @property
    def final(self) -> dict[str, float]:
        return self.epochs[-1] if self.epochs else {}

    def as_dict(self) -> dict:
        return {"epochs": self.epochs, "converged": self.converged,
                "structural": self.structural.as_dict() if self.structural else None}


def loss_terms(t: GlwTranslator, batches: Mapping[str, Tensor], pairsets: Sequence[PairSet]) -> dict[str, Tensor]:
    """Unweighted components, each summed over the module pairs it covers."""
    ids = list(batches)
    terms: dict[str, Tensor] = {}
    cyc = [cycle_loss(t, i, j, batches[i]) for i, j in permutations(ids, 2)]
    terms["cycle"] = _sum(cyc)
    terms["demi"] = _sum([demi_cycle_loss(t, i, batches[i]) for i in ids])
    terms["dist"] = distribution_loss(t, batches)
    sup = [supervised_align_loss(t, ps) for ps in pairsets if len(ps)]
    terms["sup"] = _sum(sup) if sup else Tensor(0.0)
    return terms


def _sum(items):
    total = items[0]
    for x in items[1:]:
        total = total + x
    return total


def train_glw(t: GlwTranslator, data: Mapping[str, np.ndarray], pairsets: Sequence[PairSet] = (),
              schedule: TrainSchedule | None = None) -> tuple[GlwTranslator, TrainingReport]:
    """Minimize the weighted loss with Adam on independently shuffled batches.

    Each module's latents are shuffled on their own, so no row pairing leaks
    into the unsupervised terms. Full batches are the default because the
    distribution term compares batch covariances, and small unpaired batches
    turn it into sampling noise. On a non-finite loss the translator is
    restored to the last completed epoch and ``TrainingFailureError`` carries
    that state. Training stops once a full-batch epoch starts below
    ``loss_tol``: Adam's normalised steps would otherwise turn round-off
    gradients at an exact minimum into steps of size ``lr``.
    """
    schedule = schedule or TrainSchedule()
    ids = t.module_ids
    if len(ids) < 2:
        raise ConfigError("training needs at least two modules")
    missing = [mid for mid in ids if mid not in data]
    if missing:
        raise ConfigError(f"no training latents for modules {missing}")
    arrays = {mid: np.asarray(data[mid], dtype=np.float64) for mid in ids}
    report = TrainingReport()
    if schedule.init == "structural":
        report.structural = structural_init(t, arrays, schedule.n_clusters, schedule.seed, pairsets,
                                            restarts=schedule.restarts, pair_weight=schedule.pair_weight,
                                            mass_weight=schedule.mass_weight)

    w = schedule.weights.as_dict()
    params = t.parameters()
    opt = Adam(params, lr=schedule.lr)
    rng = np.random.default_rng(derive_seed(schedule.seed, "glw-batches"))
    n = min(a.shape[0] for a in arrays.values())
    bs = n if schedule.batch_size is None else min(schedule.batch_size, n)
    n_batches = max(1, n // bs)
    last_good = t.state_dict()
    curve: list[float] = []
    for epoch in range(schedule.epochs):
        orders = {mid: rng.permutation(arrays[mid].shape[0]) for mid in ids}
        sums = dict.fromkeys(("total",) + COMPONENTS, 0.0)
        converged = False
        try:
            for b in range(n_batches):
                batches = {mid: Tensor(arrays[mid][orders[mid][b * bs:(b + 1) * bs]]) for mid in ids}
                terms = loss_terms(t, batches, pairsets)
                total = _sum([terms[name] * w[name] for name in COMPONENTS])
                sums["total"] += total.item()
                for name in COMPONENTS:
                    sums[name] += terms[name].item()
                if n_batches == 1 and total.item() < schedule.loss_tol:
                    converged = True
                    break
                opt.zero_grad()
                backward(total)
                opt.step()
        except NonFiniteError as err:
            t.load_state_dict(last_good)
            raise TrainingFailureError(f"non-finite loss at epoch {epoch}: {err}", loss_curve=curve,
                                       checkpoint=last_good) from err
        row = {name: value / n_batches for name, value in sums.items()}
        row["epoch"] = epoch + 1
        report.epochs.append(row)
        curve.append(row["total"])
        last_good = t.state_dict()
        if converged:
            report.converged = True
            break
    return t, report


def evaluate_losses(t: GlwTranslator, data: Mapping[str, np.ndarray], pairsets: Sequence[PairSet] = (),
                    weights: LossWeights | None = None) -> dict[str, float]:
    """Full-batch loss decomposition without updating anything."""
    weights = weights or LossWeights()
    batches = {mid: Tensor(np.asarray(data[mid], dtype=np.float64)) for mid in t.module_ids}
    terms = loss_terms(t, batches, pairsets)
    out = {name: terms[name].item() for name in COMPONENTS}
    wd = weights.as_dict()
    out["total"] = sum(wd[name] * out[name] for name in COMPONENTS)
    return out
