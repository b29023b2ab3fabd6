"""Unsupervised seeding of the translator from cluster geometry.

Cycle and moment-matching objectives are blind to any rotation of a whitened
latent space, so gradient training from a random start settles on an
arbitrary, semantically wrong alignment. This module breaks that symmetry
before training by exploiting what the domains share: the same set of
anisotropic clusters.

For every module the latents are whitened and clustered. Clusters of a
module are matched to clusters of the anchor module, and for a candidate
matching the rotation ``Q`` (rows: ``u_i @ Q ~ u_anchor``) solves the linear
least-squares system

    mean_i[a] @ Q = mean_anchor[m(a)]
    cov_i[a] @ Q  = Q @ cov_anchor[m(a)]

followed by projection onto the orthogonal group. The matching with the
smallest residual wins, where the residual adds a chi-square disagreement of
cluster sizes to the moment mismatch; candidates come from descriptor assignment,
graph matching and random restarts, each polished by pairwise swaps.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment, quadratic_assignment
from sklearn.cluster import KMeans

from glw.domains.world import derive_seed
from glw.errors import ConfigError
from glw.translate.losses import PairSet
from glw.translate.translator import GlwTranslator


@dataclass
class Whitening:
    mean: np.ndarray
    forward: np.ndarray
    inverse: np.ndarray

    def apply(self, v: np.ndarray) -> np.ndarray:
        return (v - self.mean) @ self.forward


def fit_whitening(v: np.ndarray, floor: float = 1e-10) -> Whitening:
    mean = v.mean(axis=0)
    evals, evecs = np.linalg.eigh(np.cov(v, rowvar=False))
    evals = np.maximum(evals, floor * max(evals.max(), floor))
    root = np.sqrt(evals)
    return Whitening(mean=mean, forward=evecs / root, inverse=(evecs * root).T)


@dataclass
class ClusterSummary:
    means: np.ndarray
    covs: np.ndarray
    labels: np.ndarray


def summarize_clusters(u: np.ndarray, n_clusters: int, seed: int) -> ClusterSummary:
    km = KMeans(n_clusters=n_clusters, n_init=10, random_state=seed % (2**32)).fit(u)
    labels = km.labels_
    k = u.shape[1]
    means = np.zeros((n_clusters, k))
    covs = np.zeros((n_clusters, k, k))
    for c in range(n_clusters):
        members = u[labels == c]
        means[c] = members.mean(axis=0)
        if len(members) > 1:
            covs[c] = np.cov(members, rowvar=False)
    return ClusterSummary(means=means, covs=covs, labels=labels)


def _descriptor(s: ClusterSummary) -> np.ndarray:
    return np.sort(np.linalg.eigvalsh(s.covs), axis=1)


def _shape_along_gaps(s: ClusterSummary) -> np.ndarray:
    # variance of cluster a along the direction towards cluster b: rotation invariant
    gaps = s.means[None, :, :] - s.means[:, None, :]
    norm = np.einsum("abi,abi->ab", gaps, gaps)
    np.fill_diagonal(norm, 1.0)
    return np.einsum("abi,aij,abj->ab", gaps, s.covs, gaps) / norm


class RotationSolver:
    """Closed-form rotation fit for a cluster matching, reusable across candidates."""

    def __init__(self, src: ClusterSummary, dst: ClusterSummary, pairs: tuple[np.ndarray, np.ndarray] | None = None,
                 pair_weight: float = 1.0, mass_weight: float = 1.0):
        self.src, self.dst = src, dst
        k = src.means.shape[1]
        self.k = k
        self.c = src.means.shape[0]
        eye = np.eye(k)
        A2 = np.einsum("aij,ajk->ik", src.covs, src.covs)
        B2 = np.einsum("aij,ajk->ik", dst.covs, dst.covs)
        m2 = src.means.T @ src.means
        self.base = np.kron(eye, A2) + np.kron(B2, eye) + np.kron(eye, m2)
        self.base_h = np.zeros(k * k)
        self.pairs = None
        if pairs is not None and len(pairs[0]):
            ps, pd = pairs
            self.pairs = (ps, pd, pair_weight)
            self.base += pair_weight * np.kron(eye, ps.T @ ps)
            self.base_h += pair_weight * (ps.T @ pd).reshape(-1, order="F")
        self._cross = np.empty((self.c, self.c, k * k, k * k))
        for a in range(self.c):
            for b in range(self.c):
                self._cross[a, b] = np.kron(dst.covs[b], src.covs[a])
        self._outer = np.einsum("ai,bj->abij", src.means, dst.means)
        # chi-square disagreement of cluster sizes; cluster mass survives any bijective rendering
        na = np.bincount(src.labels, minlength=self.c).astype(float)
        nb = np.bincount(dst.labels, minlength=self.c).astype(float)
        self._mass = mass_weight * (na[:, None] - nb[None, :]) ** 2 / np.maximum((na[:, None] + nb[None, :]) / 2, 1.0)

    def solve(self, match: np.ndarray) -> np.ndarray:
        rows = np.arange(self.c)
        G = self.base - 2.0 * self._cross[rows, match].sum(axis=0)
        h = self.base_h + self._outer[rows, match].sum(axis=0).reshape(-1, order="F")
        q = np.linalg.solve(G + 1e-12 * np.eye(G.shape[0]), h)
        U, _, Vt = np.linalg.svd(q.reshape(self.k, self.k, order="F"))
        return U @ Vt

    def residual(self, match: np.ndarray) -> tuple[float, np.ndarray]:
        Q = self.solve(match)
        dm = self.src.means @ Q - self.dst.means[match]
        rotated = np.einsum("ji,ajk,kl->ail", Q, self.src.covs, Q)
        r = float(np.sum(dm * dm) + np.sum((rotated - self.dst.covs[match]) ** 2))
        r += float(self._mass[np.arange(self.c), match].sum())
        if self.pairs is not None:
            ps, pd, w = self.pairs
            r += w * float(np.sum((ps @ Q - pd) ** 2))
        return r, Q


def _polish(solver: RotationSolver, match: np.ndarray) -> tuple[float, np.ndarray]:
    match = match.copy()
    best, _ = solver.residual(match)
    improved = True
    while improved:
        improved = False
        for a in range(solver.c):
            for b in range(a + 1, solver.c):
                trial = match.copy()
                trial[a], trial[b] = trial[b], trial[a]
                r, _ = solver.residual(trial)
                if r < best - 1e-12:
                    best, match, improved = r, trial, True
    return best, match


def search_matching(solver: RotationSolver, seed: int, restarts: int = 6,
                    exact_tol: float = 1e-3) -> tuple[float, np.ndarray, int]:
    """Best cluster matching by residual; returns (residual, matching, candidates tried).

    The search stops early once the residual drops below ``exact_tol`` times
    the total energy of the target moments, which happens for exactly linear pairs.
    """
    stop = exact_tol * float(np.sum(solver.dst.means ** 2) + np.sum(solver.dst.covs ** 2))
    rng = np.random.default_rng(seed)
    d_src, d_dst = _descriptor(solver.src), _descriptor(solver.dst)
    cost = ((d_src[:, None, :] - d_dst[None, :, :]) ** 2).sum(axis=-1)
    starts = [linear_sum_assignment(cost)[1]]
    P_src, P_dst = _shape_along_gaps(solver.src), _shape_along_gaps(solver.dst)
    for _ in range(restarts):
        res = quadratic_assignment(P_src, P_dst, method="faq",
                                   options={"maximize": True, "P0": "randomized", "rng": rng})
        starts.append(np.asarray(res.col_ind))
    for _ in range(restarts):
        starts.append(rng.permutation(solver.c))
    best_r, best_m = np.inf, None
    tried = 0
    for start in starts:
        r, m = _polish(solver, np.asarray(start))
        tried += 1
        if r < best_r:
            best_r, best_m = r, m
        if best_r <= stop:
            break
    return best_r, best_m, tried


@dataclass
class StructuralReport:
    anchor: str
    residuals: dict[str, float] = field(default_factory=dict)
    matchings: dict[str, list[int]] = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {"anchor": self.anchor, "residuals": dict(self.residuals),
                "matchings": {k: list(map(int, v)) for k, v in self.matchings.items()}}


def _anchor_pairs(pairsets: Sequence[PairSet], module: str, anchor: str):
    src, dst = [], []
    for ps in pairsets:
        if len(ps) == 0:
            continue
        if (ps.i, ps.j) == (module, anchor):
            src.append(ps.vi); dst.append(ps.vj)
        elif (ps.i, ps.j) == (anchor, module):
            src.append(ps.vj); dst.append(ps.vi)
    if not src:
        return None
    return np.vstack(src), np.vstack(dst)


def structural_init(t: GlwTranslator, latents: Mapping[str, np.ndarray], n_clusters: int, seed: int,
                    pairsets: Sequence[PairSet] = (), anchor: str | None = None,
                    restarts: int = 6, pair_weight: float = 1.0, mass_weight: float = 1.0) -> StructuralReport:
    """Overwrite the translator's linear paths with a cluster-matched whitening alignment.

    Every module is mapped into the anchor module's whitened coordinates
    (zero-padded up to ``D``); hidden-layer outputs are zeroed so the
    initial maps are exactly affine and mutually inverse.
    """
    anchor = anchor or t.module_ids[0]
    dims = {mid: t.dims[mid] for mid in t.module_ids}
    if len(set(dims.values())) != 1:
        raise ConfigError(f"structural init needs equal latent dimensions, got {dims}")
    if n_clusters < 2:
        raise ConfigError("structural init needs at least two clusters")
    k = dims[anchor]
    whiten = {mid: fit_whitening(np.asarray(latents[mid], dtype=np.float64)) for mid in t.module_ids}
    white = {mid: whiten[mid].apply(np.asarray(latents[mid], dtype=np.float64)) for mid in t.module_ids}
    summaries = {mid: summarize_clusters(white[mid], n_clusters, derive_seed(seed, "kmeans", mid))
                 for mid in t.module_ids}

    report = StructuralReport(anchor=anchor)
    rotations = {anchor: np.eye(k)}
    report.residuals[anchor] = 0.0
    report.matchings[anchor] = list(range(n_clusters))
    for mid in t.module_ids:
        if mid == anchor:
            continue
        raw_pairs = _anchor_pairs(pairsets, mid, anchor)
        pairs = None
        if raw_pairs is not None:
            pairs = (whiten[mid].apply(raw_pairs[0]), whiten[anchor].apply(raw_pairs[1]))
        solver = RotationSolver(summaries[mid], summaries[anchor], pairs, pair_weight, mass_weight)
        residual, match, _ = search_matching(solver, derive_seed(seed, "matching", mid), restarts)
        _, Q = solver.residual(match)
        rotations[mid] = Q
        report.residuals[mid] = residual
        report.matchings[mid] = list(match)

    pad = np.eye(k, t.D)
    for mid in t.module_ids:
        w, Q = whiten[mid], rotations[mid]
        p = t.params[mid]
        enc = w.forward @ Q @ pad
        p["enc_S"].data[...] = enc
        p["enc_c"].data[...] = -w.mean @ enc
        p["dec_S"].data[...] = pad.T @ Q.T @ w.inverse
        p["dec_c"].data[...] = w.mean
        if t.mode == "mlp":
            p["enc_W2"].data[...] = 0.0
            p["dec_W2"].data[...] = 0.0
    return report
