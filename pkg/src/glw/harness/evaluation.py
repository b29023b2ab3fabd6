"""Experiment drivers: alignment retrieval, grounding under noise, and the ignition sweep."""
from __future__ import annotations

import math
from dataclasses import replace
from itertools import permutations
from typing import Mapping

import numpy as np
from scipy.optimize import brentq

from glw.domains import DomainData, DomainSpec, draw_samples, fit_classifier, render_domain
from glw.domains.modules import fit_autoencoder
from glw.domains.world import derive_seed
from glw.errors import EvaluationError
from glw.harness.config import ScenarioConfig
from glw.harness.pipeline import Built, build
from glw.runtime import IgnitionParams, broadcast, inject, new_state, reverberate
from glw.runtime.ops import ordered_mean
from glw.translate import GlwTranslator, procrustes_oracle, retrieval_at_1, train_glw

LINEAR = ("linear-orthogonal", "linear-general")


def heldout_latents(b: Built, n: int, stream: str = "heldout"):
    z, labels = draw_samples(b.world, n, stream)
    latents = {}
    for mid, data in b.domains.items():
        latents[mid] = b.modules[mid].encode(data.renderer.render(z, stream))
    return z, labels, latents


def eval_alignment(b: Built, gallery: int = 500, metric: str = "euclidean") -> dict:
    """Top-1 retrieval on held-out samples for every ordered module pair and method.

    The Procrustes oracle is fitted on the paired training latents and only
    reported for pairs of noiseless linear-orthogonal domains.
    """
    _, _, held = heldout_latents(b, gallery)
    rng = np.random.default_rng(derive_seed(b.seed, "random-baseline"))
    table = {"trained": {}, "procrustes": {}, "random": {}}
    for i, j in permutations(list(b.domains), 2):
        key = f"{i}->{j}"
        table["trained"][key] = retrieval_at_1(b.translator.translate(i, j, held[i]), held[j], metric=metric)
        perm = rng.permutation(gallery)
        table["random"][key] = float(np.mean(perm == np.arange(gallery)))
        si, sj = b.domains[i].spec, b.domains[j].spec
        if si.rendering == sj.rendering == "linear-orthogonal" and si.noise_std == sj.noise_std == 0:
            W = procrustes_oracle(b.latents[i], b.latents[j])
            table["procrustes"][key] = retrieval_at_1(held[i] @ W, held[j], metric=metric)
    return table


def pair_groups(cfg: ScenarioConfig) -> dict[str, list[tuple[str, str]]]:
    """Directed pairs split into those between linear domains and those touching a nonlinear one."""
    rendering = {d.id: d.rendering for d in cfg.domains}
    groups = {"linear": [], "nonlinear": []}
    for i, j in permutations(cfg.domain_ids, 2):
        linear = rendering[i] in LINEAR and rendering[j] in LINEAR
        groups["linear" if linear else "nonlinear"].append((i, j))
    return groups


def broadcast_copies(t: GlwTranslator, latents: Mapping[str, np.ndarray], target: str) -> np.ndarray:
    """Batched form of a workspace broadcast: decode the mean encoding of every connected module."""
    ids = sorted(latents)
    z = ordered_mean([t.encode(m, latents[m]) for m in ids])
    return t.decode(target, z)


def _observation_noise(x: np.ndarray, std: float, seed: int, level: int) -> np.ndarray:
    if std == 0:
        return x
    rng = np.random.default_rng(derive_seed(seed, "ood-noise", level))
    return x + rng.normal(0.0, std, size=x.shape)


def _control_workspace(cfg: ScenarioConfig, b: Built, m1: str, m2: str):
    """Second module replaced by one trained on pure noise, aligned with the same schedule."""
    spec2 = b.domains[m2].spec
    ctrl_id = f"{m2}-control"
    spec = DomainSpec(ctrl_id, spec2.obs_dim, "pure-noise", cfg.evaluation.control_noise_std)
    data = render_domain(b.world, spec)
    settings = dict(cfg.module_settings()[m2])
    kind = settings.pop("kind")
    if kind != "trained-autoencoder":
        settings = {"latent_dim": settings["latent_dim"], "epochs": 200}
    module = fit_autoencoder(data, settings.pop("latent_dim"), settings.pop("epochs"), b.seed, **settings,
                             module_id=ctrl_id)
    latents = {m1: b.latents[m1], ctrl_id: module.encode(data.x)}
    dims = {m: v.shape[1] for m, v in latents.items()}
    t = GlwTranslator(cfg.translator.D or max(dims.values()), dims, mode=cfg.translator.mode,
                      seed=derive_seed(b.seed, "control-translator"))
    t, _ = train_glw(t, latents, (), cfg.translator.schedule(b.seed, cfg.world.n_clusters))
    return ctrl_id, data, module, t


def eval_grounding_ood(cfg: ScenarioConfig, b: Built, n_test: int = 1000) -> dict:
    """Cluster classification from module 1 alone vs. module 1 plus its broadcast module-2 copy.

    Heads are trained on clean training latents and tested on fresh samples
    whose module-1 observations carry extra Gaussian noise at each level.
    """
    m1, m2 = cfg.grounding_pair()
    ev = cfg.evaluation
    t = b.translator
    labels = b.world.labels
    v1, v2 = b.latents[m1], b.latents[m2]
    feats_b = np.hstack([v1, broadcast_copies(t, {m1: v1, m2: v2}, m2)])
    ctrl_id, ctrl_data, ctrl_module, ctrl_t = _control_workspace(cfg, b, m1, m2)
    vc = ctrl_module.encode(ctrl_data.x)
    feats_c = np.hstack([v1, broadcast_copies(ctrl_t, {m1: v1, ctrl_id: vc}, ctrl_id)])
    seed = derive_seed(b.seed, "grounding")
    head_a = fit_classifier(v1, labels, ev.classifier_epochs, seed)
    head_b = fit_classifier(feats_b, labels, ev.classifier_epochs, seed)
    head_c = fit_classifier(feats_c, labels, ev.classifier_epochs, seed)

    z, y = draw_samples(b.world, n_test, "grounding")
    x1 = b.domains[m1].renderer.render(z, "grounding")
    h2 = b.modules[m2].encode(b.domains[m2].renderer.render(z, "grounding"))
    hc = ctrl_module.encode(ctrl_data.renderer.render(z, "grounding"))
    rows = []
    for level, std in enumerate(ev.noise_levels):
        h1 = b.modules[m1].encode(_observation_noise(x1, std, b.seed, level))
        rows.append({
            "noise_std": float(std),
            "latent_only": head_a.accuracy(h1, y),
            "workspace": head_b.accuracy(np.hstack([h1, broadcast_copies(t, {m1: h1, m2: h2}, m2)]), y),
            "control": head_c.accuracy(np.hstack([h1, broadcast_copies(ctrl_t, {m1: h1, ctrl_id: hc}, ctrl_id)]), y),
        })
    return {"pair": [m1, m2], "levels": rows}


def logistic(x):
    return 0.5 * (1.0 + np.tanh(0.5 * np.asarray(x, dtype=np.float64)))


def ignition_oracle(u: float, g: float, beta: float, theta_a: float, grid: int = 20001) -> float:
    """Smallest fixed point of ``a -> logistic(g a + beta u - theta_a)`` in [0, 1].

    Iterating an increasing map from ``a = 0`` converges monotonically to its
    smallest fixed point, so this root is where the recurrence settles.
    """
    def f(a):
        return logistic(g * a + beta * u - theta_a) - a

    a = np.linspace(0.0, 1.0, grid)
    fa = f(a)
    if fa[0] <= 0:
        return 0.0
    crossing = np.flatnonzero(fa <= 0)
    if crossing.size == 0:
        raise EvaluationError(f"no fixed point in [0, 1] for u={u}")
    hi = crossing[0]
    if fa[hi] == 0:
        return float(a[hi])
    return float(brentq(f, a[hi - 1], a[hi], xtol=1e-15, rtol=4 * np.finfo(float).eps))


def ignition_setup(b: Built):
    """Every module connected, sample 0 injected, one broadcast."""
    t = b.translator
    state = new_state(t.D, t.dims, seed=b.seed, connected={m: True for m in t.dims})
    for m in t.module_ids:
        state, _ = inject(state, m, b.latents[m][0])
    state, _ = broadcast(state, t)
    return state


def eval_ignition_sweep(b: Built, params: IgnitionParams, grid: int = 101, t_max: int = 5000) -> dict:
    state = ignition_setup(b)
    p = replace(params, t_max=t_max)
    rows = []
    for u in np.linspace(0.0, 1.0, grid):
        s = state.clone()
        s.amplitude = 0.0
        _, tr = reverberate(s, b.translator, p, float(u))
        oracle = ignition_oracle(float(u), p.g, p.beta, p.theta_a)
        rows.append({"u": float(u), "amplitude": tr.amplitudes[-1], "ignited": bool(tr.ignited), "steps": tr.steps,
                     "converged": bool(tr.converged), "oracle": oracle})
    amps = np.array([r["amplitude"] for r in rows])
    us = np.array([r["u"] for r in rows])
    slopes = np.abs(np.diff(amps) / np.diff(us))
    median = float(np.median(slopes))
    return {"rows": rows, "max_slope": float(slopes.max()), "median_slope": median,
            "slope_ratio": float(slopes.max() / median) if median > 0 else math.inf,
            "max_oracle_error": float(np.max(np.abs(amps - np.array([r["oracle"] for r in rows]))))}


def median(values) -> float:
    return float(np.median(np.asarray(list(values), dtype=np.float64)))


class SuiteRunner:
    """Runs evaluation suites over seeds, reusing trained pipelines between suites."""

    def __init__(self, cfg: ScenarioConfig, seeds=None):
        self.cfg = cfg
        self.seeds = list(seeds if seeds is not None else cfg.evaluation.seeds)
        self._cache: dict[tuple[int, int], Built] = {}

    def built(self, seed: int, n_pairs: int = 0) -> Built:
        key = (seed, n_pairs)
        if key not in self._cache:
            self._cache[key] = build(self.cfg, seed, n_pairs=n_pairs)
        return self._cache[key]

    def alignment(self) -> dict:
        ev = self.cfg.evaluation
        per_seed = {}
        for s in self.seeds:
            unsup = eval_alignment(self.built(s, 0), ev.gallery, ev.metric)
            sup = eval_alignment(self.built(s, ev.supervised_pairs), ev.gallery, ev.metric)
            per_seed[str(s)] = {"unsupervised": unsup["trained"], "supervised": sup["trained"],
                                "procrustes": unsup["procrustes"], "random": unsup["random"]}
        groups = pair_groups(self.cfg)
        medians, group_medians = {}, {}
        for regime in ("unsupervised", "supervised", "procrustes", "random"):
            keys = sorted({k for r in per_seed.values() for k in r[regime]})
            medians[regime] = {k: median(per_seed[str(s)][regime][k] for s in self.seeds) for k in keys}
            if regime in ("unsupervised", "supervised"):
                group_medians[regime] = {
                    name: median(np.mean([per_seed[str(s)][regime][f"{i}->{j}"] for i, j in pairs])
                                 for s in self.seeds)
                    for name, pairs in groups.items() if pairs}
        return {"seeds": self.seeds, "gallery": ev.gallery, "supervised_pairs": ev.supervised_pairs,
                "per_seed": per_seed, "median": medians, "group_median": group_medians,
                "groups": {k: [f"{i}->{j}" for i, j in v] for k, v in groups.items()}}

    def grounding(self) -> dict:
        per_seed = {str(s): eval_grounding_ood(self.cfg, self.built(s, 0)) for s in self.seeds}
        levels = self.cfg.evaluation.noise_levels
        med = []
        for li, std in enumerate(levels):
            row = {"noise_std": float(std)}
            for cond in ("latent_only", "workspace", "control"):
                row[cond] = median(per_seed[str(s)]["levels"][li][cond] for s in self.seeds)
            med.append(row)
        return {"seeds": self.seeds, "pair": list(self.cfg.grounding_pair()), "per_seed": per_seed, "median": med}

    def ignition(self) -> dict:
        ev = self.cfg.evaluation
        per_seed = {str(s): eval_ignition_sweep(self.built(s, 0), self.cfg.ignition, ev.ignition_grid,
                                                ev.ignition_t_max) for s in self.seeds}
        return {"seeds": self.seeds, "params": {"g": self.cfg.ignition.g, "beta": self.cfg.ignition.beta,
                                                "theta_a": self.cfg.ignition.theta_a},
                "per_seed": per_seed}
