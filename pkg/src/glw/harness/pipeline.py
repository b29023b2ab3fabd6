"""End-to-end scenario runs: world, modules, translator, timeline, metrics, manifest."""
from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass, field
from itertools import combinations
from pathlib import Path
from typing import Sequence

import numpy as np

from glw.domains import DomainData, World, export_domain_csv, export_world_csv, generate_world, render_domain
from glw.domains.modules import SpecializedModule, train_modules
from glw.domains.world import derive_seed
from glw.errors import ConfigError, GlwError
from glw.harness.checkpoint import save_modules, save_translator
from glw.harness.config import ScenarioConfig
from glw.runtime import StimulusEvent, Workspace, write_summary_csv, write_trace_jsonl
from glw.translate import GlwTranslator, PairSet, TrainingReport, train_glw

log = logging.getLogger(__name__)

STAGES = ("world", "modules", "translator", "timeline", "metrics")


@dataclass
class Built:
    config: ScenarioConfig
    seed: int
    world: World
    domains: dict[str, DomainData]
    modules: dict[str, SpecializedModule] = field(default_factory=dict)
    latents: dict[str, np.ndarray] = field(default_factory=dict)
    translator: GlwTranslator | None = None
    report: TrainingReport | None = None
    pairsets: list[PairSet] = field(default_factory=list)
    schedule_digest: str | None = None


def build_world(cfg: ScenarioConfig, seed: int) -> World:
    w = cfg.world
    return generate_world(seed, w.k, w.n_clusters, w.n_samples, w.delta_sep, w.mean_spread)


def build_domains(cfg: ScenarioConfig, world: World) -> dict[str, DomainData]:
    return {spec.id: render_domain(world, spec) for spec in cfg.domains}


def build_modules(cfg: ScenarioConfig, domains: dict[str, DomainData], seed: int) -> dict[str, SpecializedModule]:
    return train_modules(list(domains.values()), cfg.module_settings(), seed)


def make_pairsets(latents: dict[str, np.ndarray], n_pairs: int, seed: int) -> list[PairSet]:
    """``n_pairs`` matched rows, the same sample indices for every module pair."""
    if n_pairs <= 0:
        return []
    n = min(v.shape[0] for v in latents.values())
    if n_pairs > n:
        raise ConfigError(f"asked for {n_pairs} pairs but only {n} samples exist")
    idx = np.sort(np.random.default_rng(derive_seed(seed, "pairs")).choice(n, size=n_pairs, replace=False))
    return [PairSet(i, j, latents[i][idx], latents[j][idx]) for i, j in combinations(list(latents), 2)]


def build_translator(cfg: ScenarioConfig, latents: dict[str, np.ndarray], seed: int, n_pairs: int | None = None):
    dims = {m: v.shape[1] for m, v in latents.items()}
    tc = cfg.translator
    D = tc.D or max(dims.values())
    t = GlwTranslator(D, dims, mode=tc.mode, seed=derive_seed(seed, "translator"))
    pairsets = make_pairsets(latents, tc.n_pairs if n_pairs is None else n_pairs, seed)
    schedule = tc.schedule(seed, cfg.world.n_clusters)
    t, report = train_glw(t, latents, pairsets, schedule)
    return t, report, pairsets, schedule.digest()


def build(cfg: ScenarioConfig, seed: int, n_pairs: int | None = None, stages: Sequence[str] = STAGES) -> Built:
    world = build_world(cfg, seed)
    b = Built(cfg, seed, world, build_domains(cfg, world))
    if "modules" in stages:
        b.modules = build_modules(cfg, b.domains, seed)
        b.latents = {m: b.modules[m].encode(b.domains[m].x) for m in b.domains}
    if "translator" in stages:
        b.translator, b.report, b.pairsets, b.schedule_digest = build_translator(cfg, b.latents, seed, n_pairs)
    return b


def run_timeline(cfg: ScenarioConfig, b: Built) -> Workspace:
    ws = Workspace(b.translator, cfg.bundle(), cfg.ignition, seed=b.seed)
    by_tick = {t.tick: t for t in cfg.timeline}
    last = max(by_tick, default=0)
    for tick in range(1, last + 1):
        entry = by_tick.get(tick)
        events = []
        for e in entry.events if entry else []:
            data = b.domains[e.module]
            if e.sample >= data.n:
                raise ConfigError(f"timeline tick {tick}: sample {e.sample} out of range for {e.module!r} (n={data.n})")
            latent = b.modules[e.module].encode(data.x[e.sample])
            events.append(StimulusEvent(e.module, latent, e.salience, e.u))
        ws.step(events, query=entry.query if entry else None)
    return ws


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(obj, sort_keys=True, indent=2, allow_nan=False) + "\n", encoding="utf-8")


def write_manifest(out: Path, status: str, failure_point: str | None = None, error: str | None = None) -> None:
    files = {p.name: sha256_file(p) for p in sorted(out.iterdir()) if p.is_file() and p.name != "MANIFEST.json"}
    write_json(out / "MANIFEST.json", {"status": status, "failure_point": failure_point, "error": error,
                                       "files": files})


def run_metrics(cfg: ScenarioConfig, b: Built, ws: Workspace | None) -> dict:
    from glw.harness.evaluation import eval_alignment

    seeds = [b.seed]
    metrics: dict = {"name": cfg.name, "seed": b.seed, "seeds": seeds}
    metrics["modules"] = {"seeds": seeds, "final_loss": {m: float(mod.final_loss) for m, mod in b.modules.items()}}
    if b.report is not None:
        metrics["translator"] = {"seeds": seeds, "final": b.report.final, "n_pairs": sum(len(p) for p in b.pairsets),
                                 "loss_curve": [row["total"] for row in b.report.epochs],
                                 "structural": b.report.structural.as_dict() if b.report.structural else None}
        metrics["retrieval"] = eval_alignment(b, cfg.evaluation.gallery, cfg.evaluation.metric)
        metrics["retrieval"]["seeds"] = seeds
    if ws is not None and ws.summaries:
        metrics["timeline"] = {"seeds": seeds, "ticks": len(ws.summaries), "trace_events": len(ws.trace),
                               "ignited_ticks": [s.step for s in ws.summaries if s.ignited],
                               "final_amplitude": ws.state.amplitude}
    return metrics


def run_scenario(cfg: ScenarioConfig, seed: int | None = None, out_dir=None, stages: Sequence[str] = STAGES) -> Path:
    """Run the requested stages and write their artifacts.

    On failure the artifacts written so far stay on disk and the manifest
    records the stage that failed; the error is then re-raised.
    """
    seed = cfg.seed if seed is None else seed
    out = Path(out_dir or cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    stage = "world"
    try:
        world = build_world(cfg, seed)
        b = Built(cfg, seed, world, build_domains(cfg, world))
        export_world_csv(world, out / "world.csv")
        for mid, data in b.domains.items():
            export_domain_csv(data, out / f"domain_{mid}.csv")
        if "modules" in stages:
            stage = "modules"
            b.modules = build_modules(cfg, b.domains, seed)
            b.latents = {m: b.modules[m].encode(b.domains[m].x) for m in b.domains}
            save_modules(out / "modules.json", b.modules, seed)
        if "translator" in stages:
            stage = "translator"
            b.translator, b.report, b.pairsets, b.schedule_digest = build_translator(cfg, b.latents, seed)
            save_translator(out / "translator.json", b.translator, seed, b.schedule_digest)
        ws = None
        if "timeline" in stages:
            stage = "timeline"
            ws = run_timeline(cfg, b)
            write_trace_jsonl(ws.trace, out / "trace.jsonl")
            write_summary_csv(ws.summaries, out / "summary.csv")
        if "metrics" in stages:
            stage = "metrics"
            write_json(out / "metrics.json", run_metrics(cfg, b, ws))
    except GlwError as err:
        log.error("run failed during %s: %s", stage, err)
        write_manifest(out, "failed", stage, str(err))
        raise
    write_manifest(out, "ok")
    return out
