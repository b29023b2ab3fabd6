"""Scenario configuration: JSON documents validated against the bundled schema."""
from __future__ import annotations

import copy
import json
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Mapping

import jsonschema

from glw.domains.world import DomainSpec
from glw.errors import ConfigError
from glw.runtime.state import AttentionBundle, IgnitionParams
from glw.translate.training import TrainSchedule
from glw.translate.translator import LossWeights


def load_schema() -> dict:
    return json.loads(resources.files("glw.harness").joinpath("scenario.schema.json").read_text(encoding="utf-8"))


@dataclass
class WorldConfig:
    k: int
    n_clusters: int
    n_samples: int
    delta_sep: float = 4.0
    mean_spread: float = 1.5


@dataclass
class TranslatorConfig:
    D: int | None = None
    mode: str = "mlp"
    epochs: int = 100
    batch_size: int | None = None
    lr: float = 1e-3
    weights: dict[str, float] = field(default_factory=lambda: LossWeights().as_dict())
    init: str = "structural"
    n_clusters: int | None = None
    restarts: int = 6
    pair_weight: float = 0.1
    mass_weight: float = 1.0
    n_pairs: int = 0

    def schedule(self, seed: int, n_clusters: int) -> TrainSchedule:
        return TrainSchedule(epochs=self.epochs, batch_size=self.batch_size, lr=self.lr,
                             weights=LossWeights(**{**LossWeights().as_dict(), **self.weights}), seed=seed,
                             init=self.init, n_clusters=self.n_clusters or n_clusters, restarts=self.restarts,
                             pair_weight=self.pair_weight, mass_weight=self.mass_weight)


@dataclass
class EventConfig:
    module: str
    sample: int
    salience: float = 0.0
    u: float = 0.0


@dataclass
class TickConfig:
    tick: int
    query: list[float] | None = None
    events: list[EventConfig] = field(default_factory=list)


@dataclass
class EvaluationConfig:
    seeds: list[int] = field(default_factory=lambda: [0, 1, 2, 3, 4])
    gallery: int = 500
    metric: str = "euclidean"
    supervised_pairs: int = 32
    noise_levels: list[float] = field(default_factory=lambda: [0.0, 0.25, 0.5, 0.75, 1.0])
    grounding_pair: list[str] | None = None
    control_noise_std: float = 1.0
    classifier_epochs: int = 300
    ignition_grid: int = 101
    ignition_t_max: int = 5000


@dataclass
class ScenarioConfig:
    world: WorldConfig
    domains: list[DomainSpec]
    translator: TranslatorConfig = field(default_factory=TranslatorConfig)
    modules: dict[str, dict[str, Any]] = field(default_factory=dict)
    attention: dict[str, Any] = field(default_factory=dict)
    ignition: IgnitionParams = field(default_factory=IgnitionParams)
    timeline: list[TickConfig] = field(default_factory=list)
    evaluation: EvaluationConfig = field(default_factory=EvaluationConfig)
    name: str = "scenario"
    seed: int = 0
    output_dir: str = "artifacts"

    @property
    def domain_ids(self) -> list[str]:
        return [d.id for d in self.domains]

    def module_settings(self) -> dict[str, dict[str, Any]]:
        out = {}
        for d in self.domains:
            cfg = {"kind": "trained-autoencoder", "latent_dim": self.world.k, "epochs": 200}
            cfg.update(self.modules.get(d.id, {}))
            if cfg["kind"] == "oracle-linear":
                cfg.pop("epochs", None)
                for key in ("hidden", "lr", "batch_size"):
                    cfg.pop(key, None)
            out[d.id] = cfg
        return out

    def bundle(self) -> AttentionBundle:
        return AttentionBundle(**self.attention)

    def grounding_pair(self) -> tuple[str, str]:
        pair = self.evaluation.grounding_pair or [self.domain_ids[0], self.domain_ids[-1]]
        return pair[0], pair[1]

    def to_dict(self) -> dict:
        d = asdict(self)
        d["domains"] = [{"id": s.id, "obs_dim": s.obs_dim, "rendering": s.rendering, "noise_std": s.noise_std}
                        for s in self.domains]
        return d


def _field_path(err: jsonschema.ValidationError) -> str:
    return "/".join(str(p) for p in err.absolute_path) or "<root>"


def parse_config(raw: Mapping[str, Any]) -> ScenarioConfig:
    raw = copy.deepcopy(dict(raw))
    validator = jsonschema.Draft202012Validator(load_schema())
    errors = sorted(validator.iter_errors(raw), key=lambda e: list(e.absolute_path))
    if errors:
        e = errors[0]
        raise ConfigError(f"config field {_field_path(e)}: {e.message}")
    try:
        world = WorldConfig(**raw["world"])
        domains = [DomainSpec(id=d["id"], obs_dim=d["obs_dim"], rendering=d.get("rendering", "linear-orthogonal"),
                              noise_std=d.get("noise_std", 0.0)) for d in raw["domains"]]
        timeline = [TickConfig(tick=t["tick"], query=t.get("query"),
                               events=[EventConfig(**e) for e in t.get("events", [])])
                    for t in raw.get("timeline", [])]
        cfg = ScenarioConfig(
            world=world,
            domains=domains,
            translator=TranslatorConfig(**raw.get("translator", {})),
            modules=raw.get("modules", {}),
            attention=raw.get("attention", {}),
            ignition=IgnitionParams(**raw.get("ignition", {})),
            timeline=timeline,
            evaluation=EvaluationConfig(**raw.get("evaluation", {})),
            name=raw.get("name", "scenario"),
            seed=raw.get("seed", 0),
            output_dir=raw.get("output_dir", "artifacts"),
        )
        cfg.bundle()
    except TypeError as err:
        raise ConfigError(f"config: {err}") from err
    _check_references(cfg)
    return cfg


def _check_references(cfg: ScenarioConfig) -> None:
    ids = cfg.domain_ids
    if len(set(ids)) != len(ids):
        raise ConfigError(f"domains: duplicate ids in {ids}")
    for d in cfg.domains:
        if d.rendering != "pure-noise" and d.obs_dim < cfg.world.k:
            raise ConfigError(f"domains/{d.id}/obs_dim: {d.obs_dim} is below k={cfg.world.k}")
    for mid in cfg.modules:
        if mid not in ids:
            raise ConfigError(f"modules/{mid}: no domain with that id")
    last = 0
    d_k = cfg.bundle().d_k
    for i, t in enumerate(cfg.timeline):
        if t.tick <= last:
            raise ConfigError(f"timeline/{i}/tick: ticks must be strictly increasing ({t.tick} after {last})")
        last = t.tick
        if t.query is not None and len(t.query) != d_k:
            raise ConfigError(f"timeline/{i}/query: length {len(t.query)} differs from d_k={d_k}")
        for j, e in enumerate(t.events):
            if e.module not in ids:
                raise ConfigError(f"timeline/{i}/events/{j}/module: unknown module {e.module!r}")
    for mid in cfg.evaluation.grounding_pair or []:
        if mid not in ids:
            raise ConfigError(f"evaluation/grounding_pair: unknown module {mid!r}")


def load_config(path) -> ScenarioConfig:
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError as err:
        raise ConfigError(f"config file {path} not found") from err
    except json.JSONDecodeError as err:
        raise ConfigError(f"config file {path} is not valid JSON: {err}") from err
    return parse_config(raw)
