"""Synthetic worlds: a hidden anisotropic cluster mixture rendered into several domains."""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

from glw.errors import ConfigError, DimensionError, SeparationInfeasibleError

MAX_SEPARATION_ATTEMPTS = 10_000
RENDERINGS = ("linear-orthogonal", "linear-general", "nonlinear-tanh", "pure-noise")

_MASK64 = (1 << 64) - 1


def _splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


def derive_seed(base: int, *keys) -> int:
    """Deterministic child seed from ``base`` and any number of labels.

    Adding new labels never changes the seeds already derived for old ones.
    """
    state = _splitmix64(int(base) & _MASK64)
    for key in keys:
        digest = hashlib.sha256(str(key).encode("utf-8")).digest()
        state = _splitmix64(state ^ int.from_bytes(digest[:8], "little"))
    return state & 0x7FFF_FFFF_FFFF_FFFF


@dataclass
class World:
    k: int
    samples: np.ndarray
    labels: np.ndarray
    means: np.ndarray
    scales: np.ndarray
    seed: int
    delta_sep: float = 4.0
    mean_spread: float = 1.5

    @property
    def n_clusters(self) -> int:
        return self.means.shape[0]

    @property
    def n_samples(self) -> int:
        return self.samples.shape[0]

    def min_mean_distance(self) -> float:
        c = self.n_clusters
        best = np.inf
        for a in range(c):
            for b in range(a + 1, c):
                best = min(best, float(np.linalg.norm(self.means[a] - self.means[b])))
        return best

    def separation_threshold(self) -> float:
        return self.delta_sep * float(self.scales.mean())


def generate_world(seed: int, k: int, n_clusters: int, n_samples: int, delta_sep: float = 4.0,
                   mean_spread: float = 1.5) -> World:
    """Draw an anisotropic Gaussian mixture whose means are at least ``delta_sep``
    mean within-cluster standard deviations apart."""
    if k < 2:
        raise ConfigError(f"semantic dimension k must be >= 2, got {k}")
    if n_clusters < 2:
        raise ConfigError(f"need at least 2 clusters, got {n_clusters}")
    if n_samples < 0:
        raise ConfigError("n_samples must be non-negative")
    rng = np.random.default_rng(seed)
    scales = rng.uniform(0.3, 1.0, size=(n_clusters, k))
    threshold = delta_sep * scales.mean()
    iu = np.triu_indices(n_clusters, 1)
    for _ in range(MAX_SEPARATION_ATTEMPTS):
        means = rng.normal(0.0, mean_spread, size=(n_clusters, k))
        gaps = np.linalg.norm(means[:, None, :] - means[None, :, :], axis=-1)[iu]
        if gaps.min() >= threshold:
            break
    else:
        raise SeparationInfeasibleError(
            f"could not place {n_clusters} means {threshold:.3f} apart in {MAX_SEPARATION_ATTEMPTS} attempts")
    labels = rng.integers(0, n_clusters, size=n_samples)
    samples = means[labels] + scales[labels] * rng.standard_normal((n_samples, k))
    return World(k=k, samples=samples, labels=labels, means=means, scales=scales, seed=seed,
                 delta_sep=delta_sep, mean_spread=mean_spread)


def draw_samples(world: World, n: int, stream: str | int = "heldout") -> tuple[np.ndarray, np.ndarray]:
    """Fresh samples from the same mixture, independent of ``world.samples``."""
    rng = np.random.default_rng(derive_seed(world.seed, "draw", stream))
    labels = rng.integers(0, world.n_clusters, size=n)
    z = world.means[labels] + world.scales[labels] * rng.standard_normal((n, world.k))
    return z, labels


@dataclass(frozen=True)
class DomainSpec:
    id: str
    obs_dim: int
    rendering: str = "linear-orthogonal"
    noise_std: float = 0.0
    seed: int | None = None

    def __post_init__(self):
        if self.rendering not in RENDERINGS:
            raise ConfigError(f"domain {self.id!r}: unknown rendering {self.rendering!r}")
        if self.noise_std < 0:
            raise ConfigError(f"domain {self.id!r}: noise_std must be >= 0")


@dataclass
class DomainRenderer:
    """The fixed generative map of one domain; noise is drawn per call."""

    spec: DomainSpec
    k: int
    matrix: np.ndarray | None
    seed: int

    def clean(self, z: np.ndarray) -> np.ndarray:
        z = np.asarray(z, dtype=np.float64)
        if z.ndim != 2 or z.shape[1] != self.k:
            raise DimensionError(f"domain {self.spec.id!r} expects z of width {self.k}, got {z.shape}")
        kind = self.spec.rendering
        if kind == "pure-noise":
            return np.zeros((z.shape[0], self.spec.obs_dim))
        pre = z @ self.matrix.T
        return np.tanh(pre) if kind == "nonlinear-tanh" else pre

    def render(self, z: np.ndarray, noise_stream: str | int = "train") -> np.ndarray:
        x = self.clean(z)
        if self.spec.noise_std > 0:
            rng = np.random.default_rng(derive_seed(self.seed, "noise", noise_stream))
            x = x + rng.normal(0.0, self.spec.noise_std, size=x.shape)
        return x


def make_renderer(spec: DomainSpec, k: int, world_seed: int) -> DomainRenderer:
    if spec.rendering != "pure-noise" and spec.obs_dim < k:
        raise ConfigError(f"domain {spec.id!r}: obs_dim {spec.obs_dim} < semantic dimension {k}")
    seed = spec.seed if spec.seed is not None else derive_seed(world_seed, "domain", spec.id)
    rng = np.random.default_rng(seed)
    matrix = None
    if spec.rendering == "linear-orthogonal":
        q, r = np.linalg.qr(rng.standard_normal((spec.obs_dim, k)))
        matrix = q * np.where(np.diag(r) < 0, -1.0, 1.0)
    elif spec.rendering in ("linear-general", "nonlinear-tanh"):
        matrix = rng.normal(0.0, 1.0 / np.sqrt(k), size=(spec.obs_dim, k))
    return DomainRenderer(spec=spec, k=k, matrix=matrix, seed=seed)


@dataclass
class DomainData:
    spec: DomainSpec
    x: np.ndarray
    renderer: DomainRenderer | None = field(default=None, repr=False)

    @property
    def id(self) -> str:
        return self.spec.id

    @property
    def n(self) -> int:
        return self.x.shape[0]


def render_domain(world: World, spec: DomainSpec, z: np.ndarray | None = None,
                  noise_stream: str | int = "train") -> DomainData:
    renderer = make_renderer(spec, world.k, world.seed)
    x = renderer.render(world.samples if z is None else z, noise_stream)
    return DomainData(spec=spec, x=x, renderer=renderer)
