"""Specialized modules: a private latent space per domain with a generative path back."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from glw.domains.world import DomainData, derive_seed
from glw.errors import ConfigError, DimensionError, TrainingFailureError
from glw.numerics import Adam, Tensor, affine, backward, loss_mse, tanh

MODULE_KINDS = ("trained-autoencoder", "oracle-linear")


@dataclass
class SpecializedModule:
    id: str
    kind: str
    obs_dim: int
    latent_dim: int
    params: dict[str, np.ndarray]
    final_loss: float = float("nan")
    loss_curve: list[float] = field(default_factory=list)

    def encode(self, x) -> np.ndarray:
        return encode(self, x)

    def decode(self, v) -> np.ndarray:
        return decode(self, v)


def _check_width(arr: np.ndarray, width: int, what: str, module_id: str) -> np.ndarray:
    arr = np.asarray(arr, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2 or arr.shape[1] != width:
        raise DimensionError(f"module {module_id!r}: {what} must have width {width}, got shape {arr.shape}")
    return arr


def _encode_graph(p: Mapping[str, Tensor], x: Tensor) -> Tensor:
    return affine(tanh(affine(x, p["enc_W1"], p["enc_b1"])), p["enc_W2"], p["enc_b2"])


def _decode_graph(p: Mapping[str, Tensor], v: Tensor) -> Tensor:
    return affine(tanh(affine(v, p["dec_W1"], p["dec_b1"])), p["dec_W2"], p["dec_b2"])


def encode(module: SpecializedModule, x) -> np.ndarray:
    """Latents for a batch of observations; a single row in gives a single row out."""
    single = np.ndim(x) == 1
    x = _check_width(x, module.obs_dim, "observation", module.id)
    if module.kind == "oracle-linear":
        out = x @ module.params["enc"]
    else:
        p = {k: Tensor(v) for k, v in module.params.items()}
        out = _encode_graph(p, Tensor(x)).data
    return out[0] if single else out


def decode(module: SpecializedModule, v) -> np.ndarray:
    single = np.ndim(v) == 1
    v = _check_width(v, module.latent_dim, "latent", module.id)
    if module.kind == "oracle-linear":
        out = v @ module.params["dec"]
    else:
        p = {k: Tensor(val) for k, val in module.params.items()}
        out = _decode_graph(p, Tensor(v)).data
    return out[0] if single else out


def oracle_linear_module(data: DomainData, latent_dim: int | None = None, seed: int = 0,
                         module_id: str | None = None) -> SpecializedModule:
    """Exact linear inverse of an orthonormal rendering, followed by a private rotation."""
    renderer = data.renderer
    if renderer is None or data.spec.rendering != "linear-orthogonal":
        raise ConfigError(f"oracle-linear modules need a linear-orthogonal domain, got {data.spec.rendering!r}")
    k = renderer.k
    if latent_dim is not None and latent_dim != k:
        raise ConfigError(f"oracle-linear module latent_dim must equal k={k}, got {latent_dim}")
    rng = np.random.default_rng(derive_seed(seed, "oracle-rotation", data.id))
    q, r = np.linalg.qr(rng.standard_normal((k, k)))
    rotation = q * np.where(np.diag(r) < 0, -1.0, 1.0)
    G = renderer.matrix
    params = {"enc": G @ rotation, "dec": rotation.T @ G.T}
    module = SpecializedModule(id=module_id or data.id, kind="oracle-linear", obs_dim=data.spec.obs_dim,
                               latent_dim=k, params=params)
    module.final_loss = float(np.mean((decode(module, encode(module, data.x)) - data.x) ** 2)) if data.n else 0.0
    module.loss_curve = [module.final_loss]
    return module


def _init_autoencoder(obs_dim: int, latent_dim: int, hidden: int, rng: np.random.Generator) -> dict[str, np.ndarray]:
    def w(a, b):
        return rng.normal(0.0, 1.0 / np.sqrt(a), size=(a, b))

    return {
        "enc_W1": w(obs_dim, hidden), "enc_b1": np.zeros(hidden),
        "enc_W2": w(hidden, latent_dim), "enc_b2": np.zeros(latent_dim),
        "dec_W1": w(latent_dim, hidden), "dec_b1": np.zeros(hidden),
        "dec_W2": w(hidden, obs_dim), "dec_b2": np.zeros(obs_dim),
    }


def fit_autoencoder(data: DomainData, latent_dim: int, epochs: int, seed: int,
                    kind: str = "trained-autoencoder", hidden: int = 64, lr: float = 3e-3,
                    batch_size: int = 100, module_id: str | None = None) -> SpecializedModule:
    """Train a one-hidden-layer tanh autoencoder on reconstruction MSE.

    The returned parameters are the best full-data checkpoint seen at the end
    of any epoch, so the reported loss never increases with more epochs.
    """
    if kind == "oracle-linear":
        return oracle_linear_module(data, latent_dim, seed, module_id)
    if kind != "trained-autoencoder":
        raise ConfigError(f"unknown module kind {kind!r}")
    if epochs < 1:
        raise ConfigError("epochs must be >= 1")
    if data.renderer is not None and data.renderer.matrix is not None and latent_dim < data.renderer.k:
        raise ConfigError(f"latent_dim {latent_dim} is below the semantic dimension {data.renderer.k}")
    if data.n == 0:
        raise ConfigError(f"domain {data.id!r} has no samples to train on")

    rng = np.random.default_rng(derive_seed(seed, "autoencoder", data.id))
    init = _init_autoencoder(data.spec.obs_dim, latent_dim, hidden, rng)
    params = {k: Tensor(v, requires_grad=True, name=k) for k, v in init.items()}
    opt = Adam(list(params.values()), lr=lr)
    X = Tensor(data.x)

    def full_loss() -> float:
        frozen = {k: Tensor(v.data) for k, v in params.items()}
        return loss_mse(_decode_graph(frozen, _encode_graph(frozen, X)), X).item()

    initial = full_loss()
    best, best_params = np.inf, None
    curve: list[float] = []
    n = data.n
    for _ in range(epochs):
        order = rng.permutation(n)
        for lo in range(0, n, batch_size):
            xb = Tensor(data.x[order[lo:lo + batch_size]])
            opt.zero_grad()
            backward(loss_mse(_decode_graph(params, _encode_graph(params, xb)), xb))
            opt.step()
        current = full_loss()
        curve.append(current)
        if current < best:
            best = current
            best_params = {k: v.data.copy() for k, v in params.items()}
    if best > initial:
        raise TrainingFailureError(f"autoencoder for {data.id!r} diverged: {best:.4g} > initial {initial:.4g}",
                                   loss_curve=curve)
    return SpecializedModule(id=module_id or data.id, kind="trained-autoencoder", obs_dim=data.spec.obs_dim,
                             latent_dim=latent_dim, params=best_params, final_loss=best, loss_curve=curve)


ModuleFitter = Callable[..., SpecializedModule]


def train_modules(domains: Sequence[DomainData], settings: Mapping[str, Mapping], seed: int,
                  fitter: ModuleFitter | None = None) -> dict[str, SpecializedModule]:
    """Fit one module per domain. Each fit sees only its own domain's data."""
    fitter = fitter or fit_autoencoder
    modules = {}
    for data in domains:
        cfg = dict(settings.get(data.id, {}))
        modules[data.id] = fitter(
            data,
            cfg.pop("latent_dim", data.renderer.k if data.renderer else data.spec.obs_dim),
            cfg.pop("epochs", 200),
            seed,
            **cfg,
        )
    return modules
