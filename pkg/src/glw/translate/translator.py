"""Per-module maps into and out of the shared workspace space."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Mapping

import numpy as np

from glw.errors import ConfigError, DimensionError, ModuleLookupError
from glw.numerics import Tensor, affine, matmul, tanh

MODES = ("mlp", "linear")


@dataclass(frozen=True)
class LossWeights:
    cycle: float = 1.0
    demi: float = 1.0
    dist: float = 1.0
    sup: float = 1.0

    def as_dict(self) -> dict[str, float]:
        return {"cycle": self.cycle, "demi": self.demi, "dist": self.dist, "sup": self.sup}


def param_shapes(d: int, D: int, hidden: int, mode: str) -> dict[str, tuple[int, ...]]:
    shapes = {"enc_S": (d, D), "enc_c": (D,), "dec_S": (D, d), "dec_c": (d,)}
    if mode == "mlp":
        shapes.update({
            "enc_W1": (d, hidden), "enc_b1": (hidden,), "enc_W2": (hidden, D),
            "dec_W1": (D, hidden), "dec_b1": (hidden,), "dec_W2": (hidden, d),
        })
    return shapes


class GlwTranslator:
    """Encoders ``latent_i -> R^D`` and decoders ``R^D -> latent_i`` for every module.

    In ``mlp`` mode each map is a linear path plus a tanh hidden layer of width
    ``hidden`` (default ``2 * D``); ``linear`` mode keeps only the linear path.
    """

    def __init__(self, D: int, dims: Mapping[str, int], mode: str = "mlp", seed: int = 0,
                 hidden: int | None = None, residual_scale: float = 0.1):
        dims = {str(k): int(v) for k, v in dims.items()}
        if mode not in MODES:
            raise ConfigError(f"unknown translator mode {mode!r}")
        if len(dims) < 2:
            raise ConfigError("a workspace needs at least two modules")
        if any(d < 1 for d in dims.values()):
            raise ConfigError(f"latent dimensions must be positive: {dims}")
        largest, total = max(dims.values()), sum(dims.values())
        if not largest <= D < total:
            raise ConfigError(f"workspace dimension D={D} must satisfy max d_i={largest} <= D < sum d_i={total}")
        self.D = int(D)
        self.dims = dims
        self.mode = mode
        self.seed = int(seed)
        self.hidden = int(hidden or 2 * D)
        self.params: dict[str, dict[str, Tensor]] = {}
        rng = np.random.default_rng(seed)
        for mid, d in dims.items():
            block = {}
            for name, shape in param_shapes(d, self.D, self.hidden, mode).items():
                if name.endswith(("_c", "_b1")):
                    value = np.zeros(shape)
                elif name.endswith("_W2"):
                    value = rng.normal(0.0, residual_scale / np.sqrt(shape[0]), size=shape)
                else:
                    value = rng.normal(0.0, 1.0 / np.sqrt(shape[0]), size=shape)
                block[name] = Tensor(value, requires_grad=True, name=f"{mid}.{name}")
            self.params[mid] = block

    # construction helpers ------------------------------------------------
    @classmethod
    def identity(cls, D: int, dims: Mapping[str, int]) -> "GlwTranslator":
        """Linear translator that zero-pads into R^D and truncates back out."""
        t = cls(D, dims, mode="linear")
        for mid, d in t.dims.items():
            pad = np.eye(d, t.D)
            t.params[mid]["enc_S"].data[...] = pad
            t.params[mid]["dec_S"].data[...] = pad.T
            t.params[mid]["enc_c"].data[...] = 0.0
            t.params[mid]["dec_c"].data[...] = 0.0
        return t

    @property
    def module_ids(self) -> list[str]:
        return list(self.dims)

    def _block(self, module_id: str) -> dict[str, Tensor]:
        try:
            return self.params[module_id]
        except KeyError:
            raise ModuleLookupError(f"unknown module {module_id!r}; registered: {self.module_ids}") from None

    def named_parameters(self) -> Iterator[tuple[str, Tensor]]:
        for mid in self.dims:
            for name, p in self.params[mid].items():
                yield f"{mid}.{name}", p

    def parameters(self) -> list[Tensor]:
        return [p for _, p in self.named_parameters()]

    def state_dict(self) -> dict[str, np.ndarray]:
        return {name: p.data.copy() for name, p in self.named_parameters()}

    def load_state_dict(self, state: Mapping[str, np.ndarray]) -> None:
        for name, p in self.named_parameters():
            value = np.asarray(state[name], dtype=np.float64)
            if value.shape != p.shape:
                raise DimensionError(f"{name}: expected shape {p.shape}, got {value.shape}")
            p.data[...] = value

    # differentiable forward ----------------------------------------------
    def encode_graph(self, module_id: str, v: Tensor) -> Tensor:
        p = self._block(module_id)
        out = affine(v, p["enc_S"], p["enc_c"])
        if self.mode == "mlp":
            out = out + matmul(tanh(affine(v, p["enc_W1"], p["enc_b1"])), p["enc_W2"])
        return out

    def decode_graph(self, module_id: str, z: Tensor) -> Tensor:
        p = self._block(module_id)
        out = affine(z, p["dec_S"], p["dec_c"])
        if self.mode == "mlp":
            out = out + matmul(tanh(affine(z, p["dec_W1"], p["dec_b1"])), p["dec_W2"])
        return out

    def translate_graph(self, i: str, j: str, v: Tensor) -> Tensor:
        return self.decode_graph(j, self.encode_graph(i, v))

    # plain-array forward ---------------------------------------------------
    def _rows(self, x, width: int, what: str) -> tuple[np.ndarray, bool]:
        arr = np.asarray(x, dtype=np.float64)
        single = arr.ndim == 1
        if single:
            arr = arr[None, :]
        if arr.ndim != 2 or arr.shape[1] != width:
            raise DimensionError(f"{what} must have width {width}, got shape {np.shape(x)}")
        return arr, single

    def encode(self, module_id: str, v) -> np.ndarray:
        self._block(module_id)
        arr, single = self._rows(v, self.dims[module_id], f"latent of {module_id!r}")
        out = self.encode_graph(module_id, Tensor(arr)).data
        return out[0] if single else out

    def decode(self, module_id: str, z) -> np.ndarray:
        self._block(module_id)
        arr, single = self._rows(z, self.D, "workspace vector")
        out = self.decode_graph(module_id, Tensor(arr)).data
        return out[0] if single else out

    def translate(self, i: str, j: str, v) -> np.ndarray:
        return self.decode(j, self.encode(i, v))
