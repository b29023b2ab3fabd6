"""JSON checkpoints for translators and specialized modules.

Floats are written with 17 significant digits, which round-trips every
float64 exactly. Loading checks the format version and every declared
dimension against the stored arrays, naming the offending field.
"""
from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Mapping

import numpy as np

from glw.domains.modules import SpecializedModule
from glw.errors import CheckpointError
from glw.translate.translator import GlwTranslator, param_shapes

FORMAT_VERSION = 1


def _num(x: float) -> str:
    if not math.isfinite(x):
        raise CheckpointError(f"cannot serialise non-finite value {x!r}")
    return format(x, ".17g")


def _encode(obj, indent: int = 0) -> str:
    pad = "  " * indent
    if isinstance(obj, np.ndarray):
        obj = {"shape": list(obj.shape), "data": obj.ravel().tolist()}
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f'{pad}  {json.dumps(str(k))}: {_encode(v, indent + 1)}' for k, v in sorted(obj.items())]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(obj, (list, tuple)):
        return "[" + ", ".join(_encode(v, indent + 1) for v in obj) + "]"
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _num(float(obj))
    return json.dumps(obj)


def dumps(doc: Mapping) -> str:
    return _encode(dict(doc)) + "\n"


def _array(node, path: str) -> np.ndarray:
    if not isinstance(node, dict) or "shape" not in node or "data" not in node:
        raise CheckpointError(f"{path}: expected an object with 'shape' and 'data'")
    shape = tuple(int(s) for s in node["shape"])
    data = node["data"]
    need = int(np.prod(shape)) if shape else 1
    if len(data) != need:
        raise CheckpointError(f"{path}.data: shape {list(shape)} needs {need} values, found {len(data)}")
    return np.asarray(data, dtype=np.float64).reshape(shape)


def _read(path, kind: str) -> dict:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError as err:
        raise CheckpointError(f"checkpoint {path} not found") from err
    except json.JSONDecodeError as err:
        raise CheckpointError(f"checkpoint {path} is truncated or not JSON: {err}") from err
    if not isinstance(doc, dict):
        raise CheckpointError("checkpoint root must be an object")
    if doc.get("format_version") != FORMAT_VERSION:
        raise CheckpointError(f"format_version: unsupported value {doc.get('format_version')!r}, "
                              f"this build reads {FORMAT_VERSION}")
    if doc.get("kind") != kind:
        raise CheckpointError(f"kind: expected {kind!r}, found {doc.get('kind')!r}")
    return doc


def translator_document(t: GlwTranslator, seed: int | None = None, schedule_digest: str | None = None) -> dict:
    params = {mid: {name: tensor.data for name, tensor in block.items()} for mid, block in t.params.items()}
    return {"format_version": FORMAT_VERSION, "kind": "glw-translator", "D": t.D, "dims": dict(t.dims),
            "mode": t.mode, "hidden": t.hidden, "seed": seed, "schedule_digest": schedule_digest,
            "params": params}


def save_translator(path, t: GlwTranslator, seed: int | None = None, schedule_digest: str | None = None) -> None:
    Path(path).write_text(dumps(translator_document(t, seed, schedule_digest)), encoding="utf-8")


def load_translator(path) -> GlwTranslator:
    doc = _read(path, "glw-translator")
    try:
        D, dims, mode, hidden = int(doc["D"]), {k: int(v) for k, v in doc["dims"].items()}, doc["mode"], doc["hidden"]
    except (KeyError, TypeError, ValueError) as err:
        raise CheckpointError(f"missing or malformed header field: {err}") from err
    params = doc.get("params", {})
    if set(params) != set(dims):
        raise CheckpointError(f"params: modules {sorted(params)} differ from dims {sorted(dims)}")
    state = {}
    for mid, d in dims.items():
        expected = param_shapes(d, D, int(hidden), mode)
        if set(params[mid]) != set(expected):
            raise CheckpointError(f"params.{mid}: parameter names {sorted(params[mid])} differ from {sorted(expected)}")
        for name, shape in expected.items():
            arr = _array(params[mid][name], f"params.{mid}.{name}")
            if arr.shape != tuple(shape):
                raise CheckpointError(f"params.{mid}.{name}.shape: {list(arr.shape)} is inconsistent with "
                                      f"dims.{mid}={d}, D={D}, hidden={hidden} (expected {list(shape)})")
            state[f"{mid}.{name}"] = arr
    try:
        t = GlwTranslator(D, dims, mode=mode, hidden=int(hidden))
    except Exception as err:
        raise CheckpointError(f"header: {err}") from err
    t.load_state_dict(state)
    return t


def save_modules(path, modules: Mapping[str, SpecializedModule], seed: int | None = None) -> None:
    entries = {}
    for mid, m in modules.items():
        loss = m.final_loss if math.isfinite(m.final_loss) else None
        entries[mid] = {"kind": m.kind, "obs_dim": m.obs_dim, "latent_dim": m.latent_dim, "final_loss": loss,
                        "params": dict(m.params)}
    doc = {"format_version": FORMAT_VERSION, "kind": "glw-modules", "seed": seed, "modules": entries}
    Path(path).write_text(dumps(doc), encoding="utf-8")


def load_modules(path) -> dict[str, SpecializedModule]:
    doc = _read(path, "glw-modules")
    out = {}
    for mid, node in doc.get("modules", {}).items():
        params = {name: _array(arr, f"modules.{mid}.params.{name}") for name, arr in node["params"].items()}
        obs, lat = int(node["obs_dim"]), int(node["latent_dim"])
        if node["kind"] == "oracle-linear":
            checks = {"enc": (obs, lat), "dec": (lat, obs)}
        else:
            h = params["enc_W1"].shape[1] if "enc_W1" in params else 0
            checks = {"enc_W1": (obs, h), "enc_W2": (h, lat), "dec_W1": (lat, h), "dec_W2": (h, obs)}
        for name, shape in checks.items():
            if name not in params or params[name].shape != shape:
                got = list(params[name].shape) if name in params else None
                raise CheckpointError(f"modules.{mid}.params.{name}.shape: {got} is inconsistent with "
                                      f"obs_dim={obs}, latent_dim={lat}")
        loss = node.get("final_loss")
        out[mid] = SpecializedModule(id=mid, kind=node["kind"], obs_dim=obs, latent_dim=lat, params=params,
                                     final_loss=float("nan") if loss is None else float(loss))
    return out
