"""Workspace operations: attention, injection, broadcast, reverberation, readout and the tick.

Every operation takes a state and returns a new one together with the trace
events it produced; the input state is never modified. That makes a tick
exactly replayable from its sub-operations.
"""
from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Mapping, Sequence

import numpy as np

from glw.domains.world import derive_seed
from glw.errors import ContractError, DimensionError, ModuleLookupError, NonFiniteError, WithheldError
from glw.runtime.state import AttentionBundle, IgnitionParams, TraceEvent, WorkspaceState

log = logging.getLogger(__name__)


def worker_count() -> int:
    try:
        return max(1, int(os.environ.get("GLW_THREADS", "1")))
    except ValueError:
        return 1


def fan_out(fn: Callable, ids: Sequence[str], threads: int | None = None) -> list:
    """``[fn(i) for i in ids]``, optionally on a thread pool; result order always follows ``ids``."""
    threads = worker_count() if threads is None else threads
    if threads <= 1 or len(ids) <= 1:
        return [fn(i) for i in ids]
    with ThreadPoolExecutor(max_workers=min(threads, len(ids))) as pool:
        return list(pool.map(fn, ids))


def ordered_mean(vectors: Sequence[np.ndarray]) -> np.ndarray:
    # fixed summation order keeps parallel and sequential runs bit-identical
    total = np.zeros_like(vectors[0])
    for v in vectors:
        total = total + v
    return total / len(vectors)


def logistic(x: float) -> float:
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


def key_projection(module_id: str, D: int, d_k: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(derive_seed(seed, "key-projection", module_id))
    return rng.normal(0.0, 1.0 / math.sqrt(D), size=(d_k, D))


def compute_key(module_id: str, v, t, proj_seed: int = 0, d_k: int | None = None,
                projection: np.ndarray | None = None) -> np.ndarray:
    """``P_i @ e_i(v)`` with a fixed seeded projection ``P_i`` of shape ``(d_k, D)``."""
    z = t.encode(module_id, v)
    if projection is None:
        projection = key_projection(module_id, t.D, d_k or t.D, proj_seed)
    return projection @ z


def attention_scores(q, bundle: AttentionBundle) -> dict[str, float]:
    if q is None:
        return {}
    q = np.asarray(q, dtype=np.float64)
    if q.shape != (bundle.d_k,):
        raise DimensionError(f"query has shape {q.shape}, expected ({bundle.d_k},)")
    scores = {}
    for mid, key in bundle.keys.items():
        key = np.asarray(key, dtype=np.float64)
        if key.shape != q.shape:
            raise DimensionError(f"key of {mid!r} has shape {key.shape}, expected {q.shape}")
        scores[mid] = float(key @ q) / math.sqrt(bundle.d_k)
    return scores


def attention_select(q, bundle: AttentionBundle) -> set[str]:
    """Master-key modules first, then the best remaining scores above threshold up to capacity."""
    masters = sorted(m for m, s in bundle.salience.items() if s >= bundle.s_master)
    if len(masters) >= bundle.c_max:
        return set(masters)
    scores = attention_scores(q, bundle)
    ranked = sorted((m for m, s in scores.items() if s >= bundle.theta_conn and m not in masters),
                    key=lambda m: (-scores[m], m))
    return set(masters) | set(ranked[:bundle.c_max - len(masters)])


def _check_module(state: WorkspaceState, module_id: str) -> None:
    if module_id not in state.copies:
        raise ModuleLookupError(f"module {module_id!r} is not registered; known: {state.module_ids}")


def inject(state: WorkspaceState, module_id: str, v) -> tuple[WorkspaceState, list[TraceEvent]]:
    _check_module(state, module_id)
    v = np.asarray(v, dtype=np.float64)
    if v.shape != state.copies[module_id].shape:
        raise DimensionError(f"module {module_id!r} copy has shape {state.copies[module_id].shape}, got {v.shape}")
    out = state.clone()
    if not state.connected[module_id]:
        return out, [TraceEvent(state.step_count, "inject", module_id, connected=False, note="disconnected")]
    out.copies[module_id] = v.copy()
    return out, [TraceEvent(state.step_count, "inject", module_id, connected=True)]


def broadcast(state: WorkspaceState, t, threads: int | None = None) -> tuple[WorkspaceState, list[TraceEvent]]:
    """Fuse connected copies in the shared space, then refresh every copy, connected or not."""
    ids = state.connected_ids
    out = state.clone()
    if not ids:
        log.warning("broadcast with no connected module at step %d", state.step_count)
        return out, [TraceEvent(state.step_count, "broadcast", connected=[], note="no connected module")]
    encoded = fan_out(lambda m: t.encode(m, state.copies[m]), ids, threads)
    z = ordered_mean(encoded)
    all_ids = state.module_ids
    decoded = fan_out(lambda m: t.decode(m, z), all_ids, threads)
    for m, c in zip(all_ids, decoded):
        out.copies[m] = c
        out.copy_step[m] = state.step_count
    out.z = z
    out.broadcasts += 1
    dz = float(np.linalg.norm(z - state.z))
    return out, [TraceEvent(state.step_count, "broadcast", connected=ids, dz_norm=dz)]


@dataclass
class IgnitionTrace:
    amplitudes: list[float] = field(default_factory=list)
    dz_norms: list[float] = field(default_factory=list)
    events: list[TraceEvent] = field(default_factory=list)
    steps: int = 0
    converged: bool = False
    ignited: bool = False


def reverberate(state: WorkspaceState, t, p: IgnitionParams, u: float,
                threads: int | None = None) -> tuple[WorkspaceState, IgnitionTrace]:
    """Content consensus loop plus the scalar amplitude gate ``a <- logistic(g a + beta u - theta_a)``."""
    if state.broadcasts == 0:
        raise ContractError("reverberate needs at least one prior broadcast")
    if not (0.0 <= u <= 1.0):
        raise ContractError(f"input strength u must lie in [0, 1], got {u}")
    ids = state.connected_ids
    z, a = state.z.copy(), float(state.amplitude)
    tr = IgnitionTrace()
    for step in range(1, p.t_max + 1):
        try:
            if ids:
                with np.errstate(over="ignore", invalid="ignore"):
                    loops = fan_out(lambda m: t.encode(m, t.decode(m, z)), ids, threads)
                    z_new = (1.0 - p.lam) * z + p.lam * ordered_mean(loops)
            else:
                z_new = z
        except NonFiniteError:
            z_new = np.full_like(z, np.nan)
        a_new = logistic(p.g * a + p.beta * u - p.theta_a)
        dz = float(np.linalg.norm(z_new - z))
        da = abs(a_new - a)
        if not (np.all(np.isfinite(z_new)) and math.isfinite(a_new)):
            tr.events.append(TraceEvent(state.step_count, "reverberate", note=f"non-finite state at iteration {step}"))
            err = NonFiniteError(f"reverberation produced a non-finite state at iteration {step}",
                                 op="reverberate", step=state.step_count)
            err.trace = tr
            raise err
        z, a = z_new, a_new
        tr.amplitudes.append(a)
        tr.dz_norms.append(dz)
        tr.events.append(TraceEvent(state.step_count, "reverberate", amplitude=a, dz_norm=dz))
        tr.steps = step
        if dz < p.tol and da < p.tol:
            tr.converged = True
            break
    tr.ignited = a >= 0.5
    out = state.clone()
    out.z, out.amplitude, out.ignited = z, a, tr.ignited
    return out, tr


def readout(state: WorkspaceState, module_id: str, modules: Mapping | None = None):
    """Current copy of a connected module, plus its decoded observation when a module is given."""
    _check_module(state, module_id)
    if not state.connected[module_id]:
        raise WithheldError(f"module {module_id!r} is disconnected; its copy is withheld from readout")
    v = state.copies[module_id].copy()
    x_hat = None
    if modules is not None and module_id in modules:
        x_hat = modules[module_id].decode(v)
    return v, x_hat


@dataclass
class StimulusEvent:
    module: str
    latent: np.ndarray
    salience: float = 0.0
    u: float = 0.0


def tick_bundle(bundle: AttentionBundle, events: Sequence[StimulusEvent], t, key_seed: int) -> AttentionBundle:
    """Bundle for this tick: event modules get fresh keys; salience lasts one tick."""
    keys = dict(bundle.keys)
    salience = {}
    for ev in events:
        keys[ev.module] = compute_key(ev.module, ev.latent, t, key_seed, bundle.d_k)
        salience[ev.module] = max(salience.get(ev.module, 0.0), float(ev.salience))
    return replace(bundle, keys=keys, salience=salience)


def select(state: WorkspaceState, bundle: AttentionBundle) -> tuple[WorkspaceState, list[TraceEvent]]:
    chosen = attention_select(state.query, bundle)
    unknown = chosen - set(state.copies)
    if unknown:
        raise ModuleLookupError(f"attention selected unregistered modules {sorted(unknown)}")
    out = state.clone()
    out.connected = {m: m in chosen for m in state.module_ids}
    scores = attention_scores(state.query, bundle)
    return out, [TraceEvent(state.step_count, "select", scores=scores or None, connected=sorted(chosen))]


def tick(state: WorkspaceState, events: Sequence[StimulusEvent], t, bundle: AttentionBundle, p: IgnitionParams,
         key_seed: int = 0, query=None, threads: int | None = None) -> tuple[WorkspaceState, list[TraceEvent]]:
    """select, inject, broadcast, reverberate; readout becomes available for connected modules."""
    for ev in events:
        _check_module(state, ev.module)
    s = state.clone()
    s.step_count += 1
    if query is not None:
        s.query = np.asarray(query, dtype=np.float64)
    trace: list[TraceEvent] = []
    s, ev_out = select(s, tick_bundle(bundle, events, t, key_seed))
    trace += ev_out
    for ev in events:
        s, ev_out = inject(s, ev.module, ev.latent)
        trace += ev_out
    if s.connected_ids:
        s, ev_out = broadcast(s, t, threads)
        trace += ev_out
    if s.broadcasts:
        u = max((float(ev.u) for ev in events), default=0.0)
        s, ig = reverberate(s, t, p, u, threads)
        trace += ig.events
    trace += [TraceEvent(s.step_count, "readout", m, connected=True) for m in s.connected_ids]
    return s, trace
