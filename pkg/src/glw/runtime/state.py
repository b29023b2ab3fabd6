"""Workspace state, attention and ignition parameter records, and trace events."""
from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from glw.errors import ConfigError, ContractError

PHASES = ("select", "inject", "broadcast", "reverberate", "readout")


@dataclass
class TraceEvent:
    step: int
    phase: str
    module: str | None = None
    scores: dict[str, float] | None = None
    amplitude: float | None = None
    dz_norm: float | None = None
    connected: list[str] | bool | None = None
    note: str | None = None

    def __post_init__(self):
        if self.phase not in PHASES:
            raise ConfigError(f"unknown trace phase {self.phase!r}")

    def as_dict(self) -> dict:
        out = {"step": self.step, "phase": self.phase, "module": self.module}
        for key in ("scores", "amplitude", "dz_norm", "connected", "note"):
            value = getattr(self, key)
            if value is not None:
                out[key] = value
        return out


class Trace:
    """Append-only event log whose step numbers never decrease."""

    def __init__(self, events=()):
        self._events: list[TraceEvent] = []
        self.extend(events)

    def append(self, event: TraceEvent) -> None:
        if self._events and event.step < self._events[-1].step:
            raise ContractError(f"trace step {event.step} precedes {self._events[-1].step}")
        self._events.append(event)

    def extend(self, events) -> None:
        for e in events:
            self.append(e)

    def __iter__(self):
        return iter(self._events)

    def __len__(self):
        return len(self._events)

    def __getitem__(self, i):
        return self._events[i]

    def as_dicts(self) -> list[dict]:
        return [e.as_dict() for e in self._events]


@dataclass
class AttentionBundle:
    keys: dict[str, np.ndarray] = field(default_factory=dict)
    salience: dict[str, float] = field(default_factory=dict)
    theta_conn: float = 0.0
    c_max: int = 2
    s_master: float = 0.9
    d_k: int = 8

    def __post_init__(self):
        if not (0.0 < self.s_master <= 1.0):
            raise ConfigError(f"s_master must lie in (0, 1], got {self.s_master}")
        if self.d_k < 1:
            raise ConfigError(f"d_k must be >= 1, got {self.d_k}")
        if self.c_max < 0:
            raise ConfigError(f"C_max must be >= 0, got {self.c_max}")
        for mid, s in self.salience.items():
            if not (0.0 <= s <= 1.0):
                raise ConfigError(f"salience of {mid!r} must lie in [0, 1], got {s}")


@dataclass
class IgnitionParams:
    lam: float = 0.5
    g: float = 8.0
    beta: float = 4.0
    theta_a: float = 6.0
    t_max: int = 500
    tol: float = 1e-12

    def __post_init__(self):
        values = (self.lam, self.g, self.beta, self.theta_a, self.tol)
        if not all(math.isfinite(v) for v in values):
            raise ConfigError("ignition parameters must be finite")
        if not (0.0 < self.lam <= 1.0):
            raise ConfigError(f"content step size must lie in (0, 1], got {self.lam}")
        if self.t_max < 1 or self.tol <= 0:
            raise ConfigError(f"need T_max >= 1 and tol > 0, got {self.t_max}, {self.tol}")


@dataclass
class WorkspaceState:
    z: np.ndarray
    copies: dict[str, np.ndarray]
    copy_step: dict[str, int]
    connected: dict[str, bool]
    amplitude: float = 0.0
    query: np.ndarray | None = None
    step_count: int = 0
    seed: int = 0
    broadcasts: int = 0
    ignited: bool = False

    @property
    def module_ids(self) -> list[str]:
        return sorted(self.copies)

    @property
    def connected_ids(self) -> list[str]:
        return sorted(m for m, on in self.connected.items() if on)

    def clone(self) -> "WorkspaceState":
        return copy.deepcopy(self)

    def equals(self, other: "WorkspaceState") -> bool:
        """Bit-level equality of every field."""
        if self.module_ids != other.module_ids:
            return False
        same_arrays = np.array_equal(self.z, other.z) and all(
            np.array_equal(self.copies[m], other.copies[m]) for m in self.module_ids)
        q_same = (self.query is None and other.query is None) or (
            self.query is not None and other.query is not None and np.array_equal(self.query, other.query))
        return (same_arrays and q_same and self.copy_step == other.copy_step and self.connected == other.connected
                and self.amplitude == other.amplitude and self.step_count == other.step_count
                and self.broadcasts == other.broadcasts and self.ignited == other.ignited)


def new_state(D: int, dims: Mapping[str, int], query=None, seed: int = 0,
              connected: Mapping[str, bool] | None = None) -> WorkspaceState:
    """Fresh workspace: zero content, zero copies for every registered module, nothing connected."""
    connected = dict(connected or {})
    unknown = set(connected) - set(dims)
    if unknown:
        raise ConfigError(f"preset connections name unknown modules {sorted(unknown)}")
    return WorkspaceState(
        z=np.zeros(D),
        copies={m: np.zeros(d) for m, d in dims.items()},
        copy_step={m: -1 for m in dims},
        connected={m: bool(connected.get(m, False)) for m in dims},
        query=None if query is None else np.asarray(query, dtype=np.float64),
        seed=seed,
    )
