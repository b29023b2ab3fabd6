"""A stateful wrapper that runs ticks, keeps the attention bundle current and logs the trace."""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from glw.runtime.ops import StimulusEvent, tick, tick_bundle
from glw.runtime.state import AttentionBundle, IgnitionParams, Trace, TraceEvent, WorkspaceState, new_state


@dataclass
class TickSummary:
    step: int
    n_connected: int
    amplitude: float
    dz_norm: float
    ignited: bool


class Workspace:
    def __init__(self, translator, bundle: AttentionBundle, params: IgnitionParams, seed: int = 0, query=None,
                 preset: dict[str, bool] | None = None):
        self.t = translator
        self.bundle = bundle
        self.params = params
        self.key_seed = seed
        self.state = new_state(translator.D, translator.dims, query=query, seed=seed, connected=preset)
        self.trace = Trace()
        self.summaries: list[TickSummary] = []

    def step(self, events: Sequence[StimulusEvent] = (), query=None) -> list[TraceEvent]:
        self.state, events_out = tick(self.state, events, self.t, self.bundle, self.params, self.key_seed, query)
        self.bundle = tick_bundle(self.bundle, events, self.t, self.key_seed)
        self.trace.extend(events_out)
        dz = 0.0
        for e in events_out:
            if e.phase in ("broadcast", "reverberate") and e.dz_norm is not None:
                dz = e.dz_norm
        self.summaries.append(TickSummary(self.state.step_count, len(self.state.connected_ids),
                                          self.state.amplitude, dz, self.state.ignited))
        return events_out


def write_trace_jsonl(events, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for e in events:
            d = e.as_dict() if isinstance(e, TraceEvent) else e
            fh.write(json.dumps(d, sort_keys=True) + "\n")


def read_trace_jsonl(path) -> list[dict]:
    return [json.loads(line) for line in Path(path).read_text(encoding="utf-8").splitlines() if line.strip()]


def write_summary_csv(summaries: Sequence[TickSummary], path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["step", "n_connected", "amplitude", "dz_norm", "ignited"])
        for s in summaries:
            w.writerow([s.step, s.n_connected, repr(float(s.amplitude)), repr(float(s.dz_norm)), int(s.ignited)])
