from glw.runtime.state import (
    PHASES, AttentionBundle, IgnitionParams, Trace, TraceEvent, WorkspaceState, new_state,
)
from glw.runtime.ops import (
    IgnitionTrace, StimulusEvent, attention_scores, attention_select, broadcast, compute_key, fan_out, inject,
    key_projection, logistic, readout, reverberate, select, tick, tick_bundle,
)
from glw.runtime.driver import TickSummary, Workspace, read_trace_jsonl, write_summary_csv, write_trace_jsonl

__all__ = [
    "PHASES", "AttentionBundle", "IgnitionParams", "Trace", "TraceEvent", "WorkspaceState", "new_state",
    "IgnitionTrace", "StimulusEvent", "attention_scores", "attention_select", "broadcast", "compute_key", "fan_out",
    "inject", "key_projection", "logistic", "readout", "reverberate", "select", "tick", "tick_bundle",
    "TickSummary", "Workspace", "read_trace_jsonl", "write_summary_csv", "write_trace_jsonl",
]
