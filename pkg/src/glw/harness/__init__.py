from glw.harness.config import ScenarioConfig, load_config, load_schema, parse_config
from glw.harness.checkpoint import load_modules, load_translator, save_modules, save_translator
from glw.harness.pipeline import Built, build, make_pairsets, run_scenario, run_timeline
from glw.harness.evaluation import (
    SuiteRunner, broadcast_copies, eval_alignment, eval_grounding_ood, eval_ignition_sweep, ignition_oracle,
)

__all__ = [
    "ScenarioConfig", "load_config", "load_schema", "parse_config", "load_modules", "load_translator",
    "save_modules", "save_translator", "Built", "build", "make_pairsets", "run_scenario", "run_timeline",
    "SuiteRunner", "broadcast_copies", "eval_alignment", "eval_grounding_ood", "eval_ignition_sweep",
    "ignition_oracle",
]
