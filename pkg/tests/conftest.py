import copy
import json
from pathlib import Path

import pytest

ROOT = Path(__file__).resolve().parents[1]
REFERENCE = ROOT / "configs" / "reference.json"

TINY = {
    "name": "tiny",
    "seed": 0,
    "world": {"k": 4, "n_clusters": 3, "n_samples": 300},
    "domains": [
        {"id": "a", "obs_dim": 6},
        {"id": "b", "obs_dim": 6},
        {"id": "c", "obs_dim": 5, "rendering": "nonlinear-tanh"},
    ],
    "modules": {
        "a": {"kind": "oracle-linear", "latent_dim": 4},
        "b": {"kind": "oracle-linear", "latent_dim": 4},
        "c": {"kind": "trained-autoencoder", "latent_dim": 4, "epochs": 5, "hidden": 8},
    },
    "translator": {"D": 4, "epochs": 5, "n_clusters": 3},
    "attention": {"theta_conn": 0.0, "c_max": 2, "d_k": 4},
    "ignition": {"t_max": 200},
    "timeline": [
        {"tick": 1, "query": [1, 0, 0, 0], "events": [{"module": "a", "sample": 0, "salience": 1.0, "u": 1.0}]},
        {"tick": 3, "events": [{"module": "c", "sample": 2, "salience": 0.5, "u": 0.2}]},
    ],
    "evaluation": {"seeds": [0], "gallery": 50, "supervised_pairs": 8, "noise_levels": [0.0, 1.0],
                   "classifier_epochs": 20, "ignition_grid": 11, "ignition_t_max": 500},
}


@pytest.fixture
def tiny_raw():
    return copy.deepcopy(TINY)


@pytest.fixture
def tiny_config_path(tmp_path, tiny_raw):
    path = tmp_path / "tiny.json"
    path.write_text(json.dumps(tiny_raw))
    return path


@pytest.fixture(scope="session")
def reference_path():
    return REFERENCE


ACCEPTANCE: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE:
            terminalreporter.write_line(line)
