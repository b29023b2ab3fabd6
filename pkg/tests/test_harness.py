import json

import numpy as np
import pytest

from glw.errors import CheckpointError, ConfigError, EvaluationError
from glw.harness import cli
from glw.harness.checkpoint import load_modules, load_translator, save_modules, save_translator
from glw.harness.config import load_config, parse_config
from glw.harness.evaluation import (
    SuiteRunner, broadcast_copies, eval_alignment, eval_ignition_sweep, ignition_oracle, pair_groups,
)
from glw.harness.pipeline import build, run_scenario, sha256_file
from glw.runtime import IgnitionParams, broadcast, inject, new_state, read_trace_jsonl
from glw.translate import GlwTranslator


class TestConfig:
    def test_reference_parses(self, reference_path):
        cfg = load_config(reference_path)
        assert cfg.domain_ids == ["vision", "touch", "language"]
        assert cfg.world.k == 16 and cfg.translator.D == 16
        assert cfg.grounding_pair() == ("language", "vision")
        assert cfg.bundle().d_k == 8

    @pytest.mark.parametrize("mutate, path", [
        (lambda r: r.pop("world"), "<root>"),
        (lambda r: r["world"].update(k="four"), "world/k"),
        (lambda r: r["domains"][0].update(rendering="spiral"), "domains/0/rendering"),
        (lambda r: r["attention"].update(s_master=2.0), "attention/s_master"),
    ])
    def test_schema_errors_name_the_field(self, tiny_raw, mutate, path):
        mutate(tiny_raw)
        with pytest.raises(ConfigError, match=path):
            parse_config(tiny_raw)

    @pytest.mark.parametrize("mutate, fragment", [
        (lambda r: r["timeline"][1].update(tick=1), "strictly increasing"),
        (lambda r: r["timeline"][0]["events"][0].update(module="z"), "unknown module"),
        (lambda r: r["timeline"][0].update(query=[1, 0]), "d_k"),
        (lambda r: r["modules"].update(z={"kind": "oracle-linear"}), "modules/z"),
        (lambda r: r["domains"].append(dict(r["domains"][0])), "duplicate"),
        (lambda r: r["evaluation"].update(grounding_pair=["a", "q"]), "grounding_pair"),
        (lambda r: r["domains"][0].update(obs_dim=3), "obs_dim"),
    ])
    def test_reference_checks(self, tiny_raw, mutate, fragment):
        mutate(tiny_raw)
        with pytest.raises(ConfigError, match=fragment):
            parse_config(tiny_raw)

    def test_file_errors(self, tmp_path):
        with pytest.raises(ConfigError, match="not found"):
            load_config(tmp_path / "missing.json")
        bad = tmp_path / "bad.json"
        bad.write_text("{")
        with pytest.raises(ConfigError, match="not valid JSON"):
            load_config(bad)

    def test_pair_groups(self, tiny_raw):
        groups = pair_groups(parse_config(tiny_raw))
        assert groups["linear"] == [("a", "b"), ("b", "a")]
        assert len(groups["nonlinear"]) == 4


class TestCheckpoint:
    def test_translator_round_trip_exact(self, tmp_path):
        rng = np.random.default_rng(0)
        t = GlwTranslator(5, {"a": 4, "b": 3}, seed=11)
        for _, p in t.named_parameters():
            p.data[...] = rng.normal(size=p.shape) * np.exp(rng.normal(size=p.shape) * 5)
        save_translator(tmp_path / "t.json", t, seed=11, schedule_digest="abc")
        back = load_translator(tmp_path / "t.json")
        for name, value in t.state_dict().items():
            assert back.state_dict()[name].tobytes() == value.tobytes()
        v = rng.normal(size=(6, 4))
        assert back.translate("a", "b", v).tobytes() == t.translate("a", "b", v).tobytes()

    def test_unknown_version(self, tmp_path):
        save_translator(tmp_path / "t.json", GlwTranslator(4, {"a": 4, "b": 4}))
        doc = json.loads((tmp_path / "t.json").read_text())
        doc["format_version"] = 99
        (tmp_path / "t.json").write_text(json.dumps(doc))
        with pytest.raises(CheckpointError, match="format_version"):
            load_translator(tmp_path / "t.json")

    def test_edited_dimension_reports_field(self, tmp_path):
        save_translator(tmp_path / "t.json", GlwTranslator(5, {"a": 4, "b": 3}))
        doc = json.loads((tmp_path / "t.json").read_text())
        doc["dims"]["b"] = 4
        (tmp_path / "t.json").write_text(json.dumps(doc))
        with pytest.raises(CheckpointError, match=r"params\.b\.enc_S\.shape"):
            load_translator(tmp_path / "t.json")

    def test_array_length_mismatch(self, tmp_path):
        save_translator(tmp_path / "t.json", GlwTranslator(4, {"a": 4, "b": 4}))
        doc = json.loads((tmp_path / "t.json").read_text())
        doc["params"]["a"]["enc_c"]["data"].pop()
        (tmp_path / "t.json").write_text(json.dumps(doc))
        with pytest.raises(CheckpointError, match=r"params\.a\.enc_c\.data"):
            load_translator(tmp_path / "t.json")

    def test_truncated(self, tmp_path):
        save_translator(tmp_path / "t.json", GlwTranslator(4, {"a": 4, "b": 4}))
        text = (tmp_path / "t.json").read_text()
        (tmp_path / "t.json").write_text(text[: len(text) // 2])
        with pytest.raises(CheckpointError, match="truncated"):
            load_translator(tmp_path / "t.json")

    def test_modules_round_trip(self, tmp_path, tiny_raw):
        b = build(parse_config(tiny_raw), 0, stages=("world", "modules"))
        save_modules(tmp_path / "m.json", b.modules, 0)
        back = load_modules(tmp_path / "m.json")
        for mid, m in b.modules.items():
            x = b.domains[mid].x
            assert back[mid].encode(x).tobytes() == m.encode(x).tobytes()
            assert back[mid].kind == m.kind

    def test_wrong_kind(self, tmp_path):
        save_translator(tmp_path / "t.json", GlwTranslator(4, {"a": 4, "b": 4}))
        with pytest.raises(CheckpointError, match="kind"):
            load_modules(tmp_path / "t.json")


class TestPipeline:
    def test_run_writes_manifest(self, tmp_path, tiny_raw):
        out = run_scenario(parse_config(tiny_raw), 0, tmp_path / "run")
        manifest = json.loads((out / "MANIFEST.json").read_text())
        assert manifest["status"] == "ok"
        files = {p.name for p in out.iterdir()} - {"MANIFEST.json"}
        assert set(manifest["files"]) == files
        assert {"world.csv", "domain_a.csv", "modules.json", "translator.json", "trace.jsonl", "summary.csv",
                "metrics.json"} <= files
        for name, digest in manifest["files"].items():
            assert sha256_file(out / name) == digest

    def test_metrics_carry_seeds(self, tmp_path, tiny_raw):
        metrics = json.loads((run_scenario(parse_config(tiny_raw), 2, tmp_path) / "metrics.json").read_text())
        for section in ("modules", "translator", "retrieval", "timeline"):
            assert metrics[section]["seeds"] == [2]

    def test_empty_timeline(self, tmp_path, tiny_raw):
        tiny_raw["timeline"] = []
        out = run_scenario(parse_config(tiny_raw), 0, tmp_path)
        metrics = json.loads((out / "metrics.json").read_text())
        assert "timeline" not in metrics
        assert {"modules", "translator", "retrieval"} <= set(metrics)
        assert (out / "trace.jsonl").read_text() == ""

    def test_metrics_recomputable_from_artifacts(self, tmp_path, tiny_raw):
        cfg = parse_config(tiny_raw)
        out = run_scenario(cfg, 0, tmp_path)
        metrics = json.loads((out / "metrics.json").read_text())
        b = build(cfg, 0, stages=("world",))
        b.modules = load_modules(out / "modules.json")
        b.translator = load_translator(out / "translator.json")
        b.latents = {m: b.modules[m].encode(b.domains[m].x) for m in b.domains}
        table = eval_alignment(b, cfg.evaluation.gallery, cfg.evaluation.metric)
        for regime in ("trained", "procrustes", "random"):
            assert table[regime] == metrics["retrieval"][regime]
        trace = read_trace_jsonl(out / "trace.jsonl")
        amplitudes = [e["amplitude"] for e in trace if "amplitude" in e]
        assert amplitudes[-1] == metrics["timeline"]["final_amplitude"]

    def test_failure_keeps_partial_artifacts(self, tmp_path, tiny_raw):
        tiny_raw["timeline"][0]["events"][0]["sample"] = 10_000
        with pytest.raises(ConfigError):
            run_scenario(parse_config(tiny_raw), 0, tmp_path)
        manifest = json.loads((tmp_path / "MANIFEST.json").read_text())
        assert manifest["status"] == "failed" and manifest["failure_point"] == "timeline"
        assert "translator.json" in manifest["files"]

    def test_same_seed_same_bytes(self, tmp_path, tiny_raw):
        cfg = parse_config(tiny_raw)
        a, b = run_scenario(cfg, 1, tmp_path / "a"), run_scenario(cfg, 1, tmp_path / "b")
        for name in ("metrics.json", "trace.jsonl", "translator.json", "summary.csv"):
            assert (a / name).read_bytes() == (b / name).read_bytes()


class TestEvaluation:
    def test_broadcast_copies_match_runtime(self, tiny_raw):
        b = build(parse_config(tiny_raw), 0)
        t = b.translator
        latents = {m: b.latents[m][:5] for m in ("a", "c")}
        batched = broadcast_copies(t, latents, "b")
        for r in range(5):
            s = new_state(t.D, t.dims, connected={"a": True, "c": True})
            for m in ("a", "c"):
                s, _ = inject(s, m, latents[m][r])
            s, _ = broadcast(s, t)
            np.testing.assert_allclose(s.copies["b"], batched[r], rtol=0, atol=1e-12)

    @pytest.mark.parametrize("u", [0.0, 0.3, 0.5, 0.52, 0.7, 1.0])
    def test_ignition_oracle_matches_iteration(self, u):
        a = 0.0
        for _ in range(20000):
            a = 1.0 / (1.0 + np.exp(-(8.0 * a + 4.0 * u - 6.0)))
        assert ignition_oracle(u, 8.0, 4.0, 6.0) == pytest.approx(a, abs=1e-9)

    def test_ignition_sweep_small(self, tiny_raw):
        b = build(parse_config(tiny_raw), 0)
        res = eval_ignition_sweep(b, IgnitionParams(), grid=11, t_max=2000)
        assert not res["rows"][0]["ignited"] and res["rows"][-1]["ignited"]
        assert res["max_oracle_error"] < 1e-6

    def test_random_baseline_is_chance(self, tiny_raw):
        tiny_raw["evaluation"]["gallery"] = 100
        cfg = parse_config(tiny_raw)
        values = []
        for seed in range(5):
            table = eval_alignment(build(cfg, seed), 100)
            values += list(table["random"].values())
        assert abs(np.mean(values) - 0.01) <= 0.02

    def test_suite_runner_caches_builds(self, tiny_raw):
        runner = SuiteRunner(parse_config(tiny_raw))
        assert runner.built(0) is runner.built(0)
        res = runner.alignment()
        assert set(res["median"]["unsupervised"]) == {f"{i}->{j}" for i in "abc" for j in "abc" if i != j}
        assert res["seeds"] == [0]


class TestCli:
    def test_ok_run(self, tiny_config_path, tmp_path, capsys):
        assert cli.main(["run", "--config", str(tiny_config_path), "--out", str(tmp_path / "o")]) == 0
        assert (tmp_path / "o" / "metrics.json").exists()

    @pytest.mark.parametrize("command, stages_files", [
        ("gen-world", {"world.csv"}),
        ("train-modules", {"world.csv", "modules.json"}),
        ("train-glw", {"world.csv", "modules.json", "translator.json"}),
    ])
    def test_partial_commands(self, tiny_config_path, tmp_path, command, stages_files):
        assert cli.main([command, "--config", str(tiny_config_path), "--seed", "3", "--out", str(tmp_path)]) == 0
        names = {p.name for p in tmp_path.iterdir()}
        assert stages_files <= names
        assert "metrics.json" not in names

    def test_config_error_exit_code(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text('{"world": {}}')
        assert cli.main(["run", "--config", str(bad), "--out", str(tmp_path)]) == 2
        assert "error:" in capsys.readouterr().err

    def test_training_failure_exit_code(self, tmp_path, tiny_raw):
        tiny_raw["modules"]["c"].update(lr=1e6, epochs=3)
        path = tmp_path / "diverge.json"
        path.write_text(json.dumps(tiny_raw))
        with np.errstate(all="ignore"):
            code = cli.main(["train-modules", "--config", str(path), "--out", str(tmp_path / "o")])
        assert code == 3
        manifest = json.loads((tmp_path / "o" / "MANIFEST.json").read_text())
        assert manifest["failure_point"] == "modules"

    def test_evaluation_failure_exit_code(self, tiny_config_path, tmp_path, monkeypatch):
        def boom(self):
            raise EvaluationError("sweep exploded")

        monkeypatch.setattr(cli.SuiteRunner, "ignition", boom)
        code = cli.main(["eval", "--suite", "ignition", "--config", str(tiny_config_path), "--out", str(tmp_path)])
        assert code == 4
        assert json.loads((tmp_path / "MANIFEST.json").read_text())["status"] == "failed"

    def test_eval_ignition_outputs(self, tiny_config_path, tmp_path, capsys):
        code = cli.main(["eval", "--suite", "ignition", "--config", str(tiny_config_path), "--out", str(tmp_path)])
        assert code == 0
        rows = (tmp_path / "ignition.csv").read_text().splitlines()
        assert rows[0] == "seed,u,amplitude,oracle,ignited,steps" and len(rows) == 12
        assert "slope ratio" in capsys.readouterr().out
        assert "ignition" in json.loads((tmp_path / "eval_ignition.json").read_text())
