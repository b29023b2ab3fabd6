"""Command-line entry point: ``glw {gen-world,train-modules,train-glw,run,eval}``."""
from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

from glw.errors import ConfigError, EvaluationError, GlwError
from glw.harness.config import load_config
from glw.harness.evaluation import SuiteRunner
from glw.harness.pipeline import run_scenario, write_json, write_manifest

log = logging.getLogger("glw")

STAGES_FOR = {
    "gen-world": ("world",),
    "train-modules": ("world", "modules"),
    "train-glw": ("world", "modules", "translator"),
    "run": ("world", "modules", "translator", "timeline", "metrics"),
}
SUITES = ("alignment", "grounding", "ignition")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="glw", description="Global latent workspace experiments")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in (*STAGES_FOR, "eval"):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="scenario JSON file")
        p.add_argument("--seed", type=int, default=None, help="overrides the config seed")
        p.add_argument("--out", default=None, help="artifact directory (default: config output_dir)")
        if name == "eval":
            p.add_argument("--suite", choices=(*SUITES, "all"), default="all")
    return parser


def _write_rows(path: Path, header, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def run_eval(cfg, seeds, out: Path, suite: str) -> dict:
    runner = SuiteRunner(cfg, seeds)
    results = {}
    for name in SUITES if suite == "all" else (suite,):
        try:
            results[name] = getattr(runner, name)()
        except GlwError as err:
            if isinstance(err, ConfigError):
                raise
            raise EvaluationError(f"{name} suite failed: {err}") from err
    if "alignment" in results:
        a = results["alignment"]
        rows = [(s, regime, pair, repr(v)) for s, r in a["per_seed"].items()
                for regime, table in r.items() for pair, v in sorted(table.items())]
        _write_rows(out / "alignment.csv", ["seed", "method", "pair", "retrieval_at_1"], rows)
        for pair, v in sorted(a["median"]["unsupervised"].items()):
            print(f"alignment {pair}: unsupervised {v:.3f} supervised {a['median']['supervised'][pair]:.3f}")
    if "grounding" in results:
        g = results["grounding"]
        rows = [(s, r["noise_std"], repr(r["latent_only"]), repr(r["workspace"]), repr(r["control"]))
                for s, res in g["per_seed"].items() for r in res["levels"]]
        _write_rows(out / "grounding.csv", ["seed", "noise_std", "latent_only", "workspace", "control"], rows)
        for r in g["median"]:
            print(f"grounding noise {r['noise_std']}: latent-only {r['latent_only']:.3f} "
                  f"workspace {r['workspace']:.3f} control {r['control']:.3f}")
    if "ignition" in results:
        ig = results["ignition"]
        rows = [(s, repr(r["u"]), repr(r["amplitude"]), repr(r["oracle"]), int(r["ignited"]), r["steps"])
                for s, res in ig["per_seed"].items() for r in res["rows"]]
        _write_rows(out / "ignition.csv", ["seed", "u", "amplitude", "oracle", "ignited", "steps"], rows)
        for s, res in ig["per_seed"].items():
            print(f"ignition seed {s}: slope ratio {res['slope_ratio']:.1f}, "
                  f"max oracle error {res['max_oracle_error']:.2e}")
    write_json(out / f"eval_{suite}.json", results)
    return results


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    out = None
    try:
        cfg = load_config(args.config)
        out = Path(args.out or cfg.output_dir)
        if args.command == "eval":
            out.mkdir(parents=True, exist_ok=True)
            seeds = [args.seed] if args.seed is not None else cfg.evaluation.seeds
            try:
                run_eval(cfg, seeds, out, args.suite)
            except GlwError as err:
                write_manifest(out, "failed", f"eval:{args.suite}", str(err))
                raise
            write_manifest(out, "ok")
        else:
            run_scenario(cfg, args.seed, out, STAGES_FOR[args.command])
            print(f"artifacts written to {out}")
    except GlwError as err:
        print(f"error: {err}", file=sys.stderr)
        return err.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
