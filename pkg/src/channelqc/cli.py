"""Command-line entry points for campaigns, pipeline runs and evaluation.

Exit codes: 0 success, 1 runtime failure, 2 usage error, 3 configuration or
input validation error.
"""

from __future__ import annotations

import argparse
import json
import shutil
import sys
from pathlib import Path

from . import __version__
from . import scanner as sc
from .csvio import format_float, write_csv
from .dbscan import CylinderGeometry
from .diagnosis import FEATURE_NAMES, build_feature_vector, read_diagnoses, \
    write_diagnoses, write_features
from .features import extract_all, read_baseline, reference_baseline, write_baseline, \
    write_extracted
from .forest import forest_hash, load_forest, save_forest
from .fuzzy import DEFAULT_CONFIG_TEXT, parse_fuzzy_config
from .manifest import (
    ManifestError,
    RunManifest,
    content_hash,
    load_manifest,
    require_same_lineage,
    save_manifest,
)
from .metrics import DetectionOutcome, MetricInputError, build_evaluation_report
from .pipeline import bootstrap_forest, run_fdd, simulate_campaign
from .priority import read_priorities, write_priorities, write_ranking
from .rules import DEFAULT_RULES_TEXT, parse_rules

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2
EXIT_CONFIG = 3

SCANNER_CONFIG_FILE = "scanner_config.csv"
OBSERVABLES_FILE = "observables.csv"
LABELS_FILE = "labels.csv"
BASELINE_FILE = "baseline.csv"
EXTRACTED_FILE = "extracted.csv"
FEATURES_FILE = "features.csv"
DIAGNOSIS_FILE = "diagnosis.csv"
RANKING_FILE = "ranking.csv"
PRIORITIES_FILE = "priorities.csv"
MANIFEST_FILE = "manifest.json"
FOREST_FILE = "forest.json"
FUZZY_CONFIG_FILE = "fuzzy_priority.cfg"
RULES_FILE = "diagnosis_rules.txt"


class ConfigError(ValueError):
    """Missing or invalid configuration input."""


def _read_text(path: Path) -> str:
    if not path.exists():
        raise ConfigError(f"{path}: file not found")
    return path.read_text()


def _load_configs(config_dir: str | None):
    """Fuzzy + rule configs from --config-dir, or the built-in defaults."""
    if config_dir is None:
        fuzzy_text, rules_text = DEFAULT_CONFIG_TEXT, DEFAULT_RULES_TEXT
        fuzzy_src, rules_src = "<default>", "<default>"
    else:
        d = Path(config_dir)
        fuzzy_path = d / FUZZY_CONFIG_FILE
        rules_path = d / RULES_FILE
        fuzzy_text = _read_text(fuzzy_path)
        rules_text = _read_text(rules_path)
        fuzzy_src, rules_src = str(fuzzy_path), str(rules_path)
    fuzzy_cfg = parse_fuzzy_config(fuzzy_text, source=fuzzy_src)
    ruleset = parse_rules(rules_text, FEATURE_NAMES, source=rules_src)
    hashes = {"fuzzy": content_hash(fuzzy_text), "rules": content_hash(rules_text)}
    return fuzzy_cfg, ruleset, hashes


def _campaign_plan(args) -> sc.CampaignPlan:
    return sc.CampaignPlan(
        seed=args.seed,
        major_fault_count=args.major,
        per_level_per_type_count=args.per_level,
    )


def _cmd_simulate(args) -> int:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    plan = _campaign_plan(args)
    campaign = simulate_campaign(args.channels, args.rings, args.seed, plan)
    manifest = RunManifest(
        kind="simulate",
        seed=args.seed,
        scanner={"channels": args.channels, "rings": args.rings},
        campaign={"major": args.major, "per_level": args.per_level,
                  "level_magnitudes": list(plan.level_magnitudes),
                  "direction_split": plan.direction_split},
    )
    h = manifest.hash()
    sc.write_scanner_config(campaign.model, out / SCANNER_CONFIG_FILE, h)
    sc.write_observables(campaign.observables, out / OBSERVABLES_FILE, h)
    sc.write_labels(campaign.model, out / LABELS_FILE, h)
    write_baseline(reference_baseline(campaign.model), out / BASELINE_FILE, h)
    save_manifest(manifest, out / MANIFEST_FILE)
    print(f"simulated {args.channels} channels ({len(campaign.model.faults)} faulted) "
          f"-> {out} [manifest {h}]")
    return EXIT_OK


def _cmd_train(args) -> int:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    plan = _campaign_plan(args)
    forest, examples = bootstrap_forest(args.channels, args.rings, args.seed,
                                        plan=plan, n_trees=args.trees)
    manifest = RunManifest(
        kind="train",
        seed=args.seed,
        scanner={"channels": args.channels, "rings": args.rings},
        campaign={"major": args.major, "per_level": args.per_level},
        config={"forest": forest_hash(forest), "trees": args.trees},
    )
    save_forest(forest, out / FOREST_FILE, manifest.hash())
    if args.history:
        from .history import HistoryStore

        store = HistoryStore(args.history)
        for fv, cls, severity in examples:
            store.add_bootstrap_example(fv, cls, severity, timestamp=0)
        print(f"seeded {len(examples)} bootstrap examples into {args.history}")
    save_manifest(manifest, out / MANIFEST_FILE)
    n_faulty = sum(1 for _, cls, _ in examples if cls.value != "HEALTHY")
    print(f"trained {args.trees} trees on {len(examples)} examples "
          f"({n_faulty} faulted) -> {out / FOREST_FILE} [{forest_hash(forest)[:12]}]")
    return EXIT_OK


def _cmd_run(args) -> int:
    indir = Path(args.in_dir)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for name in (SCANNER_CONFIG_FILE, OBSERVABLES_FILE, BASELINE_FILE):
        if not (indir / name).exists():
            raise ConfigError(f"{indir / name}: input file not found")
    if not Path(args.forest).exists():
        raise ConfigError(f"{args.forest}: forest file not found")

    fuzzy_cfg, ruleset, config_hashes = _load_configs(args.config_dir)
    forest = load_forest(Path(args.forest))
    config_hashes["forest"] = forest_hash(forest)

    table = sc.read_scanner_config(indir / SCANNER_CONFIG_FILE)
    observables = sc.read_observables(indir / OBSERVABLES_FILE)
    baseline = read_baseline(indir / BASELINE_FILE)
    parent = table.manifest_hash

    params, indicators = extract_all(observables, baseline)
    features = {
        c: build_feature_vector(observables[c], params[c], indicators[c])
        for c in sorted(observables)
    }
    geometry = CylinderGeometry.from_config(table)
    result = run_fdd(features, geometry, forest, ruleset, fuzzy_cfg, args.threshold)

    manifest = RunManifest(
        kind="run",
        seed=args.seed,
        scanner={"channels": table.n_channels, "rings": int(table.axial_idx.max()) + 1},
        config=config_hashes,
        threshold=args.threshold,
        parent_hash=parent,
    )
    h = manifest.hash()
    write_extracted(params, indicators, out / EXTRACTED_FILE, h, parent)
    write_features(features, out / FEATURES_FILE, h, parent)
    write_diagnoses(result.diagnoses, result.detected, out / DIAGNOSIS_FILE, h, parent)
    write_ranking(result.ranking, out / RANKING_FILE, h, parent)
    write_priorities(result.priorities, out / PRIORITIES_FILE, h, parent)
    save_manifest(manifest, out / MANIFEST_FILE)
    # Keep the run directory self-contained for the review service.
    shutil.copyfile(indir / SCANNER_CONFIG_FILE, out / SCANNER_CONFIG_FILE)
    print(f"diagnosed {len(features)} channels, detected {len(result.detected)} faults "
          f"-> {out} [manifest {h}]")
    return EXIT_OK


def _campaign_seed_for(labels_path: Path, labels_hash: str | None) -> int | None:
    """Campaign seed from the manifest sitting next to the labels file, if it
    matches the labels' lineage."""
    manifest_path = labels_path.parent / MANIFEST_FILE
    if labels_hash is None or not manifest_path.exists():
        return None
    try:
        manifest, manifest_hash = load_manifest(manifest_path)
    except ManifestError:
        return None
    return manifest.seed if manifest_hash == labels_hash else None


def _cmd_eval(args) -> int:
    diag_path = Path(args.diagnosis)
    labels_path = Path(args.labels)
    for p in (diag_path, labels_path):
        if not p.exists():
            raise ConfigError(f"{p}: input file not found")
    diagnoses, diag_hash, diag_parent = read_diagnoses(diag_path)
    labels, labels_hash = sc.read_labels(labels_path)
    require_same_lineage(labels_hash, diag_parent, "eval")

    missing = sorted(set(labels) - set(diagnoses))
    if missing:
        listing = ", ".join(str(c) for c in missing[:20])
        more = "" if len(missing) <= 20 else f" (+{len(missing) - 20} more)"
        raise MetricInputError(
            f"labeled channels missing from the diagnosis export: {listing}{more}")

    priorities = None
    if args.priorities:
        ppath = Path(args.priorities)
        if not ppath.exists():
            raise ConfigError(f"{ppath}: priorities file not found")
        priorities = {c: r.priority for c, r in read_priorities(ppath).items()}

    outcomes = {
        c: DetectionOutcome(detected=row.detected, action=row.diagnosis_class,
                            severity=row.severity)
        for c, row in diagnoses.items()
    }
    report = build_evaluation_report(outcomes, labels, priorities,
                                     manifest_hash=diag_hash,
                                     campaign_seed=_campaign_seed_for(labels_path,
                                                                      labels_hash))
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    report_path = out / "report.json"
    with open(report_path, "w") as fh:
        json.dump(report.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    _write_report_tables(report.to_dict(), out, diag_hash)
    g = report.to_dict()["global"]
    sens = "undefined" if g.get("sensitivity") is None else f"{g['sensitivity']:.4f}"
    spec = "undefined" if g.get("specificity") is None else f"{g['specificity']:.4f}"
    print(f"evaluation: sensitivity {sens}, specificity {spec} -> {report_path}")
    return EXIT_OK


def _write_report_tables(report: dict, out: Path, manifest_hash: str | None) -> None:
    per_level = report["per_level"]
    rows = [[r["fault_type"], r["direction"], str(r["level"]), str(r["n"]),
             str(r["correct"]), format_float(r["sensitivity"]),
             format_float(r["ci_low"]), format_float(r["ci_high"])]
            for r in per_level]
    write_csv(out / "per_level.csv",
              ["fault_type", "direction", "level", "n", "correct", "sensitivity",
               "ci_low", "ci_high"], rows, manifest_hash)
    severity = report["severity"]
    rows = [[r["fault_type"], r["direction"], str(r["level"]),
             str(r["n_correct_diagnoses"]), str(r["n_exact_severity"]),
             format_float(r["sensitivity"]), format_float(r["ci_low"]),
             format_float(r["ci_high"])]
            for r in severity]
    write_csv(out / "severity.csv",
              ["fault_type", "direction", "level", "n_correct_diagnoses",
               "n_exact_severity", "sensitivity", "ci_low", "ci_high"], rows,
              manifest_hash)
    rows = [[b["fault_type"], str(b["level"]), str(b["n"]), format_float(b["q1"]),
             format_float(b["median"]), format_float(b["q3"]), format_float(b["iqr"]),
             format_float(b["whisker_low"]), format_float(b["whisker_high"]),
             " ".join(format_float(v) for v in b["outliers"])]
            for b in report["boxplots"]]
    write_csv(out / "boxplots.csv",
              ["fault_type", "level", "n", "q1", "median", "q3", "iqr",
               "whisker_low", "whisker_high", "outliers"], rows, manifest_hash)


def _cmd_retrain(args) -> int:
    from .diagnosis import train_diagnosis_forest
    from .history import HistoryStore

    if not Path(args.history).exists():
        raise ConfigError(f"{args.history}: history store not found")
    store = HistoryStore(args.history)
    view = store.training_view()
    if not view:
        raise ConfigError(f"{args.history}: no labeled examples to train on")
    forest = train_diagnosis_forest(view, n_trees=args.trees, seed=args.seed)
    save_forest(forest, args.out)
    print(f"retrained {args.trees} trees on {len(view)} labeled examples "
          f"-> {args.out} [{forest_hash(forest)[:12]}]")
    return EXIT_OK


def _cmd_serve(args) -> int:
    # Imported lazily: the service pulls in FastAPI, which the batch commands
    # do not need.
    from .service import build_app
    import uvicorn

    app = build_app(
        run_dir=args.run_dir,
        history_path=args.history,
        forest_path=args.forest,
        config_dir=args.config_dir,
        auto_retrain_every=args.auto_retrain,
    )
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="channelqc",
        description="Fault detection, prioritization and diagnosis for "
                    "many-channel detector systems.",
    )
    parser.add_argument("--version", action="version", version=f"channelqc {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, threshold=False):
        p.add_argument("--seed", type=int, default=0, help="run seed")
        p.add_argument("--out-dir", default="out", help="output directory")
        if threshold:
            p.add_argument("--threshold", type=float, default=0.70,
                           help="detection probability threshold")

    p = sub.add_parser("simulate", help="simulate a scanner and inject a fault campaign")
    p.add_argument("--channels", type=int, default=3072)
    p.add_argument("--rings", type=int, default=16)
    p.add_argument("--major", type=int, default=0, help="number of major (-50 V) faults")
    p.add_argument("--per-level", type=int, default=0,
                   help="severity faults per (level, fault type)")
    common(p)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("train", help="bootstrap-train the diagnosis forest from a "
                                     "seeded campaign")
    p.add_argument("--channels", type=int, default=3072)
    p.add_argument("--rings", type=int, default=16)
    p.add_argument("--major", type=int, default=200)
    p.add_argument("--per-level", type=int, default=60)
    p.add_argument("--trees", type=int, default=100)
    p.add_argument("--history", default=None,
                   help="also seed this history store with the labeled campaign")
    common(p)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("run", help="extract, diagnose and prioritize a simulated scanner")
    p.add_argument("--in-dir", required=True, help="directory with simulate outputs")
    p.add_argument("--forest", required=True, help="trained forest file")
    p.add_argument("--config-dir", default=None,
                   help="directory with fuzzy_priority.cfg and diagnosis_rules.txt "
                        "(defaults to built-in configs)")
    common(p, threshold=True)
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("eval", help="evaluate a run against ground-truth labels")
    p.add_argument("--diagnosis", required=True, help="diagnosis.csv from a run")
    p.add_argument("--labels", required=True, help="labels.csv from the simulation")
    p.add_argument("--priorities", default=None,
                   help="priorities.csv from the run (enables correlation/boxplots)")
    common(p)
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("retrain", help="retrain the forest from a labeled history store")
    p.add_argument("--history", required=True, help="history store path (JSON lines)")
    p.add_argument("--out", required=True, help="where to write the new forest")
    p.add_argument("--trees", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_retrain)

    p = sub.add_parser("serve", help="serve the operator review API")
    p.add_argument("--run-dir", required=True, help="directory with run outputs")
    p.add_argument("--history", required=True, help="history store path (JSON lines)")
    p.add_argument("--forest", required=True, help="forest file (used for retraining)")
    p.add_argument("--config-dir", default=None)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8765)
    p.add_argument("--auto-retrain", type=int, default=50,
                   help="retrain automatically every N new labels (0 disables)")
    p.set_defaults(func=_cmd_serve)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    # All validation errors (ConfigError, FuzzyConfigError, RuleConfigError,
    # ManifestError, MetricInputError, ...) derive from ValueError.
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_RUNTIME
    except Exception as e:  # pragma: no cover - last resort
        print(f"internal error: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
