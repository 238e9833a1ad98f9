"""Command-line interface for baselines, detector training, and campaigns.

Exit codes: 0 success, 2 configuration error, 3 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from .detection import (calibrate_threshold, evaluate_detector,
                        generate_training_data, train_adaboost, train_cart,
                        train_random_forest)
from .errors import (CalibrationError, ConfigurationError, ContractError,
                     GenomeDecodeError, MetricError, PlantInputError,
                     ScheduleError)
from .harness import (ExperimentConfig, PROBLEM_SPECS, compare_campaigns,
                      export_plots, load_campaign, run_baseline,
                      run_campaign, run_random_combined,
                      run_single_attack_sweep)
from .plant import PlantConfig, record_signal_ranges, simulate

CONFIG_ERRORS = (ConfigurationError, ContractError, GenomeDecodeError,
                 ScheduleError, PlantInputError, CalibrationError, MetricError)

DETECTOR_TRAINERS = {
    "cart": lambda data: train_cart(data, max_depth=50),
    "random_forest": lambda data: train_random_forest(data, n_trees=25),
    "adaboost": lambda data: train_adaboost(data, n_estimators=100),
}


def _plant_config(args) -> PlantConfig:
    kwargs = {}
    if getattr(args, "horizon", None) is not None:
        kwargs["horizon_hours"] = args.horizon
    if args.seed is not None:
        kwargs["seed"] = args.seed
    return PlantConfig(**kwargs)


def _cmd_baseline(args) -> int:
    config = _plant_config(args)
    summary = run_baseline(args.runs, config)
    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, "baseline.json")
    with open(path, "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
    print(f"baseline over {summary['n_runs']} runs: "
          f"mean cost {summary['cost_mean']:.1f}, max {summary['cost_max']:.1f}, "
          f"shutdowns {summary['shutdowns']}")
    print(f"wrote {path}")
    return 0


def _cmd_sweep(args) -> int:
    config = _plant_config(args)
    ranges = record_signal_ranges(args.ranges_runs, config)
    rows = run_single_attack_sweep(args.per_cell, config, ranges)
    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, "sweep.csv")
    import csv as _csv
    with open(path, "w", newline="") as fh:
        w = _csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
        w.writeheader()
        w.writerows(rows)
    tripped = sum(1 for r in rows if r["shutdowns"] > 0)
    print(f"swept {len(rows)} (channel, kind) cells; {tripped} cells caused shutdowns")
    print(f"wrote {path}")
    return 0


def _cmd_random_search(args) -> int:
    config = _plant_config(args)
    result = run_random_combined(args.sets, args.per_set, args.max_active,
                                 config, master_seed=args.seed or 0)
    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, "random_combined.json")
    with open(path, "w") as fh:
        json.dump(result, fh, indent=2, sort_keys=True)
    print(f"{result['unique_strategies']} unique strategies, "
          f"{result['shutdowns']} shutdowns, best {result['best_time']}")
    print(f"wrote {path}")
    return 0


def _cmd_train_detector(args) -> int:
    config = PlantConfig(horizon_hours=args.horizon, seed=args.seed or 0)
    ranges = record_signal_ranges(args.ranges_runs, config)
    data = generate_training_data(config, ranges, n_normal_runs=args.normal_runs,
                                  stride=args.stride, seed=(args.seed or 0) + 1000)
    train, test = data.split_by_runs(test_frac=0.3, seed=args.seed or 0)
    kinds = list(DETECTOR_TRAINERS) if args.kind == "all" else [args.kind]
    os.makedirs(args.out, exist_ok=True)
    for kind in kinds:
        model = DETECTOR_TRAINERS[kind](train)
        score = evaluate_detector(model, test)
        model = model.with_report(score)
        path = os.path.join(args.out, f"detector_{kind}.json")
        with open(path, "w") as fh:
            fh.write(model.to_json())
        print(f"{kind}: held-out F1 {score.f1:.4f}, FPR {score.fpr:.5f} -> {path}")
    return 0


def _cmd_calibrate(args) -> int:
    from .detection import DetectorModel
    with open(args.model) as fh:
        model = DetectorModel.from_json(fh.read())
    config = PlantConfig(horizon_hours=args.horizon, seed=args.seed or 0)
    traces = [simulate(None, config.with_seed((args.seed or 0) + 50_000 + i))
              for i in range(args.runs)]
    policy = calibrate_threshold(traces, model, percentile=args.percentile,
                                 window=args.window)
    os.makedirs(args.out, exist_ok=True)
    stem = os.path.splitext(os.path.basename(args.model))[0]
    path = os.path.join(args.out, f"policy_{stem.replace('detector_', '')}.json")
    with open(path, "w") as fh:
        fh.write(policy.to_json(detector=model.kind))
    print(f"calibrated {model.kind}: threshold {policy.threshold:.6f} "
          f"({policy.percentile}th pct of {policy.n_calibration_runs} runs)")
    print(f"wrote {path}")
    return 0


def _cmd_evolve(args) -> int:
    base = {}
    if args.config:
        with open(args.config) as fh:
            base = json.load(fh)
    cfg = ExperimentConfig.from_dict(base) if base else ExperimentConfig()
    evo_over = {}
    for name in ("mu", "ngens", "cxpb", "mutpb"):
        v = getattr(args, name)
        if v is not None:
            evo_over[name] = v
    if args.gene_mut_p is not None:
        evo_over["gene_mut_p"] = args.gene_mut_p
    from dataclasses import replace as _replace
    if evo_over:
        cfg = _replace(cfg, evolution=_replace(cfg.evolution, **evo_over))
    over = {}
    if args.problem:
        over["problem"] = args.problem
    if args.algorithm:
        over["algorithm"] = args.algorithm
    if args.replicates is not None:
        over["replicates"] = args.replicates
    if args.seed is not None:
        over["master_seed"] = args.seed
    if args.detector:
        over["detector_path"] = args.detector
    if args.policy:
        over["policy_path"] = args.policy
    if args.seed_file:
        over["seed_file"] = args.seed_file
        over["seed_count"] = args.seed_count
    if args.workers is not None:
        over["workers"] = args.workers
    over["output_dir"] = args.out
    if over:
        cfg = _replace(cfg, **over)
    if cfg.problem in PROBLEM_SPECS and evo_over == {} and not base:
        from .harness import PROBLEM_DEFAULTS
        cfg = _replace(cfg, evolution=_replace(
            cfg.evolution, **PROBLEM_DEFAULTS[cfg.problem]))
    records = run_campaign(cfg)
    ok = sum(1 for r in records if not r.failed)
    print(f"campaign {cfg.problem}/{cfg.algorithm}: {ok}/{len(records)} runs ok; "
          f"results in {cfg.output_dir}")
    for r in records:
        print(f"  run {r.run_id}: archive {len(r.members)}, "
              f"hv {r.metric_hv:.4g}, {r.wall_clock:.1f}s"
              + (f"  FAILED: {r.error}" if r.failed else ""))
    return 0 if ok == len(records) else 3


def _cmd_metrics(args) -> int:
    if args.compare:
        report = compare_campaigns(args.campaign, args.compare)
        text = json.dumps(report, indent=2, sort_keys=True)
        print(text)
        if args.out:
            os.makedirs(args.out, exist_ok=True)
            with open(os.path.join(args.out, "significance.json"), "w") as fh:
                fh.write(text)
        return 0
    _, records = load_campaign(args.campaign)
    for r in records:
        print(f"run {r.run_id} [{r.algorithm}] hv={r.metric_hv:.6g} "
              f"spread={r.metric_spread:.6g} igd={r.metric_igd:.6g}")
    return 0


def _cmd_export_plots(args) -> int:
    cfg, records = load_campaign(args.campaign)
    out = args.out or os.path.join(args.campaign, "plots")
    written = export_plots(records, out, n_obj=PROBLEM_SPECS[cfg.problem][1])
    print(f"wrote {len(written)} plot-data files to {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="plantattack",
        description="Evolve sensor/actuator attacks against the surrogate plant "
                    "and train the detectors they must evade.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON experiment config file")
    common.add_argument("--seed", type=int, default=None, help="master seed")
    common.add_argument("--out", default="out", help="output directory")
    common.add_argument("--workers", type=int, default=None,
                        help="parallel replicate workers")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("baseline", parents=[common],
                       help="attack-free cost statistics and signal ranges")
    p.add_argument("--runs", type=int, default=1000)
    p.add_argument("--horizon", type=float, default=None)
    p.set_defaults(fn=_cmd_baseline)

    p = sub.add_parser("sweep", parents=[common],
                       help="single-attack impact table over all channels")
    p.add_argument("--per-cell", type=int, default=500)
    p.add_argument("--ranges-runs", type=int, default=50)
    p.add_argument("--horizon", type=float, default=None)
    p.set_defaults(fn=_cmd_sweep)

    p = sub.add_parser("random-search", parents=[common],
                       help="random combined shutdown attacks")
    p.add_argument("--sets", type=int, default=10)
    p.add_argument("--per-set", type=int, default=50_000)
    p.add_argument("--max-active", type=int, default=7)
    p.add_argument("--horizon", type=float, default=None)
    p.set_defaults(fn=_cmd_random_search)

    p = sub.add_parser("train-detector", parents=[common],
                       help="train CART / random forest / AdaBoost detectors")
    p.add_argument("--kind", choices=["all", "cart", "random_forest", "adaboost"],
                   default="all")
    p.add_argument("--horizon", type=float, default=12.0,
                   help="training-run length in hours")
    p.add_argument("--stride", type=int, default=5)
    p.add_argument("--normal-runs", type=int, default=8)
    p.add_argument("--ranges-runs", type=int, default=50)
    p.set_defaults(fn=_cmd_train_detector)

    p = sub.add_parser("calibrate", parents=[common],
                       help="calibrate the sliding-window alarm threshold")
    p.add_argument("--model", required=True, help="trained detector json")
    p.add_argument("--runs", type=int, default=100)
    p.add_argument("--percentile", type=float, default=99.0)
    p.add_argument("--window", type=int, default=100)
    p.add_argument("--horizon", type=float, default=72.0)
    p.set_defaults(fn=_cmd_calibrate)

    p = sub.add_parser("evolve", parents=[common],
                       help="run an evolution (or random-search) campaign")
    p.add_argument("--problem", choices=list(PROBLEM_SPECS), default=None)
    p.add_argument("--algorithm", choices=["NSGA2", "SPEA2", "Random"], default=None)
    p.add_argument("--replicates", type=int, default=None)
    p.add_argument("--mu", type=int, default=None)
    p.add_argument("--ngens", type=int, default=None)
    p.add_argument("--cxpb", type=float, default=None)
    p.add_argument("--mutpb", type=float, default=None)
    p.add_argument("--gene-mut-p", type=float, default=None)
    p.add_argument("--detector", help="detector model json (evasion)")
    p.add_argument("--policy", help="alarm policy json (evasion)")
    p.add_argument("--seed-file", help="archive.jsonl to seed populations from")
    p.add_argument("--seed-count", type=int, default=10)
    p.set_defaults(fn=_cmd_evolve)

    p = sub.add_parser("metrics", parents=[common],
                       help="recompute or compare campaign metrics")
    p.add_argument("--campaign", required=True)
    p.add_argument("--compare", help="second campaign directory")
    p.set_defaults(fn=_cmd_metrics)

    p = sub.add_parser("export-plots", parents=[common],
                       help="emit plot-ready CSV files for a campaign")
    p.add_argument("--campaign", required=True)
    p.set_defaults(fn=_cmd_export_plots)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except CONFIG_ERRORS as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:   # noqa: BLE001 - CLI boundary
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
